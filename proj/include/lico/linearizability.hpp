#ifndef LICO_LINEARIZABILITY_HPP_
#define LICO_LINEARIZABILITY_HPP_

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "lico/model.hpp"

namespace lico {

struct Violation {
  std::string layer;
  std::string reason;
};

struct LinearizabilityReport {
  bool compliant = true;
  std::vector<Violation> violations;

  std::string to_string() const {
    if (compliant) return "compliant";
    std::string s = "not linearizable:";
    for (const auto& v : violations) s += "\n  " + v.layer + ": " + v.reason;
    return s;
  }
};

/// A streaming net becomes a chain of linear layers when the first layer's
/// stride equals the chunk size and every later layer has stride 1.
inline LinearizabilityReport check_linearizable(const LayerGraph& g, std::size_t chunk_size) {
  LinearizabilityReport report;
  if (g.stages.empty()) {
    report.violations.push_back({"network", "no layers"});
  } else {
    const Stage& first = g.stages.front();
    if (first.conv.stride != chunk_size)
      report.violations.push_back({first.name, "first layer stride " + std::to_string(first.conv.stride) +
                                                   " != chunk size " + std::to_string(chunk_size)});
    for (std::size_t l = 1; l < g.stages.size(); ++l) {
      const Stage& st = g.stages[l];
      if (st.conv.stride != 1)
        report.violations.push_back({st.name, "stride " + std::to_string(st.conv.stride) + " != 1"});
    }
  }
  report.compliant = report.violations.empty();
  return report;
}

inline LinearizabilityReport check_linearizable(const LiCoNet& net, std::size_t chunk_size) {
  return check_linearizable(to_graph(net), chunk_size);
}

class NotLinearizable : public Error {
 public:
  explicit NotLinearizable(LinearizabilityReport report)
      : Error(ErrorKind::kNotLinearizable, report.to_string()), report_(std::move(report)) {}

  const LinearizabilityReport& report() const noexcept { return report_; }

 private:
  LinearizabilityReport report_;
};

}  // namespace lico

#endif  // LICO_LINEARIZABILITY_HPP_
