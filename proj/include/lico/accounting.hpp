#ifndef LICO_ACCOUNTING_HPP_
#define LICO_ACCOUNTING_HPP_

#include <cstddef>
#include <cstdint>

#include "lico/linearizability.hpp"
#include "lico/linearizer.hpp"
#include "lico/model.hpp"
#include "lico/quant.hpp"

namespace lico {

inline std::uint64_t count_params(const LayerGraph& g) {
  std::uint64_t n = 0;
  for (const auto& st : g.stages) n += st.conv.param_count();
  return n;
}

inline std::uint64_t bias_count(const LayerGraph& g) {
  std::uint64_t n = 0;
  for (const auto& st : g.stages) n += st.conv.bias.size();
  return n;
}

/// Multiply-accumulates for one inference step of the linearized net. Each
/// layer emits one column per step, so a layer costs D * C * K.
inline std::uint64_t count_macs_per_step(const LayerGraph& g) {
  const auto report = check_linearizable(g, g.stages.empty() ? 1 : g.stages.front().conv.stride);
  if (!report.compliant) throw NotLinearizable(report);
  std::uint64_t n = 0;
  for (const auto& st : g.stages) n += st.conv.weight_count();
  return n;
}

inline std::uint64_t count_params(const LiCoNet& net) { return count_params(to_graph(net)); }
inline std::uint64_t count_params(const MlpNet& net) { return count_params(to_graph(net)); }
inline std::uint64_t bias_count(const LiCoNet& net) { return bias_count(to_graph(net)); }
inline std::uint64_t bias_count(const MlpNet& net) { return bias_count(to_graph(net)); }
inline std::uint64_t count_macs_per_step(const LiCoNet& net) { return count_macs_per_step(to_graph(net)); }
inline std::uint64_t count_macs_per_step(const MlpNet& net) { return count_macs_per_step(to_graph(net)); }

// Linear forms: weights [in][out], one GEMV per stage per step.

inline std::uint64_t count_params(const LinearizedNet& n) {
  std::uint64_t p = 0;
  for (const auto& st : n.stages) p += st.linear.weights.size() + st.linear.bias.size();
  return p;
}

inline std::uint64_t count_macs_per_step(const LinearizedNet& n) {
  std::uint64_t m = 0;
  for (const auto& st : n.stages) m += st.linear.in_dim * st.linear.out_dim;
  return m;
}

inline std::uint64_t count_params(const QuantizedNet& n) {
  std::uint64_t p = 0;
  for (const auto& st : n.stages) p += st.layer.weights.size() + st.layer.bias.size();
  return p;
}

inline std::uint64_t count_macs_per_step(const QuantizedNet& n) {
  std::uint64_t m = 0;
  for (const auto& st : n.stages) m += st.layer.in_dim * st.layer.out_dim;
  return m;
}

}  // namespace lico

#endif  // LICO_ACCOUNTING_HPP_
