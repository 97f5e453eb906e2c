#ifndef LICO_ERROR_HPP_
#define LICO_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace lico {

enum class ErrorKind {
  kInvalidInput,
  kInvalidRange,
  kShape,
  kConfig,
  kNotLinearizable,
  kCalibration,
  kIo,
  kParse,
  kBadMagic,
  kUnsupportedVersion,
  kTruncated,
  kSizeMismatch,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidInput: return "invalid input";
    case ErrorKind::kInvalidRange: return "invalid range";
    case ErrorKind::kShape: return "shape error";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kNotLinearizable: return "not linearizable";
    case ErrorKind::kCalibration: return "calibration error";
    case ErrorKind::kIo: return "i/o error";
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kBadMagic: return "bad magic";
    case ErrorKind::kUnsupportedVersion: return "unsupported version";
    case ErrorKind::kTruncated: return "truncated";
    case ErrorKind::kSizeMismatch: return "size mismatch";
  }
  return "error";
}

/// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace lico

#endif  // LICO_ERROR_HPP_
