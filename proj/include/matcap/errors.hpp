#pragma once

#include <stdexcept>
#include <string>

namespace matcap {

enum class ErrorCode {
    ShapeMismatch,
    NonConvergent,
    NotNormal,
    SingularCovariance,
    NotScalarLoss,
    Diverged,
    ConfigError,
};

class MatcapError : public std::runtime_error {
  public:
    MatcapError(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const { return code_; }

  private:
    ErrorCode code_;
};

[[noreturn]] inline void throw_error(ErrorCode code, const std::string& what) {
    throw MatcapError(code, what);
}

}  // namespace matcap
