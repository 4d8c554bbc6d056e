#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pws {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class ErrorCode {
  InvalidInput,
  InvalidParameter,
  NotFound,
  DegenerateSliding,
  NoSliding,
  NoEquilibrium,
  AmbiguousRoots,
  SingularSystem,
  Domain,
  UnsupportedGeometry,
  Precondition,
  StiffnessSuspected,
  StepFailure,
  NonGenericPoint,
};

const char* to_string(ErrorCode code);

// Single exception type for the library; callers dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline bool all_finite(const Vec& x) { return x.allFinite(); }

inline void require_finite(const Vec& x, const char* who) {
  if (!x.allFinite()) throw Error(ErrorCode::InvalidInput, std::string(who) + ": non-finite state");
}

}  // namespace pws
