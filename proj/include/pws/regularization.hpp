#pragma once

#include "pws/filippov.hpp"
#include "pws/integrate.hpp"

#include <complex>

namespace pws {

enum class Interpolant { C1Cubic, C0Linear };
const char* to_string(Interpolant i);

struct RegularizationParams {
  double eps_alpha = 1e-4;
  double eps_beta = 1e-4;
  Interpolant interpolant = Interpolant::C1Cubic;

  double eta() const { return eps_beta / eps_alpha; }
  void validate() const;
};

/// 1/2 + (u/4 eps)(3 - (u/eps)^2), clamped to 0 / 1 outside [-eps, eps].
double interp_c1(double u, double eps);
double interp_c1_deriv(double u, double eps);
/// (u + eps) / (2 eps), clamped to [0, 1].
double interp_c0(double u, double eps);
double interp_c0_deriv(double u, double eps);

/// Bilinear blend of the four fields with alpha = interp(x1, eps_alpha), beta = interp(x2, eps_beta).
Vec regularized_field(const PwsSystem& sys, const RegularizationParams& params, const Vec& x);
/// Jacobian of the blend: interpolant derivatives exactly, regional Jacobians by differences.
Mat regularized_jacobian(const PwsSystem& sys, const RegularizationParams& params, const Vec& x);
/// Closures for the adaptive solvers; they keep a reference to sys.
SmoothField regularized_evaluator(const PwsSystem& sys, const RegularizationParams& params);
JacobianFn regularized_jacobian_evaluator(const PwsSystem& sys, const RegularizationParams& params);

/// Index of the first sample after the last one inside the box |x1| <= eps_alpha,
/// |x2| <= eps_beta; nullopt when the box is never entered or is occupied at the end.
std::optional<std::size_t> box_exit_index(const Trajectory& traj, const RegularizationParams& params);

/// z in [-1, 1] with interp_c1(eps z, eps) = a.
double invert_alpha(double a);
/// 1 - z(gamma)^2, the factor multiplying the fast field.
double boundary_factor(double gamma);

struct FastPoint {
  double alpha = 0.5;
  double beta = 0.5;
};

/// Fast system on Q; the C0 interpolant gives the dummy system.
Eigen::Vector2d fast_field(const ProjectionTable& w, const FastPoint& p, const RegularizationParams& params);
Eigen::Vector2d dummy_field(const ProjectionTable& w, const FastPoint& p, double eta);

/// Interior equilibrium of the fast system (same zero set as bilinear_coeffs).
FastPoint fast_equilibrium(const ProjectionTable& w);

enum class StabilityClass { StableNode, StableFocus, UnstableNode, UnstableFocus, Saddle, Marginal };
const char* to_string(StabilityClass c);

struct StabilityReport {
  FastPoint equilibrium;
  Eigen::Matrix2d jacobian = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d jtilde = Eigen::Matrix2d::Zero();
  std::array<std::complex<double>, 2> eigenvalues{};
  StabilityClass classification = StabilityClass::Marginal;
};

/// diag(F(alpha), F(beta)/eta) * Jtilde, or diag(1, 1/eta) * Jtilde for the C0 interpolant.
Eigen::Matrix2d fast_jacobian_matrix(const WMatrix& w, const FastPoint& p, const RegularizationParams& params);
/// Stability of an equilibrium; throws Precondition when p is not one (residual > 1e-10).
StabilityReport fast_jacobian(const ProjectionTable& w, const FastPoint& p, const RegularizationParams& params);
StabilityReport stability_of(const Eigen::Matrix2d& jac);

struct BoundaryEquilibrium {
  FastPoint point;
  std::string label;
};

/// The four vertices plus, for each edge whose field pair has opposite normal projections,
/// the codim-1 sliding point on that edge.
std::vector<BoundaryEquilibrium> boundary_equilibria(const ProjectionTable& w);

enum class BifurcationKind { Hopf, SaddleNode, BoundaryCollision };
const char* to_string(BifurcationKind k);

struct BifurcationReport {
  BifurcationKind kind = BifurcationKind::Hopf;
  double slow_value = 0.0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  std::array<std::complex<double>, 2> eigen_before{};
  std::array<std::complex<double>, 2> eigen_after{};
  FastPoint equilibrium;  ///< at the low end of the bracket
  std::string label;      ///< edge for boundary collisions
};

/// State on Sigma as a function of the scan parameter.
using SlowPath = std::function<Vec(double)>;

/// Default path for a preset: x3 = s for the 3-dimensional ones, (x3, x4) = (0, sqrt(s))
/// for the tangential preset (s is the radius squared).
SlowPath preset_slow_path(const std::string& preset);

/// Natural-parameter continuation of the interior equilibrium from s_min to s_max.
/// Stops after a saddle-node or a boundary collision.
std::vector<BifurcationReport> scan_bifurcation(const PwsSystem& sys, const RegularizationParams& params,
                                                const SlowPath& path, double s_min, double s_max, double tol);

}  // namespace pws
