#pragma once

#include "pws/model.hpp"

#include <optional>
#include <vector>

namespace pws {

/// Projection matrix alias; column j holds (w^1_j, w^2_j).
using WMatrix = Eigen::Matrix<double, 2, 4>;

struct Codim1Sliding {
  double alpha = 0.0;
  Vec field;
};

/// Filippov sliding on a single surface between fa (h < 0 side) and fb (h > 0 side).
Codim1Sliding codim1_sliding(const Vec& fa, const Vec& fb, const Vec& grad_h);

/// Weights of the tensor-product combination:
/// ((1-a)(1-b), (1-a)b, a(1-b), ab).
Eigen::Vector4d bilinear_lambdas(double alpha, double beta);

/// g(a, b) = W * lambda(a, b) and its 2x2 Jacobian in (a, b).
Eigen::Vector2d bilinear_g(const WMatrix& w, double alpha, double beta);
Eigen::Matrix2d bilinear_g_jacobian(const WMatrix& w, double alpha, double beta);

struct SlidingSelection {
  Eigen::Vector4d lambdas = Eigen::Vector4d::Zero();
  std::optional<std::pair<double, double>> alpha_beta;
  Vec field;              ///< empty when only W was supplied
  double residual = 0.0;  ///< max |normal component| (of W lambda when field is empty)
  bool admissible = true; ///< false when some lambda < -1e-12
};

struct BilinearRoot {
  double alpha = 0.0;
  double beta = 0.0;
};

/// Every distinct root of g = 0 in [0,1]^2 reached by Newton from (1/2,1/2) and a 17x17 grid.
std::vector<BilinearRoot> bilinear_roots(const WMatrix& w);

/// The bilinear sliding coefficients. Interior roots take precedence over boundary ones.
/// Throws NoEquilibrium when no root exists and AmbiguousRoots (message lists them) when
/// more than one candidate remains.
BilinearRoot bilinear_coeffs(const ProjectionTable& w);

/// Moments selector: solves the 4x4 system of both projection rows, the sum row and the
/// (d1, -d2, -d3, d4) row, d_i = |column i|.
SlidingSelection moments_coeffs(const ProjectionTable& w);

/// Selections with the resulting vector field evaluated at x.
SlidingSelection bilinear_selection(const PwsSystem& sys, const Vec& x);
SlidingSelection moments_selection(const PwsSystem& sys, const Vec& x);

enum class AttractivityKind { NodallyAttractive, AttractiveUponSliding, SpirallyAttractive, NotAttractive };
const char* to_string(AttractivityKind k);

struct AttractivityClass {
  AttractivityKind kind = AttractivityKind::NotAttractive;
  std::vector<HalfSurface> surfaces;  ///< half-surfaces with attractive sliding toward Sigma
  /// +1 for the crossing cycle R1 -> R3 -> R4 -> R2 (counterclockwise in the (h1,h2) plane),
  /// -1 for the reverse, 0 when the pattern is not rotational.
  int orientation = 0;
  std::optional<double> spiral_ratio;
  bool non_generic = false;  ///< some w^i_j is exactly zero
};

/// Attractive sliding toward Sigma on one half-surface; fills the codim-1 weight when true.
bool attractive_sliding(const WMatrix& w, HalfSurface s, double* alpha = nullptr);

/// Normal component (relative to the other surface) of the codim-1 sliding combination on s.
double sliding_normal_component(const WMatrix& w, HalfSurface s);

/// Crossing orientation of W (see AttractivityClass::orientation).
int rotation_orientation(const WMatrix& w);

/// w^2_1 w^1_3 w^2_4 w^1_2 / (w^1_1 w^2_3 w^1_4 w^2_2).
double spiral_ratio(const WMatrix& w);

AttractivityClass classify_attractivity(const ProjectionTable& w);

enum class ExitClassKind { None, TangentialExit, NonTangentialExit, SpiralExit };
const char* to_string(ExitClassKind k);

struct ExitClassification {
  ExitClassKind kind = ExitClassKind::None;
  HalfSurface surface = HalfSurface::Sigma1Minus;  ///< for TangentialExit
  Region region = Region::R1;                      ///< for NonTangentialExit
  bool first_order = false;
  double derivative = 0.0;  ///< directional derivative of the defining scalar
};
std::string describe(const ExitClassification& c);

/// Classifies x (on Sigma within 1e-9) as a potential exit point. The probe is either a full
/// state-space direction or a direction in the slow components x3..xn only.
/// Throws NonGenericPoint listing the candidates when more than one condition holds.
ExitClassification detect_potential_exit(const PwsSystem& sys, const Vec& x_on_sigma, const Vec& direction_probe);

}  // namespace pws
