#include "pws/model.hpp"

#include <algorithm>
#include <cmath>

namespace pws {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "invalid input";
    case ErrorCode::InvalidParameter: return "invalid parameter";
    case ErrorCode::NotFound: return "not found";
    case ErrorCode::DegenerateSliding: return "degenerate sliding";
    case ErrorCode::NoSliding: return "no sliding";
    case ErrorCode::NoEquilibrium: return "no equilibrium";
    case ErrorCode::AmbiguousRoots: return "ambiguous roots";
    case ErrorCode::SingularSystem: return "singular system";
    case ErrorCode::Domain: return "domain error";
    case ErrorCode::UnsupportedGeometry: return "unsupported geometry";
    case ErrorCode::Precondition: return "precondition violated";
    case ErrorCode::StiffnessSuspected: return "stiffness suspected";
    case ErrorCode::StepFailure: return "step failure";
    case ErrorCode::NonGenericPoint: return "non-generic point";
  }
  return "error";
}

const char* to_string(Region r) {
  switch (r) {
    case Region::R1: return "R1";
    case Region::R2: return "R2";
    case Region::R3: return "R3";
    case Region::R4: return "R4";
    case Region::OnSigma1: return "OnSigma1";
    case Region::OnSigma2: return "OnSigma2";
    case Region::OnSigma: return "OnSigma";
  }
  return "?";
}

const char* to_string(HalfSurface s) {
  switch (s) {
    case HalfSurface::Sigma1Minus: return "Sigma1-";
    case HalfSurface::Sigma1Plus: return "Sigma1+";
    case HalfSurface::Sigma2Minus: return "Sigma2-";
    case HalfSurface::Sigma2Plus: return "Sigma2+";
  }
  return "?";
}

std::optional<HalfSurface> half_surface_from_string(std::string_view s) {
  for (HalfSurface h : {HalfSurface::Sigma1Minus, HalfSurface::Sigma1Plus, HalfSurface::Sigma2Minus,
                        HalfSurface::Sigma2Plus}) {
    if (s == to_string(h)) return h;
  }
  return std::nullopt;
}

std::optional<Region> region_from_string(std::string_view s) {
  for (Region r : {Region::R1, Region::R2, Region::R3, Region::R4, Region::OnSigma1, Region::OnSigma2,
                   Region::OnSigma}) {
    if (s == to_string(r)) return r;
  }
  return std::nullopt;
}

int region_index(Region r) {
  switch (r) {
    case Region::R1: return 0;
    case Region::R2: return 1;
    case Region::R3: return 2;
    case Region::R4: return 3;
    default: return -1;
  }
}

Region region_from_index(int j) {
  static constexpr Region table[] = {Region::R1, Region::R2, Region::R3, Region::R4};
  if (j < 0 || j > 3) throw Error(ErrorCode::InvalidInput, "region index out of range");
  return table[j];
}

bool is_open_region(Region r) { return region_index(r) >= 0; }

int region_side(int region, int surface) {
  // R1 (-,-), R2 (-,+), R3 (+,-), R4 (+,+)
  static constexpr int sides[4][2] = {{-1, -1}, {-1, +1}, {+1, -1}, {+1, +1}};
  return sides[region][surface];
}

Vec PwsSystem::field(int j, const Vec& x) const {
  Vec out(dim);
  fields[static_cast<size_t>(j)](x, out);
  return out;
}

Vec PwsSystem::grad_h(int i, const Vec& x) const {
  const auto& g = gradients[static_cast<size_t>(i)];
  if (g) {
    Vec out(dim);
    g(x, out);
    return out;
  }
  return finite_difference_gradient(surfaces[static_cast<size_t>(i)], x);
}

Vec finite_difference_gradient(const SurfaceFn& h, const Vec& x) {
  const double step = 1e-6 * std::max(1.0, x.norm());
  Vec grad(x.size());
  Vec probe = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    probe[k] = x[k] + step;
    const double up = h(probe);
    probe[k] = x[k] - step;
    const double down = h(probe);
    probe[k] = x[k];
    grad[k] = (up - down) / (2.0 * step);
  }
  return grad;
}

Region classify_region(const PwsSystem& sys, const Vec& x, double tol) {
  require_finite(x, "classify_region");
  const double h1 = sys.h(0, x);
  const double h2 = sys.h(1, x);
  const bool on1 = std::abs(h1) <= tol;
  const bool on2 = std::abs(h2) <= tol;
  if (on1 && on2) return Region::OnSigma;
  if (on1) return Region::OnSigma1;
  if (on2) return Region::OnSigma2;
  if (h1 < 0) return h2 < 0 ? Region::R1 : Region::R2;
  return h2 < 0 ? Region::R3 : Region::R4;
}

ProjectionTable projections(const PwsSystem& sys, const Vec& x) {
  require_finite(x, "projections");
  ProjectionTable table;
  table.point = x;
  const Vec g1 = sys.grad_h(0, x);
  const Vec g2 = sys.grad_h(1, x);
  Vec f(sys.dim);
  for (int j = 0; j < 4; ++j) {
    sys.field_into(j, x, f);
    table.w(0, j) = g1.dot(f);
    table.w(1, j) = g2.dot(f);
  }
  if (!table.w.allFinite()) throw Error(ErrorCode::InvalidInput, "projections: non-finite field values");
  return table;
}

ProjectionTable make_table(const Eigen::Matrix<double, 2, 4>& w) {
  ProjectionTable t;
  t.w = w;
  return t;
}

double min_gram_determinant(const PwsSystem& sys, const std::vector<Vec>& samples) {
  double worst = std::numeric_limits<double>::infinity();
  for (const Vec& x : samples) {
    const Vec a = sys.grad_h(0, x);
    const Vec b = sys.grad_h(1, x);
    const double det = a.squaredNorm() * b.squaredNorm() - a.dot(b) * a.dot(b);
    worst = std::min(worst, det);
  }
  return worst;
}

void check_transversality(const PwsSystem& sys, const std::vector<Vec>& samples) {
  if (min_gram_determinant(sys, samples) <= 1e-10) {
    throw Error(ErrorCode::InvalidInput, sys.name + ": surface gradients are not transversal");
  }
}

}  // namespace pws
