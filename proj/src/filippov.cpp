#include "pws/filippov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace pws {

Codim1Sliding codim1_sliding(const Vec& fa, const Vec& fb, const Vec& grad_h) {
  if (fa.size() != fb.size() || fa.size() != grad_h.size())
    throw Error(ErrorCode::InvalidInput, "codim1_sliding: dimension mismatch");
  const double pa = grad_h.dot(fa);
  const double pb = grad_h.dot(fb);
  if (!std::isfinite(pa) || !std::isfinite(pb)) throw Error(ErrorCode::InvalidInput, "codim1_sliding: non-finite input");
  if (pa - pb == 0.0) throw Error(ErrorCode::DegenerateSliding, "codim1_sliding: grad_h^T (fa - fb) = 0");
  if (pa * pb > 0.0) throw Error(ErrorCode::NoSliding, "codim1_sliding: both fields cross the surface");
  Codim1Sliding out;
  out.alpha = pa / (pa - pb);
  out.field = (1.0 - out.alpha) * fa + out.alpha * fb;
  return out;
}

Eigen::Vector4d bilinear_lambdas(double a, double b) {
  return {(1 - a) * (1 - b), (1 - a) * b, a * (1 - b), a * b};
}

Eigen::Vector2d bilinear_g(const WMatrix& w, double a, double b) { return w * bilinear_lambdas(a, b); }

Eigen::Matrix2d bilinear_g_jacobian(const WMatrix& w, double a, double b) {
  Eigen::Matrix2d j;
  j.col(0) = w * Eigen::Vector4d(-(1 - b), -b, 1 - b, b);
  j.col(1) = w * Eigen::Vector4d(-(1 - a), 1 - a, -a, a);
  return j;
}

namespace {

double clip01(double v) { return std::clamp(v, 0.0, 1.0); }

// Damped Newton restricted to the unit square.
std::optional<BilinearRoot> newton_root(const WMatrix& w, double a, double b, double tol) {
  Eigen::Vector2d g = bilinear_g(w, a, b);
  double gn = g.lpNorm<Eigen::Infinity>();
  for (int it = 0; it < 100 && gn > tol * 1e-3; ++it) {
    const Eigen::Matrix2d j = bilinear_g_jacobian(w, a, b);
    const double det = j.determinant();
    if (!(std::abs(det) > 1e-300)) break;
    const Eigen::Vector2d d = -j.inverse() * g;
    double t = 1.0;
    bool moved = false;
    while (t > 1e-6) {
      const double na = clip01(a + t * d[0]);
      const double nb = clip01(b + t * d[1]);
      const Eigen::Vector2d ng = bilinear_g(w, na, nb);
      const double nn = ng.lpNorm<Eigen::Infinity>();
      if (nn < gn) {
        moved = std::abs(na - a) + std::abs(nb - b) > 0.0;
        a = na;
        b = nb;
        g = ng;
        gn = nn;
        break;
      }
      t *= 0.5;
    }
    if (!moved) break;
  }
  if (gn < tol) return BilinearRoot{a, b};
  return std::nullopt;
}

bool interior(const BilinearRoot& r) {
  constexpr double margin = 1e-9;
  return r.alpha > margin && r.alpha < 1 - margin && r.beta > margin && r.beta < 1 - margin;
}

std::string list_roots(const std::vector<BilinearRoot>& roots) {
  std::ostringstream os;
  os.precision(10);
  for (std::size_t k = 0; k < roots.size(); ++k) {
    if (k) os << ", ";
    os << "(" << roots[k].alpha << ", " << roots[k].beta << ")";
  }
  return os.str();
}

struct HalfData {
  int surface;  // surface slid on
  int a, b;     // fields on the h_surface < 0 and > 0 sides
  int other;
  int toward;   // sign of the other-normal component pointing toward Sigma
};

HalfData half_data(HalfSurface s) {
  switch (s) {
    case HalfSurface::Sigma1Minus: return {0, 0, 2, 1, +1};
    case HalfSurface::Sigma1Plus: return {0, 1, 3, 1, -1};
    case HalfSurface::Sigma2Minus: return {1, 0, 1, 0, +1};
    case HalfSurface::Sigma2Plus: return {1, 2, 3, 0, -1};
  }
  return {0, 0, 2, 1, +1};
}

constexpr HalfSurface kHalves[] = {HalfSurface::Sigma1Minus, HalfSurface::Sigma1Plus, HalfSurface::Sigma2Minus,
                                   HalfSurface::Sigma2Plus};

Vec combine(const PwsSystem& sys, const Vec& x, const Eigen::Vector4d& lambdas) {
  Vec out = Vec::Zero(sys.dim);
  Vec f(sys.dim);
  for (int j = 0; j < 4; ++j) {
    sys.field_into(j, x, f);
    out += lambdas[j] * f;
  }
  return out;
}

double normal_residual(const PwsSystem& sys, const Vec& x, const Vec& field) {
  return std::max(std::abs(sys.grad_h(0, x).dot(field)), std::abs(sys.grad_h(1, x).dot(field)));
}

}  // namespace

std::vector<BilinearRoot> bilinear_roots(const WMatrix& w) {
  if (!w.allFinite()) throw Error(ErrorCode::InvalidInput, "bilinear_roots: non-finite W");
  const double tol = 1e-12 * std::max(1.0, w.cwiseAbs().maxCoeff());
  std::vector<BilinearRoot> roots;
  auto add = [&](const std::optional<BilinearRoot>& r) {
    if (!r) return;
    for (const auto& q : roots) {
      if (std::abs(q.alpha - r->alpha) < 1e-6 && std::abs(q.beta - r->beta) < 1e-6) return;
    }
    roots.push_back(*r);
  };
  add(newton_root(w, 0.5, 0.5, tol));
  constexpr int grid = 17;
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) {
      add(newton_root(w, i / double(grid - 1), j / double(grid - 1), tol));
    }
  }
  return roots;
}

BilinearRoot bilinear_coeffs(const ProjectionTable& w) {
  const auto roots = bilinear_roots(w.w);
  if (roots.empty()) throw Error(ErrorCode::NoEquilibrium, "bilinear_coeffs: no root in [0,1]^2");
  std::vector<BilinearRoot> inner;
  for (const auto& r : roots)
    if (interior(r)) inner.push_back(r);
  if (inner.size() == 1) return inner.front();
  if (inner.size() > 1) throw Error(ErrorCode::AmbiguousRoots, "bilinear_coeffs: interior roots " + list_roots(inner));
  if (roots.size() == 1) return roots.front();
  throw Error(ErrorCode::AmbiguousRoots, "bilinear_coeffs: boundary roots " + list_roots(roots));
}

SlidingSelection moments_coeffs(const ProjectionTable& w) {
  if (!w.w.allFinite()) throw Error(ErrorCode::InvalidInput, "moments_coeffs: non-finite W");
  Eigen::Matrix4d a;
  a.row(0) = w.w.row(0);
  a.row(1) = w.w.row(1);
  a.row(2).setOnes();
  for (int j = 0; j < 4; ++j) {
    const double d = w.w.col(j).norm();
    a(3, j) = (j == 0 || j == 3) ? d : -d;
  }
  const Eigen::JacobiSVD<Eigen::Matrix4d> svd(a);
  const auto& s = svd.singularValues();
  const double cond = s[3] > 0.0 ? s[0] / s[3] : std::numeric_limits<double>::infinity();
  if (!(cond <= 1e14)) throw Error(ErrorCode::SingularSystem, "moments_coeffs: condition estimate exceeds 1e14");
  const Eigen::Vector4d rhs(0, 0, 1, 0);
  Eigen::Vector4d lambda = a.fullPivLu().solve(rhs);
  // one step of refinement
  lambda += a.fullPivLu().solve(rhs - a * lambda);

  SlidingSelection sel;
  sel.lambdas = lambda;
  sel.residual = (w.w * lambda).lpNorm<Eigen::Infinity>();
  sel.admissible = lambda.minCoeff() >= -1e-12;
  return sel;
}

SlidingSelection bilinear_selection(const PwsSystem& sys, const Vec& x) {
  const BilinearRoot r = bilinear_coeffs(projections(sys, x));
  SlidingSelection sel;
  sel.lambdas = bilinear_lambdas(r.alpha, r.beta);
  sel.alpha_beta = std::make_pair(r.alpha, r.beta);
  sel.field = combine(sys, x, sel.lambdas);
  sel.residual = normal_residual(sys, x, sel.field);
  return sel;
}

SlidingSelection moments_selection(const PwsSystem& sys, const Vec& x) {
  SlidingSelection sel = moments_coeffs(projections(sys, x));
  sel.field = combine(sys, x, sel.lambdas);
  sel.residual = normal_residual(sys, x, sel.field);
  return sel;
}

const char* to_string(AttractivityKind k) {
  switch (k) {
    case AttractivityKind::NodallyAttractive: return "NodallyAttractive";
    case AttractivityKind::AttractiveUponSliding: return "AttractiveUponSliding";
    case AttractivityKind::SpirallyAttractive: return "SpirallyAttractive";
    case AttractivityKind::NotAttractive: return "NotAttractive";
  }
  return "?";
}

bool attractive_sliding(const WMatrix& w, HalfSurface s, double* alpha) {
  const HalfData h = half_data(s);
  const double pa = w(h.surface, h.a);
  const double pb = w(h.surface, h.b);
  if (!(pa > 0.0 && pb < 0.0)) return false;
  const double al = pa / (pa - pb);
  const double comp = (1 - al) * w(h.other, h.a) + al * w(h.other, h.b);
  if (alpha) *alpha = al;
  return h.toward * comp > 0.0;
}

double sliding_normal_component(const WMatrix& w, HalfSurface s) {
  const HalfData h = half_data(s);
  const double pa = w(h.surface, h.a);
  const double pb = w(h.surface, h.b);
  if (pa - pb == 0.0) return std::numeric_limits<double>::quiet_NaN();
  const double al = pa / (pa - pb);
  return (1 - al) * w(h.other, h.a) + al * w(h.other, h.b);
}

int rotation_orientation(const WMatrix& w) {
  // R1 -> R3 across Sigma1-, R3 -> R4 across Sigma2+, R4 -> R2 across Sigma1+, R2 -> R1 across Sigma2-
  const bool ccw = w(0, 0) > 0 && w(0, 2) > 0 && w(1, 2) > 0 && w(1, 3) > 0 && w(0, 3) < 0 && w(0, 1) < 0 &&
                   w(1, 1) < 0 && w(1, 0) < 0;
  if (ccw) return +1;
  const bool cw = w(1, 0) > 0 && w(1, 1) > 0 && w(0, 1) > 0 && w(0, 3) > 0 && w(1, 3) < 0 && w(1, 2) < 0 &&
                  w(0, 2) < 0 && w(0, 0) < 0;
  return cw ? -1 : 0;
}

double spiral_ratio(const WMatrix& w) {
  const double num = w(1, 0) * w(0, 2) * w(1, 3) * w(0, 1);
  const double den = w(0, 0) * w(1, 2) * w(0, 3) * w(1, 1);
  return num / den;
}

AttractivityClass classify_attractivity(const ProjectionTable& table) {
  const WMatrix& w = table.w;
  if (!w.allFinite()) throw Error(ErrorCode::InvalidInput, "classify_attractivity: non-finite W");
  AttractivityClass out;
  out.non_generic = (w.array() == 0.0).any();
  for (HalfSurface s : kHalves)
    if (attractive_sliding(w, s)) out.surfaces.push_back(s);
  if (out.surfaces.size() == 4) {
    out.kind = AttractivityKind::NodallyAttractive;
  } else if (!out.surfaces.empty()) {
    out.kind = AttractivityKind::AttractiveUponSliding;
  } else {
    out.orientation = rotation_orientation(w);
    if (out.orientation != 0) {
      out.spiral_ratio = spiral_ratio(w);
      out.kind = *out.spiral_ratio < 1.0 ? AttractivityKind::SpirallyAttractive : AttractivityKind::NotAttractive;
    }
  }
  return out;
}

const char* to_string(ExitClassKind k) {
  switch (k) {
    case ExitClassKind::None: return "None";
    case ExitClassKind::TangentialExit: return "TangentialExit";
    case ExitClassKind::NonTangentialExit: return "NonTangentialExit";
    case ExitClassKind::SpiralExit: return "SpiralExit";
  }
  return "?";
}

std::string describe(const ExitClassification& c) {
  switch (c.kind) {
    case ExitClassKind::TangentialExit: return std::string("TangentialExit(") + to_string(c.surface) + ")";
    case ExitClassKind::NonTangentialExit: return std::string("NonTangentialExit(") + to_string(c.region) + ")";
    default: return to_string(c.kind);
  }
}

ExitClassification detect_potential_exit(const PwsSystem& sys, const Vec& x, const Vec& probe) {
  require_finite(x, "detect_potential_exit");
  if (x.size() != sys.dim) throw Error(ErrorCode::InvalidInput, "detect_potential_exit: state dimension mismatch");
  if (std::abs(sys.h(0, x)) > 1e-9 || std::abs(sys.h(1, x)) > 1e-9)
    throw Error(ErrorCode::Precondition, "detect_potential_exit: point is not on Sigma");
  Vec dir = Vec::Zero(sys.dim);
  if (probe.size() == sys.dim) {
    dir = probe;
  } else if (probe.size() == sys.dim - 2) {
    dir.tail(sys.dim - 2) = probe;
  } else if (probe.size() != 0) {
    throw Error(ErrorCode::InvalidInput, "detect_potential_exit: probe dimension mismatch");
  }
  constexpr double tol = 1e-9;

  struct Candidate {
    ExitClassification c;
    std::function<double(const WMatrix&)> scalar;
  };
  std::vector<Candidate> found;
  const WMatrix w = projections(sys, x).w;

  for (HalfSurface s : kHalves) {
    const HalfData h = half_data(s);
    if (!(w(h.surface, h.a) > 0.0 && w(h.surface, h.b) < 0.0)) continue;
    if (std::abs(sliding_normal_component(w, s)) <= tol) {
      ExitClassification c;
      c.kind = ExitClassKind::TangentialExit;
      c.surface = s;
      found.push_back({c, [s](const WMatrix& m) { return sliding_normal_component(m, s); }});
    }
  }
  for (int j = 0; j < 4; ++j) {
    for (int i = 0; i < 2; ++i) {
      const int o = 1 - i;
      if (std::abs(w(i, j)) > tol) continue;
      if (region_side(j, o) * w(o, j) <= tol) continue;
      ExitClassification c;
      c.kind = ExitClassKind::NonTangentialExit;
      c.region = region_from_index(j);
      found.push_back({c, [i, j](const WMatrix& m) { return m(i, j); }});
    }
  }
  if (rotation_orientation(w) != 0 && std::abs(spiral_ratio(w) - 1.0) <= tol) {
    ExitClassification c;
    c.kind = ExitClassKind::SpiralExit;
    found.push_back({c, [](const WMatrix& m) { return spiral_ratio(m) - 1.0; }});
  }

  if (found.empty()) return {};
  if (found.size() > 1) {
    std::string names;
    for (const auto& f : found) names += (names.empty() ? "" : ", ") + describe(f.c);
    throw Error(ErrorCode::NonGenericPoint, "detect_potential_exit: candidates " + names);
  }
  Candidate& cand = found.front();
  if (dir.squaredNorm() > 0.0) {
    const double s = 1e-6 * std::max(1.0, x.norm()) / dir.norm();
    const double up = cand.scalar(projections(sys, x + s * dir).w);
    const double down = cand.scalar(projections(sys, x - s * dir).w);
    cand.c.derivative = (up - down) / (2 * s);
    cand.c.first_order = std::abs(cand.c.derivative) > tol;
  }
  return cand.c;
}

}  // namespace pws
