#include "pws/regularization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace pws {

const char* to_string(Interpolant i) { return i == Interpolant::C1Cubic ? "C1_cubic" : "C0_linear"; }

void RegularizationParams::validate() const {
  auto ok = [](double e) { return e > 0.0 && e <= 1.0; };
  if (!ok(eps_alpha) || !ok(eps_beta))
    throw Error(ErrorCode::InvalidParameter, "eps_alpha and eps_beta must lie in (0, 1]");
}

namespace {

void check_eps(double eps) {
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidParameter, "interpolant width must be positive");
}

void require_canonical(const PwsSystem& sys, const char* who) {
  if (!sys.canonical)
    throw Error(ErrorCode::UnsupportedGeometry, std::string(who) + ": surfaces must be the planes x1 = 0, x2 = 0");
}

double interp(Interpolant kind, double u, double eps) {
  return kind == Interpolant::C1Cubic ? interp_c1(u, eps) : interp_c0(u, eps);
}

double interp_deriv(Interpolant kind, double u, double eps) {
  return kind == Interpolant::C1Cubic ? interp_c1_deriv(u, eps) : interp_c0_deriv(u, eps);
}

// d(1 - z^2)/dgamma = -2 z dz/dgamma, with dgamma/dz = 3 (1 - z^2) / 4.
double boundary_factor_deriv(double gamma) {
  const double z = invert_alpha(gamma);
  const double f = (1 - z) * (1 + z);
  if (f <= 0.0) return z < 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
  return -8.0 * z / (3.0 * f);
}

}  // namespace

double interp_c1(double u, double eps) {
  check_eps(eps);
  if (u >= eps) return 1.0;
  if (u <= -eps) return 0.0;
  const double r = u / eps;
  return 0.5 + 0.25 * r * (3.0 - r * r);
}

double interp_c1_deriv(double u, double eps) {
  check_eps(eps);
  if (u >= eps || u <= -eps) return 0.0;
  const double r = u / eps;
  return 0.75 / eps * (1.0 - r * r);
}

double interp_c0(double u, double eps) {
  check_eps(eps);
  return std::clamp((u + eps) / (2.0 * eps), 0.0, 1.0);
}

double interp_c0_deriv(double u, double eps) {
  check_eps(eps);
  return (u > -eps && u < eps) ? 0.5 / eps : 0.0;
}

Vec regularized_field(const PwsSystem& sys, const RegularizationParams& params, const Vec& x) {
  require_canonical(sys, "regularized_field");
  require_finite(x, "regularized_field");
  const double a = interp(params.interpolant, x[0], params.eps_alpha);
  const double b = interp(params.interpolant, x[1], params.eps_beta);
  const Eigen::Vector4d lam = bilinear_lambdas(a, b);
  Vec out = Vec::Zero(sys.dim);
  Vec f(sys.dim);
  for (int j = 0; j < 4; ++j) {
    if (lam[j] == 0.0) continue;
    sys.field_into(j, x, f);
    out += lam[j] * f;
  }
  return out;
}

Mat regularized_jacobian(const PwsSystem& sys, const RegularizationParams& params, const Vec& x) {
  require_canonical(sys, "regularized_jacobian");
  const auto n = static_cast<Eigen::Index>(sys.dim);
  const double a = interp(params.interpolant, x[0], params.eps_alpha);
  const double b = interp(params.interpolant, x[1], params.eps_beta);
  const double da = interp_deriv(params.interpolant, x[0], params.eps_alpha);
  const double db = interp_deriv(params.interpolant, x[1], params.eps_beta);
  const Eigen::Vector4d lam = bilinear_lambdas(a, b);
  const Eigen::Vector4d dlam_da(-(1 - b), -b, 1 - b, b);
  const Eigen::Vector4d dlam_db(-(1 - a), 1 - a, -a, a);

  Mat jac = Mat::Zero(n, n);
  Vec f(n), fp(n), fm(n);
  Vec probe = x;
  for (int j = 0; j < 4; ++j) {
    const double wa = dlam_da[j] * da;
    const double wb = dlam_db[j] * db;
    if (lam[j] == 0.0 && wa == 0.0 && wb == 0.0) continue;
    sys.field_into(j, x, f);
    jac.col(0) += wa * f;
    jac.col(1) += wb * f;
    if (lam[j] == 0.0) continue;
    for (Eigen::Index k = 0; k < n; ++k) {
      const double h = 1e-6 * std::max(1.0, std::abs(x[k]));
      probe[k] = x[k] + h;
      sys.field_into(j, probe, fp);
      probe[k] = x[k] - h;
      sys.field_into(j, probe, fm);
      probe[k] = x[k];
      jac.col(k) += lam[j] * (fp - fm) / (2 * h);
    }
  }
  return jac;
}

SmoothField regularized_evaluator(const PwsSystem& sys, const RegularizationParams& params) {
  require_canonical(sys, "regularized_evaluator");
  params.validate();
  return [&sys, params](const Vec& x, Vec& out) { out = regularized_field(sys, params, x); };
}

JacobianFn regularized_jacobian_evaluator(const PwsSystem& sys, const RegularizationParams& params) {
  require_canonical(sys, "regularized_jacobian_evaluator");
  params.validate();
  return [&sys, params](const Vec& x, Mat& out) { out = regularized_jacobian(sys, params, x); };
}

std::optional<std::size_t> box_exit_index(const Trajectory& traj, const RegularizationParams& params) {
  std::optional<std::size_t> last_in;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    if (std::abs(traj.h1[k]) <= params.eps_alpha && std::abs(traj.h2[k]) <= params.eps_beta) last_in = k;
  }
  if (!last_in || *last_in + 1 >= traj.size()) return std::nullopt;
  return *last_in + 1;
}

double invert_alpha(double a) {
  if (!(a >= 0.0 && a <= 1.0)) throw Error(ErrorCode::Domain, "invert_alpha: argument outside [0, 1]");
  // exact at the edges so the boundary factor vanishes on dQ
  if (a == 0.0) return -1.0;
  if (a == 1.0) return 1.0;
  const double phi = std::atan2(2.0 * std::sqrt(a - a * a), 1.0 - 2.0 * a);
  double z = 2.0 * std::cos(phi / 3.0 + 4.0 * std::numbers::pi / 3.0);
  // one Newton polish on 1/2 + z (3 - z^2) / 4 = a
  const double slope = 0.75 * (1.0 - z * z);
  if (slope > 1e-3) z -= (0.5 + 0.25 * z * (3.0 - z * z) - a) / slope;
  return std::clamp(z, -1.0, 1.0);
}

double boundary_factor(double gamma) {
  const double z = invert_alpha(gamma);
  return (1.0 - z) * (1.0 + z);
}

Eigen::Vector2d fast_field(const ProjectionTable& w, const FastPoint& p, const RegularizationParams& params) {
  if (params.interpolant == Interpolant::C0Linear) return dummy_field(w, p, params.eta());
  const Eigen::Vector2d g = bilinear_g(w.w, p.alpha, p.beta);
  return {boundary_factor(p.alpha) * g[0], boundary_factor(p.beta) * g[1] / params.eta()};
}

Eigen::Vector2d dummy_field(const ProjectionTable& w, const FastPoint& p, double eta) {
  if (!(eta > 0.0)) throw Error(ErrorCode::InvalidParameter, "eta must be positive");
  const Eigen::Vector2d g = bilinear_g(w.w, p.alpha, p.beta);
  return {g[0], g[1] / eta};
}

FastPoint fast_equilibrium(const ProjectionTable& w) {
  const BilinearRoot r = bilinear_coeffs(w);
  return {r.alpha, r.beta};
}

const char* to_string(StabilityClass c) {
  switch (c) {
    case StabilityClass::StableNode: return "StableNode";
    case StabilityClass::StableFocus: return "StableFocus";
    case StabilityClass::UnstableNode: return "UnstableNode";
    case StabilityClass::UnstableFocus: return "UnstableFocus";
    case StabilityClass::Saddle: return "Saddle";
    case StabilityClass::Marginal: return "Marginal";
  }
  return "?";
}

Eigen::Matrix2d fast_jacobian_matrix(const WMatrix& w, const FastPoint& p, const RegularizationParams& params) {
  const Eigen::Matrix2d jt = bilinear_g_jacobian(w, p.alpha, p.beta);
  const double inv_eta = 1.0 / params.eta();
  Eigen::Matrix2d j;
  if (params.interpolant == Interpolant::C0Linear) {
    j.row(0) = jt.row(0);
    j.row(1) = inv_eta * jt.row(1);
    return j;
  }
  const Eigen::Vector2d g = bilinear_g(w, p.alpha, p.beta);
  j.row(0) = boundary_factor(p.alpha) * jt.row(0);
  j.row(1) = boundary_factor(p.beta) * inv_eta * jt.row(1);
  // product-rule terms vanish at equilibria
  if (g[0] != 0.0) j(0, 0) += boundary_factor_deriv(p.alpha) * g[0];
  if (g[1] != 0.0) j(1, 1) += boundary_factor_deriv(p.beta) * g[1] * inv_eta;
  return j;
}

StabilityReport stability_of(const Eigen::Matrix2d& jac) {
  StabilityReport r;
  r.jacobian = jac;
  const double tr = jac.trace();
  const double det = jac.determinant();
  const double disc = tr * tr - 4.0 * det;
  const std::complex<double> root = std::sqrt(std::complex<double>(disc, 0.0));
  r.eigenvalues = {0.5 * (tr - root), 0.5 * (tr + root)};
  const double scale = std::max(1.0, jac.cwiseAbs().maxCoeff());
  const double tol = 1e-10 * scale;
  if (det < -tol * scale) {
    r.classification = StabilityClass::Saddle;
  } else if (std::abs(det) <= tol * scale || std::abs(tr) <= tol) {
    r.classification = StabilityClass::Marginal;
  } else if (disc < 0.0) {
    r.classification = tr < 0 ? StabilityClass::StableFocus : StabilityClass::UnstableFocus;
  } else {
    r.classification = tr < 0 ? StabilityClass::StableNode : StabilityClass::UnstableNode;
  }
  return r;
}

StabilityReport fast_jacobian(const ProjectionTable& w, const FastPoint& p, const RegularizationParams& params) {
  const Eigen::Vector2d res = fast_field(w, p, params);
  if (!(res.lpNorm<Eigen::Infinity>() <= 1e-10))
    throw Error(ErrorCode::Precondition, "fast_jacobian: point is not an equilibrium");
  StabilityReport r = stability_of(fast_jacobian_matrix(w.w, p, params));
  r.equilibrium = p;
  r.jtilde = bilinear_g_jacobian(w.w, p.alpha, p.beta);
  return r;
}

std::vector<BoundaryEquilibrium> boundary_equilibria(const ProjectionTable& table) {
  const WMatrix& w = table.w;
  std::vector<BoundaryEquilibrium> out = {
      {{0, 0}, "vertex f1"}, {{0, 1}, "vertex f2"}, {{1, 0}, "vertex f3"}, {{1, 1}, "vertex f4"}};
  struct Edge {
    HalfSurface s;
    int row, a, b;  // projection row and the two fields on the edge
    bool alpha_edge;
    double fixed;
  };
  const Edge edges[] = {
      {HalfSurface::Sigma2Minus, 1, 0, 1, true, 0.0},
      {HalfSurface::Sigma2Plus, 1, 2, 3, true, 1.0},
      {HalfSurface::Sigma1Minus, 0, 0, 2, false, 0.0},
      {HalfSurface::Sigma1Plus, 0, 1, 3, false, 1.0},
  };
  for (const Edge& e : edges) {
    const double pa = w(e.row, e.a);
    const double pb = w(e.row, e.b);
    if (!(pa * pb < 0.0)) continue;
    const double t = pa / (pa - pb);
    FastPoint p = e.alpha_edge ? FastPoint{e.fixed, t} : FastPoint{t, e.fixed};
    std::string label = std::string(to_string(e.s)) + " sliding";
    label += attractive_sliding(w, e.s) ? " (attractive)" : " (not attractive)";
    out.push_back({p, label});
  }
  return out;
}

const char* to_string(BifurcationKind k) {
  switch (k) {
    case BifurcationKind::Hopf: return "Hopf";
    case BifurcationKind::SaddleNode: return "SaddleNode";
    case BifurcationKind::BoundaryCollision: return "BoundaryCollision";
  }
  return "?";
}

SlowPath preset_slow_path(const std::string& preset) {
  const PresetInfo info = preset_info(preset);
  const int dim = info.dim;
  if (preset == "tangential") {
    return [dim](double s) {
      if (s < 0) throw Error(ErrorCode::Domain, "radius squared must be nonnegative");
      Vec x = Vec::Zero(dim);
      x[3] = std::sqrt(s);
      return x;
    };
  }
  return [dim](double s) {
    Vec x = Vec::Zero(dim);
    x[2] = s;
    return x;
  };
}

namespace {

struct Tracked {
  FastPoint p;
  StabilityReport st;
};

std::optional<FastPoint> continue_root(const WMatrix& w, FastPoint p) {
  for (int it = 0; it < 50; ++it) {
    const Eigen::Vector2d g = bilinear_g(w, p.alpha, p.beta);
    const Eigen::Matrix2d j = bilinear_g_jacobian(w, p.alpha, p.beta);
    if (!(std::abs(j.determinant()) > 1e-300)) return std::nullopt;
    const Eigen::Vector2d d = -j.inverse() * g;
    p.alpha += d[0];
    p.beta += d[1];
    if (!std::isfinite(p.alpha) || !std::isfinite(p.beta) || std::abs(p.alpha) > 10 || std::abs(p.beta) > 10)
      return std::nullopt;
    if (d.lpNorm<Eigen::Infinity>() < 1e-14) {
      if (bilinear_g(w, p.alpha, p.beta).lpNorm<Eigen::Infinity>() < 1e-12) return p;
      return std::nullopt;
    }
  }
  if (bilinear_g(w, p.alpha, p.beta).lpNorm<Eigen::Infinity>() < 1e-12) return p;
  return std::nullopt;
}

bool inside(const FastPoint& p) { return p.alpha > 0 && p.alpha < 1 && p.beta > 0 && p.beta < 1; }

std::string edge_label(const FastPoint& p) {
  if (p.alpha <= 0) return "alpha=0 (Sigma2-)";
  if (p.alpha >= 1) return "alpha=1 (Sigma2+)";
  if (p.beta <= 0) return "beta=0 (Sigma1-)";
  return "beta=1 (Sigma1+)";
}

}  // namespace

std::vector<BifurcationReport> scan_bifurcation(const PwsSystem& sys, const RegularizationParams& params,
                                                const SlowPath& path, double s_min, double s_max, double tol) {
  require_canonical(sys, "scan_bifurcation");
  params.validate();
  if (!(tol > 0.0)) throw Error(ErrorCode::InvalidParameter, "scan_bifurcation: tol must be positive");
  std::vector<BifurcationReport> reports;
  if (!(s_max > s_min)) return reports;

  auto W = [&](double s) { return projections(sys, path(s)).w; };
  auto track = [&](double s, const FastPoint& guess) -> std::optional<Tracked> {
    const WMatrix w = W(s);
    auto q = continue_root(w, guess);
    if (!q) return std::nullopt;
    if (!inside(*q)) return Tracked{*q, stability_of(bilinear_g_jacobian(w, q->alpha, q->beta))};
    return Tracked{*q, stability_of(fast_jacobian_matrix(w, *q, params))};
  };

  ProjectionTable start;
  start.w = W(s_min);
  const FastPoint p0 = fast_equilibrium(start);
  Tracked cur{p0, stability_of(fast_jacobian_matrix(start.w, p0, params))};
  double prev_det = std::abs(bilinear_g_jacobian(start.w, p0.alpha, p0.beta).determinant());
  double det_now = prev_det;

  const double ds_max = (s_max - s_min) / 200.0;
  double ds = ds_max;
  double s = s_min;
  while (s < s_max) {
    const double s1 = std::min(s + ds, s_max);
    auto next = track(s1, cur.p);
    if (!next) {
      if (s1 - s > tol / 4) {
        ds = 0.5 * (s1 - s);
        continue;
      }
      if (det_now < prev_det) {
        BifurcationReport r;
        r.kind = BifurcationKind::SaddleNode;
        r.bracket_lo = s;
        r.bracket_hi = s1;
        r.slow_value = 0.5 * (s + s1);
        r.eigen_before = cur.st.eigenvalues;
        const double nan = std::numeric_limits<double>::quiet_NaN();
        r.eigen_after = {std::complex<double>(nan, nan), std::complex<double>(nan, nan)};
        r.equilibrium = cur.p;
        r.label = "equilibrium lost, |det Jtilde| decreasing";
        reports.push_back(r);
      }
      break;
    }
    if (!inside(next->p)) {
      // bisect for the first parameter where the tracked root leaves Q
      double lo = s, hi = s1;
      Tracked in = cur, out = *next;
      while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        auto m = track(mid, in.p);
        if (!m) break;
        if (inside(m->p)) {
          lo = mid;
          in = *m;
        } else {
          hi = mid;
          out = *m;
        }
      }
      BifurcationReport r;
      r.kind = BifurcationKind::BoundaryCollision;
      r.bracket_lo = lo;
      r.bracket_hi = hi;
      r.slow_value = 0.5 * (lo + hi);
      r.eigen_before = in.st.eigenvalues;
      r.eigen_after = out.st.eigenvalues;
      r.equilibrium = in.p;
      r.label = edge_label(out.p);
      reports.push_back(r);
      break;
    }

    const double tr0 = cur.st.jacobian.trace();
    const double tr1 = next->st.jacobian.trace();
    const bool focus_like = cur.st.jacobian.determinant() > 0 && next->st.jacobian.determinant() > 0;
    if (focus_like && (tr0 < 0) != (tr1 < 0)) {
      double lo = s, hi = s1;
      Tracked a = cur, b = *next;
      while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        auto m = track(mid, a.p);
        if (!m) break;
        if ((m->st.jacobian.trace() < 0) == (tr0 < 0)) {
          lo = mid;
          a = *m;
        } else {
          hi = mid;
          b = *m;
        }
      }
      BifurcationReport r;
      r.kind = BifurcationKind::Hopf;
      r.bracket_lo = lo;
      r.bracket_hi = hi;
      r.slow_value = 0.5 * (lo + hi);
      r.eigen_before = a.st.eigenvalues;
      r.eigen_after = b.st.eigenvalues;
      r.equilibrium = a.p;
      reports.push_back(r);
    }

    prev_det = det_now;
    const WMatrix w1 = W(s1);
    det_now = std::abs(bilinear_g_jacobian(w1, next->p.alpha, next->p.beta).determinant());
    s = s1;
    cur = *next;
    ds = std::min(2.0 * ds, ds_max);
  }
  return reports;
}

}  // namespace pws
