#include "pws/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pws {

void IntegratorConfig::validate() const {
  if (!(tau > 0.0)) throw Error(ErrorCode::InvalidParameter, "tau must be positive");
  if (!(horizon > t0)) throw Error(ErrorCode::InvalidParameter, "horizon must exceed the start time");
  if (!(rtol > 0.0) || !(atol > 0.0)) throw Error(ErrorCode::InvalidParameter, "rtol and atol must be positive");
  if (!(delta_scale > 0.0)) throw Error(ErrorCode::InvalidParameter, "delta_scale must be positive");
  if (record_stride == 0) throw Error(ErrorCode::InvalidParameter, "record_stride must be at least 1");
  if (output_interval < 0.0) throw Error(ErrorCode::InvalidParameter, "output_interval must be nonnegative");
}

void Trajectory::reserve(std::size_t n) {
  times.reserve(n);
  data.reserve(n * static_cast<std::size_t>(dim));
  regions.reserve(n);
  h1.reserve(n);
  h2.reserve(n);
  hnorm.reserve(n);
}

void Trajectory::push(const PwsSystem& sys, double t, const Vec& x) {
  push_raw(t, x, classify_region(sys, x), sys.h(0, x), sys.h(1, x));
}

void Trajectory::push_raw(double t, const Vec& x, Region region, double h1v, double h2v) {
  times.push_back(t);
  data.insert(data.end(), x.data(), x.data() + x.size());
  regions.push_back(region);
  h1.push_back(h1v);
  h2.push_back(h2v);
  hnorm.push_back(std::hypot(h1v, h2v));
}

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(mix64(master) ^ (index + 1) * 0xd1b54a32d192ed03ULL);
}

namespace {

// Moves x off every surface it lies on exactly; returns the region of the result.
Region leave_surfaces(const PwsSystem& sys, Vec& x, double delta_scale, StepRng& rng) {
  Region r = classify_region(sys, x);
  if (is_open_region(r)) return r;
  const Vec base = x;
  const double size = delta_scale * std::max(1.0, base.norm());
  Vec dir(base.size());
  for (int attempt = 1; attempt <= 64; ++attempt) {
    for (Eigen::Index i = 0; i < dir.size(); ++i) dir[i] = rng.normal();
    const double len = dir.norm();
    if (len == 0.0) continue;
    // Grow the kick if the rounded sum still sits on a surface.
    x = base + (size * attempt / len) * dir;
    r = classify_region(sys, x);
    if (is_open_region(r)) return r;
  }
  throw Error(ErrorCode::StepFailure, "could not perturb the iterate off the discontinuity surfaces");
}

Trajectory euler_impl(const PwsSystem& sys, const Vec& x0, const IntegratorConfig& cfg, bool random,
                      const StepObserver& observer) {
  cfg.validate();
  require_finite(x0, "euler");
  if (x0.size() != sys.dim) throw Error(ErrorCode::InvalidInput, "euler: state dimension mismatch");

  Trajectory traj;
  traj.dim = sys.dim;
  const double span = cfg.horizon - cfg.t0;
  const auto expected = static_cast<std::size_t>(span / (cfg.tau * (random ? 1.5 : 1.0))) + 2;
  traj.reserve(std::min<std::size_t>(expected / cfg.record_stride + 2, 1u << 26));

  StepRng rng(cfg.seed);
  Vec x = x0;
  Vec f(sys.dim);
  double t = cfg.t0;
  traj.push(sys, t, x);

  std::size_t k = 0;
  bool recorded_last = true;
  while (t < cfg.horizon) {
    if (k >= cfg.max_steps) {
      traj.truncated = true;
      break;
    }
    const double step = random ? cfg.tau * (1.0 + rng.uniform()) : cfg.tau;
    const Region r = leave_surfaces(sys, x, cfg.delta_scale, rng);
    sys.field_into(region_index(r), x, f);
    x += step * f;
    t += step;
    ++k;
    if (!x.allFinite()) throw Error(ErrorCode::StepFailure, "euler: iterate became non-finite");

    const bool keep = k % cfg.record_stride == 0;
    if (keep) traj.push(sys, t, x);
    recorded_last = keep;
    if (observer && !observer(k, t, x, classify_region(sys, x))) break;
  }
  if (!recorded_last) traj.push(sys, t, x);
  traj.accepted_steps = k;
  return traj;
}

}  // namespace

Trajectory euler_random(const PwsSystem& sys, const Vec& x0, const IntegratorConfig& cfg,
                        const StepObserver& observer) {
  return euler_impl(sys, x0, cfg, true, observer);
}

Trajectory euler_fixed(const PwsSystem& sys, const Vec& x0, const IntegratorConfig& cfg,
                       const StepObserver& observer) {
  return euler_impl(sys, x0, cfg, false, observer);
}

MonitorSpec system_monitors(const PwsSystem& sys) {
  MonitorSpec m;
  m.region = [&sys](const Vec& x) { return classify_region(sys, x); };
  m.h1 = [&sys](const Vec& x) { return sys.h(0, x); };
  m.h2 = [&sys](const Vec& x) { return sys.h(1, x); };
  return m;
}

namespace {

void record(Trajectory& traj, const MonitorSpec& m, double t, const Vec& x) {
  if (m.region) {
    traj.push_raw(t, x, m.region(x), m.h1(x), m.h2(x));
  } else {
    traj.times.push_back(t);
    traj.data.insert(traj.data.end(), x.data(), x.data() + x.size());
  }
}

// Samples the cubic Hermite interpolant of an accepted step on the uniform output grid.
void dense_output(Trajectory& traj, const MonitorSpec& m, double& next_out, double dt_out, double t, double h,
                  const Vec& y0, const Vec& f0, const Vec& y1, const Vec& f1) {
  const double t1 = t + h;
  while (next_out <= t1 * (1.0 + 1e-15)) {
    const double s = std::clamp((next_out - t) / h, 0.0, 1.0);
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
    const double h10 = s * (1 - s) * (1 - s);
    const double h01 = s * s * (3 - 2 * s);
    const double h11 = s * s * (s - 1);
    const Vec y = h00 * y0 + (h10 * h) * f0 + h01 * y1 + (h11 * h) * f1;
    record(traj, m, next_out, y);
    next_out += dt_out;
  }
}

double error_norm(const Vec& err, const Vec& y0, const Vec& y1, double atol, double rtol) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    const double sc = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    acc = std::max(acc, std::abs(err[i]) / sc);
  }
  return acc;
}

double initial_step(const SmoothField& field, const Vec& y0, const Vec& f0, const IntegratorConfig& cfg,
                    int order) {
  const double span = cfg.horizon - cfg.t0;
  if (cfg.h_init > 0.0) return std::min(cfg.h_init, span);
  Vec sc = (cfg.atol + cfg.rtol * y0.array().abs()).matrix();
  const double d0 = (y0.array() / sc.array()).matrix().lpNorm<Eigen::Infinity>();
  const double d1 = (f0.array() / sc.array()).matrix().lpNorm<Eigen::Infinity>();
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, span);
  const Vec y1 = y0 + h0 * f0;
  Vec f1(y0.size());
  field(y1, f1);
  const double d2 = ((f1 - f0).array() / sc.array()).matrix().lpNorm<Eigen::Infinity>() / h0;
  const double dm = std::max(d1, d2);
  const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 1.0 / (order + 1));
  double h = std::min(100.0 * h0, h1);
  if (cfg.h_max > 0.0) h = std::min(h, cfg.h_max);
  return std::min(h, span);
}

// Dormand-Prince 5(4) tableau.
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

}  // namespace

namespace {

Trajectory dopri(const SmoothField& field, const Vec& x0, const IntegratorConfig& cfg, const MonitorSpec& monitors,
                 bool throw_on_underflow) {
  cfg.validate();
  require_finite(x0, "rk_adaptive");
  const auto n = x0.size();
  Trajectory traj;
  traj.dim = static_cast<int>(n);

  Vec y = x0, ynew(n), k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), err(n);
  double t = cfg.t0;
  field(y, k1);
  double h = initial_step(field, y, k1, cfg, 5);
  const double h_min = 1e-14 * (cfg.horizon - cfg.t0);
  const bool uniform = cfg.output_interval > 0.0;
  double next_out = cfg.t0;
  if (uniform) {
    record(traj, monitors, t, y);
    next_out += cfg.output_interval;
  } else {
    record(traj, monitors, t, y);
  }

  bool last_rejected = false;
  while (t < cfg.horizon) {
    if (traj.accepted_steps + traj.rejected_steps >= cfg.max_steps) {
      traj.truncated = true;
      break;
    }
    if (h < h_min) {
      if (!throw_on_underflow) {
        traj.truncated = true;
        break;
      }
      throw Error(ErrorCode::StiffnessSuspected,
                  "rk_adaptive: step size underflow at t=" + std::to_string(t));
    }
    const bool final_step = t + h >= cfg.horizon;
    if (final_step) h = cfg.horizon - t;

    tmp = y + h * a21 * k1;
    field(tmp, k2);
    tmp = y + h * (a31 * k1 + a32 * k2);
    field(tmp, k3);
    tmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    field(tmp, k4);
    tmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    field(tmp, k5);
    tmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    field(tmp, k6);
    ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    field(ynew, k7);
    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    const double en = error_norm(err, y, ynew, cfg.atol, cfg.rtol);
    if (!std::isfinite(en)) {
      h *= 0.1;
      ++traj.rejected_steps;
      last_rejected = true;
      continue;
    }
    if (en <= 1.0) {
      const double t_new = final_step ? cfg.horizon : t + h;
      if (uniform) {
        dense_output(traj, monitors, next_out, cfg.output_interval, t, t_new - t, y, k1, ynew, k7);
      } else {
        record(traj, monitors, t_new, ynew);
      }
      t = t_new;
      y = ynew;
      k1 = k7;
      ++traj.accepted_steps;
      double fac = en == 0.0 ? 10.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 10.0);
      if (last_rejected) fac = std::min(fac, 1.0);
      h *= fac;
      if (cfg.h_max > 0.0) h = std::min(h, cfg.h_max);
      last_rejected = false;
    } else {
      h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
      ++traj.rejected_steps;
      last_rejected = true;
    }
  }
  return traj;
}

}  // namespace

Trajectory rk_adaptive(const SmoothField& field, const Vec& x0, const IntegratorConfig& cfg,
                       const MonitorSpec& monitors) {
  return dopri(field, x0, cfg, monitors, true);
}

Mat finite_difference_jacobian(const SmoothField& field, const Vec& x, const Vec& fx) {
  const auto n = x.size();
  Mat jac(n, n);
  Vec probe = x;
  Vec fp(n);
  const double root_eps = std::sqrt(std::numeric_limits<double>::epsilon());
  for (Eigen::Index j = 0; j < n; ++j) {
    const double step = root_eps * std::max(std::abs(x[j]), 1.0);
    probe[j] = x[j] + step;
    field(probe, fp);
    jac.col(j) = (fp - fx) / step;
    probe[j] = x[j];
  }
  return jac;
}

Trajectory stiff_adaptive(const SmoothField& field, const JacobianFn& jac, const Vec& x0,
                          const IntegratorConfig& cfg, const MonitorSpec& monitors) {
  cfg.validate();
  require_finite(x0, "stiff_adaptive");
  const auto n = x0.size();
  Trajectory traj;
  traj.dim = static_cast<int>(n);

  const double d = 1.0 / (2.0 + std::sqrt(2.0));
  const double e32 = 6.0 + std::sqrt(2.0);
  const Mat eye = Mat::Identity(n, n);

  Vec y = x0, ynew(n), f0(n), f1(n), f2(n), k1(n), k2(n), k3(n), err(n);
  Mat J(n, n);
  double t = cfg.t0;
  field(y, f0);
  double h = initial_step(field, y, f0, cfg, 2);
  const double h_min = 1e-14 * (cfg.horizon - cfg.t0);
  const bool uniform = cfg.output_interval > 0.0;
  double next_out = cfg.t0 + cfg.output_interval;
  record(traj, monitors, t, y);

  bool need_jac = true;
  int failures = 0;
  while (t < cfg.horizon) {
    if (traj.accepted_steps + traj.rejected_steps >= cfg.max_steps) {
      traj.truncated = true;
      break;
    }
    if (h < h_min) {
      throw Error(ErrorCode::StepFailure, "stiff_adaptive: step size underflow at t=" + std::to_string(t));
    }
    if (need_jac) {
      if (jac) {
        jac(y, J);
      } else {
        J = finite_difference_jacobian(field, y, f0);
      }
      need_jac = false;
    }
    const bool final_step = t + h >= cfg.horizon;
    if (final_step) h = cfg.horizon - t;

    const Eigen::PartialPivLU<Mat> lu(eye - (h * d) * J);
    const double pivot = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
    if (!(pivot > 1e-300) || !std::isfinite(pivot)) {
      if (++failures > 10) {
        throw Error(ErrorCode::StepFailure, "stiff_adaptive: singular iteration matrix at t=" + std::to_string(t));
      }
      h *= 0.5;
      ++traj.rejected_steps;
      continue;
    }

    k1 = lu.solve(f0);
    field(y + 0.5 * h * k1, f1);
    k2 = lu.solve(f1 - k1) + k1;
    ynew = y + h * k2;
    field(ynew, f2);
    k3 = lu.solve(f2 - e32 * (k2 - f1) - 2.0 * (k1 - f0));
    err = (h / 6.0) * (k1 - 2.0 * k2 + k3);

    const double en = error_norm(err, y, ynew, cfg.atol, cfg.rtol);
    if (!std::isfinite(en) || !ynew.allFinite()) {
      if (++failures > 10) {
        throw Error(ErrorCode::StepFailure, "stiff_adaptive: repeated non-finite stages at t=" + std::to_string(t));
      }
      h *= 0.1;
      ++traj.rejected_steps;
      continue;
    }
    if (en <= 1.0) {
      failures = 0;
      const double t_new = final_step ? cfg.horizon : t + h;
      if (uniform) {
        dense_output(traj, monitors, next_out, cfg.output_interval, t, t_new - t, y, f0, ynew, f2);
      } else {
        record(traj, monitors, t_new, ynew);
      }
      t = t_new;
      y = ynew;
      f0 = f2;
      need_jac = true;
      ++traj.accepted_steps;
      h *= en == 0.0 ? 5.0 : std::min(5.0, 0.8 * std::pow(en, -1.0 / 3.0));
      if (cfg.h_max > 0.0) h = std::min(h, cfg.h_max);
    } else {
      h *= std::max(0.1, 0.8 * std::pow(en, -1.0 / 3.0));
      ++traj.rejected_steps;
    }
  }
  return traj;
}

Trajectory unregularized_naive(const PwsSystem& sys, const Vec& x0, const IntegratorConfig& cfg) {
  const SmoothField field = [&sys](const Vec& x, Vec& out) {
    const int j = (sys.h(0, x) < 0 ? 0 : 2) + (sys.h(1, x) < 0 ? 0 : 1);
    sys.field_into(j, x, out);
  };
  // A stalled step size marks the trajectory truncated instead of throwing.
  return dopri(field, x0, cfg, system_monitors(sys), false);
}

}  // namespace pws
