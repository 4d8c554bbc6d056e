#include "pws/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <thread>
#include <tuple>

namespace pws {

std::string describe(const ExitMode& mode) {
  switch (mode.kind) {
    case ExitKind::TangentialToSurface: return std::string("tangential exit along ") + to_string(mode.surface);
    case ExitKind::NonTangentialToRegion: return std::string("non-tangential exit into ") + to_string(mode.region);
    case ExitKind::Spiral: return "spiral exit";
  }
  return "exit";
}

ExitSpec default_exit_spec(const std::string& preset) {
  ExitSpec spec;
  if (preset == "tangential") {
    // leaves by sliding on Sigma_1^- (h2 < 0 side grows)
    spec.monitor = {1, -1};
    spec.mode = {ExitKind::TangentialToSurface, HalfSurface::Sigma1Minus, Region::R1};
  } else if (preset == "nontangential") {
    spec.monitor = {1, -1};
    spec.mode = {ExitKind::NonTangentialToRegion, HalfSurface::Sigma1Minus, Region::R1};
  } else if (preset == "spiral") {
    spec.rule = ExitSpec::Rule::Spiral;
    // short runs fire on the tau-level jitter of the revolution norms
    spec.m_consecutive = 0;
    spec.mode = {ExitKind::Spiral, HalfSurface::Sigma1Minus, Region::R1};
  } else if (preset == "ambiguous" || preset == "symmetric") {
    spec.monitor = {1, -1};
  } else {
    throw Error(ErrorCode::NotFound, "no exit rule for preset '" + preset + "'");
  }
  spec.slow_coordinate = [preset](const Vec& x) { return slow_coordinate(preset, x); };
  return spec;
}

// ---------------------------------------------------------------------------

std::optional<std::size_t> codim1_exit_index(std::span<const double> monitor, double tau) {
  // start of the tail that never comes back below tau
  std::size_t tail = 0;
  for (std::size_t k = monitor.size(); k-- > 0;) {
    if (monitor[k] <= tau) {
      tail = k + 1;
      break;
    }
  }
  std::optional<std::size_t> kbar;
  bool armed = false;
  for (std::size_t k = tail; k < monitor.size(); ++k) {
    if (!kbar && monitor[k] > 1.5 * tau) kbar = k;
    if (monitor[k] > 10.0 * tau) armed = true;
  }
  if (!armed) return std::nullopt;
  return kbar;
}

std::optional<std::size_t> spiral_exit_revolution(std::span<const double> norms, int m_consecutive,
                                                  double arm_level) {
  if (m_consecutive < 0) throw Error(ErrorCode::InvalidParameter, "m_consecutive must be nonnegative");
  std::size_t start = 0;
  int run = 0;
  for (std::size_t k = 1; k < norms.size(); ++k) {
    if (norms[k] > norms[k - 1]) {
      if (++run >= m_consecutive && m_consecutive > 0) return start;
    } else {
      start = k;
      run = 0;
    }
  }
  if (m_consecutive == 0 && run >= kSustainedMinRun && norms.back() > arm_level) return start;
  return std::nullopt;
}

void Codim1ExitDetector::feed(std::size_t k, double t, const Vec& x, double monitor) {
  if (need_next_ && k == index_ + 1) {
    x_b_ = x;
    t_b_ = t;
    need_next_ = false;
  }
  if (monitor <= tau_) {
    have_candidate_ = false;
    armed_ = false;
    need_next_ = false;
    return;
  }
  if (!have_candidate_ && monitor > 1.5 * tau_) {
    have_candidate_ = true;
    need_next_ = true;
    index_ = k;
    x_a_ = x;
    t_a_ = t;
  }
  if (have_candidate_ && monitor > 10.0 * tau_) armed_ = true;
}

std::optional<ExitEvent> Codim1ExitDetector::result() const {
  if (!have_candidate_ || !armed_) return std::nullopt;
  ExitEvent ev;
  ev.index = index_;
  if (need_next_) {
    // candidate is the last sample
    ev.state = x_a_;
    ev.time = t_a_;
  } else {
    ev.state = 0.5 * (x_a_ + x_b_);
    ev.time = 0.5 * (t_a_ + t_b_);
  }
  return ev;
}

void SpiralExitDetector::feed(std::size_t k, double t, const Vec& x, Region region, double hnorm) {
  if (region == Region::R4) {
    last_r4_ = {k, t, hnorm, x};
    have_last_r4_ = true;
    return;
  }
  if (region == Region::R1) {
    have_last_r4_ = false;
    return;
  }
  if (!have_last_r4_ || (region != Region::R2 && region != Region::R3)) return;
  have_last_r4_ = false;
  ++count_;
  const Sample s = last_r4_;
  if (count_ > 1 && s.norm > prev_norm_) {
    ++run_length_;
  } else {
    run_start_ = s;
    run_length_ = 0;
  }
  prev_norm_ = s.norm;
  if (m_ > 0 && !found_ && run_length_ >= m_) found_ = run_start_;
}

std::optional<ExitEvent> SpiralExitDetector::result() const {
  std::optional<Sample> hit = found_;
  if (m_ == 0 && run_start_ && run_length_ >= kSustainedMinRun && prev_norm_ > arm_) hit = run_start_;
  if (!hit) return std::nullopt;
  ExitEvent ev;
  ev.state = hit->state;
  ev.index = hit->index;
  ev.time = hit->time;
  ev.mode.kind = ExitKind::Spiral;
  return ev;
}

std::vector<double> monitor_channel(const Trajectory& traj, const SignedMonitor& monitor) {
  std::vector<double> out(traj.size());
  for (std::size_t k = 0; k < traj.size(); ++k) out[k] = monitor(traj.h1[k], traj.h2[k]);
  return out;
}

std::optional<ExitEvent> detect_exit_codim1(const Trajectory& traj, std::span<const double> monitor, double tau) {
  if (monitor.size() != traj.size()) throw Error(ErrorCode::InvalidInput, "monitor length differs from trajectory");
  const auto k = codim1_exit_index(monitor, tau);
  if (!k) return std::nullopt;
  ExitEvent ev;
  ev.index = *k;
  if (*k + 1 < traj.size()) {
    ev.state = 0.5 * (traj.state(*k) + traj.state(*k + 1));
    ev.time = 0.5 * (traj.times[*k] + traj.times[*k + 1]);
  } else {
    ev.state = traj.state(*k);
    ev.time = traj.times[*k];
  }
  return ev;
}

std::optional<ExitEvent> detect_exit_spiral(const Trajectory& traj, int m_consecutive, double arm_level) {
  if (m_consecutive < 0) throw Error(ErrorCode::InvalidParameter, "m_consecutive must be nonnegative");
  SpiralExitDetector det(m_consecutive, arm_level);
  for (std::size_t k = 0; k < traj.size(); ++k) det.feed(k, traj.times[k], traj.state(k), traj.regions[k], traj.hnorm[k]);
  return det.result();
}

std::optional<ExitEvent> detect_exit(const Trajectory& traj, const ExitSpec& spec, double tau) {
  std::optional<ExitEvent> ev;
  if (spec.rule == ExitSpec::Rule::Spiral) {
    ev = detect_exit_spiral(traj, spec.m_consecutive, 10.0 * tau);
  } else {
    const auto mon = monitor_channel(traj, spec.monitor);
    ev = detect_exit_codim1(traj, mon, tau);
  }
  if (ev) {
    ev->mode = spec.mode;
    if (spec.slow_coordinate) ev->slow_coordinate = spec.slow_coordinate(ev->state);
  }
  return ev;
}

// ---------------------------------------------------------------------------

std::pair<double, double> exit_statistics(const std::vector<ExitEvent>& events) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (events.empty()) return {nan, nan};
  double mean = 0.0;
  for (const auto& e : events) mean += e.slow_coordinate;
  mean /= static_cast<double>(events.size());
  if (events.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (const auto& e : events) ss += (e.slow_coordinate - mean) * (e.slow_coordinate - mean);
  return {mean, std::sqrt(ss / static_cast<double>(events.size() - 1))};
}

unsigned default_threads() {
  if (const char* env = std::getenv("PWS_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

Vec member_initial_condition(const Vec& base_point, double tau, std::uint64_t member_seed) {
  if (base_point.size() < 2) throw Error(ErrorCode::InvalidInput, "base point needs at least two components");
  StepRng rng(member_seed);
  Vec x = base_point;
  x[0] = rng.uniform(-tau, tau);
  x[1] = rng.uniform(-tau, tau);
  return x;
}

namespace {

// Runs body(i) for i in [0, n) on `threads` workers; the first exception is rethrown.
template <class Body>
void parallel_for(std::size_t n, unsigned threads, Body body) {
  if (threads == 0) threads = default_threads();
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

IntegratorConfig streaming_config(const IntegratorConfig& cfg) {
  IntegratorConfig c = cfg;
  // members are observed, not stored
  c.record_stride = std::numeric_limits<std::size_t>::max();
  return c;
}

}  // namespace

EnsembleStats run_ensemble(const PwsSystem& sys, const Vec& base_point, std::size_t n, const IntegratorConfig& cfg,
                           const ExitSpec& spec, unsigned threads) {
  cfg.validate();
  if (n == 0) throw Error(ErrorCode::InvalidParameter, "ensemble size must be positive");
  if (spec.rule == ExitSpec::Rule::Spiral && spec.m_consecutive < 0)
    throw Error(ErrorCode::InvalidParameter, "m_consecutive must be nonnegative");
  require_finite(base_point, "run_ensemble");

  std::vector<std::optional<ExitEvent>> found(n);
  const IntegratorConfig base_cfg = streaming_config(cfg);

  parallel_for(n, threads, [&](std::size_t i) {
    const std::uint64_t member_seed = derive_seed(cfg.seed, i);
    const Vec x0 = member_initial_condition(base_point, cfg.tau, member_seed);
    IntegratorConfig c = base_cfg;
    c.seed = mix64(member_seed);

    std::optional<ExitEvent> ev;
    if (spec.rule == ExitSpec::Rule::Spiral) {
      SpiralExitDetector det(spec.m_consecutive, 10.0 * cfg.tau);
      det.feed(0, c.t0, x0, classify_region(sys, x0), std::hypot(sys.h(0, x0), sys.h(1, x0)));
      euler_random(sys, x0, c, [&](std::size_t k, double t, const Vec& x, Region r) {
        det.feed(k, t, x, r, std::hypot(sys.h(0, x), sys.h(1, x)));
        return true;
      });
      ev = det.result();
    } else {
      Codim1ExitDetector det(cfg.tau);
      det.feed(0, c.t0, x0, spec.monitor(sys.h(0, x0), sys.h(1, x0)));
      euler_random(sys, x0, c, [&](std::size_t k, double t, const Vec& x, Region) {
        det.feed(k, t, x, spec.monitor(sys.h(0, x), sys.h(1, x)));
        return true;
      });
      ev = det.result();
    }
    if (ev) {
      ev->mode = spec.mode;
      ev->member = i;
      if (spec.slow_coordinate) ev->slow_coordinate = spec.slow_coordinate(ev->state);
    }
    found[i] = std::move(ev);
  });

  EnsembleStats stats;
  stats.n = n;
  stats.tau = cfg.tau;
  stats.seed = cfg.seed;
  for (auto& ev : found) {
    if (ev) stats.exits.push_back(std::move(*ev));
    else ++stats.non_exited;
  }
  std::tie(stats.mean, stats.std) = exit_statistics(stats.exits);
  return stats;
}

Trajectory average_trajectory(const std::vector<Trajectory>& trajs, double tau) {
  if (trajs.empty()) throw Error(ErrorCode::InvalidInput, "average_trajectory: no trajectories");
  if (!(tau > 0.0)) throw Error(ErrorCode::InvalidParameter, "average_trajectory: tau must be positive");
  const int dim = trajs.front().dim;
  double t0 = -std::numeric_limits<double>::infinity();
  double t_end = std::numeric_limits<double>::infinity();
  for (const auto& tr : trajs) {
    if (tr.dim != dim || tr.empty()) throw Error(ErrorCode::InvalidInput, "average_trajectory: inconsistent members");
    t0 = std::max(t0, tr.times.front());
    t_end = std::min(t_end, tr.times.back());
  }
  const auto points = static_cast<std::size_t>(std::floor((t_end - t0) / tau * (1 + 1e-12))) + 1;

  Trajectory avg;
  avg.dim = dim;
  avg.reserve(points);
  std::vector<std::size_t> cursor(trajs.size(), 0);
  Vec acc(dim);
  for (std::size_t g = 0; g < points; ++g) {
    const double t = std::min(t0 + static_cast<double>(g) * tau, t_end);
    acc.setZero();
    double h1 = 0.0, h2 = 0.0;
    for (std::size_t m = 0; m < trajs.size(); ++m) {
      const Trajectory& tr = trajs[m];
      std::size_t& c = cursor[m];
      while (c + 1 < tr.size() && tr.times[c + 1] < t) ++c;
      if (c + 1 >= tr.size()) {
        acc += tr.state(c);
        h1 += tr.h1[c];
        h2 += tr.h2[c];
        continue;
      }
      const double ta = tr.times[c], tb = tr.times[c + 1];
      const double s = tb > ta ? std::clamp((t - ta) / (tb - ta), 0.0, 1.0) : 0.0;
      acc += (1.0 - s) * tr.state(c) + s * tr.state(c + 1);
      h1 += (1.0 - s) * tr.h1[c] + s * tr.h1[c + 1];
      h2 += (1.0 - s) * tr.h2[c] + s * tr.h2[c + 1];
    }
    const double inv = 1.0 / static_cast<double>(trajs.size());
    h1 *= inv;
    h2 *= inv;
    Region r;
    if (h1 == 0.0 && h2 == 0.0) r = Region::OnSigma;
    else if (h1 == 0.0) r = Region::OnSigma1;
    else if (h2 == 0.0) r = Region::OnSigma2;
    else r = h1 < 0 ? (h2 < 0 ? Region::R1 : Region::R2) : (h2 < 0 ? Region::R3 : Region::R4);
    avg.push_raw(t, acc * inv, r, h1, h2);
  }
  return avg;
}

Trajectory run_average_trajectory(const PwsSystem& sys, const Vec& base_point, std::size_t n,
                                  const IntegratorConfig& cfg, unsigned threads) {
  cfg.validate();
  if (n == 0) throw Error(ErrorCode::InvalidParameter, "ensemble size must be positive");
  require_finite(base_point, "run_average_trajectory");
  if (threads == 0) threads = default_threads();
  const int dim = sys.dim;
  // random steps overshoot the horizon by less than 2 tau; the grid is cut to
  // the earliest member end afterwards, as average_trajectory does
  auto grid_points = [&](double t_end) {
    return static_cast<std::size_t>(std::floor((t_end - cfg.t0) / cfg.tau * (1 + 1e-12))) + 1;
  };
  const std::size_t points = grid_points(cfg.horizon + 2.0 * cfg.tau);
  std::vector<double> ends(n, 0.0);
  const std::size_t width = static_cast<std::size_t>(dim);
  const IntegratorConfig base_cfg = streaming_config(cfg);

  // Members are processed in chunks and summed in index order, so the result
  // is independent of the worker count.
  std::vector<double> total(points * width, 0.0);
  const std::size_t chunk = std::max<std::size_t>(threads, 1);
  std::vector<std::vector<double>> grids(chunk, std::vector<double>(points * width));
  for (std::size_t first = 0; first < n; first += chunk) {
    const std::size_t count = std::min(chunk, n - first);
    parallel_for(count, threads, [&](std::size_t slot) {
      auto& grid = grids[slot];
      std::fill(grid.begin(), grid.end(), 0.0);
      const std::uint64_t member_seed = derive_seed(cfg.seed, first + slot);
      const Vec x0 = member_initial_condition(base_point, cfg.tau, member_seed);
      IntegratorConfig c = base_cfg;
      c.seed = mix64(member_seed);
      Vec prev = x0;
      double t_prev = cfg.t0;
      std::size_t g = 0;
      auto fill_until = [&](double t, const Vec& x) {
        while (g < points) {
          const double tg = cfg.t0 + static_cast<double>(g) * cfg.tau;
          if (tg > t) break;
          const double s = t > t_prev ? (tg - t_prev) / (t - t_prev) : 1.0;
          for (std::size_t d = 0; d < width; ++d)
            grid[g * width + d] = (1.0 - s) * prev[static_cast<Eigen::Index>(d)] + s * x[static_cast<Eigen::Index>(d)];
          ++g;
        }
      };
      fill_until(t_prev, x0);
      const Trajectory tail = euler_random(sys, x0, c, [&](std::size_t, double t, const Vec& x, Region) {
        fill_until(t, x);
        prev = x;
        t_prev = t;
        return true;
      });
      // grid points past the last step (rounding at the horizon) take the final state
      const Vec last = tail.back_state();
      ends[first + slot] = tail.times.back();
      for (; g < points; ++g)
        for (std::size_t d = 0; d < width; ++d) grid[g * width + d] = last[static_cast<Eigen::Index>(d)];
    });
    for (std::size_t slot = 0; slot < count; ++slot)
      for (std::size_t q = 0; q < total.size(); ++q) total[q] += grids[slot][q];
  }

  const std::size_t used = std::min(points, grid_points(*std::min_element(ends.begin(), ends.end())));
  Trajectory avg;
  avg.dim = dim;
  avg.reserve(used);
  Vec x(dim);
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t g = 0; g < used; ++g) {
    for (std::size_t d = 0; d < width; ++d) x[static_cast<Eigen::Index>(d)] = total[g * width + d] * inv;
    avg.push(sys, cfg.t0 + static_cast<double>(g) * cfg.tau, x);
  }
  return avg;
}

}  // namespace pws
