#pragma once

#include "pws/model.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <span>

namespace pws {

struct IntegratorConfig {
  /// Reference stepsize for the Euler schemes; random steps are drawn from [tau, 2 tau].
  double tau = 1e-4;
  std::uint64_t seed = 1;
  double t0 = 0.0;
  double horizon = 1.0;  ///< end time
  /// Relative size of the random perturbation applied when an iterate lands on a surface.
  double delta_scale = 0x1p-52;
  double rtol = 1e-6;
  double atol = 1e-9;
  /// Initial step for the adaptive solvers (0 selects one automatically).
  double h_init = 0.0;
  double h_max = 0.0;  ///< 0 means unbounded
  std::size_t max_steps = 50'000'000;
  /// Record every k-th Euler step (1 records all). The final state is always recorded.
  std::size_t record_stride = 1;
  /// Uniform output spacing for the adaptive solvers via cubic Hermite dense output
  /// (0 records every accepted step).
  double output_interval = 0.0;

  void validate() const;
};

/// Per-step record of a simulation. States are stored row-major, dim values per sample.
struct Trajectory {
  int dim = 0;
  std::vector<double> times;
  std::vector<double> data;
  std::vector<Region> regions;
  std::vector<double> h1, h2, hnorm;
  bool truncated = false;
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;

  std::size_t size() const { return times.size(); }
  bool empty() const { return times.empty(); }
  Eigen::Map<const Vec> state(std::size_t k) const {
    return Eigen::Map<const Vec>(data.data() + k * static_cast<std::size_t>(dim), dim);
  }
  Vec back_state() const { return state(size() - 1); }
  double component(std::size_t k, int i) const { return data[k * static_cast<std::size_t>(dim) + static_cast<std::size_t>(i)]; }

  void reserve(std::size_t n);
  /// Appends a sample; region and monitor channels are evaluated from `sys`.
  void push(const PwsSystem& sys, double t, const Vec& x);
  /// Appends a sample for a smooth field that has no surfaces attached.
  void push_raw(double t, const Vec& x, Region region, double h1v, double h2v);
};

/// Random number source for the Euler schemes. std::mt19937_64 seeded directly.
class StepRng {
 public:
  explicit StepRng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return unit_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit_(engine_); }
  double normal() { return normal_(engine_); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// splitmix64 finalizer; used to derive independent member seeds.
std::uint64_t mix64(std::uint64_t z);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

/// Called after every accepted Euler step with (step index, time, state, region);
/// returning false stops the integration.
using StepObserver = std::function<bool(std::size_t, double, const Vec&, Region)>;

/// Forward Euler on the discontinuous system with steps uniform in [tau, 2 tau].
/// An iterate lying exactly on a surface is pushed off it by a seeded perturbation
/// of size delta_scale * max(1, |x|) before the regional field is selected.
Trajectory euler_random(const PwsSystem& sys, const Vec& x0, const IntegratorConfig& cfg,
                        const StepObserver& observer = {});

/// Same scheme with constant steps tau.
Trajectory euler_fixed(const PwsSystem& sys, const Vec& x0, const IntegratorConfig& cfg,
                       const StepObserver& observer = {});

/// Smooth autonomous vector field.
using SmoothField = std::function<void(const Vec& x, Vec& out)>;
using JacobianFn = std::function<void(const Vec& x, Mat& out)>;

/// Optional channel filler for the adaptive solvers: region and (h1, h2) of a state.
struct MonitorSpec {
  std::function<Region(const Vec&)> region;
  std::function<double(const Vec&)> h1;
  std::function<double(const Vec&)> h2;
};

/// Dormand-Prince 5(4) with mixed-tolerance error control.
Trajectory rk_adaptive(const SmoothField& field, const Vec& x0, const IntegratorConfig& cfg,
                       const MonitorSpec& monitors = {});

/// Two-stage Rosenbrock method (order 2, L-stable) with an embedded order-3 error
/// estimate. The Jacobian is approximated by forward differences when `jac` is empty.
Trajectory stiff_adaptive(const SmoothField& field, const JacobianFn& jac, const Vec& x0,
                          const IntegratorConfig& cfg, const MonitorSpec& monitors = {});

/// Monitors derived from the surfaces of a system.
MonitorSpec system_monitors(const PwsSystem& sys);

/// Adaptive integration of the discontinuous system itself: the regional field is
/// re-selected at every stage evaluation. Kept to demonstrate its unreliability.
Trajectory unregularized_naive(const PwsSystem& sys, const Vec& x0, const IntegratorConfig& cfg);

Mat finite_difference_jacobian(const SmoothField& field, const Vec& x, const Vec& fx);

}  // namespace pws
