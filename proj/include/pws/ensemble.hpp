#pragma once

#include "pws/integrate.hpp"

#include <optional>

namespace pws {

enum class ExitKind { TangentialToSurface, NonTangentialToRegion, Spiral };

struct ExitMode {
  ExitKind kind = ExitKind::TangentialToSurface;
  HalfSurface surface = HalfSurface::Sigma1Minus;  ///< meaningful for TangentialToSurface
  Region region = Region::R1;                      ///< meaningful for NonTangentialToRegion
};
std::string describe(const ExitMode& mode);

struct ExitEvent {
  Vec state;                ///< midpoint of steps k and k+1 for codimension-1 exits
  std::size_t index = 0;    ///< step index k
  double time = 0.0;
  ExitMode mode;
  double slow_coordinate = 0.0;
  std::size_t member = 0;   ///< ensemble member that produced the event
};

/// Signed distance channel sign * h_surface.
struct SignedMonitor {
  int surface = 1;  ///< 0 for h1, 1 for h2
  int sign = -1;
  double operator()(double h1, double h2) const { return sign * (surface == 0 ? h1 : h2); }
};

struct ExitSpec {
  enum class Rule { Codim1, Spiral };
  Rule rule = Rule::Codim1;
  SignedMonitor monitor;
  /// Length of the run of strictly increasing revolution norms that declares a spiral exit.
  /// 0 selects the sustained rule (see spiral_exit_revolution).
  int m_consecutive = 3;
  ExitMode mode;
  std::function<double(const Vec&)> slow_coordinate;
};

/// Exit rule, monitor and slow coordinate used for a preset.
ExitSpec default_exit_spec(const std::string& preset);

// ---------------------------------------------------------------------------
// Exit detection

/// Index rule on a monitor sequence: an exit is declared once the monitor exceeds
/// 10 tau; the exit index is the first k with monitor > 1.5 tau such that every later
/// recorded value stays above tau. Returns nullopt when no exit is declared.
std::optional<std::size_t> codim1_exit_index(std::span<const double> monitor, double tau);

/// First revolution that starts a run of m strictly increasing values.
/// With m = 0 the exit is the start of the final strictly increasing run, accepted when that
/// run has at least kSustainedMinRun increases and ends above arm_level.
std::optional<std::size_t> spiral_exit_revolution(std::span<const double> norms, int m_consecutive,
                                                  double arm_level = 0.0);
inline constexpr int kSustainedMinRun = 3;

/// Streaming form of the codimension-1 rule; produces the same answer as the batch form.
class Codim1ExitDetector {
 public:
  explicit Codim1ExitDetector(double tau) : tau_(tau) {}
  void feed(std::size_t k, double t, const Vec& x, double monitor);
  /// Exit state (midpoint of k and k+1), index and time, if declared.
  std::optional<ExitEvent> result() const;

 private:
  double tau_;
  bool have_candidate_ = false;
  bool armed_ = false;        ///< monitor exceeded 10 tau since the candidate
  bool need_next_ = false;    ///< waiting for the state after the candidate
  std::size_t index_ = 0;
  double t_a_ = 0.0, t_b_ = 0.0;
  Vec x_a_, x_b_;
};

/// Streaming spiral rule: records ||(h1,h2)|| at the last step in R4 before the
/// trajectory moves on to R2 or R3.
class SpiralExitDetector {
 public:
  explicit SpiralExitDetector(int m_consecutive, double arm_level = 0.0)
      : m_(m_consecutive), arm_(arm_level) {}
  void feed(std::size_t k, double t, const Vec& x, Region region, double hnorm);
  std::optional<ExitEvent> result() const;
  std::size_t revolutions() const { return count_; }

 private:
  struct Sample {
    std::size_t index;
    double time;
    double norm;
    Vec state;
  };
  int m_;
  double arm_;
  std::size_t count_ = 0;
  bool have_last_r4_ = false;
  Sample last_r4_{};
  std::optional<Sample> run_start_;
  double prev_norm_ = 0.0;
  int run_length_ = 0;
  std::optional<Sample> found_;
};

std::vector<double> monitor_channel(const Trajectory& traj, const SignedMonitor& monitor);

std::optional<ExitEvent> detect_exit_codim1(const Trajectory& traj, std::span<const double> monitor, double tau);
std::optional<ExitEvent> detect_exit_spiral(const Trajectory& traj, int m_consecutive, double arm_level = 0.0);
/// Applies an ExitSpec, including the mode label and slow coordinate.
std::optional<ExitEvent> detect_exit(const Trajectory& traj, const ExitSpec& spec, double tau);

// ---------------------------------------------------------------------------
// Ensembles

struct EnsembleStats {
  std::size_t n = 0;
  double tau = 0.0;
  std::uint64_t seed = 0;
  std::vector<ExitEvent> exits;  ///< ordered by member index
  double mean = 0.0;
  double std = 0.0;
  std::size_t non_exited = 0;
};

/// Sample mean and sample standard deviation (n-1 denominator) of the slow coordinates.
/// A single event has standard deviation 0; an empty list yields NaN for both.
std::pair<double, double> exit_statistics(const std::vector<ExitEvent>& events);

/// Worker count from PWS_THREADS, else the hardware concurrency.
unsigned default_threads();

/// Member initial condition: base point with (x1, x2) uniform in [-tau, tau]^2.
Vec member_initial_condition(const Vec& base_point, double tau, std::uint64_t member_seed);

/// Evolves n random-Euler members from randomized initial conditions around base_point
/// and collects exit statistics. Member i uses seed derive_seed(cfg.seed, i), so the
/// result does not depend on the worker count.
EnsembleStats run_ensemble(const PwsSystem& sys, const Vec& base_point, std::size_t n, const IntegratorConfig& cfg,
                           const ExitSpec& spec, unsigned threads = 0);

/// Linear interpolation of each member on the grid t0, t0 + tau, ... and pointwise mean.
/// The grid stops at the earliest member end time.
Trajectory average_trajectory(const std::vector<Trajectory>& trajs, double tau);

/// Average of the same n members run_ensemble evolves, on the grid t0, t0 + tau, ...,
/// built without storing the members. Regions and monitors are evaluated from `sys`.
Trajectory run_average_trajectory(const PwsSystem& sys, const Vec& base_point, std::size_t n,
                                  const IntegratorConfig& cfg, unsigned threads = 0);

}  // namespace pws
