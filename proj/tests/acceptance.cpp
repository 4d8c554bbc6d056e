// Acceptance suite: one PASS/FAIL line per criterion, diagnostics indented below.
#include "pws/ensemble.hpp"
#include "pws/regularization.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

using namespace pws;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Criterion {
  int id;
  std::string title;
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    notes.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
    pass = pass && ok;
  }
  void note(const std::string& what) { notes.push_back("     " + what); }
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Vec vec(std::initializer_list<double> c) {
  Vec v(static_cast<Eigen::Index>(c.size()));
  Eigen::Index i = 0;
  for (double x : c) v[i++] = x;
  return v;
}

Vec base_point(const std::string& preset) {
  if (preset == "tangential") return vec({0, 0, 0, std::sqrt(1.7)});
  if (preset == "spiral") return vec({0, 0, 0.5});
  return vec({0, 0, 0});
}

struct EnsembleRun {
  EnsembleStats stats;
  double seconds = 0;
};

// Ensembles are shared between criteria 1-4.
EnsembleRun ensemble(const std::string& preset, double tau) {
  static std::map<std::pair<std::string, double>, EnsembleRun> cache;
  const auto key = std::make_pair(preset, tau);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  IntegratorConfig cfg;
  cfg.tau = tau;
  cfg.seed = 1;
  cfg.horizon = preset_info(preset).default_t_end;
  const auto t0 = Clock::now();
  EnsembleRun r;
  r.stats = run_ensemble(load_preset(preset), base_point(preset), 100, cfg, default_exit_spec(preset));
  r.seconds = seconds_since(t0);
  cache[key] = r;
  return r;
}

void report_ensemble(Criterion& c, const std::string& preset, double tau, const EnsembleRun& r) {
  c.note(fmt("%s tau=%.0e: mean %.5f std %.5f exits %zu non-exited %zu (%.1f s)", preset.c_str(), tau, r.stats.mean,
             r.stats.std, r.stats.exits.size(), r.stats.non_exited, r.seconds));
}

Criterion criterion1() {
  Criterion c{1, "nontangential exit statistics"};
  for (auto [tau, target] : {std::pair{1e-4, 2.9854}, std::pair{1e-5, 2.9923}}) {
    const auto r = ensemble("nontangential", tau);
    report_ensemble(c, "nontangential", tau, r);
    c.check(std::abs(r.stats.mean - target) <= 0.01, fmt("mean %.5f within 0.01 of %.4f", r.stats.mean, target));
    c.check(r.stats.std < 0.02, fmt("std %.5f < 0.02", r.stats.std));
    c.check(r.stats.non_exited == 0, "every member exits");
    c.check(r.seconds < 60, fmt("runtime %.1f s < 60 s", r.seconds));
  }
  return c;
}

Criterion criterion2() {
  Criterion c{2, "spiral exit statistics"};
  for (auto [tau, target, tol] : {std::tuple{1e-5, 0.94777, 0.015}, std::tuple{1e-6, 0.97910, 0.01}}) {
    const auto r = ensemble("spiral", tau);
    report_ensemble(c, "spiral", tau, r);
    c.check(std::abs(r.stats.mean - target) <= tol, fmt("mean %.5f within %.3f of %.5f", r.stats.mean, tol, target));
    c.check(r.stats.non_exited == 0, "every member exits");
    if (tau == 1e-6) c.check(r.seconds < 300, fmt("runtime %.1f s < 300 s", r.seconds));
  }
  return c;
}

Criterion criterion3() {
  Criterion c{3, "tangential exit statistics"};
  const auto r = ensemble("tangential", 1e-6);
  report_ensemble(c, "tangential", 1e-6, r);
  c.check(std::abs(r.stats.mean - 2.0865) <= 0.02, fmt("mean radius^2 %.5f within 0.02 of 2.0865", r.stats.mean));
  c.check(r.stats.std <= 0.05, fmt("std %.5f <= 0.05", r.stats.std));
  c.check(r.stats.non_exited == 0, "every member exits");
  c.check(r.seconds < 600, fmt("runtime %.1f s < 600 s", r.seconds));
  return c;
}

Criterion criterion4() {
  Criterion c{4, "ensemble means approach the exit locus as tau decreases"};
  for (const std::string preset : {"tangential", "nontangential", "spiral"}) {
    const double locus = preset_info(preset).locus_value;
    std::vector<double> dist;
    for (double tau : {1e-4, 1e-5, 1e-6}) dist.push_back(std::abs(ensemble(preset, tau).stats.mean - locus));
    c.check(dist[0] > dist[1] && dist[1] > dist[2],
            fmt("%s |mean - %.0f|: %.5f > %.5f > %.5f", preset.c_str(), locus, dist[0], dist[1], dist[2]));
  }
  return c;
}

Criterion criterion5() {
  Criterion c{5, "bifurcation values of the fast system"};
  auto params = [](double ea, double eb, Interpolant ip = Interpolant::C1Cubic) {
    RegularizationParams p;
    p.eps_alpha = ea;
    p.eps_beta = eb;
    p.interpolant = ip;
    return p;
  };
  struct Case {
    std::string label, preset;
    RegularizationParams p;
    double lo, hi, expected;
    BifurcationKind kind;
  };
  const std::vector<Case> cases = {
      {"nontangential Hopf, eta=1", "nontangential", params(1e-4, 1e-4), 3.0, 3.6, 3.3853, BifurcationKind::Hopf},
      {"nontangential Hopf, dummy system", "nontangential", params(1e-4, 1e-4, Interpolant::C0Linear), 3.0, 3.6,
       3.4476, BifurcationKind::Hopf},
      {"nontangential Hopf, eta=10", "nontangential", params(1e-6, 1e-5), 3.0, 3.6, 3.2296, BifurcationKind::Hopf},
      {"spiral Hopf, equal widths", "spiral", params(1e-4, 1e-4), 0.5, 2.0, 1.41798, BifurcationKind::Hopf},
      {"tangential saddle-node", "tangential", params(1e-4, 1e-4), 1.5, 2.5, 2.225, BifurcationKind::SaddleNode},
  };
  for (const auto& k : cases) {
    const auto t0 = Clock::now();
    const auto reps = scan_bifurcation(load_preset(k.preset), k.p, preset_slow_path(k.preset), k.lo, k.hi, 1e-3);
    const double secs = seconds_since(t0);
    if (reps.empty()) {
      c.check(false, k.label + ": no bifurcation found");
      continue;
    }
    const auto& b = reps.front();
    c.check(b.kind == k.kind && std::abs(b.slow_value - k.expected) <= 2e-3,
            fmt("%s: %s at %.6f, expected %.5f +- 2e-3 (%.2f s)", k.label.c_str(), to_string(b.kind), b.slow_value,
                k.expected, secs));
  }
  const auto dummy = scan_bifurcation(load_preset("spiral"), params(1e-4, 1e-4, Interpolant::C0Linear),
                                      preset_slow_path("spiral"), 0.5, 2.0, 1e-3);
  if (!dummy.empty()) c.note(fmt("spiral Hopf of the dummy system: %.6f", dummy.front().slow_value));
  return c;
}

Criterion criterion6() {
  Criterion c{6, "random Euler stays within 4 tau of Sigma while Sigma is attractive"};
  const double tau = 1e-5, window = 10 * std::sqrt(tau);
  c.note(fmt("tau = %.0e, C sqrt(tau) with C = 10: %.4f", tau, window));
  for (const std::string preset : {"tangential", "nontangential", "spiral"}) {
    const PwsSystem sys = load_preset(preset);
    const PresetInfo info = preset_info(preset);
    const double limit = info.locus_value - window;
    int bad_runs = 0;
    double first_bad = std::numeric_limits<double>::infinity();
    for (std::uint64_t i = 0; i < 100; ++i) {
      const std::uint64_t ms = derive_seed(6, i);
      IntegratorConfig cfg;
      cfg.tau = tau;
      cfg.seed = mix64(ms);
      cfg.horizon = info.default_t_end;
      cfg.record_stride = std::numeric_limits<std::size_t>::max();
      const Vec x0 = member_initial_condition(base_point(preset), tau, ms);
      bool bad = false;
      double where = 0;
      euler_random(sys, x0, cfg, [&](std::size_t, double, const Vec& x, Region) {
        const double s = slow_coordinate(preset, x);
        if (s >= limit) return false;
        if (std::max(std::abs(x[0]), std::abs(x[1])) > 4 * tau) {
          bad = true;
          where = s;
          return false;
        }
        return true;
      });
      if (bad) {
        ++bad_runs;
        first_bad = std::min(first_bad, where);
      }
    }
    c.check(bad_runs == 0, bad_runs == 0 ? fmt("%s: 100/100 runs within 4 tau up to %.4f", preset.c_str(), limit)
                                         : fmt("%s: %d/100 runs leave 4 tau before %.4f, earliest at %.4f",
                                               preset.c_str(), bad_runs, limit, first_bad));
  }
  return c;
}

WMatrix table_one(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mag(0.05, 1.0);
  const int s1[4] = {1, 1, 1, -1}, s2[4] = {-1, -1, 1, -1};
  WMatrix w;
  for (int j = 0; j < 4; ++j) {
    w(0, j) = s1[j] * mag(rng);
    w(1, j) = s2[j] * mag(rng);
  }
  return w;
}

// Sliding on the upper half of Sigma2 attracts toward Sigma.
bool sigma2_plus_toward(const WMatrix& w) { return w(1, 2) * w(0, 3) - w(1, 3) * w(0, 2) < 0; }

Criterion criterion7() {
  Criterion c{7, "fast-system structure"};
  const auto t0 = Clock::now();
  RegularizationParams p;
  p.eps_alpha = 1e-4;
  p.eps_beta = 1e-4;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u01(0, 1), inner(0.02, 0.98);

  std::vector<WMatrix> configs;
  while (configs.size() < 1000) {
    const WMatrix w = table_one(rng);
    if (sigma2_plus_toward(w)) configs.push_back(w);
  }
  for (const std::string preset : {"tangential", "nontangential", "spiral"}) {
    const Vec x = preset_slow_path(preset)(preset_info(preset).locus_value * 0.9);
    configs.push_back(projections(load_preset(preset), x).w);
  }

  double edge = 0, vertex = 0, zero_fast = 0, zero_dummy = 0, jac_err = 0, inv_err = 0;
  int sign_mismatch = 0, det_trace_bad = 0;
  for (std::size_t n = 0; n < configs.size(); ++n) {
    const WMatrix& w = configs[n];
    const auto table = make_table(w);
    for (double a : {0.0, 1.0})
      for (double b : {0.0, 1.0}) vertex = std::max(vertex, fast_field(table, {a, b}, p).lpNorm<Eigen::Infinity>());
    for (int k = 0; k < 10; ++k) {
      const double s = u01(rng);
      edge = std::max({edge, std::abs(fast_field(table, {0.0, s}, p)[0]), std::abs(fast_field(table, {1.0, s}, p)[0]),
                       std::abs(fast_field(table, {s, 0.0}, p)[1]), std::abs(fast_field(table, {s, 1.0}, p)[1])});
      const FastPoint q{inner(rng), inner(rng)};
      const Eigen::Vector2d f = fast_field(table, q, p), d = dummy_field(table, q, p.eta());
      for (int i = 0; i < 2; ++i)
        if ((f[i] > 0) != (d[i] > 0) || (f[i] < 0) != (d[i] < 0)) ++sign_mismatch;
      const double h = 1e-6;
      Eigen::Matrix2d fd;
      fd.col(0) = (fast_field(table, {q.alpha + h, q.beta}, p) - fast_field(table, {q.alpha - h, q.beta}, p)) / (2 * h);
      fd.col(1) = (fast_field(table, {q.alpha, q.beta + h}, p) - fast_field(table, {q.alpha, q.beta - h}, p)) / (2 * h);
      jac_err = std::max(jac_err, (fast_jacobian_matrix(w, q, p) - fd).lpNorm<Eigen::Infinity>());
    }
    if (n < 1000) {
      const FastPoint eq = fast_equilibrium(table);
      zero_fast = std::max(zero_fast, fast_field(table, eq, p).lpNorm<Eigen::Infinity>());
      zero_dummy = std::max(zero_dummy, dummy_field(table, eq, p.eta()).lpNorm<Eigen::Infinity>());
      const auto rep = fast_jacobian(table, eq, p);
      if (!(rep.jacobian.determinant() > 0 && rep.jacobian.trace() < 0)) ++det_trace_bad;
    }
  }
  for (int k = 0; k <= 10000; ++k) {
    const double a = k / 10000.0;
    for (double eps : {1e-6, 1e-4, 1.0}) inv_err = std::max(inv_err, std::abs(interp_c1(eps * invert_alpha(a), eps) - a));
  }
  c.check(edge == 0.0, fmt("normal component on the edges of Q: max %.1e", edge));
  c.check(vertex == 0.0, fmt("field at the vertices: max %.1e", vertex));
  c.check(zero_fast <= 1e-12 && zero_dummy <= 1e-12,
          fmt("bilinear root is a zero of both fields: %.1e / %.1e", zero_fast, zero_dummy));
  c.check(sign_mismatch == 0, fmt("fast and dummy components agree in sign inside Q: %d mismatches", sign_mismatch));
  c.check(jac_err <= 1e-6, fmt("Jacobian against central differences: max %.1e", jac_err));
  c.check(inv_err <= 1e-12, fmt("invert_alpha round-trip: max %.1e", inv_err));
  c.check(det_trace_bad == 0, fmt("det > 0 and trace < 0 at the equilibrium: %d/1000 violations", det_trace_bad));
  const double secs = seconds_since(t0);
  c.check(secs < 60, fmt("runtime %.2f s", secs));
  return c;
}

Criterion criterion8() {
  Criterion c{8, "regularized stiff run leaves the eps-box past the exit point"};
  const PwsSystem sys = load_preset("nontangential");
  RegularizationParams p;
  p.eps_alpha = 1e-6;
  p.eps_beta = 1e-6;
  IntegratorConfig cfg;
  cfg.horizon = 4.0;
  cfg.rtol = 1e-10;
  cfg.atol = 1e-12;
  cfg.h_max = 2 * std::min(p.eps_alpha, p.eps_beta);
  cfg.record_stride = 10;
  const auto t0 = Clock::now();
  const Trajectory t = stiff_adaptive(regularized_evaluator(sys, p), regularized_jacobian_evaluator(sys, p),
                                      preset_info("nontangential").default_ic, cfg, system_monitors(sys));
  const auto k = box_exit_index(t, p);
  if (!k) {
    c.check(false, "trajectory never leaves the eps-box");
    return c;
  }
  const double x3 = t.component(*k, 2);
  c.note(fmt("%zu accepted steps, %zu rejected, %.1f s", t.accepted_steps, t.rejected_steps, seconds_since(t0)));
  c.check(std::abs(x3 - 3.39) <= 0.05, fmt("leaves the box at x3 = %.5f, expected 3.39 +- 0.05", x3));
  c.check(x3 > 3.0, "exit lies past the true exit x3 = 3");
  return c;
}

Criterion criterion9() {
  Criterion c{9, "ambiguous preset: random Euler covers the Filippov family"};
  const PwsSystem sys = load_preset("ambiguous");
  const double tau = 1e-2, lam_max = 2.0 / 7.0;
  std::vector<double> coeff;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    IntegratorConfig cfg;
    cfg.tau = tau;
    cfg.seed = derive_seed(9, i);
    cfg.horizon = preset_info("ambiguous").default_t_end;
    const Trajectory t = euler_random(sys, vec({1e-2, 1e-2, 3, 0.9}), cfg);
    // least squares for x3' + x3 = c x4 over the Euler increments
    double num = 0, den = 0;
    for (std::size_t k = 0; k + 1 < t.size(); ++k) {
      const double h = t.times[k + 1] - t.times[k];
      const double d = (t.component(k + 1, 2) - t.component(k, 2)) / h;
      const double x3 = t.component(k, 2), x4 = t.component(k, 3);
      num += x4 * (d + x3);
      den += x4 * x4;
    }
    coeff.push_back(num / den);
  }
  const auto [cmin, cmax] = std::minmax_element(coeff.begin(), coeff.end());
  auto coverage = [&](double base, double slope) {
    // lambda = (base - c) / slope, clipped to the family range
    double lo = (base - *cmax) / slope, hi = (base - *cmin) / slope;
    lo = std::max(lo, 0.0);
    hi = std::min(hi, lam_max);
    return std::max(0.0, hi - lo) / lam_max;
  };
  c.note(fmt("fitted slow coefficient c over 1000 runs: [%.4f, %.4f]", *cmin, *cmax));
  const double cov = coverage(16, 13);
  c.note(fmt("lambda = (16 - c)/13 spans [%.4f, %.4f]", (16 - *cmax) / 13, (16 - *cmin) / 13));
  c.check(cov >= 0.8, fmt("coverage of [0, 2/7] under x3' = -x3 + (16 - 13 lambda) x4: %.1f%%", 100 * cov));
  c.note(fmt("coverage with coefficient 49 (family of the implemented fields): %.1f%%", 100 * coverage(16, 49)));
  return c;
}

Criterion criterion10() {
  Criterion c{10, "deterministic Euler is trapped, random Euler exits"};
  const PwsSystem sys = load_preset("tangential");
  const ExitSpec spec = default_exit_spec("tangential");
  const double tau = 1e-3;
  IntegratorConfig cfg;
  cfg.tau = tau;
  cfg.horizon = 2.0;
  const Vec x0 = vec({1e-4, 1e-4, 0, std::sqrt(1.7)});
  const Trajectory fixed = euler_fixed(sys, x0, cfg);
  double rho_max = 0;
  for (std::size_t k = 0; k < fixed.size(); ++k) rho_max = std::max(rho_max, slow_coordinate("tangential", fixed.state(k)));
  const auto ev = detect_exit(fixed, spec, tau);
  c.check(rho_max > 2.5, fmt("deterministic run reaches radius^2 %.3f", rho_max));
  c.check(!ev || ev->slow_coordinate >= 2.5,
          ev ? fmt("deterministic Euler exit at radius^2 %.4f", ev->slow_coordinate)
             : std::string("deterministic Euler: no exit event"));
  IntegratorConfig rc = cfg;
  rc.horizon = preset_info("tangential").default_t_end;
  rc.seed = 10;
  const auto st = run_ensemble(sys, base_point("tangential"), 100, rc, spec);
  c.check(st.non_exited == 0 && st.mean < 2.3,
          fmt("random Euler mean exit radius^2 %.4f (std %.4f, %zu non-exited), expected < 2.3", st.mean, st.std,
              st.non_exited));
  return c;
}

}  // namespace

int main() {
  const std::vector<std::function<Criterion()>> all = {criterion1, criterion2, criterion3, criterion4, criterion5,
                                                       criterion6, criterion7, criterion8, criterion9, criterion10};
  int failed = 0;
  for (const auto& run : all) {
    Criterion c;
    try {
      c = run();
    } catch (const std::exception& e) {
      c.pass = false;
      c.notes.push_back(std::string("exception: ") + e.what());
    }
    std::printf("%s criterion %d: %s\n", c.pass ? "PASS" : "FAIL", c.id, c.title.c_str());
    for (const auto& n : c.notes) std::printf("    %s\n", n.c_str());
    std::fflush(stdout);
    if (!c.pass) ++failed;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(all.size()) - failed, all.size());
  return failed == 0 ? 0 : 1;
}
