#include "pws/cli.hpp"

#include "pws/ensemble.hpp"
#include "pws/filippov.hpp"
#include "pws/io.hpp"
#include "pws/regularization.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <iostream>
#include <numbers>
#include <sstream>

namespace pws {

namespace {

using nlohmann::json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<double> parse_list(const std::string& s, const char* flag) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (cell.empty() || end != cell.c_str() + cell.size() || !std::isfinite(v))
      throw UsageError(std::string(flag) + ": bad number '" + cell + "'");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError(std::string(flag) + ": empty list");
  return out;
}

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

PresetParams parse_params(const std::vector<std::string>& kv) {
  PresetParams p;
  for (const auto& item : kv) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--param expects key=value, got '" + item + "'");
    p[item.substr(0, eq)] = parse_list(item.substr(eq + 1), "--param").front();
  }
  return p;
}

// Flag problems surface from the model as InvalidParameter / NotFound; report them as usage errors.
template <class F>
auto as_usage(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidParameter || e.code() == ErrorCode::NotFound) throw UsageError(e.what());
    throw;
  }
}

json complex_pair(const std::array<std::complex<double>, 2>& ev) {
  json a = json::array();
  for (const auto& z : ev) a.push_back({{"re", z.real()}, {"im", z.imag()}});
  return a;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(r);
  }
  return rows;
}

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// Shared bits of every command that works on a preset.
struct Common {
  std::string preset;
  std::vector<std::string> params;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--preset", c.preset, "preset name (see list)")->required();
  sub->add_option("--param", c.params, "preset parameter override key=value (repeatable)");
}

PresetInfo resolve_info(const Common& c) {
  return as_usage([&] { return preset_info(c.preset, parse_params(c.params)); });
}

PwsSystem resolve_system(const Common& c) {
  return as_usage([&] { return load_preset(c.preset, parse_params(c.params)); });
}

RunManifest make_manifest(const std::string& command, const CLI::App* sub, const std::string& preset,
                          std::uint64_t seed, const std::vector<std::string>& argv) {
  RunManifest m;
  m.command = command;
  m.preset = preset;
  m.seed = seed;
  m.timestamp = utc_timestamp();
  m.argv = argv;
  for (const CLI::Option* opt : sub->get_options()) {
    if (opt->get_name() == "--help") continue;
    std::string value;
    if (opt->count() > 0) {
      for (const auto& r : opt->results()) value += (value.empty() ? "" : ";") + r;
    } else {
      value = opt->get_default_str();
    }
    std::string key = opt->get_name();
    while (!key.empty() && key.front() == '-') key.erase(key.begin());
    m.parameters[key] = value;
  }
  return m;
}

void finish_outputs(RunManifest m, const std::vector<std::string>& outputs, std::ostream& out) {
  m.outputs = outputs;
  for (const auto& path : outputs) {
    write_manifest(manifest_path_for(path), m);
    out << "wrote " << path << " (+ manifest)\n";
  }
}

RegularizationParams reg_params(double eps_alpha, double eps_beta, const std::string& interp) {
  RegularizationParams p;
  p.eps_alpha = eps_alpha;
  p.eps_beta = eps_beta;
  if (interp == "c1") p.interpolant = Interpolant::C1Cubic;
  else if (interp == "c0") p.interpolant = Interpolant::C0Linear;
  else throw UsageError("--interp must be c1 or c0");
  as_usage([&] { p.validate(); return 0; });
  return p;
}

// ---------------------------------------------------------------------------

struct SimulateOpts {
  Common common;
  std::string method = "random-euler";
  double tau = 1e-4;
  std::uint64_t seed = 1;
  double t_end = std::numeric_limits<double>::quiet_NaN();
  std::string ic;
  std::string out;
  double eps_alpha = 1e-4;
  double eps_beta = 1e-4;
  std::string interp = "c1";
  double rtol = 1e-6;
  double atol = 1e-9;
  std::string h_max = "auto";
  std::size_t stride = 1;
  double output_interval = 0.0;
};

int cmd_simulate(const SimulateOpts& o, const CLI::App* sub, const std::vector<std::string>& argv,
                 std::ostream& out) {
  const PresetInfo info = resolve_info(o.common);
  const PwsSystem sys = resolve_system(o.common);
  Vec x0 = info.default_ic;
  if (!o.ic.empty()) {
    x0 = to_vec(parse_list(o.ic, "--ic"));
    if (x0.size() != info.dim)
      throw UsageError("--ic needs " + std::to_string(info.dim) + " components for preset " + info.name);
  }
  IntegratorConfig cfg;
  cfg.tau = o.tau;
  cfg.seed = o.seed;
  cfg.horizon = std::isnan(o.t_end) ? info.default_t_end : o.t_end;
  cfg.rtol = o.rtol;
  cfg.atol = o.atol;
  cfg.record_stride = o.stride;
  cfg.output_interval = o.output_interval;

  const bool regularized = o.method == "regularized-explicit" || o.method == "regularized-stiff";
  RegularizationParams rp;
  if (regularized) {
    rp = reg_params(o.eps_alpha, o.eps_beta, o.interp);
    if (o.h_max == "auto") {
      cfg.h_max = 2.0 * std::min(rp.eps_alpha, rp.eps_beta);
    } else {
      cfg.h_max = parse_list(o.h_max, "--h-max").front();
    }
  } else if (o.h_max != "auto") {
    cfg.h_max = parse_list(o.h_max, "--h-max").front();
  }
  as_usage([&] { cfg.validate(); return 0; });

  Trajectory traj;
  if (o.method == "random-euler") {
    traj = euler_random(sys, x0, cfg);
  } else if (o.method == "fixed-euler") {
    traj = euler_fixed(sys, x0, cfg);
  } else if (o.method == "regularized-explicit") {
    traj = rk_adaptive(regularized_evaluator(sys, rp), x0, cfg, system_monitors(sys));
  } else if (o.method == "regularized-stiff") {
    traj = stiff_adaptive(regularized_evaluator(sys, rp), regularized_jacobian_evaluator(sys, rp), x0, cfg,
                          system_monitors(sys));
  } else if (o.method == "unregularized-naive") {
    traj = unregularized_naive(sys, x0, cfg);
  } else {
    throw UsageError("unknown --method '" + o.method + "'");
  }

  write_trajectory_csv(o.out, traj);
  out << "samples " << traj.size() << ", accepted steps " << traj.accepted_steps << ", rejected "
      << traj.rejected_steps << (traj.truncated ? " (truncated)" : "") << "\n";
  out << "final state " << format_number(traj.times.back());
  for (int i = 0; i < traj.dim; ++i) out << ' ' << format_number(traj.component(traj.size() - 1, i));
  out << "\n";
  if (regularized) {
    if (const auto k = box_exit_index(traj, rp)) {
      out << "left the eps-box at t=" << format_number(traj.times[*k]) << ", " << info.slow_coordinate_label << "="
          << format_number(slow_coordinate(info.name, traj.state(*k))) << "\n";
    } else {
      out << "no exit from the eps-box recorded\n";
    }
  } else if (o.method != "unregularized-naive" && o.stride == 1) {
    const ExitSpec spec = default_exit_spec(info.name);
    if (const auto e = detect_exit(traj, spec, cfg.tau)) {
      out << "exit (" << describe(e->mode) << ") at t=" << format_number(e->time) << ", "
          << info.slow_coordinate_label << "=" << format_number(e->slow_coordinate) << "\n";
    } else {
      out << "no exit detected\n";
    }
  }
  finish_outputs(make_manifest("simulate", sub, info.name, o.seed, argv), {o.out}, out);
  return 0;
}

// ---------------------------------------------------------------------------

struct EnsembleOpts {
  Common common;
  std::size_t n = 100;
  double tau = 1e-4;
  std::uint64_t seed = 1;
  double t_end = std::numeric_limits<double>::quiet_NaN();
  std::string stats;
  std::string avg;
  int m = -1;
  double rho0 = 1.7;
  double angle = std::numbers::pi / 2;
  std::string ic;
  unsigned threads = 0;
};

int cmd_ensemble(const EnsembleOpts& o, const CLI::App* sub, const std::vector<std::string>& argv,
                 std::ostream& out) {
  const PresetInfo info = resolve_info(o.common);
  const PwsSystem sys = resolve_system(o.common);
  if (o.n == 0) throw UsageError("--n must be positive");
  Vec base = info.default_ic;
  if (!o.ic.empty()) {
    base = to_vec(parse_list(o.ic, "--ic"));
    if (base.size() != info.dim)
      throw UsageError("--ic needs " + std::to_string(info.dim) + " components for preset " + info.name);
  } else if (info.name == "tangential") {
    if (!(o.rho0 >= 0)) throw UsageError("--rho0 must be nonnegative");
    base[2] = std::sqrt(o.rho0) * std::cos(o.angle);
    base[3] = std::sqrt(o.rho0) * std::sin(o.angle);
  }
  base[0] = 0.0;
  base[1] = 0.0;

  IntegratorConfig cfg;
  cfg.tau = o.tau;
  cfg.seed = o.seed;
  cfg.horizon = std::isnan(o.t_end) ? info.default_t_end : o.t_end;
  as_usage([&] { cfg.validate(); return 0; });
  ExitSpec spec = default_exit_spec(info.name);
  if (o.m >= 0) spec.m_consecutive = o.m;

  const unsigned threads = o.threads > 0 ? o.threads : default_threads();
  const EnsembleStats st = run_ensemble(sys, base, o.n, cfg, spec, threads);

  json j;
  j["schema"] = 1;
  j["preset"] = info.name;
  j["n"] = st.n;
  j["tau"] = st.tau;
  j["seed"] = st.seed;
  j["mean"] = st.mean;
  j["std"] = st.std;
  j["non_exited"] = st.non_exited;
  j["slow_coordinate"] = info.slow_coordinate_label;
  j["exit_rule"] = describe(spec.mode);
  json exits = json::array();
  for (const auto& e : st.exits) {
    exits.push_back({{"member", e.member}, {"time", e.time}, {"state", vec_json(e.state)},
                     {"slow_coordinate", e.slow_coordinate}});
  }
  j["exits"] = exits;

  out << "n " << st.n << ", exits " << st.exits.size() << ", mean " << format_number(st.mean) << ", std "
      << format_number(st.std) << ", non-exited " << st.non_exited << "\n";
  std::vector<std::string> outputs;
  if (!o.stats.empty()) {
    write_text_file(o.stats, dump(j));
    outputs.push_back(o.stats);
  } else {
    out << dump(j);
  }
  if (!o.avg.empty()) {
    write_trajectory_csv(o.avg, run_average_trajectory(sys, base, o.n, cfg, threads));
    outputs.push_back(o.avg);
  }
  finish_outputs(make_manifest("ensemble", sub, info.name, o.seed, argv), outputs, out);
  return 0;
}

// ---------------------------------------------------------------------------

struct FastSlowOpts {
  Common common;
  std::string y;
  double eta = 1.0;
  bool dummy = false;
  std::string json_out;
  std::string portrait;
  int grid = 21;
  std::string orbit;
  double orbit_t = 20.0;
  std::string orbit_out;
};

Vec point_on_sigma(const PresetInfo& info, const std::string& y) {
  const auto ys = parse_list(y, "--y");
  if (static_cast<int>(ys.size()) != info.dim - 2)
    throw UsageError("--y needs " + std::to_string(info.dim - 2) + " values for preset " + info.name);
  Vec x = Vec::Zero(info.dim);
  for (std::size_t i = 0; i < ys.size(); ++i) x[static_cast<Eigen::Index>(i) + 2] = ys[i];
  return x;
}

RegularizationParams fast_params(double eta, bool dummy) {
  if (!(eta > 0) || eta > 1e4) throw UsageError("--eta must lie in (0, 1e4]");
  // Only the ratio enters the fast system; keep both widths inside (0, 1].
  RegularizationParams p;
  p.eps_alpha = eta > 1 ? 1e-4 / eta : 1e-4;
  p.eps_beta = eta * p.eps_alpha;
  p.interpolant = dummy ? Interpolant::C0Linear : Interpolant::C1Cubic;
  return p;
}

int cmd_fastslow(const FastSlowOpts& o, const CLI::App* sub, const std::vector<std::string>& argv,
                 std::ostream& out) {
  const PresetInfo info = resolve_info(o.common);
  const PwsSystem sys = resolve_system(o.common);
  if (!sys.canonical) throw UsageError("fastslow needs a preset with h1 = x1, h2 = x2");
  const Vec x = point_on_sigma(info, o.y);
  const RegularizationParams rp = fast_params(o.eta, o.dummy);
  const ProjectionTable table = projections(sys, x);
  const WMatrix& w = table.w;

  json j;
  j["schema"] = 1;
  j["preset"] = info.name;
  j["point"] = vec_json(x);
  j["eta"] = o.eta;
  j["system"] = o.dummy ? "dummy" : "fast";
  j["W"] = matrix_json(w);

  const AttractivityClass ac = classify_attractivity(table);
  j["attractivity"] = to_string(ac.kind);
  if (ac.spiral_ratio) j["spiral_ratio"] = *ac.spiral_ratio;

  const double scale = std::max(1.0, w.cwiseAbs().maxCoeff());
  json roots = json::array();
  std::optional<BilinearRoot> double_root;
  for (const auto& r : bilinear_roots(w)) {
    const double det = bilinear_g_jacobian(w, r.alpha, r.beta).determinant();
    const bool is_double = std::abs(det) <= 1e-8 * scale * scale;
    if (is_double && !double_root) double_root = r;
    const bool interior = r.alpha > 1e-9 && r.alpha < 1 - 1e-9 && r.beta > 1e-9 && r.beta < 1 - 1e-9;
    roots.push_back({{"alpha", r.alpha}, {"beta", r.beta}, {"det_jacobian", det}, {"interior", interior},
                     {"double", is_double}});
  }
  j["roots"] = roots;
  j["double_root"] = double_root ? json{{"alpha", double_root->alpha}, {"beta", double_root->beta}} : json(nullptr);

  std::optional<FastPoint> eq;
  try {
    eq = fast_equilibrium(table);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::AmbiguousRoots && e.code() != ErrorCode::NoEquilibrium) throw;
    j["equilibrium_error"] = e.what();
  }
  if (eq) {
    const bool inside = eq->alpha > 0 && eq->alpha < 1 && eq->beta > 0 && eq->beta < 1;
    const StabilityReport rep = inside ? fast_jacobian(table, *eq, rp)
                                       : stability_of(bilinear_g_jacobian(w, eq->alpha, eq->beta));
    j["equilibrium"] = {{"alpha", eq->alpha}, {"beta", eq->beta}};
    j["jacobian"] = matrix_json(rep.jacobian);
    j["eigenvalues"] = complex_pair(rep.eigenvalues);
    j["classification"] = to_string(rep.classification);
    out << "equilibrium (" << format_number(eq->alpha) << ", " << format_number(eq->beta) << "): "
        << to_string(rep.classification) << ", eigenvalues " << rep.eigenvalues[0] << " " << rep.eigenvalues[1]
        << "\n";
  } else {
    j["equilibrium"] = nullptr;
    out << "no unique equilibrium: " << j["equilibrium_error"].get<std::string>() << "\n";
  }
  if (double_root)
    out << "double root at (" << format_number(double_root->alpha) << ", " << format_number(double_root->beta) << ")\n";

  json bnd = json::array();
  for (const auto& b : boundary_equilibria(table))
    bnd.push_back({{"alpha", b.point.alpha}, {"beta", b.point.beta}, {"label", b.label}});
  j["boundary_equilibria"] = bnd;

  auto field = [&](double a, double b) {
    return o.dummy ? dummy_field(table, {a, b}, rp.eta()) : fast_field(table, {a, b}, rp);
  };

  std::vector<std::string> outputs;
  if (!o.portrait.empty()) {
    if (o.grid < 2) throw UsageError("--grid must be at least 2");
    std::ostringstream csv;
    csv << "alpha,beta,dalpha,dbeta\n";
    for (int i = 0; i < o.grid; ++i) {
      for (int k = 0; k < o.grid; ++k) {
        const double a = static_cast<double>(i) / (o.grid - 1);
        const double b = static_cast<double>(k) / (o.grid - 1);
        const Eigen::Vector2d d = field(a, b);
        csv << format_number(a) << ',' << format_number(b) << ',' << format_number(d[0]) << ','
            << format_number(d[1]) << '\n';
      }
    }
    write_text_file(o.portrait, csv.str());
    outputs.push_back(o.portrait);
  }

  if (!o.orbit.empty()) {
    const auto start = parse_list(o.orbit, "--orbit");
    if (start.size() != 2) throw UsageError("--orbit expects alpha,beta");
    if (o.orbit_out.empty()) throw UsageError("--orbit needs --orbit-out");
    if (!(o.orbit_t > 0)) throw UsageError("--orbit-t must be positive");
    // Backward time: integrate the negated field.
    SmoothField back = [&](const Vec& p, Vec& dp) {
      const double a = std::clamp(p[0], 0.0, 1.0);
      const double b = std::clamp(p[1], 0.0, 1.0);
      dp = -field(a, b);
    };
    IntegratorConfig cfg;
    cfg.horizon = o.orbit_t;
    cfg.rtol = 1e-10;
    cfg.atol = 1e-12;
    cfg.output_interval = o.orbit_t / 2000;
    MonitorSpec mon;
    mon.region = [](const Vec&) { return Region::R1; };
    mon.h1 = [](const Vec& p) { return p[0]; };
    mon.h2 = [](const Vec& p) { return p[1]; };
    const Trajectory orbit = rk_adaptive(back, to_vec(start), cfg, mon);
    std::ostringstream csv;
    csv << "s,alpha,beta\n";
    for (std::size_t k = 0; k < orbit.size(); ++k) {
      csv << format_number(-orbit.times[k]) << ',' << format_number(orbit.component(k, 0)) << ','
          << format_number(orbit.component(k, 1)) << '\n';
    }
    write_text_file(o.orbit_out, csv.str());
    outputs.push_back(o.orbit_out);
  }

  if (!o.json_out.empty()) {
    write_text_file(o.json_out, dump(j));
    outputs.push_back(o.json_out);
  } else {
    out << dump(j);
  }
  finish_outputs(make_manifest("fastslow", sub, info.name, 0, argv), outputs, out);
  return 0;
}

// ---------------------------------------------------------------------------

struct BifurcateOpts {
  Common common;
  double y_min = 0.0;
  double y_max = 0.0;
  double eta = 1.0;
  bool dummy = false;
  double tol = 1e-4;
  std::string out;
};

int cmd_bifurcate(const BifurcateOpts& o, const CLI::App* sub, const std::vector<std::string>& argv,
                  std::ostream& out) {
  const PresetInfo info = resolve_info(o.common);
  const PwsSystem sys = resolve_system(o.common);
  if (!sys.canonical) throw UsageError("bifurcate needs a preset with h1 = x1, h2 = x2");
  if (!(o.tol > 0)) throw UsageError("--tol must be positive");
  const RegularizationParams rp = fast_params(o.eta, o.dummy);
  const auto reports = scan_bifurcation(sys, rp, preset_slow_path(info.name), o.y_min, o.y_max, o.tol);

  json list = json::array();
  for (const auto& r : reports) {
    list.push_back({{"kind", to_string(r.kind)},
                    {"slow_value", r.slow_value},
                    {"bracket", {r.bracket_lo, r.bracket_hi}},
                    {"eigen_before", complex_pair(r.eigen_before)},
                    {"eigen_after", complex_pair(r.eigen_after)},
                    {"equilibrium", {{"alpha", r.equilibrium.alpha}, {"beta", r.equilibrium.beta}}},
                    {"label", r.label}});
    out << to_string(r.kind) << " at " << info.slow_coordinate_label << " = " << format_number(r.slow_value)
        << (r.label.empty() ? "" : " (" + r.label + ")") << "\n";
  }
  json j;
  j["schema"] = 1;
  j["preset"] = info.name;
  j["slow_coordinate"] = info.slow_coordinate_label;
  j["range"] = {o.y_min, o.y_max};
  j["eta"] = o.eta;
  j["system"] = o.dummy ? "dummy" : "fast";
  j["tol"] = o.tol;
  j["bifurcations"] = list;
  if (!o.out.empty()) {
    write_text_file(o.out, dump(j));
    finish_outputs(make_manifest("bifurcate", sub, info.name, 0, argv), {o.out}, out);
  } else {
    out << dump(j);
  }
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_list(std::ostream& out) {
  for (const auto& name : preset_names()) {
    const PresetInfo info = preset_info(name);
    out << name << "\n"
        << "  dimension:      " << info.dim << "\n"
        << "  description:    " << info.summary << "\n"
        << "  validity:       " << info.validity_domain << "\n"
        << "  exit locus:     " << info.exit_locus << "\n"
        << "  slow coord:     " << info.slow_coordinate_label << "\n"
        << "  default ic:    ";
    for (Eigen::Index i = 0; i < info.default_ic.size(); ++i) out << ' ' << format_number(info.default_ic[i]);
    out << "\n  default t-end:  " << format_number(info.default_t_end) << "\n";
    if (!info.params.empty()) {
      out << "  parameters:    ";
      for (const auto& [k, v] : info.params) out << ' ' << k << '=' << format_number(v);
      out << "\n";
    }
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args(argv, argv + argc);

  CLI::App app{"Simulation and analysis of systems with a codimension-2 discontinuity"};
  app.name(argc > 0 ? argv[0] : "pwsim");
  app.require_subcommand(1);

  SimulateOpts sim;
  auto* s = app.add_subcommand("simulate", "integrate one trajectory and write it as CSV");
  add_common(s, sim.common);
  s->add_option("--method", sim.method,
                "random-euler | fixed-euler | regularized-explicit | regularized-stiff | unregularized-naive")
      ->capture_default_str();
  s->add_option("--tau", sim.tau, "Euler reference step")->capture_default_str();
  s->add_option("--seed", sim.seed)->capture_default_str();
  s->add_option("--t-end", sim.t_end, "end time (preset default when omitted)");
  s->add_option("--ic", sim.ic, "initial state, comma separated (preset default when omitted)");
  s->add_option("--out", sim.out, "trajectory CSV")->required();
  s->add_option("--eps-alpha", sim.eps_alpha)->capture_default_str();
  s->add_option("--eps-beta", sim.eps_beta)->capture_default_str();
  s->add_option("--interp", sim.interp, "c1 | c0")->capture_default_str();
  s->add_option("--rtol", sim.rtol)->capture_default_str();
  s->add_option("--atol", sim.atol)->capture_default_str();
  s->add_option("--h-max", sim.h_max, "maximum step; auto = 2 min(eps) for regularized methods")
      ->capture_default_str();
  s->add_option("--stride", sim.stride, "record every k-th Euler step")->capture_default_str();
  s->add_option("--output-interval", sim.output_interval, "uniform output spacing for adaptive methods")
      ->capture_default_str();

  EnsembleOpts ens;
  auto* e = app.add_subcommand("ensemble", "random-Euler ensemble with exit statistics");
  add_common(e, ens.common);
  e->add_option("--n", ens.n)->capture_default_str();
  e->add_option("--tau", ens.tau)->capture_default_str();
  e->add_option("--seed", ens.seed)->capture_default_str();
  e->add_option("--t-end", ens.t_end, "end time (preset default when omitted)");
  e->add_option("--stats", ens.stats, "stats JSON (stdout when omitted)");
  e->add_option("--avg", ens.avg, "average trajectory CSV");
  e->add_option("--m", ens.m, "spiral rule run length (0 = sustained rule)");
  e->add_option("--rho0", ens.rho0, "tangential preset: initial x3^2+x4^2")->capture_default_str();
  e->add_option("--angle", ens.angle, "tangential preset: polar angle of (x3, x4)")->capture_default_str();
  e->add_option("--ic", ens.ic, "base point, comma separated (x1, x2 are randomized)");
  e->add_option("--threads", ens.threads, "worker count (PWS_THREADS or hardware when omitted)");

  FastSlowOpts fs;
  auto* f = app.add_subcommand("fastslow", "fast system analysis at a point of Sigma");
  add_common(f, fs.common);
  f->add_option("--y", fs.y, "slow coordinates x3.., comma separated")->required();
  f->add_option("--eta", fs.eta, "eps_beta / eps_alpha")->capture_default_str();
  f->add_flag("--dummy", fs.dummy, "use the linear ramp (dummy) system");
  f->add_option("--json", fs.json_out, "report JSON (stdout when omitted)");
  f->add_option("--portrait", fs.portrait, "phase portrait grid CSV");
  f->add_option("--grid", fs.grid, "portrait points per side")->capture_default_str();
  f->add_option("--orbit", fs.orbit, "start alpha,beta of a backward-time orbit");
  f->add_option("--orbit-t", fs.orbit_t, "backward integration length (fast time)")->capture_default_str();
  f->add_option("--orbit-out", fs.orbit_out, "orbit CSV");

  BifurcateOpts bif;
  auto* b = app.add_subcommand("bifurcate", "continuation scan of the fast equilibrium");
  add_common(b, bif.common);
  b->add_option("--y-min", bif.y_min)->required();
  b->add_option("--y-max", bif.y_max)->required();
  b->add_option("--eta", bif.eta)->capture_default_str();
  b->add_flag("--dummy", bif.dummy);
  b->add_option("--tol", bif.tol)->capture_default_str();
  b->add_option("--out", bif.out, "JSON (stdout when omitted)");

  auto* l = app.add_subcommand("list", "presets with their exit loci");

  std::string replay_path;
  auto* r = app.add_subcommand("replay", "re-run the command recorded in a manifest");
  r->add_option("manifest", replay_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& pe) {
    const int code = app.exit(pe, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (s->parsed()) return cmd_simulate(sim, s, args, out);
    if (e->parsed()) return cmd_ensemble(ens, e, args, out);
    if (f->parsed()) return cmd_fastslow(fs, f, args, out);
    if (b->parsed()) return cmd_bifurcate(bif, b, args, out);
    if (l->parsed()) return cmd_list(out);
    if (r->parsed()) {
      const RunManifest m = read_manifest(replay_path);
      if (m.argv.size() < 2 || m.argv[1] == "replay") throw UsageError("manifest has no replayable command line");
      std::vector<const char*> cargv;
      for (const auto& a : m.argv) cargv.push_back(a.c_str());
      return run_cli(static_cast<int>(cargv.size()), cargv.data(), out, err);
    }
  } catch (const UsageError& ue) {
    err << "usage error: " << ue.what() << "\n";
    return 2;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace pws
