#include "pws/model.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace pws {
namespace {

void canonical_surfaces(PwsSystem& sys) {
  sys.surfaces[0] = [](const Vec& x) { return x[0]; };
  sys.surfaces[1] = [](const Vec& x) { return x[1]; };
  sys.gradients[0] = [](const Vec&, Vec& out) {
    out.setZero();
    out[0] = 1.0;
  };
  sys.gradients[1] = [](const Vec&, Vec& out) {
    out.setZero();
    out[1] = 1.0;
  };
  sys.canonical = true;
}

double take(PresetParams& params, const PresetParams& overrides, const std::string& key) {
  if (auto it = overrides.find(key); it != overrides.end()) params[key] = it->second;
  return params.at(key);
}

void reject_unknown(const PresetParams& known, const PresetParams& overrides, const std::string& preset) {
  for (const auto& [key, value] : overrides) {
    if (!known.count(key)) throw Error(ErrorCode::InvalidParameter, preset + ": unknown parameter '" + key + "'");
    if (!std::isfinite(value)) throw Error(ErrorCode::InvalidParameter, preset + ": non-finite parameter '" + key + "'");
  }
}

// Circle of tangential exit points x3^2 + x4^2 = rho; f1 carries the only
// non-constant normal projection.
PwsSystem tangential(double rho) {
  PwsSystem sys;
  sys.name = "tangential";
  sys.dim = 4;
  canonical_surfaces(sys);
  auto slow = [](const Vec& x, Vec& out) {
    out[2] = -0.4 * x[2] + x[3];
    out[3] = -0.4 * x[2] + 0.8 * x[3];
  };
  sys.fields[0] = [slow, rho](const Vec& x, Vec& out) {
    out[0] = 0.25;
    out[1] = rho - 0.9 / 4.0 - x[2] * x[2] - x[3] * x[3];
    slow(x, out);
  };
  sys.fields[1] = [slow](const Vec& x, Vec& out) {
    out[0] = 1.0;
    out[1] = -0.3;
    slow(x, out);
  };
  sys.fields[2] = [slow](const Vec& x, Vec& out) {
    out[0] = -1.0;
    out[1] = 0.9;
    slow(x, out);
  };
  sys.fields[3] = [slow](const Vec& x, Vec& out) {
    out[0] = -0.25;
    out[1] = -0.15;
    slow(x, out);
  };
  return sys;
}

// f1 becomes tangent to Sigma_1 at x3 = exit and then points away from Sigma.
PwsSystem nontangential(double exit) {
  PwsSystem sys;
  sys.name = "nontangential";
  sys.dim = 3;
  canonical_surfaces(sys);
  sys.fields[0] = [exit](const Vec& x, Vec& out) {
    out[0] = (exit - x[2]) / 5.0;
    out[1] = -0.2;
    out[2] = 1.0;
  };
  sys.fields[1] = [](const Vec&, Vec& out) {
    out[0] = 0.2;
    out[1] = -0.2;
    out[2] = 1.0;
  };
  sys.fields[2] = [](const Vec&, Vec& out) {
    out[0] = 0.2;
    out[1] = 0.4;
    out[2] = 1.0;
  };
  sys.fields[3] = [](const Vec&, Vec& out) {
    out[0] = -1.0;
    out[1] = -0.2;
    out[2] = 1.0;
  };
  return sys;
}

// Rotation R1 -> R3 -> R4 -> R2; the spiral ratio equals x3 / exit.
PwsSystem spiral(double exit) {
  PwsSystem sys;
  sys.name = "spiral";
  sys.dim = 3;
  canonical_surfaces(sys);
  sys.fields[0] = [exit](const Vec& x, Vec& out) {
    out[0] = 1.0 / 3.0;
    out[1] = -x[2] / (3.0 * exit);
    out[2] = 1.0;
  };
  sys.fields[1] = [](const Vec&, Vec& out) {
    out[0] = -2.0 / 3.0;
    out[1] = -1.0;
    out[2] = 1.0;
  };
  sys.fields[2] = [](const Vec&, Vec& out) {
    out[0] = 1.0 / 3.0;
    out[1] = 2.0 / 3.0;
    out[2] = 1.0;
  };
  sys.fields[3] = [](const Vec&, Vec& out) {
    out[0] = -1.0 / 3.0;
    out[1] = 1.0;
    out[2] = 1.0;
  };
  return sys;
}

// Non-unique Filippov sliding field; f_{Sigma_2^+} is tangent to Sigma on
// (x3-3)^2 + (x4-3)^2 = 4.
PwsSystem ambiguous() {
  PwsSystem sys;
  sys.name = "ambiguous";
  sys.dim = 4;
  canonical_surfaces(sys);
  sys.fields[0] = [](const Vec& x, Vec& out) {
    out[0] = 0.5;
    out[1] = 1.0;
    out[2] = -x[2] + 0.5 * x[3];
    out[3] = x[3];
  };
  sys.fields[1] = [](const Vec& x, Vec& out) {
    out[0] = 1.0;
    out[1] = 0.5;
    out[2] = -x[2] + 0.5 * x[3];
    out[3] = x[3];
  };
  sys.fields[2] = [](const Vec& x, Vec& out) {
    const double a = x[2] - 3.0;
    const double b = x[3] - 3.0;
    out[0] = -a * a - b * b + 5.0;
    out[1] = 1.0;
    out[2] = -x[2] + 28.0 * x[3];
    out[3] = x[3];
  };
  sys.fields[3] = [](const Vec& x, Vec& out) {
    out[0] = -1.0;
    out[1] = -1.0;
    out[2] = -x[2] + 4.0 * x[3];
    out[3] = x[3];
  };
  return sys;
}

// Synthetic nodally attractive system: columns (1,1), (1,-1), (-1,1), (-1,-1).
PwsSystem symmetric() {
  PwsSystem sys;
  sys.name = "symmetric";
  sys.dim = 3;
  canonical_surfaces(sys);
  static constexpr double cols[4][2] = {{1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
  for (int j = 0; j < 4; ++j) {
    sys.fields[static_cast<size_t>(j)] = [j](const Vec&, Vec& out) {
      out[0] = cols[j][0];
      out[1] = cols[j][1];
      out[2] = 1.0;
    };
  }
  return sys;
}

std::string num(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

Vec make_vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double d : v) out[k++] = d;
  return out;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"tangential", "nontangential", "spiral", "ambiguous", "symmetric"};
}

PresetInfo preset_info(const std::string& name, const PresetParams& overrides) {
  PresetInfo info;
  info.name = name;
  if (name == "tangential") {
    info.params = {{"rho", 2.0}};
    reject_unknown(info.params, overrides, name);
    const double rho = take(info.params, overrides, "rho");
    info.dim = 4;
    info.summary = "loss of attractivity through a curve of potential tangential exit points";
    info.validity_domain = "0.775<=x3^2+x4^2<=2.775 (|w| <= 1)";
    info.exit_locus = "x3^2+x4^2=" + num(rho);
    info.locus_value = rho;
    info.slow_coordinate_label = "x3^2+x4^2";
    info.default_ic = make_vec({1e-4, 1e-4, 0.0, std::sqrt(1.7)});
    info.default_t_end = 0.5;
  } else if (name == "nontangential") {
    info.params = {{"exit", 3.0}};
    reject_unknown(info.params, overrides, name);
    const double exit = take(info.params, overrides, "exit");
    info.dim = 3;
    info.summary = "loss of attractivity through a potential non-tangential exit point into R1";
    info.validity_domain = "-2<=x3<=8 (|w| <= 1)";
    info.exit_locus = "x3=" + num(exit);
    info.locus_value = exit;
    info.slow_coordinate_label = "x3";
    info.default_ic = make_vec({1e-5, 1e-5, 0.0});
    info.default_t_end = 4.0;
  } else if (name == "spiral") {
    info.params = {{"exit", 1.0}};
    reject_unknown(info.params, overrides, name);
    const double exit = take(info.params, overrides, "exit");
    info.dim = 3;
    info.summary = "spirally attractive Sigma losing attractivity when the spiral ratio reaches 1";
    info.validity_domain = "|x3| <= 3 (|w| <= 1)";
    info.exit_locus = "x3=" + num(exit);
    info.locus_value = exit;
    info.slow_coordinate_label = "x3";
    info.default_ic = make_vec({1e-6, 1e-6, 0.5});
    info.default_t_end = 1.5;
  } else if (name == "ambiguous") {
    reject_unknown(info.params, overrides, name);
    info.dim = 4;
    info.summary = "one-parameter family of Filippov sliding fields on Sigma";
    info.validity_domain = "(x3-3)^2+(x4-3)^2 <= 6 (first component of f3 within [-1, 5])";
    info.exit_locus = "(x3-3)^2+(x4-3)^2=4";
    info.locus_value = 4.0;
    info.slow_coordinate_label = "(x3-3)^2+(x4-3)^2";
    info.default_ic = make_vec({1e-2, 1e-2, 3.0, 0.9});
    info.default_t_end = 0.3;
  } else if (name == "symmetric") {
    reject_unknown(info.params, overrides, name);
    info.dim = 3;
    info.summary = "synthetic nodally attractive system with symmetric projections";
    info.validity_domain = "all x";
    info.exit_locus = "none";
    info.locus_value = std::numeric_limits<double>::quiet_NaN();
    info.slow_coordinate_label = "x3";
    info.default_ic = make_vec({1e-3, 1e-3, 0.0});
    info.default_t_end = 1.0;
  } else {
    throw Error(ErrorCode::NotFound, "unknown preset '" + name + "'");
  }
  return info;
}

PwsSystem load_preset(const std::string& name, const PresetParams& overrides) {
  const PresetInfo info = preset_info(name, overrides);
  if (name == "tangential") return tangential(info.params.at("rho"));
  if (name == "nontangential") return nontangential(info.params.at("exit"));
  if (name == "spiral") return spiral(info.params.at("exit"));
  if (name == "ambiguous") return ambiguous();
  return symmetric();
}

double slow_coordinate(const std::string& preset, const Vec& x) {
  if (preset == "tangential") return x[2] * x[2] + x[3] * x[3];
  if (preset == "ambiguous") {
    const double a = x[2] - 3.0;
    const double b = x[3] - 3.0;
    return a * a + b * b;
  }
  if (x.size() < 3) throw Error(ErrorCode::InvalidInput, "slow_coordinate: state has no slow component");
  return x[2];
}

}  // namespace pws
