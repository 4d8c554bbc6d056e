#pragma once

#include "pws/common.hpp"

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace pws {

/// Evaluates a smooth vector field into `out` (already sized to the state dimension).
using FieldFn = std::function<void(const Vec& x, Vec& out)>;
using SurfaceFn = std::function<double(const Vec& x)>;
using GradientFn = std::function<void(const Vec& x, Vec& out)>;

/// Region labels follow the sign pattern of (h1, h2):
/// R1 (-,-), R2 (-,+), R3 (+,-), R4 (+,+).
enum class Region { R1, R2, R3, R4, OnSigma1, OnSigma2, OnSigma };

const char* to_string(Region r);
std::optional<Region> region_from_string(std::string_view s);

/// Index 0..3 of the open region, or -1 for the On* labels.
int region_index(Region r);
Region region_from_index(int j);
bool is_open_region(Region r);

/// The four half-surfaces of Sigma_1 and Sigma_2 split by the sign of the other h.
enum class HalfSurface { Sigma1Minus, Sigma1Plus, Sigma2Minus, Sigma2Plus };
const char* to_string(HalfSurface s);
std::optional<HalfSurface> half_surface_from_string(std::string_view s);

/// Side (+1/-1) that region j (0-based) occupies with respect to surface i (0-based).
int region_side(int region, int surface);

/// A piecewise-smooth system with four regional fields separated by h1 = 0 and h2 = 0.
struct PwsSystem {
  std::string name;
  int dim = 0;
  std::array<FieldFn, 4> fields;
  std::array<SurfaceFn, 2> surfaces;
  /// Optional exact gradients; empty entries fall back to central differences.
  std::array<GradientFn, 2> gradients;
  /// True when h1(x) = x1 and h2(x) = x2.
  bool canonical = false;

  Vec field(int j, const Vec& x) const;
  void field_into(int j, const Vec& x, Vec& out) const { fields[static_cast<size_t>(j)](x, out); }
  double h(int i, const Vec& x) const { return surfaces[static_cast<size_t>(i)](x); }
  Vec grad_h(int i, const Vec& x) const;
};

/// Central difference gradient with step 1e-6 * max(1, |x|).
Vec finite_difference_gradient(const SurfaceFn& h, const Vec& x);

Region classify_region(const PwsSystem& sys, const Vec& x, double tol = 0.0);

/// w(i, j) = grad h_i(x)^T f_j(x), i in {0,1}, j in {0..3}.
struct ProjectionTable {
  Eigen::Matrix<double, 2, 4> w = Eigen::Matrix<double, 2, 4>::Zero();
  Vec point;

  double operator()(int i, int j) const { return w(i, j); }
};

ProjectionTable projections(const PwsSystem& sys, const Vec& x);

/// Builds a table directly from entries; used for synthetic configurations.
ProjectionTable make_table(const Eigen::Matrix<double, 2, 4>& w);

/// Minimum 2x2 Gram determinant of (grad h1, grad h2) over the sample points.
double min_gram_determinant(const PwsSystem& sys, const std::vector<Vec>& samples);
void check_transversality(const PwsSystem& sys, const std::vector<Vec>& samples);

// ---------------------------------------------------------------------------
// Presets

using PresetParams = std::map<std::string, double>;

/// Static description of a preset: defaults used by the CLI and the experiments.
struct PresetInfo {
  std::string name;
  int dim = 0;
  std::string summary;
  std::string validity_domain;
  std::string exit_locus;
  /// Value of the slow coordinate on the exit locus (NaN when there is none).
  double locus_value = 0.0;
  std::string slow_coordinate_label;
  Vec default_ic;
  double default_t_end = 1.0;
  PresetParams params;
};

std::vector<std::string> preset_names();
PresetInfo preset_info(const std::string& name, const PresetParams& overrides = {});
PwsSystem load_preset(const std::string& name, const PresetParams& overrides = {});

/// Scalar summary of the slow state used when reporting exits
/// (x3 for three-dimensional presets, x3^2 + x4^2 for the tangential preset).
double slow_coordinate(const std::string& preset, const Vec& x);

}  // namespace pws
