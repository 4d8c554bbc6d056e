#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pws/filippov.hpp"
#include "reference_fields.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace pws;

namespace {

Vec vec(std::initializer_list<double> c) { return ref::v(c); }

WMatrix wmat(std::initializer_list<double> row1, std::initializer_list<double> row2) {
  WMatrix w;
  int j = 0;
  for (double d : row1) w(0, j++) = d;
  j = 0;
  for (double d : row2) w(1, j++) = d;
  return w;
}

const WMatrix kSymmetric = wmat({1, 1, -1, -1}, {1, -1, 1, -1});

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidInput;
}

bool contains(const std::vector<HalfSurface>& v, HalfSurface s) { return std::find(v.begin(), v.end(), s) != v.end(); }

// Random W with the sign pattern w1 = (+,+,+,-), w2 = (-,-,+,-).
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

// Sliding on x2 = 0, x1 > 0 (fields 3 and 4) moves toward x1 = 0.
bool sigma2_plus_toward(const WMatrix& w) { return w(1, 2) * w(0, 3) - w(1, 3) * w(0, 2) < 0; }

PwsSystem constant_system(const std::array<Vec, 4>& f) {
  PwsSystem s;
  s.name = "const";
  s.dim = static_cast<int>(f[0].size());
  for (int j = 0; j < 4; ++j) {
    const Vec fj = f[static_cast<std::size_t>(j)];
    s.fields[static_cast<std::size_t>(j)] = [fj](const Vec&, Vec& out) { out = fj; };
  }
  s.surfaces[0] = [](const Vec& x) { return x[0]; };
  s.surfaces[1] = [](const Vec& x) { return x[1]; };
  s.canonical = true;
  return s;
}

}  // namespace

TEST_CASE("codim1_sliding examples") {
  const Vec e2 = vec({0, 1, 0});
  auto r = codim1_sliding(vec({1, 2, 0}), vec({5, -2, 1}), e2);
  CHECK(r.alpha == doctest::Approx(0.5));

  // nontangential preset on x2 = 0, x1 > 0: f3 below, f4 above
  const auto f = ref::nontangential(vec({0, 0, 0}));
  r = codim1_sliding(f[2], f[3], e2);
  CHECK(r.alpha == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK((r.field - vec({-0.6, 0, 1})).norm() <= 1e-14);
  CHECK(std::abs(e2.dot(r.field)) <= 1e-12);

  r = codim1_sliding(vec({3, 0, 1}), vec({1, -1, 2}), e2);
  CHECK(r.alpha == 0.0);
  CHECK((r.field - vec({3, 0, 1})).norm() == 0.0);

  CHECK(code_of([&] { codim1_sliding(vec({0, 1, 0}), vec({0, 1, 1}), e2); }) == ErrorCode::DegenerateSliding);
  CHECK(code_of([&] { codim1_sliding(vec({0, 1, 0}), vec({0, 2, 1}), e2); }) == ErrorCode::NoSliding);
}

TEST_CASE("codim1_sliding: random attractive pairs are tangent") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 200; ++trial) {
    Vec g = vec({u(rng), u(rng), u(rng), u(rng)});
    Vec fa = vec({u(rng), u(rng), u(rng), u(rng)});
    Vec fb = vec({u(rng), u(rng), u(rng), u(rng)});
    if (g.dot(fa) < 0) fa = -fa;
    if (g.dot(fb) > 0) fb = -fb;
    if (g.dot(fa) < 1e-3 || g.dot(fb) > -1e-3) continue;
    const auto r = codim1_sliding(fa, fb, g);
    CHECK(r.alpha >= 0.0);
    CHECK(r.alpha <= 1.0);
    CHECK(std::abs(g.dot(r.field)) <= 1e-12);
  }
}

TEST_CASE("bilinear_coeffs examples") {
  auto r = bilinear_coeffs(make_table(kSymmetric));
  CHECK(r.alpha == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.beta == doctest::Approx(0.5).epsilon(1e-12));

  // nontangential preset at x3 = 0 reduces to alpha(1-beta) = 1/3, 6 beta^2 - 19 beta + 7 = 0
  const WMatrix w = ref::w_of(ref::nontangential(vec({0, 0, 0})));
  r = bilinear_coeffs(make_table(w));
  const double beta = (19.0 - std::sqrt(193.0)) / 12.0;
  const double alpha = 1.0 / (3.0 * (1.0 - beta));
  CHECK(r.beta == doctest::Approx(beta).epsilon(1e-12));
  CHECK(r.alpha == doctest::Approx(alpha).epsilon(1e-12));
  CHECK(r.alpha == doctest::Approx(0.5804).epsilon(1e-4));
  CHECK(r.beta == doctest::Approx(0.4257).epsilon(1e-4));
  CHECK(bilinear_g(w, r.alpha, r.beta).lpNorm<Eigen::Infinity>() < 1e-12);

  // ambiguous preset on its circle, slow point (3, 1): double root on the edge alpha = 1
  r = bilinear_coeffs(make_table(ref::w_of(ref::ambiguous(vec({0, 0, 3, 1})))));
  CHECK(r.alpha == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(r.beta == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("bilinear_coeffs errors") {
  CHECK(code_of([] { bilinear_coeffs(make_table(wmat({1, 1, 2, 1}, {1, -1, 1, -1}))); }) ==
        ErrorCode::NoEquilibrium);
  // tangential preset between the exit circle and the fold has two interior roots
  const WMatrix w = ref::w_of(ref::tangential(vec({0, 0, 0, std::sqrt(2.1)})));
  CHECK(bilinear_roots(w).size() >= 2);
  CHECK(code_of([&] { bilinear_coeffs(make_table(w)); }) == ErrorCode::AmbiguousRoots);
}

TEST_CASE("bilinear g and its Jacobian") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1, 1), p(0, 1);
  for (int trial = 0; trial < 100; ++trial) {
    WMatrix w;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 4; ++j) w(i, j) = u(rng);
    const double a = p(rng), b = p(rng);
    const Eigen::Vector4d lam(
        (1 - a) * (1 - b), (1 - a) * b, a * (1 - b), a * b);
    CHECK((bilinear_lambdas(a, b) - lam).norm() <= 1e-15);
    CHECK((bilinear_g(w, a, b) - w * lam).norm() <= 1e-14);
    const double h = 1e-6;
    Eigen::Matrix2d fd;
    fd.col(0) = (bilinear_g(w, a + h, b) - bilinear_g(w, a - h, b)) / (2 * h);
    fd.col(1) = (bilinear_g(w, a, b + h) - bilinear_g(w, a, b - h)) / (2 * h);
    CHECK((bilinear_g_jacobian(w, a, b) - fd).norm() <= 1e-8);
  }
}

TEST_CASE("moments_coeffs examples") {
  auto sel = moments_coeffs(make_table(kSymmetric));
  for (int i = 0; i < 4; ++i) CHECK(sel.lambdas[i] == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(sel.admissible);

  // spiral preset at x3 = 0.5 against an independent dense solve
  const WMatrix w = ref::w_of(ref::spiral(vec({0, 0, 0.5})));
  Eigen::Matrix4d a;
  a.row(0) = w.row(0);
  a.row(1) = w.row(1);
  a.row(2).setOnes();
  a.row(3) << w.col(0).norm(), -w.col(1).norm(), -w.col(2).norm(), w.col(3).norm();
  const Eigen::Vector4d oracle = a.colPivHouseholderQr().solve(Eigen::Vector4d(0, 0, 1, 0));
  sel = moments_coeffs(make_table(w));
  CHECK((sel.lambdas - oracle).norm() <= 1e-12);
  CHECK((a * sel.lambdas - Eigen::Vector4d(0, 0, 1, 0)).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK(sel.residual < 1e-12);

  // zero column: still the exact solution of the linear system
  const WMatrix wz = wmat({1, 0, -1, -2}, {1, 0, 2, -1});
  a.row(0) = wz.row(0);
  a.row(1) = wz.row(1);
  a.row(2).setOnes();
  a.row(3) << wz.col(0).norm(), 0.0, -wz.col(2).norm(), wz.col(3).norm();
  sel = moments_coeffs(make_table(wz));
  CHECK((a * sel.lambdas - Eigen::Vector4d(0, 0, 1, 0)).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("moments_coeffs singular and inadmissible cases") {
  // all columns equal: projection rows are multiples of the sum row
  CHECK(code_of([] { moments_coeffs(make_table(wmat({1, 1, 1, 1}, {1, 1, 1, 1}))); }) == ErrorCode::SingularSystem);
  // nontangential preset past its exit: moments weights go negative
  const auto sel = moments_coeffs(make_table(ref::w_of(ref::nontangential(vec({0, 0, 5})))));
  CHECK(sel.residual < 1e-12);
  CHECK(sel.admissible == (sel.lambdas.minCoeff() >= -1e-12));
}

TEST_CASE("selections satisfy the sliding conditions") {
  std::mt19937_64 rng(21);
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const WMatrix w = table_one(rng);
    if (!sigma2_plus_toward(w)) continue;
    ++checked;
    const auto r = bilinear_coeffs(make_table(w));
    const Eigen::Vector4d lam = bilinear_lambdas(r.alpha, r.beta);
    CHECK((w * lam).lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK(std::abs(lam.sum() - 1) <= 1e-12);
    CHECK(lam.minCoeff() >= -1e-12);
    const auto m = moments_coeffs(make_table(w));
    CHECK((w * m.lambdas).lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK(std::abs(m.lambdas.sum() - 1) <= 1e-12);
  }
  CHECK(checked > 50);

  const PwsSystem sys = load_preset("nontangential");
  const Vec x = vec({0, 0, 1.2});
  const auto sb = bilinear_selection(sys, x);
  REQUIRE(sb.alpha_beta.has_value());
  CHECK((sb.lambdas - bilinear_lambdas(sb.alpha_beta->first, sb.alpha_beta->second)).norm() == 0);
  CHECK(sb.residual <= 1e-9);
  CHECK(sb.field[2] == doctest::Approx(1.0));
  const auto sm = moments_selection(sys, x);
  CHECK(sm.residual <= 1e-9);
  CHECK(sm.field[2] == doctest::Approx(1.0));
}

TEST_CASE("selections are invariant under positive scaling of the fields") {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> c(0.01, 100.0);
  for (int trial = 0; trial < 100; ++trial) {
    const WMatrix w = table_one(rng);
    if (!sigma2_plus_toward(w)) continue;
    const double s = c(rng);
    const auto a = bilinear_coeffs(make_table(w));
    const auto b = bilinear_coeffs(make_table(s * w));
    CHECK(std::abs(a.alpha - b.alpha) <= 1e-12);
    CHECK(std::abs(a.beta - b.beta) <= 1e-12);
    const auto ma = moments_coeffs(make_table(w));
    const auto mb = moments_coeffs(make_table(s * w));
    CHECK((ma.lambdas - mb.lambdas).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
}

TEST_CASE("moments field aligns with the exit sliding field on the exit circle") {
  const PwsSystem sys = load_preset("tangential");
  for (double theta : {0.3, 1.2, 2.0, 4.0}) {
    const Vec x = vec({0, 0, std::sqrt(2.0) * std::cos(theta), std::sqrt(2.0) * std::sin(theta)});
    const auto f = ref::tangential(x);
    const auto exit = codim1_sliding(f[0], f[2], vec({1, 0, 0, 0}));  // sliding on x1 = 0, x2 < 0
    const auto m = moments_selection(sys, x);
    const double cosang = m.field.dot(exit.field) / (m.field.norm() * exit.field.norm());
    const double angle = std::acos(std::clamp(cosang, -1.0, 1.0));
    CHECK(angle < 1e-6);
  }
}

TEST_CASE("classify_attractivity examples") {
  auto c = classify_attractivity(make_table(ref::w_of(ref::nontangential(vec({0, 0, 0})))));
  CHECK(c.kind == AttractivityKind::AttractiveUponSliding);
  CHECK(c.surfaces.size() == 2);
  CHECK(contains(c.surfaces, HalfSurface::Sigma1Plus));
  CHECK(contains(c.surfaces, HalfSurface::Sigma2Plus));

  c = classify_attractivity(make_table(ref::w_of(ref::spiral(vec({0, 0, 0.5})))));
  CHECK(c.kind == AttractivityKind::SpirallyAttractive);
  REQUIRE(c.spiral_ratio.has_value());
  CHECK(*c.spiral_ratio == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(c.surfaces.empty());
  CHECK(c.orientation == 1);

  c = classify_attractivity(make_table(ref::w_of(ref::spiral(vec({0, 0, 2.0})))));
  CHECK(c.kind == AttractivityKind::NotAttractive);
  REQUIRE(c.spiral_ratio.has_value());
  CHECK(*c.spiral_ratio == doctest::Approx(2.0).epsilon(1e-14));

  c = classify_attractivity(make_table(kSymmetric));
  CHECK(c.kind == AttractivityKind::NodallyAttractive);
  CHECK(c.surfaces.size() == 4);
  CHECK_FALSE(c.non_generic);
}

TEST_CASE("spiral ratio reduces to x3 on the spiral preset, orientation flips with the fields") {
  for (double x3 : {0.1, 0.5, 0.99, 1.5}) {
    const WMatrix w = ref::w_of(ref::spiral(vec({0, 0, x3})));
    CHECK(spiral_ratio(w) == doctest::Approx(x3).epsilon(1e-14));
    CHECK(rotation_orientation(w) == 1);
    CHECK(rotation_orientation(-w) == -1);
  }
  CHECK(rotation_orientation(kSymmetric) == 0);
}

TEST_CASE("classify_attractivity on random attracting sign configurations") {
  std::mt19937_64 rng(1234);
  int with_both = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const WMatrix w = table_one(rng);
    const auto c = classify_attractivity(make_table(w));
    CHECK(c.kind == AttractivityKind::AttractiveUponSliding);
    CHECK(contains(c.surfaces, HalfSurface::Sigma1Plus));
    CHECK_FALSE(contains(c.surfaces, HalfSurface::Sigma1Minus));
    CHECK_FALSE(contains(c.surfaces, HalfSurface::Sigma2Minus));
    CHECK(contains(c.surfaces, HalfSurface::Sigma2Plus) == sigma2_plus_toward(w));
    with_both += sigma2_plus_toward(w) ? 1 : 0;
  }
  CHECK(with_both > 100);
}

TEST_CASE("zero projections are flagged non-generic") {
  const auto c = classify_attractivity(make_table(wmat({1, 0, -1, -1}, {1, -1, 1, -1})));
  CHECK(c.non_generic);
}

TEST_CASE("attractive_sliding on individual half-surfaces") {
  const WMatrix w = ref::w_of(ref::nontangential(vec({0, 0, 0})));
  double alpha = -1;
  CHECK(attractive_sliding(w, HalfSurface::Sigma2Plus, &alpha));
  CHECK(alpha == doctest::Approx(2.0 / 3.0));
  CHECK_FALSE(attractive_sliding(w, HalfSurface::Sigma1Minus));
  CHECK(sliding_normal_component(w, HalfSurface::Sigma2Plus) == doctest::Approx(-0.6));
}

TEST_CASE("detect_potential_exit examples") {
  const PwsSystem tang = load_preset("tangential");
  const double x3 = 0.5, x4 = std::sqrt(2.0 - 0.25);
  const Vec slow = vec({-0.4 * x3 + x4, -0.4 * x3 + 0.8 * x4});
  auto c = detect_potential_exit(tang, vec({0, 0, x3, x4}), slow);
  CHECK(c.kind == ExitClassKind::TangentialExit);
  CHECK(c.surface == HalfSurface::Sigma1Minus);
  CHECK(c.first_order);
  // the full-state probe gives the same answer
  c = detect_potential_exit(tang, vec({0, 0, x3, x4}), vec({0, 0, slow[0], slow[1]}));
  CHECK(c.kind == ExitClassKind::TangentialExit);
  CHECK(c.first_order);

  c = detect_potential_exit(load_preset("nontangential"), vec({0, 0, 3}), vec({1}));
  CHECK(c.kind == ExitClassKind::NonTangentialExit);
  CHECK(c.region == Region::R1);
  CHECK(c.first_order);

  c = detect_potential_exit(load_preset("spiral"), vec({0, 0, 1}), vec({1}));
  CHECK(c.kind == ExitClassKind::SpiralExit);
  CHECK(c.first_order);

  c = detect_potential_exit(load_preset("spiral"), vec({0, 0, 0.5}), vec({1}));
  CHECK(c.kind == ExitClassKind::None);
  // a probe that does not move the slow point is not first order
  c = detect_potential_exit(load_preset("nontangential"), vec({0, 0, 3}), Vec());
  CHECK(c.kind == ExitClassKind::NonTangentialExit);
  CHECK_FALSE(c.first_order);
}

TEST_CASE("detect_potential_exit errors") {
  CHECK(code_of([] { detect_potential_exit(load_preset("spiral"), vec({1e-3, 0, 1}), vec({1})); }) ==
        ErrorCode::Precondition);
  // f1 tangent to x1 = 0 leaving through x2 < 0, f4 tangent to x2 = 0 leaving through x1 > 0
  const PwsSystem sys = constant_system({vec({0, -1, 1}), vec({1, -1, 1}), vec({-1, 1, 1}), vec({1, 0, 1})});
  CHECK(code_of([&] { detect_potential_exit(sys, vec({0, 0, 0}), vec({1})); }) == ErrorCode::NonGenericPoint);
}
