#include <gtest/gtest.h>

#include <numbers>

#include "cdh/quadrature.hpp"
#include "support.hpp"

using namespace cdh;
using cdh::test::max_diff;

namespace {

constexpr double pi = std::numbers::pi;

// sum_m (-1)^m x_m dx_0 ^ .. (omit m) .. ^ dx_{d-1}; its differential is
// d times the volume form, so its outward sphere integral is d V_d r^d.
Form<double> euler_form(const std::vector<double>& x) {
  const int d = static_cast<int>(x.size());
  Form<double> f(0, d);
  for (int m = 0; m < d; ++m) {
    std::vector<int> idx;
    for (int j = 0; j < d; ++j)
      if (j != m) idx.push_back(j);
    f += Form<double>::monomial(Num::real(0, (m % 2 ? -1.0 : 1.0) * x[m]), d, idx);
  }
  return f;
}

Num integrate_real_form(const std::function<Form<double>(const std::vector<double>&)>& field, const QuadratureGrid& g) {
  return integrate_nodes([&](const std::vector<double>& x, const Eigen::MatrixXd& J) { return pullback_top(field(x), J); }, g, 0);
}

Num constant_integrand(const QuadratureGrid& g) {
  return integrate_nodes([](const std::vector<double>&, const Eigen::MatrixXd& J) { return Num::real(0, detail::surface_element(J)); }, g, 0);
}

}  // namespace

TEST(Quadrature, GaussLegendreExactness) {
  for (int n : {1, 2, 5, 12, 33}) {
    Rule1D r = gauss_legendre(n, -0.5, 2.0);
    for (int k = 0; k <= 2 * n - 1; ++k) {
      double s = 0;
      for (std::size_t i = 0; i < r.x.size(); ++i) s += r.w[i] * std::pow(r.x[i], k);
      double exact = (std::pow(2.0, k + 1) - std::pow(-0.5, k + 1)) / (k + 1);
      EXPECT_NEAR(s, exact, 1e-12 * std::max(1.0, std::abs(exact))) << n << " " << k;
    }
  }
}

TEST(Quadrature, TrapezoidSpectralConvergence) {
  // int_0^1 dt / (a - cos 2 pi t) = 1 / sqrt(a^2 - 1)
  const double a = 1.001, exact = 1.0 / std::sqrt(a * a - 1);
  auto err = [&](int n) {
    Rule1D r = trapezoid_periodic(n, 0.0, 1.0);
    double s = 0;
    for (std::size_t i = 0; i < r.x.size(); ++i) s += r.w[i] / (a - std::cos(2 * pi * r.x[i]));
    return std::abs(s - exact);
  };
  EXPECT_LT(err(512), 1e-8 * exact);
  EXPECT_LT(err(512) / err(256), 1e-2);
}

TEST(Quadrature, SphereAreas) {
  EXPECT_NEAR(constant_integrand(sphere_grid(4, {0, 0, 0, 0}, 1.0, 12)).re(), 2 * pi * pi, 1e-12);
  EXPECT_NEAR(constant_integrand(sphere_grid(4, {0, 0, 0, 0}, 1.0, 10, false)).re(), 2 * pi * pi, 1e-10);
  EXPECT_NEAR(constant_integrand(sphere_grid(8, std::vector<double>(8, 0.0), 1.0, 14, true, 4)).re(), pi * pi * pi * pi / 3, 1e-10);
  EXPECT_NEAR(constant_integrand(sphere_grid(4, {1, 2, 0, 0}, 0.5, 12)).re(), 2 * pi * pi / 8, 1e-12);
  // Parameter-domain measure of the Hopf chart.
  EXPECT_NEAR(sphere_grid(4, {0, 0, 0, 0}, 1.0, 6).measure(), pi / 2 * 4 * pi * pi, 1e-12);
}

TEST(Quadrature, SphereOrientationIsOutward) {
  const double V4 = pi * pi / 2, V8 = std::pow(pi, 4) / 24;
  for (bool hopf : {true, false}) {
    Num s = integrate_real_form(euler_form, sphere_grid(4, {0, 0, 0, 0}, 1.0, 10, hopf));
    EXPECT_NEAR(s.re(), 4 * V4, 1e-10) << hopf;
  }
  Num s8 = integrate_real_form(euler_form, sphere_grid(8, std::vector<double>(8, 0.0), 1.0, 10, true, 4));
  EXPECT_NEAR(s8.re(), 8 * V8, 1e-9);
  Num s2 = integrate_real_form(euler_form, sphere_grid(2, {0, 0}, 1.0, 16));
  EXPECT_NEAR(s2.re(), 2 * pi, 1e-12);
}

TEST(Quadrature, BallVolumes) {
  EXPECT_NEAR(ball_grid(4, {0, 0, 0, 0}, 1.0, 8, 12).measure(), pi * pi / 2, 1e-10);
  EXPECT_NEAR(ball_grid(8, std::vector<double>(8, 0.0), 1.0, 8, 14, 4).measure(), std::pow(pi, 4) / 24, 1e-8);
  // Even-dimensional ball volumes (2 pi)^k / (2k)!!
  for (int k : {2, 4}) EXPECT_NEAR((std::pow(2 * pi, k) / double_factorial(2 * k)), k == 2 ? pi * pi / 2 : std::pow(pi, 4) / 24, 1e-14);
}

TEST(Quadrature, MonteCarloBallVolume) {
  McResult r = rqmc_ball_volume(8, 1 << 14, 16, 1234);
  EXPECT_NEAR(r.mean, std::pow(pi, 4) / 24, 1e-3);
  EXPECT_LT(r.std_error, 1e-3);
  EXPECT_LT(std::abs(r.mean - std::pow(pi, 4) / 24), 5 * r.std_error + 1e-12);
  McResult again = rqmc_ball_volume(8, 1 << 14, 16, 1234);
  EXPECT_EQ(r.mean, again.mean);
  EXPECT_EQ(r.seed, 1234u);
}

TEST(Quadrature, MonteCarloSecondMoment) {
  // int_B |x|^2 = d / (d + 2) V_d
  auto sq = [](const std::vector<double>& x) {
    double s = 0;
    for (double c : x) s += c * c;
    return s;
  };
  const double v5 = 8 * pi * pi / 15, v8 = std::pow(pi, 4) / 24;
  for (auto [d, v] : {std::pair{5, v5}, std::pair{8, v8}, std::pair{4, pi * pi / 2}}) {
    McResult r = rqmc_ball_integral(d, sq, 1 << 12, 8, 7);
    EXPECT_NEAR(r.mean, d * v / (d + 2), 6 * r.std_error + 1e-9) << d;
    EXPECT_LT(r.std_error, 5e-3) << d;
  }
}

TEST(Quadrature, PoleCentredVolumeGrid) {
  std::vector<double> c{0, 0, 0, 0}, pole{0.3, -0.2, 0.1, 0.0};
  auto reach = [&](const std::vector<double>& w) { return ball_reach(pole, c, 1.0, w); };
  QuadratureGrid g = polar_volume_grid(4, pole, reach, 1e-6, 8, 10);
  // Volume minus the excised ball of radius delta.
  EXPECT_NEAR(g.measure(), pi * pi / 2 - pi * pi / 2 * 1e-24, 1e-9);
  EXPECT_NEAR(g.excision_bound, 2 * pi * pi * 1e-6, 1e-12);
  // r^{-3} singular integrand stays bounded after the polar measure.
  double s = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    double r2 = 0;
    for (int m = 0; m < 4; ++m) r2 += (g.nodes[i][m] - pole[m]) * (g.nodes[i][m] - pole[m]);
    s += g.weights[i] / std::pow(r2, 1.5);
  }
  // int_B |x - pole|^{-3} dx = int_{S^3} R(w) dS(w) - |S^3| delta.
  DirectionSet dirs = sphere_directions(4, 24);
  double expect = 0;
  for (std::size_t i = 0; i < dirs.dirs.size(); ++i) expect += dirs.weights[i] * (reach(dirs.dirs[i]) - 1e-6);
  EXPECT_NEAR(s, expect, 1e-8);
  EXPECT_THROW(polar_volume_grid(4, {0.99999999, 0, 0, 0}, [&](const std::vector<double>& w) { return ball_reach({0.99999999, 0, 0, 0}, c, 1.0, w); }, 1e-6, 4, 4), DomainError);
}

TEST(Quadrature, StarShapedBoundaryOfEllipsoid) {
  // rho = sum a_m x_m^2 - 1; the outward integral of the Euler form is
  // d vol(E) = d V_d / sqrt(prod a_m).
  std::vector<double> a{0.5, 2.0, 1.5, 0.8};
  RadialBoundary b;
  b.radius = [&](const std::vector<double>& w) {
    double q = 0;
    for (int m = 0; m < 4; ++m) q += a[m] * w[m] * w[m];
    return 1.0 / std::sqrt(q);
  };
  b.gradient = [&](const std::vector<double>& x) {
    std::vector<double> g(4);
    for (int m = 0; m < 4; ++m) g[m] = 2 * a[m] * x[m];
    return g;
  };
  double prod = a[0] * a[1] * a[2] * a[3];
  double expect = 4 * pi * pi / 2 / std::sqrt(prod);
  double prev = 1e300;
  for (int n : {4, 8, 16, 32}) {
    Num s = integrate_real_form(euler_form, star_shaped_grid(4, {0, 0, 0, 0}, b, n));
    double err = std::abs(s.re() - expect);
    EXPECT_LE(err, prev + 1e-13) << n;
    prev = err;
  }
  EXPECT_LT(prev, 1e-9);
}

TEST(Quadrature, ProductWithUnitInterval) {
  QuadratureGrid base = sphere_grid(4, {0, 0, 0, 0}, 1.0, 4);
  QuadratureGrid g = product_unit_interval(base, 3);
  EXPECT_EQ(g.size(), base.size() * 3);
  EXPECT_NEAR(g.measure(), base.measure(), 1e-12);
  std::vector<double> x;
  Eigen::MatrixXd J;
  g.map(5, x, J);
  EXPECT_EQ(x.size(), 5u);
  EXPECT_EQ(J.rows(), 5);
  EXPECT_EQ(J.cols(), 4);
  EXPECT_EQ(J(4, 3), 1.0);
  EXPECT_DOUBLE_EQ(x[4], g.nodes[5][3]);
}

TEST(Quadrature, TorusGrid) {
  QuadratureGrid g = torus_grid(3, 8);
  EXPECT_EQ(g.size(), 512u);
  EXPECT_NEAR(g.measure(), 1.0, 1e-14);
}

TEST(Quadrature, EmptyGridGivesZero) {
  QuadratureGrid g = empty_grid(4, 3);
  FormField f = [](const Vec&, const Vec&) { return Form<double>::scalar(Num::one(2), 4); };
  EXPECT_TRUE(integrate_surface(f, g, Vec{Num(2)}).is_zero());
  EXPECT_TRUE(integrate_volume(f, g, Vec{Num(2)}).is_zero());
}

TEST(Quadrature, VolumeOfZeroFieldAndVolumeForm) {
  QuadratureGrid g = ball_grid(4, {0, 0, 0, 0}, 1.0, 6, 12);
  FormField zero = [](const Vec&, const Vec&) { return Form<double>(2, 4); };
  EXPECT_TRUE(integrate_volume(zero, g, Vec{Num(2)}).is_zero());
  FormField vol = [](const Vec&, const Vec&) { return Form<double>::monomial(Num::one(2), 4, {0, 1, 2, 3}); };
  EXPECT_NEAR(integrate_volume(vol, g, Vec{Num(2)}).re(), pi * pi / 2, 1e-10);
}

TEST(Quadrature, SurfaceRejectsWrongDimensions) {
  QuadratureGrid g = sphere_grid(4, {0, 0, 0, 0}, 1.0, 3);
  FormField f = [](const Vec&, const Vec&) { return Form<double>::scalar(Num::one(2), 8); };
  EXPECT_THROW(integrate_surface(f, g, Vec{Num(2)}), DimensionMismatch);
  FormField top = [](const Vec&, const Vec&) { return Form<double>::monomial(Num::one(2), 4, {0, 1, 2, 3}); };
  EXPECT_THROW(integrate_surface(top, g, Vec{Num(2)}), MalformedIntegrand);
}

TEST(Quadrature, LineIntegrals) {
  const int p = 2;
  Num i = Num::unit(p, 1), origin(p);
  auto one = [&](const Num&) { return Num::one(p); };
  auto recip = [&](const Num& x) { return inv(x); };
  PathSpec c1 = circle_path(origin, 1.0, i, 1);
  EXPECT_LT(line_integral(one, c1, 1024).norm(), 1e-13);
  EXPECT_LT(max_diff(line_integral(recip, c1, 1024), i * (2 * pi)), 1e-8);
  EXPECT_LT(max_diff(line_integral(recip, circle_path(origin, 1.0, i, 2), 1024), i * (4 * pi)), 1e-8);
  // The plain midpoint sum carries the O(N^-2) chord error.
  double mid = max_diff(line_integral(recip, c1, 1024, LineRule::Midpoint), i * (2 * pi));
  EXPECT_NEAR(mid, 2 * pi * (1 - std::sin(pi / 1024) * 1024 / pi), 1e-10);
  EXPECT_GT(mid, 1e-6);
}

TEST(Quadrature, LineIntegralNoncommutativeOrder) {
  // f . dgamma with f = j on a loop in the (1, i) plane: j (2 pi i) != (2 pi i) j.
  const int p = 2;
  Num i = Num::unit(p, 1), j = Num::unit(p, 2);
  PathSpec c = circle_path(Num(p), 1.0, i, 1);
  Num r = line_integral([&](const Num& x) { return mul(j, inv(x)); }, c, 512);
  EXPECT_LT(max_diff(r, mul(j, i) * (2 * pi)), 1e-8);
}

TEST(Quadrature, WindingArgument) {
  const int p = 2;
  Num j = Num::unit(p, 2), k = Num::unit(p, 3), a(p, {0.3, -1.0, 0.2, 0.5});
  EXPECT_LT(max_diff(winding_argument(circle_path(a, 1.0, j, 1), 64).value, j), 1e-12);
  EXPECT_LT(max_diff(winding_argument(circle_path(a, 0.7, k, -2), 64).value, k * -2.0), 1e-12);
  EXPECT_TRUE(winding_argument(circle_path(a, 1.0, j, 0), 64).value.is_zero());
  // Few samples force doubling until each increment is below pi/4.
  WindingResult w = winding_argument(circle_path(a, 1.0, j, 3), 4);
  EXPECT_LT(max_diff(w.value, j * 3.0), 1e-12);
  EXPECT_GE(w.samples, 32);
  // Non-circular loop with varying radius.
  PathSpec wobble{a, [](double t) { return 1.0 + 0.4 * std::cos(2 * pi * t); }, [&](double) { return j; }, 1, true};
  EXPECT_LT(max_diff(winding_argument(wobble, 128).value, j), 1e-12);
  PathSpec through{a, [](double t) { return std::abs(std::cos(pi * t)); }, [&](double) { return j; }, 1, true};
  EXPECT_THROW(winding_argument(through, 64), IllConditioned);
}

TEST(Quadrature, ContinuousLogarithmAlongCircle) {
  const int p = 3;
  Num M = Num::unit(p, 5);
  PathSpec c = circle_path(Num(p), 2.0, M, 2);
  Vector<double> w;
  const int N = 64;
  for (int m = 0; m <= N; ++m) w.push_back(c(static_cast<double>(m) / N));
  Vector<double> L = continuous_ln(w);
  for (int m = 0; m <= N; ++m) {
    Num expect = M * (4 * pi * m / N);
    expect[0] = std::log(2.0);
    EXPECT_LT(max_diff(L[m], expect), 1e-12) << m;
  }
}

TEST(Quadrature, GridRefinementIsMonotone) {
  // Smooth integrand exp(x_0 + x_2 x_3) over S^3.
  double prev = 1e300, last = 0;
  std::vector<double> vals;
  for (int n : {2, 4, 8, 16, 32}) {
    Num v = integrate_nodes([](const std::vector<double>& x, const Eigen::MatrixXd& J) { return Num::real(0, std::exp(x[0] + x[2] * x[3]) * detail::surface_element(J)); }, sphere_grid(4, {0, 0, 0, 0}, 1.0, n), 0);
    vals.push_back(v.re());
  }
  last = vals.back();
  for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
    double err = std::abs(vals[i] - last);
    EXPECT_LE(err, prev + 1e-13);
    prev = err;
  }
}

TEST(Quadrature, PairwiseReductionIsDeterministic) {
  std::vector<double> v;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int i = 0; i < 1001; ++i) v.push_back(g(rng));
  EXPECT_EQ(pairwise_sum(v), pairwise_sum(v));
  double naive = 0;
  for (double x : v) naive += x;
  EXPECT_NEAR(pairwise_sum(v), naive, 1e-12);
}
