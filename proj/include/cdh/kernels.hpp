#pragma once

// Integral operators built on the kernel forms: the boundary and volume
// operators B_dU / B_U, loop and torus Cauchy formulas, Leray kernels for a
// boundary distinguishing map psi, and the dbar solver.
//
// Points of A_p^n are Vec; their real coordinates are slot-major, so slot l
// owns x_{l 2^p} .. x_{(l+1) 2^p - 1}. Scalar fields multiply kernel forms
// from the left.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cdh/algebra.hpp"
#include "cdh/expr.hpp"
#include "cdh/forms.hpp"
#include "cdh/quadrature.hpp"

namespace cdh {

using ScalarField = std::function<Num(const Vec& zeta)>;
// A_p-valued 1-form on the 2^p n real zeta coordinates.
using OneFormField = std::function<Form<double>(const Vec& zeta)>;
using RealField = std::function<double(const std::vector<double>& x)>;
using GradientField = std::function<std::vector<double>(const std::vector<double>& x)>;
using HessianField = std::function<Eigen::MatrixXd(const std::vector<double>& x)>;

// ---------------------------------------------------------------- domains

struct Domain {
  enum class Kind { Ball, StrictlyConvex };

  Kind kind = Kind::Ball;
  int p = 2;
  int n = 1;
  RealField rho;
  GradientField grad;
  HessianField hessian;
  // Ball: centre. Convex: a point with rho < 0 the boundary is star-shaped about.
  std::vector<double> interior;
  // Ball: radius. Convex: radius around `interior` enclosing U.
  double bound = 1;
  double eps0 = 0;

  int dim() const { return (1 << p) * n; }
  bool contains(const std::vector<double>& x) const { return rho(x) < 0; }

  // Distance from `from` (inside U) to dU along the unit direction w.
  double radial_root(const std::vector<double>& from, const std::vector<double>& w) const {
    if (kind == Kind::Ball) return ball_reach(from, interior, bound, w);
    if (!contains(from)) throw DomainError("radial search must start inside the domain");
    auto at = [&](double r) {
      std::vector<double> x(from);
      for (std::size_t m = 0; m < x.size(); ++m) x[m] += r * w[m];
      return rho(x);
    };
    double dist = 0;
    for (std::size_t m = 0; m < from.size(); ++m) dist += (from[m] - interior[m]) * (from[m] - interior[m]);
    double lo = 0, hi = 1.01 * (bound + std::sqrt(dist));
    if (at(hi) <= 0) throw DomainError("domain is not enclosed by its bounding ball");
    while (hi - lo > 1e-12 * std::max(1.0, hi)) {
      const double mid = 0.5 * (lo + hi);
      (at(mid) < 0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }
};

inline Domain ball_domain(int p, int n, std::vector<double> center = {}, double radius = 1.0) {
  const int N = (1 << p) * n;
  if (center.empty()) center.assign(N, 0.0);
  if (static_cast<int>(center.size()) != N) throw DimensionMismatch("ball centre has the wrong dimension");
  if (radius <= 0) throw DomainError("ball radius must be positive");
  Domain U;
  U.kind = Domain::Kind::Ball;
  U.p = p;
  U.n = n;
  U.interior = center;
  U.bound = radius;
  U.eps0 = 2;
  U.rho = [center, radius](const std::vector<double>& x) {
    double s = 0;
    for (std::size_t m = 0; m < x.size(); ++m) s += (x[m] - center[m]) * (x[m] - center[m]);
    return s - radius * radius;
  };
  U.grad = [center](const std::vector<double>& x) {
    std::vector<double> g(x.size());
    for (std::size_t m = 0; m < x.size(); ++m) g[m] = 2 * (x[m] - center[m]);
    return g;
  };
  U.hessian = [N](const std::vector<double>&) { return Eigen::MatrixXd(2 * Eigen::MatrixXd::Identity(N, N)); };
  return U;
}

// rho(x) = sum_m a_m (x_m - c_m)^2 - 1
inline Domain ellipsoid_domain(int p, int n, std::vector<double> a, std::vector<double> center = {}) {
  const int N = (1 << p) * n;
  if (center.empty()) center.assign(N, 0.0);
  if (static_cast<int>(a.size()) != N || static_cast<int>(center.size()) != N) throw DimensionMismatch("ellipsoid data has the wrong dimension");
  const double amin = *std::min_element(a.begin(), a.end());
  if (amin <= 0) throw DomainError("ellipsoid coefficients must be positive");
  Domain U;
  U.kind = Domain::Kind::StrictlyConvex;
  U.p = p;
  U.n = n;
  U.interior = center;
  U.bound = 1.0 / std::sqrt(amin);
  U.eps0 = 2 * amin;
  U.rho = [a, center](const std::vector<double>& x) {
    double s = 0;
    for (std::size_t m = 0; m < x.size(); ++m) s += a[m] * (x[m] - center[m]) * (x[m] - center[m]);
    return s - 1;
  };
  U.grad = [a, center](const std::vector<double>& x) {
    std::vector<double> g(x.size());
    for (std::size_t m = 0; m < x.size(); ++m) g[m] = 2 * a[m] * (x[m] - center[m]);
    return g;
  };
  U.hessian = [a](const std::vector<double>&) {
    Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size()));
    return Eigen::MatrixXd((2 * d).asDiagonal());
  };
  return U;
}

inline Domain convex_domain(int p, int n, RealField rho, GradientField grad, HessianField hessian, std::vector<double> interior, double bound, double eps0) {
  Domain U;
  U.kind = Domain::Kind::StrictlyConvex;
  U.p = p;
  U.n = n;
  U.rho = std::move(rho);
  U.grad = std::move(grad);
  U.hessian = std::move(hessian);
  U.interior = std::move(interior);
  U.bound = bound;
  U.eps0 = eps0;
  if (static_cast<int>(U.interior.size()) != U.dim()) throw DimensionMismatch("interior point has the wrong dimension");
  if (!U.contains(U.interior)) throw DomainError("interior point is not inside the domain");
  return U;
}

struct ConvexityReport {
  double min_eigenvalue = 0;
  std::size_t samples = 0;
  bool strict = false;
  bool meets_eps0 = false;
};

// Smallest Hessian eigenvalue over the given points.
inline ConvexityReport check_convexity(const HessianField& hessian, const std::vector<std::vector<double>>& points, double eps0, double tol = 1e-9) {
  ConvexityReport r;
  r.min_eigenvalue = std::numeric_limits<double>::infinity();
  for (const auto& x : points) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hessian(x), Eigen::EigenvaluesOnly);
    r.min_eigenvalue = std::min(r.min_eigenvalue, es.eigenvalues().minCoeff());
    ++r.samples;
  }
  r.strict = r.min_eigenvalue > tol;
  r.meets_eps0 = eps0 > 0 && r.min_eigenvalue >= eps0 - tol;
  return r;
}

// Samples boundary points and a thin shell around them.
inline ConvexityReport check_convexity(const Domain& U, int samples, std::uint64_t seed, double shell = 1e-2) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> G;
  std::vector<std::vector<double>> pts;
  const int N = U.dim();
  for (int s = 0; s < samples; ++s) {
    std::vector<double> w(N);
    double nn = 0;
    for (double& c : w) {
      c = G(rng);
      nn += c * c;
    }
    for (double& c : w) c /= std::sqrt(nn);
    const double R = U.radial_root(U.interior, w);
    for (double f : {1.0 - shell, 1.0, 1.0 + shell}) {
      std::vector<double> x(N);
      for (int m = 0; m < N; ++m) x[m] = U.interior[m] + f * R * w[m];
      pts.push_back(std::move(x));
    }
  }
  return check_convexity(U.hessian, pts, U.eps0);
}

inline void require_interior(const Domain& U, const Vec& z) {
  if (static_cast<int>(z.size()) != U.n) throw DimensionMismatch("point has the wrong number of slots");
  for (const auto& c : z)
    if (c.level() != U.p) throw LevelMismatch("point level differs from the domain level");
  if (!U.contains(to_real(z))) throw DomainError("point is not interior to the domain");
}

// v_rho(zeta)_l = sum_m (d rho / d x_{l,m}) S_m with S_m = e_m.
inline Vec v_rho(const Domain& U, const Vec& zeta) { return from_real(U.p, U.grad(to_real(zeta))); }

inline QuadratureGrid boundary_grid(const Domain& U, int nodes, int azimuth = 0) {
  const int N = U.dim();
  if (U.kind == Domain::Kind::Ball) return sphere_grid(N, U.interior, U.bound, nodes, true, azimuth);
  const Domain D = U;
  RadialBoundary b{[D](const std::vector<double>& w) { return D.radial_root(D.interior, w); }, D.grad};
  return star_shaped_grid(N, U.interior, std::move(b), nodes, true, azimuth);
}

// Polar grid about z reaching dU, with the ball |x - z| < delta excised.
inline QuadratureGrid volume_grid(const Domain& U, const Vec& z, double delta, int radial, int angular, int azimuth = 0) {
  require_interior(U, z);
  const std::vector<double> pole = to_real(z);
  const Domain D = U;
  return polar_volume_grid(U.dim(), pole, [D, pole](const std::vector<double>& w) { return D.radial_root(pole, w); }, delta, radial, angular, true, azimuth);
}

// ------------------------------------------------------- operator fields

// A lift fhat: (zeta, h) -> fhat(zeta).h with fhat(zeta).1 = f(zeta).
struct OperatorField {
  std::function<Num(const Vec& zeta, const Num& h)> apply;
  Num operator()(const Vec& zeta, const Num& h) const { return apply(zeta, h); }
};

inline OperatorField default_lift(ScalarField f) {
  return {[f = std::move(f)](const Vec& zeta, const Num& h) { return mul(h, f(zeta)); }};
}

// Largest violation of additivity, real homogeneity and fhat.1 = f over
// random directions.
inline double lift_defect(const OperatorField& F, const ScalarField& f, const Vec& zeta, int samples, std::uint64_t seed) {
  const int p = zeta.at(0).level();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> G;
  auto rnd = [&] {
    Num x(p);
    for (std::size_t m = 0; m < x.dim(); ++m) x[m] = G(rng);
    return x;
  };
  double worst = (F(zeta, Num::one(p)) - f(zeta)).norm();
  for (int s = 0; s < samples; ++s) {
    Num a = rnd(), b = rnd();
    const double t = G(rng);
    worst = std::max(worst, (F(zeta, a + b) - F(zeta, a) - F(zeta, b)).norm());
    worst = std::max(worst, (F(zeta, a * t) - F(zeta, a) * t).norm());
  }
  return worst;
}

// fhat(zeta).d(slot zeta~) = sum_m fhat(zeta).(conj e_m) dx_{slot 2^p + m}
inline OneFormField one_form_on_dzbar(OperatorField F, int p, int n, int slot = 0) {
  if (slot < 0 || slot >= n) throw DimensionMismatch("slot out of range");
  return [F = std::move(F), p, n, slot](const Vec& zeta) {
    const int d = 1 << p;
    Form<double> g(p, d * n);
    for (int m = 0; m < d; ++m) g.add(Mask{1} << (slot * d + m), F(zeta, conj(Num::unit(p, m))));
    return g;
  };
}

// dbar f = sum_s (df/d zeta~_s).d zeta~_s for an expression f.
inline OneFormField dbar_form(const Expr& f, int n) {
  if (f.arity() > n) throw DimensionMismatch("expression uses more slots than the domain");
  const int p = f.level();
  return [f, p, n](const Vec& zeta) {
    const int d = 1 << p;
    Form<double> g(p, d * n);
    for (int s = 0; s < n; ++s)
      for (int m = 0; m < d; ++m) g.add(Mask{1} << (s * d + m), d_dzbar(f, s, conj(Num::unit(p, m)), zeta));
    return g;
  };
}

inline ScalarField scalar_field(const Expr& f) {
  return [f](const Vec& zeta) { return eval(f, zeta); };
}

// ------------------------------------------------------ MB operators

// One cache per (p, n); construction dominates small integrals.
inline const ThetaCache& theta_cache(int p, int n) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::unique_ptr<ThetaCache>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{p, n}];
  if (!slot) slot = std::make_unique<ThetaCache>(p, n);
  return *slot;
}

// (B_dU f)(z) = int_{dU} f(zeta) theta_z(zeta)
inline Num mb_boundary(const ScalarField& f, const Domain& U, const Vec& z, const QuadratureGrid& g) {
  require_interior(U, z);
  const ThetaCache& tc = theta_cache(U.p, U.n);
  return integrate_surface([&](const Vec& zeta, const Vec& zz) { return tc.evaluate(to_real(zeta - zz)).left(f(zeta)); }, g, z);
}

// (B_U g)(z) = int_U g(zeta) ^ theta_z(zeta) for a 1-form g.
inline Num mb_volume(const OneFormField& g, const Domain& U, const Vec& z, const QuadratureGrid& grid) {
  require_interior(U, z);
  const ThetaCache& tc = theta_cache(U.p, U.n);
  return integrate_volume([&](const Vec& zeta, const Vec& zz) { return wedge(g(zeta), tc.evaluate(to_real(zeta - zz))); }, grid, z);
}

// ------------------------------------------------------- loop formula

// Accumulated argument of gamma - point over 2 pi (an imaginary element).
inline Num winding_about(const PathSpec& path, const Num& point, int samples) {
  const int p = path.level();
  Num acc(p);
  Num prev = path(0.0) - point;
  for (int m = 1; m <= samples; ++m) {
    Num next = path(static_cast<double>(m) / samples) - point;
    if (prev.norm() == 0.0 || next.norm() == 0.0) throw SingularKernel("path passes through the point");
    acc += ln(mul(inv(prev), next)).imag();
    prev = next;
  }
  return acc / (2 * std::numbers::pi);
}

struct LoopResult {
  Num value;
  int winding = 0;
};

// (2 pi n)^{-1} int f(zeta) (zeta - z)^{-1} d zeta with n the winding of
// the path about z in units of its direction M; the raw integral when n = 0.
inline LoopResult cauchy_loop(const std::function<Num(const Num&)>& f, const PathSpec& path, const Num& z, int samples = 1024) {
  const Num M = path.direction(0.0);
  Num w = winding_about(path, z, 4 * samples);
  LoopResult r;
  r.winding = static_cast<int>(std::lround(mul(w, conj(M))[0]));
  Num I = line_integral([&](const Num& zeta) { return mul(f(zeta), inv(zeta - z)); }, path, samples);
  r.value = r.winding == 0 ? I : I / (2 * std::numbers::pi * r.winding);
  return r;
}

// ---------------------------------------------------- torus formula

// f(z) = (2 pi)^{-m} int f(zeta_1) prod_j [(d Ln(zeta_j - zeta_{j+1})) M_j^*]
// over circles zeta_j = zeta_{j+1} + eps exp(2 pi theta_j M_j), zeta_{m+1} = z,
// M_j = i_j, m = 2^p - 1. The Ln derivative is a central difference of the
// continued logarithm.
inline Num cauchy_green_torus(const Expr& f, const Num& z, double eps, int nodes = 16, double fd_step = 1e-4) {
  const int p = z.level();
  if (p != 2) throw UnsupportedLevel("torus formula is implemented for p = 2");
  if (!is_formally_holomorphic(f)) throw Unsupported("torus route has no volume term; use the MB operators for non-holomorphic f");
  if (eps <= 0) throw DomainError("torus radius must be positive");
  const int m = (1 << p) - 1;
  const double two_pi = 2 * std::numbers::pi;
  QuadratureGrid g = torus_grid(m, nodes);
  std::vector<Num> M;
  for (int j = 1; j <= m; ++j) M.push_back(Num::unit(p, j));
  auto circle = [&](int j, double t) { return exp(M[j] * (two_pi * t)) * eps; };
  return integrate_nodes(
      [&](const std::vector<double>& th, const Eigen::MatrixXd&) {
        Num zeta = z;
        std::vector<Num> K(m);
        for (int j = m - 1; j >= 0; --j) {
          zeta = zeta + circle(j, th[j]);
          Num dln = ln(mul(inv(circle(j, th[j] - fd_step)), circle(j, th[j] + fd_step))) / (2 * fd_step);
          K[j] = mul(dln, conj(M[j]));
        }
        Num acc = eval(f, Vec{zeta});
        for (int j = 0; j < m; ++j) acc = mul(acc, K[j]);
        return acc / std::pow(two_pi, m);
      },
      g, p);
}

// -------------------------------------------------------------- Leray

struct LerayMap {
  std::function<Vec(const Vec& zeta, const Vec& z)> psi;
  std::string name;
  Vec operator()(const Vec& zeta, const Vec& z) const { return psi(zeta, z); }
};

inline LerayMap leray_difference() {
  return {[](const Vec& zeta, const Vec& z) { return zeta - z; }, "zeta-z"};
}

inline LerayMap leray_v_rho(const Domain& U) {
  return {[U](const Vec& zeta, const Vec&) { return v_rho(U, zeta); }, "v_rho"};
}

// <psi; zeta - z>, rejected when it (numerically) vanishes.
inline Num leray_pairing(const LerayMap& psi, const Vec& zeta, const Vec& z, double tol = 1e-12) {
  Num a = scalar_product(psi(zeta, z), zeta - z);
  if (a.norm() <= tol) throw SingularKernel("<psi; zeta - z> vanishes: psi is not admissible here");
  return a;
}

// lambda (zeta-z) <zeta-z; zeta-z>^{-1} + (1-lambda) psi <zeta-z; psi>^{-1}
inline Vec eta_psi(const LerayMap& psi, const Vec& zeta, const Vec& z, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw DomainError("lambda must lie in [0, 1]");
  const Vec u = zeta - z;
  const Num uu = scalar_product(u, u);
  if (uu.norm() == 0.0) throw SingularKernel("eta evaluated at its pole");
  const Vec ps = psi(zeta, z);
  const Num a = scalar_product(u, ps);
  if (a.norm() <= 1e-300) throw SingularKernel("<zeta - z; psi> vanishes");
  const Num ai = inv(a);
  Vec out;
  for (std::size_t l = 0; l < u.size(); ++l) out.push_back(u[l] * (lambda / uu[0]) + mul(ps[l], ai) * (1 - lambda));
  return out;
}

namespace detail {

// d/dx_j of a Vec-valued map of zeta by fourth-order central differences.
inline std::vector<Vec> zeta_partials(const std::function<Vec(const Vec&)>& F, const Vec& zeta, double h) {
  const int p = zeta.at(0).level();
  std::vector<double> x = to_real(zeta);
  std::vector<Vec> out;
  for (std::size_t j = 0; j < x.size(); ++j) {
    auto at = [&](double t) {
      std::vector<double> y = x;
      y[j] += t;
      return F(from_real(p, y));
    };
    Vec a = at(-2 * h), b = at(-h), c = at(h), e = at(2 * h);
    Vec d;
    for (std::size_t l = 0; l < a.size(); ++l) d.push_back((a[l] - e[l] + (c[l] - b[l]) * 8.0) / (12 * h));
    out.push_back(std::move(d));
  }
  return out;
}

// Blocks with v = conj(F_s), A = d conj(F_s) (+ extra dlambda part), C0 = d zeta~_s, B = d zeta_s.
inline Form<double> leray_block_sum(int p, int dim, const Vec& value, const std::vector<Vec>& partials, const Vec* dlambda) {
  const int d = 1 << p, n = static_cast<int>(value.size());
  std::vector<BlockData<double>> slots;
  for (int s = 0; s < n; ++s) {
    Form<double> A(p, dim);
    for (std::size_t j = 0; j < partials.size(); ++j) A.add(Mask{1} << j, conj(partials[j][s]));
    if (dlambda) A.add(Mask{1} << (dim - 1), conj((*dlambda)[s]));
    slots.push_back({conj(value[s]), d_zconj_form<double>(p, dim, s * d), d_zconj_form<double>(p, dim, s * d), d_z_form<double>(p, dim, s * d)});
    slots.back().A = A;
  }
  return assemble_blocks(slots);
}

inline double fd_step(const Vec& zeta) { return 1e-3 * std::max(1.0, norm(zeta)); }

}  // namespace detail

// phi_{zeta,z} = C'_p <psi; zeta - z>^{-2^{p-1} n} sum of psi~-block chains,
// on the zeta coordinates only.
inline Form<double> leray_phi(const LerayMap& psi, const Vec& zeta, const Vec& z) {
  const int p = zeta.at(0).level(), n = static_cast<int>(zeta.size());
  const Num a = leray_pairing(psi, zeta, z);
  auto partials = detail::zeta_partials([&](const Vec& x) { return psi(x, z); }, zeta, detail::fd_step(zeta));
  Form<double> sum = detail::leray_block_sum(p, (1 << p) * n, psi(zeta, z), partials, nullptr);
  const Num scale = pow(a, -(1 << (p - 1)) * n) * kernel_constants(p, n).c_prime;
  return sum.left(scale);
}

// phibar_{zeta,z,lambda}: eta~-blocks with (d_zeta + d_lambda); lambda is the
// last coordinate.
inline Form<double> leray_phi_bar(const LerayMap& psi, const Vec& zeta, const Vec& z, double lambda) {
  const int p = zeta.at(0).level(), n = static_cast<int>(zeta.size());
  const Vec eta = eta_psi(psi, zeta, z, lambda);
  auto partials = detail::zeta_partials([&](const Vec& x) { return eta_psi(psi, x, z, lambda); }, zeta, detail::fd_step(zeta));
  // eta is affine in lambda.
  const Vec dl = eta_psi(psi, zeta, z, 1.0) - eta_psi(psi, zeta, z, 0.0);
  return detail::leray_block_sum(p, (1 << p) * n + 1, eta, partials, &dl).scaled(kernel_constants(p, n).c_prime);
}

namespace detail {

inline std::string describe_node(const std::vector<double>& x) {
  std::ostringstream os;
  os << '(';
  for (std::size_t m = 0; m < x.size(); ++m) os << (m ? ", " : "") << x[m];
  os << ')';
  return os.str();
}

inline Form<double> embed(const Form<double>& f, int dim) {
  Form<double> r(f.level(), dim);
  for (const auto& [m, c] : f.terms()) r.add(m, c);
  return r;
}

}  // namespace detail

// (L^psi f)(z) = int_{dU} f(zeta) phi_{zeta,z}
inline Num leray_L(const ScalarField& f, const LerayMap& psi, const Domain& U, const Vec& z, const QuadratureGrid& g) {
  require_interior(U, z);
  const int N = U.dim();
  return integrate_nodes(
      [&](const std::vector<double>& x, const Eigen::MatrixXd& J) {
        const Vec zeta = from_real(U.p, std::vector<double>(x.begin(), x.begin() + N));
        try {
          return pullback_top(leray_phi(psi, zeta, z).left(f(zeta)), J);
        } catch (const SingularKernel& e) {
          throw SingularKernel(std::string(e.what()) + " at boundary node " + detail::describe_node(x));
        }
      },
      g, U.p);
}

// (R^psi g)(z) = int_{dU x [0,1]} g(zeta) ^ phibar_{zeta,z,lambda} for a 1-form
// g; `g_grid` comes from product_unit_interval over a boundary grid.
inline Num leray_R(const OneFormField& g, const LerayMap& psi, const Domain& U, const Vec& z, const QuadratureGrid& g_grid) {
  require_interior(U, z);
  const int N = U.dim();
  if (g_grid.ambient != N + 1) throw DimensionMismatch("leray_R needs a boundary x [0,1] grid");
  return integrate_nodes(
      [&](const std::vector<double>& x, const Eigen::MatrixXd& J) {
        const Vec zeta = from_real(U.p, std::vector<double>(x.begin(), x.begin() + N));
        try {
          Form<double> gz = detail::embed(g(zeta), N + 1);
          if (gz.is_zero()) return Num(U.p);
          return pullback_top(wedge(gz, leray_phi_bar(psi, zeta, z, x[N])), J);
        } catch (const SingularKernel& e) {
          throw SingularKernel(std::string(e.what()) + " at node " + detail::describe_node(x));
        }
      },
      g_grid, U.p);
}

struct ConvexitySample {
  double lhs = 0;
  double rhs = 0;
  bool holds = false;
};

// Re<v_rho(zeta); zeta - z> >= rho(zeta) - rho(z) + eps0 |zeta - z|^2 / 4
inline ConvexitySample convexity_sample(const Domain& U, const Vec& zeta, const Vec& z, double tol = 1e-12) {
  ConvexitySample s;
  s.lhs = scalar_product(v_rho(U, zeta), zeta - z)[0];
  const double d = norm(zeta - z);
  s.rhs = U.rho(to_real(zeta)) - U.rho(to_real(z)) + U.eps0 * d * d / 4;
  s.holds = s.lhs >= s.rhs - tol;
  return s;
}

// ------------------------------------------------------------- solver

namespace detail {

inline ScalarField checked_bounded(ScalarField f) {
  return [f = std::move(f)](const Vec& zeta) {
    Num v = f(zeta);
    for (double c : v.coeffs())
      if (!std::isfinite(c)) throw DomainError("right-hand side is unbounded");
    return v;
  };
}

}  // namespace detail

// u(z) = -B_U (fhat.d zeta~) with the default lift fhat.h = h f.
inline Num solve_dbar(const ScalarField& f, const Domain& U, const Vec& z, const QuadratureGrid& grid) {
  if (U.n != 1) throw Unsupported("tensor-grid dbar solver handles n = 1; use the Monte Carlo probe for n = 2");
  return -mb_volume(one_form_on_dzbar(default_lift(detail::checked_bounded(f)), U.p, 1, 0), U, z, grid);
}

struct McNum {
  Num value;
  Num std_error;
  std::size_t points = 0;
  std::uint64_t seed = 0;
};

// n = 2 probe on a ball: u(z) = -B_{U_eta} (fhat(xi, eta).d xi~) over the
// slice U_eta = {xi : (xi, eta) in U}, eta = z_2, by RQMC in polar
// coordinates about z_1.
inline McNum solve_dbar_mc(const ScalarField& f, const Domain& U, const Vec& z, std::size_t points, int replicates, std::uint64_t seed) {
  if (U.n != 2 || U.kind != Domain::Kind::Ball) throw Unsupported("Monte Carlo dbar probe handles n = 2 balls");
  require_interior(U, z);
  const int p = U.p, d = 1 << p;
  if (p != 2) throw UnsupportedLevel("Monte Carlo dbar probe is implemented for p = 2");
  const std::vector<double> c1(U.interior.begin(), U.interior.begin() + d), c2(U.interior.begin() + d, U.interior.end());
  const std::vector<double> x1 = to_real(Vec{z[0]}), x2 = to_real(Vec{z[1]});
  double q = 0;
  for (int m = 0; m < d; ++m) q += (x2[m] - c2[m]) * (x2[m] - c2[m]);
  const double R1 = std::sqrt(U.bound * U.bound - q);
  const ThetaCache& tc = theta_cache(p, 1);
  const ScalarField fb = detail::checked_bounded(f);
  const Mask top = (Mask{1} << d) - 1;
  auto value = [&](const std::vector<double>& u) {
    std::vector<double> w(d);
    const double dens = detail::cube_to_sphere(d, u.data() + 1, w.data());
    const double R = ball_reach(x1, c1, R1, w);
    const double r = u[0] * R;
    std::vector<double> xi(d), off(d);
    for (int m = 0; m < d; ++m) {
      off[m] = r * w[m];
      xi[m] = x1[m] + off[m];
    }
    const Num fx = fb(Vec{from_real(p, xi)[0], z[1]});
    Form<double> g(p, d);
    for (int m = 0; m < d; ++m) g.add(Mask{1} << m, mul(conj(Num::unit(p, m)), fx));
    return wedge(g, tc.evaluate(off)).coeff(top) * (-dens * std::pow(r, d - 1) * R);
  };
  McNum out;
  out.value = Num(p);
  out.std_error = Num(p);
  out.seed = seed;
  for (int a = 0; a < d; ++a) {
    McResult r = rqmc(d, [&](const std::vector<double>& u) { return value(u)[a]; }, points, replicates, seed);
    out.value[a] = r.mean;
    out.std_error[a] = r.std_error;
    out.points = r.points;
  }
  return out;
}

// (du/dz~).1 from real partials in slot `slot`: with the frame
// D = 1/2 d_0 + (2 (2^p - 1))^{-1} sum_{m>0} e_m d_m one has D z = 0 and
// D z~ = 1, reducing to d/d zbar for p = 1.
inline Num dbar_residual_frame(const ScalarField& u, const Vec& z, int slot = 0, double h = 1e-3) {
  const int p = z.at(0).level(), d = 1 << p;
  Num acc(p);
  for (int m = 0; m < d; ++m) {
    auto at = [&](double t) {
      Vec y = z;
      y[slot][m] += t;
      return u(y);
    };
    Num dm = (at(-2 * h) - at(2 * h) + (at(h) - at(-h)) * 8.0) / (12 * h);
    acc += m == 0 ? dm * 0.5 : mul(Num::unit(p, m), dm) / (2.0 * (d - 1));
  }
  return acc;
}

// ------------------------------------------------------------- probes

struct PshReport {
  double min_quadratic = 0;
  double min_laplacian = 0;
  double max_laplacian = 0;
  std::size_t samples = 0;
  bool strict = false;        // Hessian form > 0 on every sample
  bool subharmonic = false;   // Laplacian >= 0 on every sample
  bool strictly_subharmonic = false;
};

// Second differences of rho at the points along the directions and the
// coordinate axes.
inline PshReport plurisubharmonic_check(const RealField& rho, const std::vector<std::vector<double>>& points, const std::vector<std::vector<double>>& directions, double h = 1e-3, double tol = 1e-6) {
  PshReport r;
  r.min_quadratic = r.min_laplacian = std::numeric_limits<double>::infinity();
  r.max_laplacian = -std::numeric_limits<double>::infinity();
  auto second = [&](const std::vector<double>& x, const std::vector<double>& t) {
    std::vector<double> a = x, b = x;
    double tt = 0;
    for (std::size_t m = 0; m < x.size(); ++m) {
      a[m] += h * t[m];
      b[m] -= h * t[m];
      tt += t[m] * t[m];
    }
    return (rho(a) - 2 * rho(x) + rho(b)) / (h * h * tt);
  };
  for (const auto& x : points) {
    for (const auto& t : directions) r.min_quadratic = std::min(r.min_quadratic, second(x, t));
    double lap = 0;
    for (std::size_t m = 0; m < x.size(); ++m) {
      std::vector<double> e(x.size(), 0.0);
      e[m] = 1;
      const double s = second(x, e);
      lap += s;
      r.min_quadratic = std::min(r.min_quadratic, s);
    }
    r.min_laplacian = std::min(r.min_laplacian, lap);
    r.max_laplacian = std::max(r.max_laplacian, lap);
    ++r.samples;
  }
  r.strict = r.min_quadratic > tol;
  r.subharmonic = r.min_laplacian >= -tol;
  r.strictly_subharmonic = r.min_laplacian > tol;
  return r;
}

struct MaxModulusReport {
  double interior_max = 0;
  double boundary_max = 0;
  bool pass = false;
};

inline MaxModulusReport max_modulus_probe(const Expr& f, const Domain& U, const QuadratureGrid& interior, const QuadratureGrid& boundary, double tol = 1e-10) {
  if (U.kind != Domain::Kind::Ball) throw Unsupported("maximum modulus probe runs on balls");
  MaxModulusReport r;
  std::vector<double> x;
  Eigen::MatrixXd J;
  for (const auto& node : interior.nodes) r.interior_max = std::max(r.interior_max, eval(f, from_real(U.p, node)).norm());
  for (std::size_t i = 0; i < boundary.size(); ++i) {
    boundary.map(i, x, J);
    r.boundary_max = std::max(r.boundary_max, eval(f, from_real(U.p, x)).norm());
  }
  r.pass = r.interior_max <= r.boundary_max + tol;
  return r;
}

struct CauchyEstimateReport {
  std::vector<double> ratios;
  double max_ratio = 0;
  int argmax = -1;
  double bound = 0;
  bool pass = false;
};

// ratio_f = max_K |d^k f| / int_U |f| with k in {0, 1}; k = 1 differentiates
// along the real unit e. K is the ball of radius rK about U's centre,
// sampled at interior and boundary nodes.
inline CauchyEstimateReport cauchy_estimate_probe(const std::vector<Expr>& family, const Domain& U, double rK, int k, double bound, int nodes = 8) {
  if (U.kind != Domain::Kind::Ball || U.n != 1) throw Unsupported("Cauchy estimate probe runs on balls in A_p");
  if (k < 0 || k > 1) throw Unsupported("derivative order must be 0 or 1");
  if (rK <= 0 || rK >= U.bound) throw DomainError("K must be a proper sub-ball");
  const int d = U.dim();
  QuadratureGrid vol = ball_grid(d, U.interior, U.bound, nodes, nodes);
  QuadratureGrid Kin = ball_grid(d, U.interior, rK, 4, nodes);
  QuadratureGrid Kbd = sphere_grid(d, U.interior, rK, nodes);
  std::vector<std::vector<double>> Kpts = Kin.nodes;
  std::vector<double> x;
  Eigen::MatrixXd J;
  for (std::size_t i = 0; i < Kbd.size(); ++i) {
    Kbd.map(i, x, J);
    Kpts.push_back(x);
  }
  CauchyEstimateReport r;
  r.bound = bound;
  const double h = 1e-4;
  for (std::size_t q = 0; q < family.size(); ++q) {
    const Expr& f = family[q];
    double l1 = 0;
    for (std::size_t i = 0; i < vol.size(); ++i) l1 += eval(f, from_real(U.p, vol.nodes[i])).norm() * vol.weights[i];
    double top = 0;
    for (const auto& y : Kpts) {
      Vec v = from_real(U.p, y);
      double val;
      if (k == 0) {
        val = eval(f, v).norm();
      } else {
        Vec a = v, b = v;
        a[0][0] += h;
        b[0][0] -= h;
        val = ((eval(f, a) - eval(f, b)) / (2 * h)).norm();
      }
      top = std::max(top, val);
    }
    r.ratios.push_back(top / l1);
    if (r.ratios.back() > r.max_ratio) {
      r.max_ratio = r.ratios.back();
      r.argmax = static_cast<int>(q);
    }
  }
  r.pass = r.max_ratio <= bound;
  return r;
}

// Sum of `terms` products c_0 z c_1 z ... c_k (brackets to the left), each of
// degree <= `degree`, with Gaussian constants of scale `scale`.
inline Expr random_z_polynomial(int p, int degree, int terms, std::mt19937_64& rng, double scale = 0.5) {
  std::normal_distribution<double> G(0.0, scale);
  std::uniform_int_distribution<int> D(0, degree);
  auto c = [&] {
    Num x(p);
    for (std::size_t m = 0; m < x.dim(); ++m) x[m] = G(rng);
    return Expr::constant(x);
  };
  Expr sum = c();
  for (int t = 0; t < terms; ++t) {
    const int k = D(rng);
    Expr term = c();
    for (int j = 0; j < k; ++j) term = (term * Expr::z(p)) * c();
    sum = sum + term;
  }
  return sum;
}

}  // namespace cdh
