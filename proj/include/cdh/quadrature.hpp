#pragma once

#include <Eigen/Dense>
#include <boost/math/special_functions/legendre.hpp>
#include <boost/random/sobol.hpp>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "cdh/algebra.hpp"
#include "cdh/errors.hpp"
#include "cdh/forms.hpp"

namespace cdh {

struct Rule1D {
  std::vector<double> x, w;
};

inline Rule1D gauss_legendre(int n, double a, double b) {
  if (n < 1) throw DimensionMismatch("Gauss-Legendre needs at least one node");
  Rule1D r;
  std::vector<double> z = boost::math::legendre_p_zeros<double>(n);
  std::vector<double> t, w;
  for (double x : z) {
    double dp = boost::math::legendre_p_prime(n, x);
    double wx = 2.0 / ((1 - x * x) * dp * dp);
    t.push_back(x);
    w.push_back(wx);
    if (x != 0.0) {
      t.push_back(-x);
      w.push_back(wx);
    }
  }
  std::vector<std::size_t> order(t.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return t[i] < t[j]; });
  const double h = 0.5 * (b - a), c = 0.5 * (a + b);
  for (std::size_t i : order) {
    r.x.push_back(c + h * t[i]);
    r.w.push_back(h * w[i]);
  }
  return r;
}

// Periodic trapezoid rule on [a, b) with n equispaced nodes.
inline Rule1D trapezoid_periodic(int n, double a, double b) {
  if (n < 1) throw DimensionMismatch("trapezoid rule needs at least one node");
  Rule1D r;
  const double h = (b - a) / n;
  for (int i = 0; i < n; ++i) {
    r.x.push_back(a + h * i);
    r.w.push_back(h);
  }
  return r;
}

// Fixed-shape pairwise sum, so results do not depend on evaluation order.
template <class V>
V pairwise_sum(const std::vector<V>& v, std::size_t lo, std::size_t hi) {
  if (hi - lo == 1) return v[lo];
  std::size_t mid = lo + (hi - lo) / 2;
  return pairwise_sum(v, lo, mid) + pairwise_sum(v, mid, hi);
}

inline Num pairwise_sum(const std::vector<Num>& v, int p) {
  if (v.empty()) return Num(p);
  return pairwise_sum(v, 0, v.size());
}

inline double pairwise_sum(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return pairwise_sum(v, 0, v.size());
}

// Maps parameters u to a point x and the Jacobian dx/du (ambient x params).
using ChartFn = std::function<void(const std::vector<double>& u, std::vector<double>& x, Eigen::MatrixXd& J)>;

struct QuadratureGrid {
  enum class Kind { Empty, Sphere, Ball, StarShaped, Torus, ProductUnitInterval };

  Kind kind = Kind::Empty;
  int ambient = 0;
  int params = 0;
  std::vector<std::vector<double>> nodes;
  std::vector<double> weights;
  ChartFn chart;
  // Pole-centred volume grids: bound on the excised ball contribution per
  // unit integrand bound, i.e. |S^{d-1}| delta.
  double delta = 0.0;
  double excision_bound = 0.0;

  std::size_t size() const { return weights.size(); }
  double measure() const { return pairwise_sum(weights); }
  void map(std::size_t i, std::vector<double>& x, Eigen::MatrixXd& J) const { chart(nodes[i], x, J); }
};

inline QuadratureGrid empty_grid(int ambient, int params) {
  QuadratureGrid g;
  g.ambient = ambient;
  g.params = params;
  g.chart = [](const std::vector<double>&, std::vector<double>&, Eigen::MatrixXd&) {};
  return g;
}

namespace detail {

inline void tensor(const std::vector<Rule1D>& rules, QuadratureGrid& g) {
  std::size_t total = 1;
  for (const auto& r : rules) total *= r.x.size();
  const int k = static_cast<int>(rules.size());
  g.nodes.reserve(total);
  g.weights.reserve(total);
  std::vector<std::size_t> idx(k, 0);
  for (std::size_t n = 0; n < total; ++n) {
    std::vector<double> u(k);
    double w = 1;
    for (int a = 0; a < k; ++a) {
      u[a] = rules[a].x[idx[a]];
      w *= rules[a].w[idx[a]];
    }
    g.nodes.push_back(std::move(u));
    g.weights.push_back(w);
    for (int a = k - 1; a >= 0; --a) {
      if (++idx[a] < rules[a].x.size()) break;
      idx[a] = 0;
    }
  }
}

inline void hopf_chart(const double* u, double* w, Eigen::Ref<Eigen::MatrixXd> J) {
  const double ca = std::cos(u[0]), sa = std::sin(u[0]);
  const double cb = std::cos(u[1]), sb = std::sin(u[1]), cc = std::cos(u[2]), sc = std::sin(u[2]);
  w[0] = ca * cb;
  w[1] = ca * sb;
  w[2] = sa * cc;
  w[3] = sa * sc;
  J << -sa * cb, -ca * sb, 0, -sa * sb, ca * cb, 0, ca * cc, 0, -sa * sc, ca * sc, 0, sa * cc;
}

// Unit sphere S^{d-1}: points and Jacobian w.r.t. the angles. With `hopf`,
// d = 4 uses (a, b, c) -> (cos a e^{ib}, sin a e^{ic}) and d = 8 the join
// (cos t H(u), sin t H(u')) of two such charts; otherwise hyperspherical.
inline void unit_sphere_chart(int d, bool hopf, const std::vector<double>& u, std::vector<double>& w, Eigen::MatrixXd& J) {
  w.assign(d, 0.0);
  J.setZero(d, d - 1);
  if (hopf && d == 4) {
    hopf_chart(u.data(), w.data(), J);
    return;
  }
  if (hopf && d == 8) {
    const double ct = std::cos(u[0]), st = std::sin(u[0]);
    double h1[4], h2[4];
    Eigen::MatrixXd J1(4, 3), J2(4, 3);
    hopf_chart(u.data() + 1, h1, J1);
    hopf_chart(u.data() + 4, h2, J2);
    for (int m = 0; m < 4; ++m) {
      w[m] = ct * h1[m];
      w[4 + m] = st * h2[m];
      J(m, 0) = -st * h1[m];
      J(4 + m, 0) = ct * h2[m];
    }
    J.block(0, 1, 4, 3) = ct * J1;
    J.block(4, 4, 4, 3) = st * J2;
    return;
  }
  // w_m = sin(u_0)...sin(u_{m-1}) cos(u_m), last one without the cosine.
  const int k = d - 1;
  for (int m = 0; m < d; ++m) {
    double prod = 1;
    for (int j = 0; j < m; ++j) prod *= std::sin(u[j]);
    w[m] = m < k ? prod * std::cos(u[m]) : prod;
    for (int a = 0; a < k && a <= m; ++a) {
      double v = 1;
      for (int j = 0; j < m; ++j) v *= j == a ? std::cos(u[j]) : std::sin(u[j]);
      if (a < m) {
        if (m < k) v *= std::cos(u[m]);
      } else {
        v = -prod * std::sin(u[m]);
      }
      J(m, a) = v;
    }
  }
}

inline bool uses_hopf(int d, bool hopf) { return hopf && (d == 4 || d == 8); }

inline std::vector<Rule1D> unit_sphere_rules(int d, bool hopf, int polar, int azimuth) {
  const double pi = std::numbers::pi;
  std::vector<Rule1D> rules;
  auto hopf3 = [&] {
    rules.push_back(gauss_legendre(polar, 0.0, pi / 2));
    rules.push_back(trapezoid_periodic(azimuth, 0.0, 2 * pi));
    rules.push_back(trapezoid_periodic(azimuth, 0.0, 2 * pi));
  };
  if (hopf && d == 4) {
    hopf3();
  } else if (hopf && d == 8) {
    rules.push_back(gauss_legendre(polar, 0.0, pi / 2));
    hopf3();
    hopf3();
  } else {
    for (int a = 0; a < d - 2; ++a) rules.push_back(gauss_legendre(polar, 0.0, pi));
    rules.push_back(trapezoid_periodic(azimuth, 0.0, 2 * pi));
  }
  return rules;
}

// Sign making (outward normal, tangent columns) positively oriented.
inline double orientation_sign(const std::vector<double>& normal, const Eigen::MatrixXd& J) {
  const int d = static_cast<int>(normal.size());
  Eigen::MatrixXd M(d, d);
  for (int i = 0; i < d; ++i) M(i, 0) = normal[i];
  M.rightCols(d - 1) = J;
  return M.determinant() >= 0 ? 1.0 : -1.0;
}

inline double surface_element(const Eigen::MatrixXd& J) { return std::sqrt(std::max(0.0, (J.transpose() * J).determinant())); }

}  // namespace detail

// Sphere of the given radius around `center` in R^d, outward orientation.
// `nodes` is the Gauss count per polar angle; azimuths get `azimuth`
// trapezoid nodes (default twice as many).
inline QuadratureGrid sphere_grid(int d, std::vector<double> center, double radius, int nodes, bool hopf = true, int azimuth = 0) {
  if (d < 2 || static_cast<int>(center.size()) != d) throw DimensionMismatch("sphere_grid: bad dimension");
  hopf = detail::uses_hopf(d, hopf);
  if (azimuth <= 0) azimuth = 2 * nodes;
  QuadratureGrid g;
  g.kind = QuadratureGrid::Kind::Sphere;
  g.ambient = d;
  g.params = d - 1;
  detail::tensor(detail::unit_sphere_rules(d, hopf, nodes, azimuth), g);
  // Orientation probed at a generic parameter point; swapping the last two
  // parameter columns reverses it when needed.
  std::vector<double> probe(d - 1, 0.7), w;
  Eigen::MatrixXd J;
  detail::unit_sphere_chart(d, hopf, probe, w, J);
  const bool flip = detail::orientation_sign(w, J) < 0;
  g.chart = [d, hopf, center = std::move(center), radius, flip](const std::vector<double>& u, std::vector<double>& x, Eigen::MatrixXd& Jx) {
    std::vector<double> w;
    detail::unit_sphere_chart(d, hopf, u, w, Jx);
    x.resize(d);
    for (int m = 0; m < d; ++m) x[m] = center[m] + radius * w[m];
    Jx *= radius;
    if (flip && Jx.cols() >= 2) Jx.col(Jx.cols() - 1).swap(Jx.col(Jx.cols() - 2));
  };
  return g;
}

// Unit-sphere directions with surface-measure weights (no chart).
struct DirectionSet {
  std::vector<std::vector<double>> dirs;
  std::vector<double> weights;
};

inline DirectionSet sphere_directions(int d, int nodes, bool hopf = true, int azimuth = 0) {
  QuadratureGrid g = sphere_grid(d, std::vector<double>(d, 0.0), 1.0, nodes, hopf, azimuth);
  DirectionSet s;
  std::vector<double> x;
  Eigen::MatrixXd J;
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.map(i, x, J);
    double a = detail::surface_element(J);
    if (a * g.weights[i] == 0.0) continue;
    s.dirs.push_back(x);
    s.weights.push_back(g.weights[i] * a);
  }
  return s;
}

// Boundary of a region star-shaped about `center`: x(u) = c + R(w(u)) w(u).
// `radius(w)` returns R and the gradient of the defining function at the
// boundary point, from which dR/du follows implicitly.
struct RadialBoundary {
  std::function<double(const std::vector<double>& w)> radius;
  std::function<std::vector<double>(const std::vector<double>& x)> gradient;
};

inline QuadratureGrid star_shaped_grid(int d, std::vector<double> center, RadialBoundary boundary, int nodes, bool hopf = true, int azimuth = 0) {
  QuadratureGrid g = sphere_grid(d, std::vector<double>(d, 0.0), 1.0, nodes, hopf, azimuth);
  g.kind = QuadratureGrid::Kind::StarShaped;
  ChartFn unit = g.chart;
  g.chart = [d, unit, center = std::move(center), boundary = std::move(boundary)](const std::vector<double>& u, std::vector<double>& x, Eigen::MatrixXd& J) {
    std::vector<double> w;
    Eigen::MatrixXd Jw;
    unit(u, w, Jw);
    const double R = boundary.radius(w);
    x.resize(d);
    for (int m = 0; m < d; ++m) x[m] = center[m] + R * w[m];
    std::vector<double> gr = boundary.gradient(x);
    double gw = 0;
    for (int m = 0; m < d; ++m) gw += gr[m] * w[m];
    if (gw <= 0) throw DomainError("boundary is not star-shaped about the interior point");
    J = R * Jw;
    for (int a = 0; a < Jw.cols(); ++a) {
      double gj = 0;
      for (int m = 0; m < d; ++m) gj += gr[m] * Jw(m, a);
      const double dR = -R * gj / gw;
      for (int m = 0; m < d; ++m) J(m, a) += dR * w[m];
    }
  };
  return g;
}

// Volume grid in polar form around `pole`: x = pole + r w, r in
// [delta, R(w)], measure r^{d-1} dr dS(w). Radial panels are dyadic from
// delta outwards (uniform when delta = 0), each with `radial` Gauss nodes.
inline QuadratureGrid polar_volume_grid(int d, std::vector<double> pole, const std::function<double(const std::vector<double>&)>& reach, double delta, int radial, int angular, bool hopf = true, int azimuth = 0) {
  QuadratureGrid g;
  g.kind = QuadratureGrid::Kind::Ball;
  g.ambient = d;
  g.params = d;
  g.delta = delta;
  DirectionSet dirs = sphere_directions(d, angular, hopf, azimuth);
  double area = 0;
  for (double w : dirs.weights) area += w;
  g.excision_bound = area * delta;
  for (std::size_t i = 0; i < dirs.dirs.size(); ++i) {
    const auto& w = dirs.dirs[i];
    const double R = reach(w);
    if (R <= delta) throw DomainError("pole is too close to the boundary for the excision radius");
    std::vector<double> edges;
    if (delta > 0) {
      for (double r = delta; r < R; r *= 2) edges.push_back(r);
      edges.push_back(R);
      if (edges.size() >= 3 && edges[edges.size() - 1] - edges[edges.size() - 2] < 0.25 * edges[edges.size() - 2])
        edges.erase(edges.end() - 2);
    } else {
      const int panels = 2;
      for (int k = 0; k <= panels; ++k) edges.push_back(R * k / panels);
    }
    for (std::size_t e = 0; e + 1 < edges.size(); ++e) {
      Rule1D r = gauss_legendre(radial, edges[e], edges[e + 1]);
      for (std::size_t k = 0; k < r.x.size(); ++k) {
        std::vector<double> x(d);
        for (int m = 0; m < d; ++m) x[m] = pole[m] + r.x[k] * w[m];
        g.nodes.push_back(std::move(x));
        g.weights.push_back(r.w[k] * std::pow(r.x[k], d - 1) * dirs.weights[i]);
      }
    }
  }
  g.chart = [d](const std::vector<double>& u, std::vector<double>& x, Eigen::MatrixXd& J) {
    x = u;
    J = Eigen::MatrixXd::Identity(d, d);
  };
  return g;
}

// Distance from `from` to the sphere |x - c| = r along the unit direction w.
inline double ball_reach(const std::vector<double>& from, const std::vector<double>& c, double r, const std::vector<double>& w) {
  double b = 0, q = 0;
  for (std::size_t m = 0; m < w.size(); ++m) {
    b += w[m] * (from[m] - c[m]);
    q += (from[m] - c[m]) * (from[m] - c[m]);
  }
  const double disc = b * b - q + r * r;
  if (disc < 0) throw DomainError("point lies outside the ball");
  return -b + std::sqrt(disc);
}

inline QuadratureGrid ball_grid(int d, std::vector<double> center, double radius, int radial, int angular, int azimuth = 0) {
  auto c = center;
  return polar_volume_grid(d, center, [c, radius](const std::vector<double>& w) { return ball_reach(c, c, radius, w); }, 0.0, radial, angular, true, azimuth);
}

// Parameter grid of the torus [0,1)^m with `nodes` trapezoid nodes per angle.
inline QuadratureGrid torus_grid(int m, int nodes) {
  QuadratureGrid g;
  g.kind = QuadratureGrid::Kind::Torus;
  g.ambient = m;
  g.params = m;
  detail::tensor(std::vector<Rule1D>(m, trapezoid_periodic(nodes, 0.0, 1.0)), g);
  g.chart = [m](const std::vector<double>& u, std::vector<double>& x, Eigen::MatrixXd& J) {
    x = u;
    J = Eigen::MatrixXd::Identity(m, m);
  };
  return g;
}

// surface x [0,1]: parameters (u, lambda), ambient coordinates (x, lambda).
inline QuadratureGrid product_unit_interval(const QuadratureGrid& base, int lambda_nodes) {
  QuadratureGrid g;
  g.kind = QuadratureGrid::Kind::ProductUnitInterval;
  g.ambient = base.ambient + 1;
  g.params = base.params + 1;
  Rule1D lam = gauss_legendre(lambda_nodes, 0.0, 1.0);
  for (std::size_t i = 0; i < base.size(); ++i)
    for (std::size_t k = 0; k < lam.x.size(); ++k) {
      std::vector<double> u = base.nodes[i];
      u.push_back(lam.x[k]);
      g.nodes.push_back(std::move(u));
      g.weights.push_back(base.weights[i] * lam.w[k]);
    }
  const int A = base.ambient, P = base.params;
  g.chart = [A, P, inner = base.chart](const std::vector<double>& u, std::vector<double>& x, Eigen::MatrixXd& J) {
    std::vector<double> ub(u.begin(), u.end() - 1);
    Eigen::MatrixXd Jb;
    inner(ub, x, Jb);
    x.push_back(u.back());
    J.setZero(A + 1, P + 1);
    J.topLeftCorner(A, P) = Jb;
    J(A, P) = 1.0;
  };
  return g;
}

// A form-valued field of (zeta, z).
using FormField = std::function<Form<double>(const Vec& zeta, const Vec& z)>;

// Weighted sum of integrand(x, J) over the grid nodes.
using NodeIntegrand = std::function<Num(const std::vector<double>& x, const Eigen::MatrixXd& J)>;

inline Num integrate_nodes(const NodeIntegrand& fn, const QuadratureGrid& g, int p) {
  std::vector<Num> vals;
  vals.reserve(g.size());
  std::vector<double> x;
  Eigen::MatrixXd J;
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.map(i, x, J);
    vals.push_back(fn(x, J) * g.weights[i]);
  }
  return pairwise_sum(vals, p);
}

inline Num integrate_surface(const FormField& field, const QuadratureGrid& g, const Vec& z) {
  if (z.empty()) throw DimensionMismatch("integrate_surface needs a point");
  const int p = z[0].level();
  const std::size_t N = (std::size_t{1} << p) * z.size();
  return integrate_nodes(
      [&](const std::vector<double>& x, const Eigen::MatrixXd& J) {
        if (x.size() < N) throw DimensionMismatch("grid points have fewer coordinates than the field");
        Form<double> f = field(from_real(p, std::vector<double>(x.begin(), x.begin() + N)), z);
        if (f.dim() != g.ambient) throw DimensionMismatch("form dimension differs from the grid's ambient dimension");
        if (f.max_degree() > g.params) throw MalformedIntegrand("form degree exceeds the grid dimension");
        return pullback_top(f, J);
      },
      g, p);
}

// Volume grids carry physical nodes; the integrand is the coefficient of
// dx_0 ^ ... ^ dx_{d-1}.
inline Num integrate_volume(const FormField& field, const QuadratureGrid& g, const Vec& z) {
  if (z.empty()) throw DimensionMismatch("integrate_volume needs a point");
  const int p = z[0].level();
  const Mask top = g.ambient >= 64 ? ~Mask{0} : (Mask{1} << g.ambient) - 1;
  std::vector<Num> vals;
  vals.reserve(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    Form<double> f = field(from_real(p, g.nodes[i]), z);
    if (f.dim() != g.ambient) throw DimensionMismatch("form dimension differs from the grid's ambient dimension");
    vals.push_back(f.coeff(top) * g.weights[i]);
  }
  return pairwise_sum(vals, p);
}

// Randomized QMC: Sobol points under a random shift folded by the tent map,
// one estimate per shift.
struct McResult {
  double mean = 0;
  double std_error = 0;
  std::size_t points = 0;
  std::uint64_t seed = 0;
};

inline McResult rqmc(int dim, const std::function<double(const std::vector<double>&)>& f, std::size_t points, int replicates, std::uint64_t seed) {
  if (replicates < 2) throw DimensionMismatch("rqmc needs at least two replicates");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<double> est;
  std::vector<double> u(dim);
  for (int r = 0; r < replicates; ++r) {
    std::vector<double> shift(dim);
    for (double& s : shift) s = U(rng);
    boost::random::sobol gen(dim);
    std::vector<double> vals;
    vals.reserve(points);
    for (std::size_t i = 0; i < points; ++i) {
      for (int a = 0; a < dim; ++a) {
        double v = std::ldexp(static_cast<double>(gen()), -64) + shift[a];
        v -= std::floor(v);
        u[a] = 1 - std::abs(2 * v - 1);
      }
      vals.push_back(f(u));
    }
    est.push_back(pairwise_sum(vals) / static_cast<double>(points));
  }
  McResult out;
  out.points = points * replicates;
  out.seed = seed;
  for (double e : est) out.mean += e;
  out.mean /= replicates;
  double v = 0;
  for (double e : est) v += (e - out.mean) * (e - out.mean);
  out.std_error = std::sqrt(v / (replicates - 1) / replicates);
  return out;
}

namespace detail {

// Cube point -> unit sphere point and the area density. d = 4, 8 use the
// Hopf / join charts with s = sin^2(angle), which makes the density
// polynomial; other d use hyperspherical angles.
inline double cube_to_sphere(int d, const double* u, double* w) {
  const double pi = std::numbers::pi;
  auto hopf = [pi](const double* v, double* x) {
    const double ca = std::sqrt(1 - v[0]), sa = std::sqrt(v[0]);
    const double b = 2 * pi * v[1], c = 2 * pi * v[2];
    x[0] = ca * std::cos(b);
    x[1] = ca * std::sin(b);
    x[2] = sa * std::cos(c);
    x[3] = sa * std::sin(c);
    return 2 * pi * pi;
  };
  if (d == 4) return hopf(u, w);
  if (d == 8) {
    const double s = u[0];
    double dens = hopf(u + 1, w) * hopf(u + 4, w + 4);
    const double ct = std::sqrt(1 - s), st = std::sqrt(s);
    for (int m = 0; m < 4; ++m) {
      w[m] *= ct;
      w[4 + m] *= st;
    }
    return dens * s * (1 - s) / 2;
  }
  double dens = 2 * pi, prod = 1;
  for (int a = 0; a < d - 2; ++a) {
    const double ang = pi * u[a];
    w[a] = prod * std::cos(ang);
    prod *= std::sin(ang);
    dens *= pi * std::pow(std::sin(ang), d - 2 - a);
  }
  const double az = 2 * pi * u[d - 2];
  w[d - 2] = prod * std::cos(az);
  w[d - 1] = prod * std::sin(az);
  return dens;
}

}  // namespace detail

// Integral of g over the unit ball in R^d by RQMC; the radius uses
// r = u^(1/d), absorbing r^(d-1) dr = du / d.
inline McResult rqmc_ball_integral(int d, const std::function<double(const std::vector<double>&)>& g, std::size_t points, int replicates, std::uint64_t seed) {
  if (d < 2) throw DimensionMismatch("rqmc_ball_integral: d < 2");
  auto f = [d, &g](const std::vector<double>& u) {
    thread_local std::vector<double> x;
    x.assign(d, 0.0);
    const double dens = detail::cube_to_sphere(d, u.data() + 1, x.data());
    const double r = std::pow(u[0], 1.0 / d);
    for (double& c : x) c *= r;
    return g(x) * dens / d;
  };
  return rqmc(d, f, points, replicates, seed);
}

inline McResult rqmc_ball_volume(int d, std::size_t points, int replicates, std::uint64_t seed) {
  return rqmc_ball_integral(d, [](const std::vector<double>&) { return 1.0; }, points, replicates, seed);
}

// gamma(t) = a + rho(t) exp(2 pi t S(t) n).
struct PathSpec {
  Num center;
  std::function<double(double)> rho;
  std::function<Num(double)> direction;
  int winding = 1;
  bool closed = true;

  Num operator()(double t) const {
    Num S = direction(t);
    return center + exp(S * (2 * std::numbers::pi * t * winding)) * rho(t);
  }
  int level() const { return center.level(); }
};

inline PathSpec circle_path(const Num& center, double radius, const Num& M, int winding = 1) {
  UnitDirection check(M);
  return PathSpec{center, [radius](double) { return radius; }, [M](double) { return M; }, winding, true};
}

enum class LineRule { Midpoint, Richardson };

// sum f(gamma(mid)) (gamma(t_{m+1}) - gamma(t_m)), product order f . dgamma.
// Richardson combines N and N/2 samples to cancel the O(N^-2) chord error.
inline Num line_integral(const std::function<Num(const Num&)>& f, const PathSpec& path, int samples, LineRule rule = LineRule::Richardson) {
  auto midpoint = [&](int N) {
    std::vector<Num> vals;
    vals.reserve(N);
    Num prev = path(0.0);
    for (int m = 0; m < N; ++m) {
      Num next = path(static_cast<double>(m + 1) / N);
      vals.push_back(mul(f(path((m + 0.5) / N)), next - prev));
      prev = next;
    }
    return pairwise_sum(vals, path.level());
  };
  if (samples < 2) throw DimensionMismatch("line_integral needs at least two samples");
  if (rule == LineRule::Midpoint) return midpoint(samples);
  return (midpoint(samples) * 4.0 - midpoint(samples / 2)) / 3.0;
}

// Branch-continued logarithms of w_0, ..., w_{N}: each increment is the
// principal log of w_m^{-1} w_{m+1}.
inline Vector<double> continuous_ln(const Vector<double>& w, const std::optional<UnitDirection>& branch = std::nullopt) {
  Vector<double> out;
  if (w.empty()) return out;
  out.push_back(ln(w[0], branch));
  for (std::size_t m = 1; m < w.size(); ++m) out.push_back(out.back() + ln(mul(inv(w[m - 1]), w[m]), branch));
  return out;
}

struct WindingResult {
  Num value;
  int samples = 0;
};

// Accumulated argument of gamma - center over 2 pi; samples double until
// every increment is below pi/4.
inline WindingResult winding_argument(const PathSpec& path, int samples, double delta = 1e-10) {
  const int p = path.level();
  for (int N = std::max(samples, 4);; N *= 2) {
    if (N > (1 << 22)) throw IllConditioned("winding: increments stay large");
    Vector<double> w;
    double scale = 0;
    for (int m = 0; m <= N; ++m) {
      w.push_back(path(static_cast<double>(m) / N) - path.center);
      scale = std::max(scale, w.back().norm());
    }
    if (scale == 0.0) return {Num(p), N};
    bool ok = true;
    Num acc(p);
    for (int m = 0; m < N && ok; ++m) {
      if (w[m].norm() < delta * scale || w[m + 1].norm() < delta * scale) throw IllConditioned("path passes through its center");
      Num step = ln(mul(inv(w[m]), w[m + 1])).imag();
      if (step.norm() >= std::numbers::pi / 4) ok = false;
      acc += step;
    }
    if (ok) return {acc / (2 * std::numbers::pi), N};
  }
}

}  // namespace cdh
