#pragma once

// Verification batteries shared by the command-line front end and the
// acceptance runner. Each suite returns a Report of check records sorted by
// id; JSON is the canonical serialisation, CSV a lossy summary.

#include <chrono>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cdh/kernels.hpp"

namespace cdh::suites {

using json = nlohmann::json;

struct Config {
  int p = 2;
  int n = 1;
  int nodes = 0;      // 0: each suite's default
  double tol = 0.0;   // 0: each check's own tolerance
  std::uint64_t seed = 1;
  bool mc = false;
  std::vector<std::string> functions;  // expression literals (prefix syntax)
  std::string out;
  std::string format = "json";

  json to_json() const {
    return json{{"p", p}, {"n", n}, {"nodes", nodes}, {"tol", tol}, {"seed", seed}, {"mc", mc}, {"functions", functions}, {"format", format}};
  }
};

struct Check {
  std::string id;
  std::string paper_ref;
  json inputs = json::object();
  std::vector<double> result;
  std::vector<double> golden;
  double abs_error = 0;
  double tol = 0;
  bool pass = false;
  bool gating = true;
  long nodes = 0;
  std::uint64_t seed = 0;
  double wall_time_ms = 0;
  std::string note;
  json refinement;  // null unless a grid doubling was attempted

  json to_json(bool with_time) const {
    json j{{"id", id},         {"paper_ref", paper_ref}, {"inputs", inputs}, {"result", result}, {"golden", golden}, {"abs_error", abs_error},
           {"tol", tol},       {"pass", pass},           {"gating", gating}, {"nodes", nodes},   {"seed", seed}};
    if (!note.empty()) j["note"] = note;
    if (!refinement.is_null()) j["refinement"] = refinement;
    if (with_time) j["wall_time_ms"] = wall_time_ms;
    return j;
  }
};

struct Report {
  std::string suite;
  json config;
  std::vector<Check> checks;

  void sort() {
    std::stable_sort(checks.begin(), checks.end(), [](const Check& a, const Check& b) { return a.id < b.id; });
  }
  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass || !c.gating; });
  }
  json to_json(bool with_time = true) const {
    json arr = json::array();
    for (const auto& c : checks) arr.push_back(c.to_json(with_time));
    return json{{"suite", suite}, {"config", config}, {"pass", passed()}, {"checks", arr}};
  }
  std::string to_csv() const {
    std::ostringstream os;
    os << "id,paper_ref,pass,gating,abs_error,tol,nodes,seed\n";
    os << std::setprecision(6);
    for (const auto& c : checks)
      os << c.id << ',' << c.paper_ref << ',' << (c.pass ? "PASS" : "FAIL") << ',' << (c.gating ? 1 : 0) << ',' << c.abs_error << ',' << c.tol << ','
         << c.nodes << ',' << c.seed << '\n';
    return os.str();
  }
};

inline std::vector<double> components(const Num& a) { return a.coeffs(); }

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return std::isnan(d) ? std::numeric_limits<double>::infinity() : d;
}

namespace detail {

class Timer {
 public:
  Timer() : t0_(std::chrono::steady_clock::now()) {}
  double ms() const { return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  std::chrono::steady_clock::time_point t0_;
};

inline double tolerance(const Config& cfg, double fallback) { return cfg.tol > 0 ? cfg.tol : fallback; }

inline std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t salt) {
  std::seed_seq s{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), static_cast<std::uint32_t>(salt)};
  std::uint32_t out[2];
  s.generate(out, out + 2);
  return (std::uint64_t{out[0]} << 32) | out[1];
}

inline Num random_num(int p, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Num r(p);
  for (std::size_t m = 0; m < r.dim(); ++m) r[m] = g(rng);
  return r;
}

inline std::vector<double> random_unit(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> G;
  std::vector<double> w(d);
  double s = 0;
  for (double& c : w) {
    c = G(rng);
    s += c * c;
  }
  for (double& c : w) c /= std::sqrt(s);
  return w;
}

inline Vec domain_point(const Domain& U, const std::vector<double>& w, double t) {
  const double R = U.radial_root(U.interior, w) * t;
  std::vector<double> x = U.interior;
  for (int m = 0; m < U.dim(); ++m) x[m] += R * w[m];
  return from_real(U.p, x);
}

inline std::string fmt(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

// Numeric check: result vs golden in the max norm.
inline Check numeric(std::string id, std::string ref, std::vector<double> result, std::vector<double> golden, double tol, long nodes = 0, std::uint64_t seed = 0) {
  Check c;
  c.id = std::move(id);
  c.paper_ref = std::move(ref);
  c.result = std::move(result);
  c.golden = std::move(golden);
  c.abs_error = max_abs_diff(c.result, c.golden);
  c.tol = tol;
  c.pass = c.abs_error <= tol;
  c.nodes = nodes;
  c.seed = seed;
  return c;
}

// Quadrature-backed check: on failure, doubles the node count once and keeps
// the better of the two grids, recording the attempt.
inline Check refined(std::string id, std::string ref, const std::function<std::vector<double>(int)>& eval, std::vector<double> golden, double tol, int nodes) {
  Check c = numeric(std::move(id), std::move(ref), eval(nodes), std::move(golden), tol, nodes);
  if (!c.pass) {
    std::vector<double> r2 = eval(2 * nodes);
    const double e2 = max_abs_diff(r2, c.golden);
    c.refinement = json{{"nodes", 2 * nodes}, {"abs_error", e2}, {"reduced", e2 < c.abs_error}};
    if (e2 < c.abs_error) {
      c.result = std::move(r2);
      c.abs_error = e2;
      c.nodes = 2 * nodes;
      c.pass = e2 <= tol;
    }
    if (!c.pass) c.note = "grid doubling attempted";
  }
  return c;
}

template <class F>
void timed(Report& r, F&& make) {
  Timer t;
  Check c = make();
  c.wall_time_ms = t.ms();
  r.checks.push_back(std::move(c));
}

inline void require_level(const Config& cfg, const std::string& suite, std::initializer_list<int> levels, std::initializer_list<int> dims) {
  if (std::find(levels.begin(), levels.end(), cfg.p) == levels.end()) throw UnsupportedLevel("suite " + suite + " does not support p = " + std::to_string(cfg.p));
  if (std::find(dims.begin(), dims.end(), cfg.n) == dims.end()) throw Unsupported("suite " + suite + " does not support n = " + std::to_string(cfg.n));
}

}  // namespace detail

// ------------------------------------------------------------------ algebra

inline Report run_algebra(const Config& cfg) {
  using namespace detail;
  Report r{"algebra", cfg.to_json(), {}};
  for (int p = 0; p <= 3; ++p)
    timed(r, [&] {
      std::mt19937_64 rng(sub_seed(cfg.seed, 100 + p));
      double worst = 0;
      for (int s = 0; s < 10000; ++s) {
        Num a = random_num(p, rng), b = random_num(p, rng);
        const double na = a.norm(), nb = b.norm();
        worst = std::max(worst, std::abs(mul(a, b).norm() - na * nb) / (na * nb));
      }
      Check c = numeric("algebra.norm_multiplicative.p" + std::to_string(p), "norm-multiplicativity", {worst}, {0.0}, tolerance(cfg, 1e-12), 0, sub_seed(cfg.seed, 100 + p));
      c.inputs = {{"p", p}, {"pairs", 10000}, {"measure", "relative"}};
      return c;
    });
  timed(r, [&] {
    const int p = 3;
    Num i = Num::unit(p, 1), j = Num::unit(p, 2), l = Num::unit(p, 4);
    Num lhs = mul(mul(i, j), l), rhs = -mul(i, mul(j, l));
    Check c = numeric("algebra.generators_anti_associate.p3", "generator-anti-associativity", components(lhs), components(rhs), 0.0);
    c.inputs = {{"p", p}, {"triple", {1, 2, 4}}};
    return c;
  });
  timed(r, [&] {
    const int p = 4;
    std::mt19937_64 rng(sub_seed(cfg.seed, 200));
    double worst = 0;
    for (int s = 0; s < 1000; ++s) {
      Num x = random_num(p, rng);
      for (int a = 1; a <= 3; ++a)
        for (int b = 1; b <= 3; ++b) {
          Num lhs = mul(pow(x, a), pow(x, b)), rhs = pow(x, a + b);
          worst = std::max(worst, (lhs - rhs).norm() / std::pow(x.norm(), a + b));
        }
    }
    Check c = numeric("algebra.power_associative.p4", "power-associativity", {worst}, {0.0}, tolerance(cfg, 1e-10), 0, sub_seed(cfg.seed, 200));
    c.inputs = {{"p", p}, {"samples", 1000}, {"exponents", "1..3 x 1..3"}};
    return c;
  });
  timed(r, [&] {
    auto found = zero_divisor_search(4);
    Check c;
    c.id = "algebra.zero_divisor.p4";
    c.paper_ref = "zero-divisors";
    c.tol = tolerance(cfg, 1e-12);
    c.golden = {0.0};
    if (found) {
      c.result = {mul(found->first, found->second).norm()};
      c.inputs = {{"a", components(found->first)}, {"b", components(found->second)}};
      c.abs_error = c.result[0];
      c.pass = c.abs_error < c.tol && found->first.norm() > 0 && found->second.norm() > 0;
    } else {
      c.result = {std::numeric_limits<double>::infinity()};
      c.abs_error = c.result[0];
      c.note = "no zero-divisor pair found";
    }
    return c;
  });
  for (int p = 2; p <= 3; ++p)
    timed(r, [&] {
      std::mt19937_64 rng(sub_seed(cfg.seed, 300 + p));
      double worst = 0;
      for (int s = 0; s < 100; ++s) {
        Num a = random_num(p, rng);
        worst = std::max(worst, (conj_via_generators(a) - conj(a)).norm() / std::max(1.0, a.norm()));
      }
      Check c = numeric("algebra.conj_via_generators.p" + std::to_string(p), "conjugation-through-generators", {worst}, {0.0}, tolerance(cfg, 1e-14), 0,
                        sub_seed(cfg.seed, 300 + p));
      c.inputs = {{"p", p}, {"samples", 100}};
      return c;
    });
  timed(r, [&] {
    const int p = 2;
    Num i = Num::unit(p, 1), j = Num::unit(p, 2);
    Check c = numeric("algebra.quaternion_ij.p2", "plumbing", components(mul(i, j)), components(Num::unit(p, 3)), 0.0);
    return c;
  });
  r.sort();
  return r;
}

// -------------------------------------------------------------------- forms

namespace detail {

using RN = Number<Rational>;
using RF = Form<Rational>;

inline RF rdx(int p, int i, const RN& c) { return RF::monomial(c, 1 << p, {i}); }
// alpha_l = x_l + (i_{2l}^* i_{2l+1}) y_l with x_l, y_l the coordinates 2l, 2l+1.
inline RN alpha_unit(int p, int l) { return mul(conj(RN::unit(p, 2 * l)), RN::unit(p, 2 * l + 1)); }
inline RF d_alpha(int p, int l) { return rdx(p, 2 * l, RN::one(p)) + rdx(p, 2 * l + 1, alpha_unit(p, l)); }
inline RF d_alpha_bar(int p, int l) { return rdx(p, 2 * l, RN::one(p)) - rdx(p, 2 * l + 1, alpha_unit(p, l)); }

inline RF volume(int p, const Rational& c) {
  std::vector<int> all(1 << p);
  std::iota(all.begin(), all.end(), 0);
  return RF::monomial(RN::real(p, c), 1 << p, all);
}

inline std::string rational_string(const Rational& q) {
  return q.denominator() == 1 ? std::to_string(q.numerator()) : std::to_string(q.numerator()) + "/" + std::to_string(q.denominator());
}

// Exact comparison of a form against c * volume; reports the volume
// coefficient, and flags stray monomials.
inline Check volume_check(std::string id, std::string ref, const RF& f, int p, const Rational& expect) {
  const Mask top = (Mask{1} << (1 << p)) - 1;
  RN coeff = f.coeff(top);
  std::vector<double> res, gold;
  for (std::size_t m = 0; m < coeff.dim(); ++m) {
    res.push_back(to_double(coeff[m]));
    gold.push_back(m == 0 ? to_double(expect) : 0.0);
  }
  Check c = numeric(std::move(id), std::move(ref), res, gold, 0.0);
  c.pass = f == volume(p, expect);
  c.inputs = {{"p", p}, {"exact_volume_coefficient", rational_string(coeff[0])}, {"terms", f.size()}};
  if (!c.pass && c.abs_error == 0) c.abs_error = 1.0;  // stray monomials
  return c;
}

inline Check form_equality(std::string id, std::string ref, const RF& a, const RF& b, json inputs) {
  Check c;
  c.id = std::move(id);
  c.paper_ref = std::move(ref);
  c.pass = a == b;
  RF d = a - b;
  double worst = 0;
  for (const auto& [m, v] : d.terms())
    for (std::size_t k = 0; k < v.dim(); ++k) worst = std::max(worst, std::abs(to_double(v[k])));
  c.result = {worst};
  c.golden = {0.0};
  c.abs_error = worst;
  c.inputs = std::move(inputs);
  return c;
}

}  // namespace detail

inline Report run_forms(const Config& cfg) {
  using namespace detail;
  Report r{"forms", cfg.to_json(), {}};
  for (int p = 2; p <= 3; ++p) {
    const int d = 1 << p;
    timed(r, [&] {
      RF lhs = RF::scalar(RN::one(p), d), rhs = RF::scalar(RN::one(p), d);
      bool ok = true;
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) {
          if (a == b) continue;
          RF sa = rdx(p, a, RN::unit(p, a)), sb = rdx(p, b, RN::unit(p, b));
          const int kk = (a > 0 && b > 0) ? 1 : 0;
          ok = ok && wedge(sb, sa) == wedge(sa, sb).scaled(Rational(kk ? 1 : -1));
        }
      Check c;
      c.id = "forms.sign_rule.p" + std::to_string(p);
      c.paper_ref = "graded-sign-rule";
      c.pass = ok;
      c.result = {ok ? 0.0 : 1.0};
      c.golden = {0.0};
      c.abs_error = c.result[0];
      c.inputs = {{"p", p}, {"pairs", d * (d - 1)}};
      return c;
    });
    timed(r, [&] {
      RF x0y0 = RF::monomial(RN::unit(p, 1), d, {0, 1}).scaled(Rational(-2));
      return form_equality("forms.alpha0_wedge.p" + std::to_string(p), "alpha-zero-wedge-identity", wedge(d_alpha(p, 0), d_alpha_bar(p, 0)), x0y0, {{"p", p}});
    });
    for (int l = 1; l < d / 2; ++l)
      timed(r, [&] {
        RF ida = d_alpha(p, l).left(RN::unit(p, 2 * l));
        RF two = RF::monomial(mul(RN::unit(p, 2 * l), RN::unit(p, 2 * l + 1)), d, {2 * l, 2 * l + 1}).scaled(Rational(2));
        return form_equality("forms.alpha_l_wedge.p" + std::to_string(p) + ".l" + std::to_string(l), "alpha-higher-wedge-identity", wedge(ida, ida), two,
                             {{"p", p}, {"l", l}});
      });
    timed(r, [&] { return volume_check("forms.w_volume.p" + std::to_string(p), "w-volume-element", build_w<Rational>(p), p, Rational(1)); });
    for (int v = 0; v < d / 2; ++v)
      timed(r, [&] {
        Check c = volume_check("forms.kappa_substitution.p" + std::to_string(p) + ".v" + std::to_string(v), "kappa-substitution-vanishes",
                               build_w_kappa<Rational>(p, v), p, Rational(0));
        c.inputs["v"] = v;
        return c;
      });
  }
  r.sort();
  return r;
}

// ------------------------------------------------------------------- cauchy

inline Report run_cauchy(const Config& cfg) {
  using namespace detail;
  require_level(cfg, "cauchy", {2}, {1});
  const int P = 2;
  Report r{"cauchy", cfg.to_json(), {}};
  const int samples = cfg.nodes > 0 ? cfg.nodes : 1024;
  const std::vector<std::pair<std::string, Expr>> fs{{"1", Expr::constant(P, 1.0)}, {"z", Expr::z(P)}, {"z2", Expr::z(P) * Expr::z(P)}};
  const std::vector<std::pair<std::string, int>> dirs{{"i", 1}, {"j", 2}};
  for (const auto& [dn, m] : dirs)
    for (int w : {1, 2, -1})
      for (const auto& [fn, f] : fs)
        timed(r, [&, m = m, f = f, fn = fn, dn = dn] {
          const Num M = Num::unit(P, m);
          // z lies in the plane through 1 and M; the loop is off-centre.
          const Num z = Num::real(P, 0.1) + M * 0.2;
          auto g = [f](const Num& x) { return eval(f, x); };
          LoopResult lr = cauchy_loop(g, circle_path(z + Num::real(P, 0.05), 0.5, M, w), z, samples);
          Check c = numeric("cauchy.loop." + fn + "." + dn + ".w" + (w < 0 ? "m" + std::to_string(-w) : std::to_string(w)), "loop-cauchy-formula", components(lr.value),
                            components(mul(g(z), M)), tolerance(cfg, 1e-6), samples);
          c.inputs = {{"f", f.to_string()}, {"M", dn}, {"winding", w}, {"z", components(z)}, {"radius", 0.5}};
          if (lr.winding != w) {
            c.pass = false;
            c.note = "measured winding " + std::to_string(lr.winding);
          }
          return c;
        });
  timed(r, [&] {
    LoopResult lr = cauchy_loop([](const Num& x) { return mul(x, x); }, circle_path(Num(P), 0.5, Num::unit(P, 3), 1), Num::real(P, 2.0), samples);
    Check c = numeric("cauchy.loop.exterior", "loop-cauchy-formula-exterior", components(lr.value), components(Num(P)), tolerance(cfg, 1e-6), samples);
    c.inputs = {{"f", "z*z"}, {"z", components(Num::real(P, 2.0))}, {"radius", 0.5}};
    return c;
  });
  const Num z0 = from_real(P, {0.1, 0.2, -0.3, 0.15})[0];
  const int tn = 16;
  for (const auto& [fn, f] : std::vector<std::pair<std::string, Expr>>{{"1", Expr::constant(P, 1.0)}, {"z", Expr::z(P)}}) {
    Num big(P);
    timed(r, [&] {
      big = cauchy_green_torus(f, z0, 0.3, tn);
      Check c = numeric("cauchy.torus." + fn, "torus-cauchy-green", components(big), components(eval(f, z0)), tolerance(cfg, 1e-3), tn);
      c.inputs = {{"f", f.to_string()}, {"z", components(z0)}, {"eps", 0.3}};
      return c;
    });
    timed(r, [&] {
      Num small = cauchy_green_torus(f, z0, 0.15, tn);
      Check c = numeric("cauchy.torus_stability." + fn, "torus-cauchy-green", components(small), components(big), tolerance(cfg, 2e-3), tn);
      c.inputs = {{"f", f.to_string()}, {"z", components(z0)}, {"eps", {0.3, 0.15}}};
      return c;
    });
  }
  r.sort();
  return r;
}

// ----------------------------------------------------------------------- mb

namespace detail {

inline std::vector<std::string> default_holomorphic_functions() {
  return {"(const 2 1 0 0 0)", "z", "(mul z z)", "(mul z (const 2 0.5 0 1 0))", "(mul (const 2 0 1 0 -0.5) z)", "(mul (mul z z) z)", "(add z (const 2 0 0 0 1))"};
}

}  // namespace detail

inline Report run_mb(const Config& cfg) {
  using namespace detail;
  require_level(cfg, "mb", {2}, {1});
  const int P = 2;
  Report r{"mb", cfg.to_json(), {}};
  const int nodes = cfg.nodes > 0 ? cfg.nodes : 12;
  const Domain U = ball_domain(P, 1);
  const Num one = Num::one(P);

  const Vec zc{from_real(P, {0.1, 0.2, -0.3, 0.15})[0]};
  for (double eps : {0.5, 1.0})
    timed(r, [&] {
      Domain S = ball_domain(P, 1, to_real(zc), eps);
      auto ev = [&](int k) { return components(mb_boundary([&](const Vec&) { return one; }, S, zc, boundary_grid(S, k))); };
      Check c = refined("mb.sphere.eps" + fmt(eps), "sphere-kernel-normalization", ev, components(one), tolerance(cfg, 1e-6), nodes);
      c.inputs = {{"z", components(zc[0])}, {"eps", eps}};
      return c;
    });

  timed(r, [&] {
    QuadratureGrid g = ball_grid(4, std::vector<double>(4, 0.0), 1.0, 8, 12);
    Check c = numeric("mb.volume.v4", "ball-volume", {g.measure()}, {std::pow(std::numbers::pi, 2) / 2}, tolerance(cfg, 1e-8), static_cast<long>(g.size()));
    c.inputs = {{"d", 4}, {"grid", "tensor"}};
    return c;
  });
  timed(r, [&] {
    QuadratureGrid g = ball_grid(8, std::vector<double>(8, 0.0), 1.0, 8, 14, 4);
    Check c = numeric("mb.volume.v8", "ball-volume", {g.measure()}, {std::pow(std::numbers::pi, 4) / 24}, tolerance(cfg, 1e-8), static_cast<long>(g.size()));
    c.inputs = {{"d", 8}, {"grid", "tensor"}};
    return c;
  });
  timed(r, [&] {
    const std::uint64_t s = sub_seed(cfg.seed, 400);
    McResult m = rqmc_ball_volume(8, 1 << 14, 16, s);
    Check c = numeric("mb.volume.v8_mc", "ball-volume", {m.mean}, {std::pow(std::numbers::pi, 4) / 24}, tolerance(cfg, 1e-3), static_cast<long>(m.points), s);
    c.inputs = {{"d", 8}, {"grid", "rqmc"}, {"std_error", m.std_error}};
    return c;
  });

  const std::vector<std::string> fstr = cfg.functions.empty() ? default_holomorphic_functions() : cfg.functions;
  const std::vector<Vec> zs{from_real(P, {0.3, 0, 0, 0}), from_real(P, {0.1, -0.2, 0.3, 0.15})};
  int k = 0;
  for (const auto& s : fstr) {
    Expr f = parse_expr(s, P);
    if (!is_formally_holomorphic(f)) throw ParseError("reproduction battery needs formally holomorphic functions: " + s);
    for (const Vec& z : zs) {
      const std::string id = "mb.reproduce." + std::string(k < 10 ? "0" : "") + std::to_string(k);
      ++k;
      timed(r, [&] {
        auto ev = [&](int nn) { return components(mb_boundary(scalar_field(f), U, z, boundary_grid(U, nn))); };
        Check c = refined(id, "mb-reproduction", ev, components(eval(f, z)), tolerance(cfg, 1e-5), nodes);
        c.inputs = {{"f", f.to_string()}, {"z", components(z[0])}};
        return c;
      });
    }
  }

  // Boundary minus volume for non-holomorphic f.
  const Vec z = zs[1];
  for (const auto& [name, text] : std::vector<std::pair<std::string, std::string>>{{"zc", "zc"}, {"z_zc", "(mul z zc)"}})
    timed(r, [&, name = name, text = text] {
      Expr f = parse_expr(text, P);
      auto ev = [&](int nn) {
        Num b = mb_boundary(scalar_field(f), U, z, boundary_grid(U, nn));
        Num v = mb_volume(dbar_form(f, 1), U, z, volume_grid(U, z, 1e-6, nn / 2, nn / 2 + 2));
        return components(b - v);
      };
      Check c = refined("mb.cauchy_green." + name, "mb-cauchy-green-identity", ev, components(eval(f, z)), tolerance(cfg, 1e-3), nodes);
      c.inputs = {{"f", f.to_string()}, {"z", components(z[0])}};
      return c;
    });

  // Doubling the boundary grid halves the error against f(z).
  timed(r, [&] {
    Expr f = Expr::z(P) * Expr::z(P);
    const Num gold = eval(f, z);
    const int n0 = std::max(4, nodes / 2);
    const double e1 = (mb_boundary(scalar_field(f), U, z, boundary_grid(U, n0)) - gold).norm();
    const double e2 = (mb_boundary(scalar_field(f), U, z, boundary_grid(U, 2 * n0)) - gold).norm();
    Check c = numeric("mb.refinement", "mb-reproduction", {e2}, {0.0}, tolerance(cfg, std::max(0.5 * e1, 1e-5)), 2 * n0);
    c.pass = e2 <= 0.5 * e1 || e2 <= 1e-5;
    c.inputs = {{"f", f.to_string()}, {"z", components(z[0])}, {"coarse_nodes", n0}, {"coarse_error", e1}};
    return c;
  });
  r.sort();
  return r;
}

// -------------------------------------------------------------------- leray

inline Report run_leray(const Config& cfg) {
  using namespace detail;
  require_level(cfg, "leray", {2}, {1});
  const int P = 2;
  Report r{"leray", cfg.to_json(), {}};
  const int nodes = cfg.nodes > 0 ? cfg.nodes : 12;
  const Domain B = ball_domain(P, 1);
  const Domain E = ellipsoid_domain(P, 1, {0.7, 1.2, 1.6, 0.9});
  const Vec z = from_real(P, {0.1, 0.2, -0.3, 0.15});

  timed(r, [&] {
    ScalarField f = [](const Vec& x) { return mul(x[0], x[0]) + Num::unit(2, 1); };
    QuadratureGrid g = boundary_grid(B, 8);
    Check c = numeric("leray.collapse.L", "leray-reduction", components(leray_L(f, leray_difference(), B, z, g)), components(mb_boundary(f, B, z, g)),
                      tolerance(cfg, 1e-8), static_cast<long>(g.size()));
    c.inputs = {{"psi", "zeta - z"}, {"f", "z*z + i"}};
    return c;
  });
  timed(r, [&] {
    QuadratureGrid gl = product_unit_interval(boundary_grid(B, 5), 3);
    Check c = numeric("leray.collapse.R", "leray-reduction", components(leray_R(dbar_form(Expr::zc(P), 1), leray_difference(), B, z, gl)), components(Num(P)),
                      tolerance(cfg, 1e-8), static_cast<long>(gl.size()));
    c.inputs = {{"psi", "zeta - z"}, {"g", "dbar zc"}};
    return c;
  });
  timed(r, [&] {
    const std::uint64_t s = sub_seed(cfg.seed, 500);
    std::mt19937_64 rng(s);
    std::uniform_real_distribution<double> L(0.0, 1.0);
    LerayMap psi = leray_v_rho(B);
    double worst = 0;
    for (int t = 0; t < 10000; ++t) {
      Vec a{random_num(P, rng)}, b{random_num(P, rng, 0.3)};
      worst = std::max(worst, (scalar_product(eta_psi(psi, a, b, L(rng)), a - b) - Num::one(P)).norm());
    }
    Check c = numeric("leray.eta_identity", "eta-pairing-identity", {worst}, {0.0}, tolerance(cfg, 1e-12), 0, s);
    c.inputs = {{"samples", 10000}, {"psi", "v_rho (unit ball)"}};
    return c;
  });
  const std::vector<std::pair<std::string, Expr>> fs{{"1", Expr::constant(P, 1.0)}, {"z", Expr::z(P)}, {"z2", Expr::z(P) * Expr::z(P)}};
  for (const auto& [dn, D] : std::vector<std::pair<std::string, const Domain*>>{{"ball", &B}, {"ellipsoid", &E}})
    for (const auto& [fn, f] : fs)
      timed(r, [&, dn = dn, D = D, fn = fn, f = f] {
        auto ev = [&](int nn) { return components(leray_L(scalar_field(f), leray_v_rho(*D), *D, z, boundary_grid(*D, nn))); };
        Check c = refined("leray.reproduce." + dn + "." + fn, "leray-reproduction", ev, components(eval(f, z)), tolerance(cfg, 1e-4), nodes);
        c.inputs = {{"f", f.to_string()}, {"domain", dn}, {"psi", "v_rho"}, {"z", components(z[0])}};
        return c;
      });
  for (const auto& [dn, D] : std::vector<std::pair<std::string, const Domain*>>{{"ball", &B}, {"ellipsoid", &E}})
    timed(r, [&, dn = dn, D = D] {
      const std::uint64_t s = sub_seed(cfg.seed, 600 + (dn == "ball" ? 0 : 1));
      std::mt19937_64 rng(s);
      std::uniform_real_distribution<double> T(0.0, 0.9);
      int bad = 0;
      double worst_gap = std::numeric_limits<double>::infinity();
      for (int t = 0; t < 1000; ++t) {
        Vec zeta = domain_point(*D, random_unit(4, rng), 1.0);
        Vec zz = domain_point(*D, random_unit(4, rng), T(rng));
        ConvexitySample q = convexity_sample(*D, zeta, zz);
        bad += q.holds ? 0 : 1;
        worst_gap = std::min(worst_gap, q.lhs - q.rhs);
      }
      Check c = numeric("leray.convexity." + dn, "convex-leray-inequality", {static_cast<double>(bad)}, {0.0}, 0.0, 0, s);
      c.inputs = {{"pairs", 1000}, {"domain", dn}, {"min_gap", worst_gap}};
      return c;
    });
  timed(r, [&] {
    // f - L f + R dbar f + B_U dbar f = 0 for f = zeta~ on the ellipsoid.
    const int ln = std::max(4, nodes / 2);
    Expr f = Expr::zc(P);
    LerayMap psi = leray_v_rho(E);
    Num L = leray_L(scalar_field(f), psi, E, z, boundary_grid(E, nodes));
    Num R = leray_R(dbar_form(f, 1), psi, E, z, product_unit_interval(boundary_grid(E, ln), 4));
    Num V = mb_volume(dbar_form(f, 1), E, z, volume_grid(E, z, 1e-6, ln, ln + 2));
    Check c = numeric("leray.full_identity", "leray-representation", components(eval(f, z) - L + R + V), components(Num(P)), tolerance(cfg, 1e-3), nodes);
    c.inputs = {{"f", f.to_string()}, {"domain", "ellipsoid"}, {"psi", "v_rho"}};
    c.gating = false;
    return c;
  });
  r.sort();
  return r;
}

// --------------------------------------------------------------------- dbar

// exp(4 - 1/(1/4 - |x|^2)) inside |x| < 1/2; equals 1 at the origin.
inline ScalarField radial_bump(int p) {
  return [p](const Vec& x) {
    const double r2 = norm(x) * norm(x);
    return Num::real(p, r2 < 0.25 ? std::exp(4 - 1 / (0.25 - r2)) : 0.0);
  };
}

inline std::vector<Vec> dbar_probes(int p) {
  return {from_real(p, {0.1, 0.05, 0, 0}), from_real(p, {0, 0.2, 0, 0}), from_real(p, {0, 0, 0.3, 0}), from_real(p, {-0.2, 0, 0, 0.1}),
          from_real(p, {0.1, -0.1, 0.1, -0.1})};
}

struct DbarSample {
  Vec z;
  Num u;
  Num du_dzbar;
  Num f;
  double residual = 0;
};

// u and its z~-residual at one point, tensor route (n = 1).
inline DbarSample dbar_sample(const ScalarField& f, const Domain& U, const Vec& z, int radial, int angular) {
  ScalarField u = [&](const Vec& y) { return solve_dbar(f, U, y, volume_grid(U, y, 1e-6, radial, angular)); };
  DbarSample s;
  s.z = z;
  s.u = u(z);
  s.du_dzbar = dbar_residual_frame(u, z);
  s.f = f(z);
  s.residual = (s.du_dzbar - s.f).norm();
  return s;
}

inline Report run_dbar(const Config& cfg) {
  using namespace detail;
  require_level(cfg, "dbar", {2}, {1, 2});
  const int P = 2;
  Report r{"dbar", cfg.to_json(), {}};
  const int nodes = cfg.nodes > 0 ? cfg.nodes : 6;
  const Domain U = ball_domain(P, 1);
  const ScalarField bump = radial_bump(P);

  timed(r, [&] {
    const Vec z = from_real(P, {0.1, 0.2, -0.3, 0.15});
    Num u = solve_dbar([](const Vec&) { return Num(2); }, U, z, volume_grid(U, z, 1e-6, nodes, nodes + 2));
    Check c = numeric("dbar.zero_rhs", "dbar-solution", components(u), components(Num(P)), 0.0, nodes);
    c.inputs = {{"f", "0"}, {"z", components(z[0])}};
    return c;
  });
  const auto probes = dbar_probes(P);
  for (std::size_t k = 0; k < probes.size(); ++k)
    timed(r, [&] {
      DbarSample s = dbar_sample(bump, U, probes[k], nodes, nodes + 2);
      Check c = numeric("dbar.residual.probe" + std::to_string(k), "dbar-solution", components(s.du_dzbar), components(s.f), tolerance(cfg, 1e-2), nodes);
      c.inputs = {{"f", "radial bump"}, {"z", components(s.z[0])}, {"u", components(s.u)}};
      return c;
    });
  if (cfg.mc || cfg.n == 2)
    timed(r, [&] {
      const Domain U2 = ball_domain(P, 2);
      // Near the bump centre, so the residual is not dominated by a small f(z).
      const Vec z{from_real(P, {0.05, 0, 0.1, 0})[0], from_real(P, {0.1, 0.05, 0, 0})[0]};
      const std::uint64_t s = sub_seed(cfg.seed, 700);
      const std::size_t pts = 1 << 10;
      ScalarField u = [&](const Vec& y) { return solve_dbar_mc(bump, U2, y, pts, 8, s).value; };
      Num du = dbar_residual_frame(u, z, 0, 2e-2);
      Check c = numeric("dbar.mc_probe", "dbar-solution", components(du), components(bump(z)), tolerance(cfg, 1e-1), static_cast<long>(pts * 8), s);
      c.inputs = {{"f", "radial bump"}, {"n", 2}, {"z", {components(z[0]), components(z[1])}}, {"u", components(u(z))}};
      c.gating = false;
      return c;
    });
  r.sort();
  return r;
}

// ---------------------------------------------------------------------- psh

inline Report run_psh(const Config& cfg) {
  using namespace detail;
  require_level(cfg, "psh", {2, 3, 4}, {1, 2});
  Report r{"psh", cfg.to_json(), {}};
  const int N = (1 << cfg.p) * cfg.n;
  const std::uint64_t s = sub_seed(cfg.seed, 800);
  std::mt19937_64 rng(s);
  std::vector<std::vector<double>> pts, dirs;
  std::normal_distribution<double> G;
  for (int k = 0; k < 20; ++k) {
    std::vector<double> x(N);
    for (double& c : x) c = G(rng);
    pts.push_back(x);
    dirs.push_back(random_unit(N, rng));
  }
  auto sq = [](const std::vector<double>& x) { return std::inner_product(x.begin(), x.end(), x.begin(), 0.0); };
  struct Case {
    std::string name;
    RealField rho;
    double laplacian;
  };
  const std::vector<Case> cases{{"norm2", sq, 2.0 * N},
                                {"re", [](const std::vector<double>& x) { return x[0]; }, 0.0},
                                {"norm2_minus_10x0sq", [sq](const std::vector<double>& x) { return sq(x) - 10 * x[0] * x[0]; }, 2.0 * N - 20}};
  for (const auto& cs : cases)
    timed(r, [&] {
      PshReport q = plurisubharmonic_check(cs.rho, pts, dirs);
      const bool strict = cs.laplacian > 0, sub = cs.laplacian >= 0;
      Check c = numeric("psh." + cs.name, "subharmonicity", {q.min_laplacian, q.max_laplacian}, {cs.laplacian, cs.laplacian}, tolerance(cfg, 1e-5), 0, s);
      c.inputs = {{"rho", cs.name}, {"dim", N}, {"points", pts.size()}, {"strictly_subharmonic", q.strictly_subharmonic}, {"subharmonic", q.subharmonic}};
      if (q.strictly_subharmonic != strict || q.subharmonic != sub) {
        c.pass = false;
        c.note = "classification disagrees with the exact Laplacian";
      }
      return c;
    });
  r.sort();
  return r;
}

// ------------------------------------------------------------------- maxmod

inline Report run_maxmod(const Config& cfg) {
  using namespace detail;
  require_level(cfg, "maxmod", {2}, {1});
  const int P = 2;
  Report r{"maxmod", cfg.to_json(), {}};
  const int nodes = cfg.nodes > 0 ? cfg.nodes : 16;
  const Domain U = ball_domain(P, 1);
  const QuadratureGrid in = ball_grid(4, U.interior, 1.0, 6, nodes / 2), bd = sphere_grid(4, U.interior, 1.0, nodes);
  auto probe = [&](const std::string& id, const Expr& f) {
    timed(r, [&] {
      MaxModulusReport q = max_modulus_probe(f, U, in, bd, tolerance(cfg, 1e-10));
      Check c = numeric(id, "maximum-modulus", {q.interior_max}, {q.boundary_max}, tolerance(cfg, 1e-10), static_cast<long>(in.size() + bd.size()));
      c.abs_error = std::max(0.0, q.interior_max - q.boundary_max);
      c.pass = q.pass;
      c.inputs = {{"f", f.to_string()}};
      return c;
    });
  };
  probe("maxmod.constant", Expr::constant(Num::unit(P, 2) * 3.0));
  probe("maxmod.z2", Expr::z(P) * Expr::z(P));
  const std::uint64_t s = sub_seed(cfg.seed, 900);
  std::mt19937_64 rng(s);
  for (int t = 0; t < 20; ++t) probe("maxmod.random." + std::string(t < 10 ? "0" : "") + std::to_string(t), random_z_polynomial(P, 4, 3, rng));

  std::vector<Expr> fam;
  Expr e = Expr::constant(P, 1.0);
  for (int m = 0; m <= 5; ++m) {
    fam.push_back(e);
    e = e * Expr::z(P);
  }
  const double rK = 0.5, pi = std::numbers::pi;
  // sup over m of m rK^{m-1} (m + 4) / (2 pi^2), attained at m = 2.
  const double bound = 3 / (pi * pi);
  CauchyEstimateReport big, small;
  timed(r, [&] {
    big = cauchy_estimate_probe(fam, U, rK, 1, bound * (1 + 1e-6));
    std::vector<double> closed;
    for (int m = 0; m <= 5; ++m) closed.push_back(m == 0 ? 0.0 : m * std::pow(rK, m - 1) * (m + 4) / (2 * pi * pi));
    Check c = numeric("maxmod.cauchy_estimate.ratios", "derivative-estimate", big.ratios, closed, tolerance(cfg, 1e-6), 8);
    c.inputs = {{"family", "z^m, m = 0..5"}, {"rK", rK}, {"k", 1}};
    return c;
  });
  timed(r, [&] {
    Check c = numeric("maxmod.cauchy_estimate.bounded", "derivative-estimate", {big.max_ratio}, {bound}, 0.0, 8);
    c.abs_error = std::max(0.0, big.max_ratio - bound);
    c.pass = big.max_ratio <= bound * (1 + 1e-6);
    c.inputs = {{"argmax_m", big.argmax}, {"bound", "3/pi^2"}};
    return c;
  });
  timed(r, [&] {
    // The family maximum compared with the m = 5 ratio.
    Check c = numeric("maxmod.cauchy_estimate.m5_bound", "derivative-estimate", {big.max_ratio}, {big.ratios.back()}, 1e-12, 8);
    c.abs_error = std::max(0.0, big.max_ratio - big.ratios.back());
    c.pass = c.abs_error <= 1e-12;
    c.gating = false;
    c.inputs = {{"argmax_m", big.argmax}};
    return c;
  });
  timed(r, [&] {
    small = cauchy_estimate_probe(fam, U, rK / 2, 1, bound * (1 + 1e-6));
    double worst = 0;
    for (std::size_t m = 0; m < fam.size(); ++m) worst = std::max(worst, small.ratios[m] - big.ratios[m]);
    Check c = numeric("maxmod.cauchy_estimate.shrinking_K", "derivative-estimate", {std::max(0.0, worst)}, {0.0}, 1e-12, 8);
    c.inputs = {{"rK", {rK, rK / 2}}};
    return c;
  });
  r.sort();
  return r;
}

// ----------------------------------------------------------------- registry

struct SuiteInfo {
  std::string name;
  std::string description;
  std::function<Report(const Config&)> run;
};

inline const std::vector<SuiteInfo>& suite_registry() {
  static const std::vector<SuiteInfo> reg{
      {"algebra", "Cayley-Dickson arithmetic properties (levels 0-4)", run_algebra},
      {"forms", "exact rational form identities (p = 2, 3)", run_forms},
      {"cauchy", "loop and torus Cauchy formulas (p = 2)", run_cauchy},
      {"mb", "Martinelli-Bochner kernel normalisation and reproduction (p = 2, n = 1)", run_mb},
      {"leray", "Leray maps, eta identity, convex-domain reproduction (p = 2, n = 1)", run_leray},
      {"dbar", "dbar solver residuals (p = 2, n = 1; n = 2 Monte Carlo with --mc)", run_dbar},
      {"psh", "subharmonicity classifier against exact Laplacians", run_psh},
      {"maxmod", "maximum modulus and derivative-estimate probes (p = 2)", run_maxmod},
  };
  return reg;
}

inline Report run_suite(const std::string& name, const Config& cfg) {
  for (const auto& s : suite_registry())
    if (s.name == name) return s.run(cfg);
  throw Unsupported("unknown suite '" + name + "'");
}

// --------------------------------------------------------------- config io

namespace detail {

inline std::size_t line_of(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

}  // namespace detail

// Overlays a JSON config document onto `cfg`. Unknown or mistyped fields are
// rejected by name; syntax errors report the line.
inline void apply_config_text(const std::string& text, Config& cfg) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("config line " + std::to_string(detail::line_of(text, e.byte)) + ": " + e.what());
  }
  if (!j.is_object()) throw ParseError("config: top level must be an object");
  auto field = [&](const char* key, auto& dst, auto check) {
    if (!j.contains(key)) return;
    try {
      dst = j.at(key).get<std::decay_t<decltype(dst)>>();
    } catch (const json::exception&) {
      throw ParseError(std::string("config field '") + key + "': wrong type");
    }
    if (!check(dst)) throw ParseError(std::string("config field '") + key + "': value out of range");
  };
  static const std::set<std::string> known{"p", "n", "nodes", "tol", "seed", "mc", "functions", "out", "format"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ParseError("config field '" + k + "': unknown field");
  field("p", cfg.p, [](int v) { return v >= 0 && v <= 5; });
  field("n", cfg.n, [](int v) { return v >= 1 && v <= 4; });
  field("nodes", cfg.nodes, [](int v) { return v >= 0; });
  field("tol", cfg.tol, [](double v) { return v > 0; });
  field("seed", cfg.seed, [](std::uint64_t) { return true; });
  field("mc", cfg.mc, [](bool) { return true; });
  field("functions", cfg.functions, [](const std::vector<std::string>&) { return true; });
  field("out", cfg.out, [](const std::string&) { return true; });
  field("format", cfg.format, [](const std::string& v) { return v == "json" || v == "csv"; });
}

inline void apply_config_file(const std::string& path, Config& cfg) {
  std::ifstream in(path);
  if (!in) throw ParseError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(ss.str(), cfg);
}

// ------------------------------------------------------------- form output

inline json form_to_json(const Form<double>& f) {
  json terms = json::array();
  for (const auto& [m, c] : f.terms()) terms.push_back(json{{"dx", indices_of(m)}, {"coeff", components(c)}});
  return json{{"p", f.level()}, {"dim", f.dim()}, {"terms", terms}};
}

}  // namespace cdh::suites
