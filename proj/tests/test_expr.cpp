#include <gtest/gtest.h>

#include "cdh/expr.hpp"
#include "support.hpp"

using namespace cdh;
using cdh::test::max_diff;
using cdh::test::random_num;

namespace {

Expr random_expr(int p, int depth, std::mt19937_64& rng, bool conj_leaves, int n = 1) {
  std::uniform_int_distribution<int> pick(0, 9), slot(0, n - 1);
  int r = pick(rng);
  if (depth == 0 || r < 3) {
    if (r == 0) return Expr::constant(random_num(p, rng, 0.7));
    if (conj_leaves && r == 1) return Expr::zc(p, slot(rng));
    return Expr::z(p, slot(rng));
  }
  Expr a = random_expr(p, depth - 1, rng, conj_leaves, n), b = random_expr(p, depth - 1, rng, conj_leaves, n);
  return r < 6 ? a + b : a * b;
}

Num central_difference(const Expr& f, const Num& z, const Num& dir, double t = 1e-6) {
  return (eval(f, z + dir * t) - eval(f, z - dir * t)) / (2 * t);
}

Vec random_vec(int p, int n, std::mt19937_64& rng, double s) {
  Vec v;
  for (int l = 0; l < n; ++l) v.push_back(random_num(p, rng, s));
  return v;
}

}  // namespace

TEST(Expr, EvaluationExamples) {
  Expr z = Expr::z(2), zc = Expr::zc(2);
  EXPECT_EQ(eval(z * z, Num::unit(2, 1)), Num::real(2, -1.0));
  std::mt19937_64 rng(1);
  for (int t = 0; t < 50; ++t) {
    Num a = random_num(2, rng);
    EXPECT_LT(max_diff(eval(z * zc, a), Num::real(2, a.norm2())), 1e-14);
  }
}

// -z (sum_l i_l z i_l) / 2 - r1 is built from z alone yet equals |z|^2 - r1
// on the quaternions.
TEST(Expr, HolomorphicLookingNormSquare) {
  const int p = 2;
  const double r1 = 0.25;
  std::mt19937_64 rng(2);
  // Oracle: sum_l i_l z i_l = -2 conj(z), checked by brute force.
  for (int t = 0; t < 100; ++t) {
    Num a = random_num(p, rng);
    Num s(p);
    for (int l = 0; l < 4; ++l) s += mul(mul(Num::unit(p, l), a), Num::unit(p, l));
    EXPECT_LT(max_diff(s, conj(a) * -2.0), 1e-14);
  }
  Expr z = Expr::z(p);
  Expr inner = Expr::constant(Num(p));
  for (int l = 0; l < 4; ++l) {
    Expr il = Expr::constant(Num::unit(p, l));
    inner = inner + (il * z) * il;
  }
  Expr f1 = Expr::constant(p, -0.5) * (z * inner) + Expr::constant(p, -r1);
  EXPECT_TRUE(is_formally_holomorphic(f1));
  for (int t = 0; t < 100; ++t) {
    Num a = random_num(p, rng);
    EXPECT_LT(max_diff(eval(f1, a), Num::real(p, a.norm2() - r1)), 1e-13);
  }
}

TEST(Expr, DerivativeExamples) {
  const int p = 2;
  Expr z = Expr::z(p), zc = Expr::zc(p);
  std::mt19937_64 rng(3);
  Num a = random_num(p, rng), one = Num::one(p);
  EXPECT_LT(max_diff(d_dz(z * z, one, a), a * 2.0), 1e-15);
  Expr c = Expr::constant(random_num(p, rng));
  EXPECT_TRUE(d_dz(c, random_num(p, rng), a).is_zero());
  EXPECT_EQ(d_dzbar(z * zc, one, a), a);
  EXPECT_TRUE(d_dzbar(z * z, random_num(p, rng), a).is_zero());

  for (int t = 0; t < 20; ++t) {
    Num x = random_num(p, rng, 0.5), h = random_num(p, rng, 0.5);
    EXPECT_LT(max_diff(d_dz((z * z) * z, h, x), central_difference((z * z) * z, x, h)), 1e-7);
    // z~ z~ only sees conj(z): moving z along conj(h) moves z~ along h.
    EXPECT_LT(max_diff(d_dzbar(zc * zc, h, x), central_difference(zc * zc, x, conj(h))), 1e-7);
  }
}

TEST(Expr, DerivativesMatchFiniteDifferencesOnRandomTrees) {
  std::mt19937_64 rng(4);
  for (int p : {2, 3}) {
    for (int t = 0; t < 200; ++t) {
      Expr f = random_expr(p, 4, rng, true);
      Num x = random_num(p, rng, 0.5), h = random_num(p, rng, 0.5), g = random_num(p, rng, 0.5);
      // Real directional derivative = d/dz along h + d/dz~ along conj(h).
      Num total = d_dz(f, h, x) + d_dzbar(f, conj(h), x);
      double scale = std::max(1.0, total.norm());
      EXPECT_LT(max_diff(total, central_difference(f, x, h)), 1e-7 * scale) << f.to_string();
      // Additivity and real homogeneity in h.
      EXPECT_LT(max_diff(d_dz(f, h + g, x), d_dz(f, h, x) + d_dz(f, g, x)), 1e-12 * scale);
      EXPECT_LT(max_diff(d_dzbar(f, h * 2.5, x), d_dzbar(f, h, x) * 2.5), 1e-12 * scale);
    }
  }
}

TEST(Expr, LeibnizRuleOnProducts) {
  std::mt19937_64 rng(5);
  const int p = 3;
  for (int t = 0; t < 100; ++t) {
    Expr a = random_expr(p, 3, rng, true), b = random_expr(p, 3, rng, true);
    Num x = random_num(p, rng, 0.5), h = random_num(p, rng, 0.5);
    Num lhs = d_dz(a * b, h, x);
    Num rhs = mul(d_dz(a, h, x), eval(b, x)) + mul(eval(a, x), d_dz(b, h, x));
    EXPECT_LT(max_diff(lhs, rhs), 1e-12 * std::max(1.0, lhs.norm()));
  }
}

TEST(Expr, HolomorphicTreesHaveZeroConjugateDerivative) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 200; ++t) {
    Expr f = random_expr(3, 4, rng, false);
    ASSERT_TRUE(is_formally_holomorphic(f));
    EXPECT_TRUE(d_dzbar(f, random_num(3, rng), random_num(3, rng)).is_zero());
  }
}

TEST(Expr, FormalHolomorphy) {
  const int p = 2;
  Expr z = Expr::z(p), zc = Expr::zc(p), c = Expr::constant(Num::unit(p, 2));
  EXPECT_TRUE(is_formally_holomorphic(z * z + c));
  EXPECT_FALSE(is_formally_holomorphic(z * zc));
  EXPECT_TRUE(is_formally_holomorphic(zc * Expr::constant(p, 0.0) + z));
  EXPECT_TRUE(is_formally_holomorphic(Expr::constant(p, 0.0) * (zc * zc)));
  EXPECT_FALSE(is_formally_holomorphic(zc * Expr::constant(p, 1.0) + z));
}

TEST(Expr, FoldPreservesValues) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 100; ++t) {
    Expr f = random_expr(2, 5, rng, true);
    Num x = random_num(2, rng);
    EXPECT_LT(max_diff(eval(f, x), eval(fold(f), x)), 1e-12);
  }
}

TEST(Expr, LevelAndDimensionChecks) {
  Expr z = Expr::z(2, 1);
  EXPECT_THROW(eval(z, Vec{Num(2)}), DimensionMismatch);
  EXPECT_THROW(eval(Expr::z(2), Num(3)), LevelMismatch);
  EXPECT_THROW(Expr::z(2) + Expr::z(3), LevelMismatch);
}

TEST(Expr, JacobianApplyExamples) {
  std::mt19937_64 rng(8);
  const int p = 2, n = 2;
  Vec z = random_vec(p, n, rng, 1.0), h = random_vec(p, n, rng, 1.0);
  EXPECT_LT(norm(jacobian_apply(ExprMap::identity(p, n), z, h) - h), 1e-15);
  ExprMap c(p, n, {Expr::constant(random_num(p, rng)), Expr::constant(random_num(p, rng))});
  EXPECT_EQ(norm(jacobian_apply(c, z, h)), 0.0);
  EXPECT_THROW(jacobian_apply(c, z, Vec{h[0]}), DimensionMismatch);
}

TEST(Expr, ChainRule) {
  std::mt19937_64 rng(9);
  for (int p : {2, 3}) {
    const int n = 2;
    for (int t = 0; t < 50; ++t) {
      ExprMap f(p, n, {random_expr(p, 3, rng, false, n), random_expr(p, 3, rng, false, n)});
      ExprMap g(p, n, {random_expr(p, 3, rng, false, n), random_expr(p, 3, rng, false, n)});
      Vec z = random_vec(p, n, rng, 0.5), h = random_vec(p, n, rng, 0.5);
      Vec lhs = jacobian_apply(compose(g, f), z, h);
      Vec rhs = jacobian_apply(g, eval(f, z), jacobian_apply(f, z, h));
      EXPECT_LT(norm(lhs - rhs), 1e-8 * std::max(1.0, norm(lhs)));
    }
  }
}

TEST(Expr, ComposeRejectsConjugateLeaves) {
  ExprMap g(2, 1, {Expr::zc(2)});
  EXPECT_THROW(compose(g, ExprMap::identity(2, 1)), Unsupported);
}

TEST(Expr, LocalInverse) {
  const int p = 2;
  Expr z = Expr::z(p);
  Vec t{Num::real(p, 0.2)}, zero{Num(p)};
  Vec x = local_inverse(ExprMap::identity(p, 1), t, zero);
  EXPECT_EQ(x[0], t[0]);

  ExprMap f(p, 1, {z + Expr::constant(p, 0.1) * (z * z)});
  x = local_inverse(f, t, zero, 1e-12);
  EXPECT_LE(norm(eval(f, x) - t), 1e-12);
  // Scalar branch: x + 0.1 x^2 = 0.2 has the root near 0.1.
  EXPECT_NEAR(x[0][0], (-1 + std::sqrt(1 + 0.08)) / 0.2, 1e-12);

  ExprMap sq(p, 1, {z * z});
  EXPECT_THROW(local_inverse(sq, t, zero), ConvergenceError);
}

TEST(Expr, LocalInverseResidualProperty) {
  std::mt19937_64 rng(10);
  const int p = 3;
  Expr z = Expr::z(p);
  int converged = 0;
  for (int t = 0; t < 50; ++t) {
    Num c = random_num(p, rng, 0.1);
    ExprMap f(p, 1, {z + (Expr::constant(c) * z) * z});
    Vec target{random_num(p, rng, 0.2)};
    try {
      Vec x = local_inverse(f, target, Vec{Num(p)}, 1e-12);
      EXPECT_LE(norm(eval(f, x) - target), 1e-12);
      ++converged;
    } catch (const ConvergenceError&) {
    }
  }
  EXPECT_GT(converged, 40);
}

TEST(Expr, ParserRoundTrip) {
  const int p = 2;
  Expr f = parse_expr("(add (mul z zc) (const 2 1 0 0 -1))", p);
  EXPECT_EQ(f.kind(), Expr::Kind::Add);
  Num a(p, {0.5, 1.0, -2.0, 0.25});
  EXPECT_LT(max_diff(eval(f, a), Num::real(p, a.norm2()) + Num(p, {1, 0, 0, -1})), 1e-15);
  Expr g = parse_expr(f.to_string(), p);
  EXPECT_EQ(g.to_string(), f.to_string());

  Expr h = parse_expr("(mul z1 z2 zc1)", p);
  EXPECT_EQ(h.arity(), 2);
  std::mt19937_64 rng(11);
  Vec v{random_num(p, rng), Num::unit(p, 1)};
  EXPECT_LT(max_diff(eval(h, v), mul(mul(v[0], v[1]), conj(v[0]))), 1e-15);
}

TEST(Expr, ParserErrors) {
  EXPECT_THROW(parse_expr("(add z)", 2), ParseError);
  EXPECT_THROW(parse_expr("(pow z 2)", 2), ParseError);
  EXPECT_THROW(parse_expr("(const 3 1 0 0 0 0 0 0 0)", 2), ParseError);
  EXPECT_THROW(parse_expr("(mul z z", 2), ParseError);
  EXPECT_THROW(parse_expr("w", 2), ParseError);
  EXPECT_THROW(parse_expr("z0", 2), ParseError);
  EXPECT_THROW(parse_expr("z z", 2), ParseError);
}
