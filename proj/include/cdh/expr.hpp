#pragma once

// Expression trees in the letters z, z~ (per slot) and A_p constants.
// Products are binary and keep their brackets; nothing is re-associated.

#include <cctype>
#include <cstdlib>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "cdh/algebra.hpp"

namespace cdh {

class Expr {
 public:
  enum class Kind { Z, ZConj, Const, Add, Mul };

  struct Node {
    Kind kind;
    int slot = 0;
    Num value;
    std::shared_ptr<const Node> lhs, rhs;
  };

  static Expr z(int p, int slot = 0) { return Expr(p, leaf(Kind::Z, slot)); }
  static Expr zc(int p, int slot = 0) { return Expr(p, leaf(Kind::ZConj, slot)); }
  static Expr constant(const Num& c) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Const;
    n->value = c;
    return Expr(c.level(), n);
  }
  static Expr constant(int p, double x) { return constant(Num::real(p, x)); }

  friend Expr operator+(const Expr& a, const Expr& b) { return binary(Kind::Add, a, b); }
  friend Expr operator*(const Expr& a, const Expr& b) { return binary(Kind::Mul, a, b); }

  int level() const { return p_; }
  const Node& node() const { return *n_; }
  Expr lhs() const { return Expr(p_, n_->lhs); }
  Expr rhs() const { return Expr(p_, n_->rhs); }
  Kind kind() const { return n_->kind; }

  // 1 + largest slot index used by a variable leaf (0 for constants).
  int arity() const {
    switch (n_->kind) {
      case Kind::Z:
      case Kind::ZConj: return n_->slot + 1;
      case Kind::Const: return 0;
      default: return std::max(lhs().arity(), rhs().arity());
    }
  }

  std::string to_string() const {
    std::ostringstream os;
    write(os, *n_);
    return os.str();
  }

 private:
  Expr(int p, std::shared_ptr<const Node> n) : p_(p), n_(std::move(n)) {}

  static std::shared_ptr<const Node> leaf(Kind k, int slot) {
    if (slot < 0) throw DimensionMismatch("negative variable slot");
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->slot = slot;
    return n;
  }
  static Expr binary(Kind k, const Expr& a, const Expr& b) {
    if (a.p_ != b.p_) throw LevelMismatch("expression levels differ");
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->lhs = a.n_;
    n->rhs = b.n_;
    return Expr(a.p_, n);
  }
  static void write(std::ostream& os, const Node& n) {
    switch (n.kind) {
      case Kind::Z: os << "z" << n.slot + 1; break;
      case Kind::ZConj: os << "zc" << n.slot + 1; break;
      case Kind::Const: {
        os << "(const " << n.value.level();
        for (double c : n.value.coeffs()) os << ' ' << c;
        os << ')';
        break;
      }
      case Kind::Add:
      case Kind::Mul:
        os << (n.kind == Kind::Add ? "(add " : "(mul ");
        write(os, *n.lhs);
        os << ' ';
        write(os, *n.rhs);
        os << ')';
        break;
    }
  }

  int p_;
  std::shared_ptr<const Node> n_;
};

namespace detail {

inline void check_point(const Expr& f, const Vec& z) {
  if (z.size() < static_cast<std::size_t>(f.arity())) throw DimensionMismatch("too few variables for expression");
  for (const auto& c : z)
    if (c.level() != f.level()) throw LevelMismatch("point level differs from expression level");
}

inline Num eval_node(const Expr::Node& n, const Vec& z) {
  switch (n.kind) {
    case Expr::Kind::Z: return z[n.slot];
    case Expr::Kind::ZConj: return conj(z[n.slot]);
    case Expr::Kind::Const: return n.value;
    case Expr::Kind::Add: return eval_node(*n.lhs, z) + eval_node(*n.rhs, z);
    case Expr::Kind::Mul: return mul(eval_node(*n.lhs, z), eval_node(*n.rhs, z));
  }
  return {};
}

struct ValueDeriv {
  Num v, d;
};

// Value and directional derivative where each leaf of kind `target` in
// `slot` is replaced by h in turn (Leibniz over the ordered tree).
inline ValueDeriv derive_node(const Expr::Node& n, const Vec& z, Expr::Kind target, int slot, const Num& h) {
  switch (n.kind) {
    case Expr::Kind::Z:
    case Expr::Kind::ZConj: {
      Num v = n.kind == Expr::Kind::Z ? z[n.slot] : conj(z[n.slot]);
      Num d = (n.kind == target && n.slot == slot) ? h : Num(h.level());
      return {v, d};
    }
    case Expr::Kind::Const: return {n.value, Num(n.value.level())};
    case Expr::Kind::Add: {
      auto a = derive_node(*n.lhs, z, target, slot, h);
      auto b = derive_node(*n.rhs, z, target, slot, h);
      return {a.v + b.v, a.d + b.d};
    }
    case Expr::Kind::Mul: {
      auto a = derive_node(*n.lhs, z, target, slot, h);
      auto b = derive_node(*n.rhs, z, target, slot, h);
      return {mul(a.v, b.v), mul(a.d, b.v) + mul(a.v, b.d)};
    }
  }
  return {};
}

}  // namespace detail

inline Num eval(const Expr& f, const Vec& z) {
  detail::check_point(f, z);
  return detail::eval_node(f.node(), z);
}
inline Num eval(const Expr& f, const Num& z) { return eval(f, Vec{z}); }

inline Num d_dz(const Expr& f, int slot, const Num& h, const Vec& z) {
  detail::check_point(f, z);
  h.same_level(z.at(slot));
  return detail::derive_node(f.node(), z, Expr::Kind::Z, slot, h).d;
}
inline Num d_dzbar(const Expr& f, int slot, const Num& h, const Vec& z) {
  detail::check_point(f, z);
  h.same_level(z.at(slot));
  return detail::derive_node(f.node(), z, Expr::Kind::ZConj, slot, h).d;
}
inline Num d_dz(const Expr& f, const Num& h, const Num& z) { return d_dz(f, 0, h, Vec{z}); }
inline Num d_dzbar(const Expr& f, const Num& h, const Num& z) { return d_dzbar(f, 0, h, Vec{z}); }

// Constant folding: evaluates constant subtrees, drops additive zeros and
// annihilates products with a zero constant.
inline Expr fold(const Expr& f) {
  using K = Expr::Kind;
  if (f.kind() != K::Add && f.kind() != K::Mul) return f;
  Expr a = fold(f.lhs()), b = fold(f.rhs());
  bool ca = a.kind() == K::Const, cb = b.kind() == K::Const;
  if (ca && cb)
    return Expr::constant(f.kind() == K::Add ? a.node().value + b.node().value : mul(a.node().value, b.node().value));
  bool za = ca && a.node().value.is_zero(), zb = cb && b.node().value.is_zero();
  if (f.kind() == K::Add) {
    if (za) return b;
    if (zb) return a;
    return a + b;
  }
  if (za || zb) return Expr::constant(Num(f.level()));
  return a * b;
}

inline bool contains_conj(const Expr& f) {
  switch (f.kind()) {
    case Expr::Kind::ZConj: return true;
    case Expr::Kind::Add:
    case Expr::Kind::Mul: return contains_conj(f.lhs()) || contains_conj(f.rhs());
    default: return false;
  }
}

inline bool is_formally_holomorphic(const Expr& f) { return !contains_conj(fold(f)); }

// Replaces every z_k leaf by g[k]; only defined for maps without z~ leaves.
inline Expr substitute(const Expr& f, const std::vector<Expr>& g) {
  switch (f.kind()) {
    case Expr::Kind::Z: return g.at(f.node().slot);
    case Expr::Kind::ZConj: throw Unsupported("composition through a z~ leaf is not representable");
    case Expr::Kind::Const: return f;
    case Expr::Kind::Add: return substitute(f.lhs(), g) + substitute(f.rhs(), g);
    case Expr::Kind::Mul: return substitute(f.lhs(), g) * substitute(f.rhs(), g);
  }
  return f;
}

struct ExprMap {
  int p = 0;
  int n = 0;
  std::vector<Expr> f;

  ExprMap(int p_, int n_, std::vector<Expr> f_) : p(p_), n(n_), f(std::move(f_)) {
    for (const auto& e : f) {
      if (e.level() != p) throw LevelMismatch("component level differs from map level");
      if (e.arity() > n) throw DimensionMismatch("component uses a slot beyond n");
    }
  }
  static ExprMap identity(int p, int n) {
    std::vector<Expr> f;
    for (int l = 0; l < n; ++l) f.push_back(Expr::z(p, l));
    return ExprMap(p, n, std::move(f));
  }
  std::size_t out_dim() const { return f.size(); }
};

inline Vec eval(const ExprMap& m, const Vec& z) {
  if (z.size() != static_cast<std::size_t>(m.n)) throw DimensionMismatch("point dimension differs from map dimension");
  Vec r;
  for (const auto& e : m.f) r.push_back(eval(e, z));
  return r;
}

// sum_k d/d(z_k) f_j . h_k
inline Vec jacobian_apply(const ExprMap& m, const Vec& z, const Vec& h) {
  if (z.size() != static_cast<std::size_t>(m.n) || h.size() != z.size())
    throw DimensionMismatch("jacobian_apply dimensions");
  Vec r;
  for (const auto& e : m.f) {
    Num acc(m.p);
    for (int k = 0; k < m.n; ++k) acc += d_dz(e, k, h[k], z);
    r.push_back(acc);
  }
  return r;
}

// Real directional derivative: z~ leaves move along conj(h).
inline Vec directional_derivative(const ExprMap& m, const Vec& z, const Vec& h) {
  Vec r = jacobian_apply(m, z, h);
  for (std::size_t j = 0; j < m.f.size(); ++j)
    for (int k = 0; k < m.n; ++k) r[j] += d_dzbar(m.f[j], k, conj(h[k]), z);
  return r;
}

// (g o f)(z) = g(f(z)).
inline ExprMap compose(const ExprMap& g, const ExprMap& f) {
  if (static_cast<int>(f.out_dim()) != g.n) throw DimensionMismatch("compose: inner output differs from outer input");
  std::vector<Expr> out;
  for (const auto& e : g.f) out.push_back(substitute(e, f.f));
  return ExprMap(g.p, f.n, std::move(out));
}

// Real Jacobian of m at z, columns indexed by the real coordinates.
inline Eigen::MatrixXd real_jacobian(const ExprMap& m, const Vec& z) {
  const int d = 1 << m.p;
  Eigen::MatrixXd J(static_cast<int>(m.out_dim()) * d, m.n * d);
  for (int k = 0; k < m.n; ++k)
    for (int c = 0; c < d; ++c) {
      Vec h(m.n, Num(m.p));
      h[k] = Num::unit(m.p, c);
      Vec col = directional_derivative(m, z, h);
      for (std::size_t j = 0; j < col.size(); ++j)
        for (int r = 0; r < d; ++r) J(static_cast<int>(j) * d + r, k * d + c) = col[j][r];
    }
  return J;
}

// Solves f(x) = target near start by x <- target + (x - f(x)).
inline Vec local_inverse(const ExprMap& m, const Vec& target, const Vec& start, double tol = 1e-12, int max_iter = 500) {
  if (static_cast<int>(m.out_dim()) != m.n || target.size() != start.size() || start.size() != static_cast<std::size_t>(m.n))
    throw DimensionMismatch("local_inverse needs a square map");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(real_jacobian(m, start));
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv.minCoeff() <= 1e-10 * std::max(1.0, sv.maxCoeff()))
    throw ConvergenceError("map is not regular at the start point");
  Vec x = start;
  for (int it = 0; it <= max_iter; ++it) {
    Vec fx = eval(m, x);
    double res = norm(fx - target);
    if (!std::isfinite(res) || res > 1e12) throw ConvergenceError("fixed-point iteration diverged");
    if (res <= tol) return x;
    x = target + (x - fx);
  }
  throw ConvergenceError("fixed-point iteration did not converge within max_iter");
}

// Prefix syntax: z, zc, z1..zn, zc1..zcn, (add a b ...), (mul a b ...),
// (const p c0 ... c_{2^p-1}). Extra operands fold to the left.
class Parser {
 public:
  Parser(std::string_view text, int p) : s_(text), p_(p) {}

  Expr parse() {
    Expr e = expr();
    skip();
    if (i_ != s_.size()) fail("trailing input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("expression parse error at offset " + std::to_string(i_) + ": " + what);
  }
  void skip() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
  }
  std::string token() {
    skip();
    std::size_t b = i_;
    while (i_ < s_.size() && !std::isspace(static_cast<unsigned char>(s_[i_])) && s_[i_] != '(' && s_[i_] != ')') ++i_;
    if (b == i_) fail("expected a token");
    return std::string(s_.substr(b, i_ - b));
  }
  double number() {
    std::string t = token();
    char* end = nullptr;
    double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size()) fail("bad number '" + t + "'");
    return v;
  }
  Expr variable(const std::string& t) {
    bool c = t.rfind("zc", 0) == 0;
    std::string rest = t.substr(c ? 2 : 1);
    int slot = 0;
    if (!rest.empty()) {
      for (char ch : rest)
        if (!std::isdigit(static_cast<unsigned char>(ch))) fail("unknown symbol '" + t + "'");
      slot = std::stoi(rest) - 1;
      if (slot < 0) fail("variables are numbered from 1");
    }
    return c ? Expr::zc(p_, slot) : Expr::z(p_, slot);
  }
  Expr expr() {
    skip();
    if (i_ >= s_.size()) fail("unexpected end of input");
    if (s_[i_] != '(') {
      std::string t = token();
      if (t[0] != 'z') fail("unknown symbol '" + t + "'");
      return variable(t);
    }
    ++i_;
    std::string op = token();
    Expr out = Expr::constant(p_, 0.0);
    if (op == "const") {
      double lv = number();
      int lp = static_cast<int>(lv);
      if (lp != lv || lp != p_) fail("constant level must equal the expression level");
      std::vector<double> c(std::size_t{1} << lp);
      for (auto& x : c) x = number();
      out = Expr::constant(Num(lp, c));
    } else if (op == "add" || op == "mul") {
      std::vector<Expr> args;
      skip();
      while (i_ < s_.size() && s_[i_] != ')') {
        args.push_back(expr());
        skip();
      }
      if (args.size() < 2) fail(op + " needs at least two operands");
      out = args[0];
      for (std::size_t k = 1; k < args.size(); ++k) out = op == "add" ? out + args[k] : out * args[k];
    } else {
      fail("unknown operator '" + op + "'");
    }
    skip();
    if (i_ >= s_.size() || s_[i_] != ')') fail("expected ')'");
    ++i_;
    return out;
  }

  std::string_view s_;
  std::size_t i_ = 0;
  int p_;
};

inline Expr parse_expr(std::string_view text, int p) { return Parser(text, p).parse(); }

}  // namespace cdh
