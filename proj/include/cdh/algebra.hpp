#pragma once

// Cayley-Dickson algebras A_p of any finite level.
//
// Basis index m runs over 0..2^p-1 with e_0 = 1. At level p the upper half
// m >= 2^{p-1} is the doubled copy: e_{h+m} = (0, e_m), so e_h is the
// doubling generator l. Products of basis elements are always +-e_{a^b}.

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <boost/rational.hpp>

#include "cdh/errors.hpp"

namespace cdh {

using Rational = boost::rational<long long>;

template <class T>
inline double to_double(const T& x) {
  return static_cast<double>(x);
}
template <>
inline double to_double<Rational>(const Rational& x) {
  return boost::rational_cast<double>(x);
}

template <class T>
class Number {
 public:
  Number() : p_(0), c_(1, T(0)) {}
  explicit Number(int p) : p_(check_level(p)), c_(std::size_t{1} << p, T(0)) {}
  Number(int p, std::vector<T> coeffs) : p_(check_level(p)), c_(std::move(coeffs)) {
    if (c_.size() != (std::size_t{1} << p))
      throw DimensionMismatch("coefficient count must be 2^p");
  }
  Number(int p, std::initializer_list<T> coeffs) : Number(p, std::vector<T>(coeffs)) {}

  static Number real(int p, T x) {
    Number r(p);
    r.c_[0] = x;
    return r;
  }
  static Number one(int p) { return real(p, T(1)); }
  static Number unit(int p, int m) {
    Number r(p);
    if (m < 0 || static_cast<std::size_t>(m) >= r.c_.size())
      throw DimensionMismatch("basis index out of range");
    r.c_[m] = T(1);
    return r;
  }

  int level() const { return p_; }
  std::size_t dim() const { return c_.size(); }
  const std::vector<T>& coeffs() const { return c_; }
  const T& operator[](std::size_t m) const { return c_[m]; }
  T& operator[](std::size_t m) { return c_[m]; }

  T re() const { return c_[0]; }
  Number imag() const {
    Number r = *this;
    r.c_[0] = T(0);
    return r;
  }

  T norm2() const {
    T s(0);
    for (const auto& x : c_) s += x * x;
    return s;
  }
  double norm() const {
    double s = 0;
    for (const auto& x : c_) {
      double d = to_double(x);
      s += d * d;
    }
    return std::sqrt(s);
  }
  bool is_zero() const {
    for (const auto& x : c_)
      if (x != T(0)) return false;
    return true;
  }

  Number operator-() const {
    Number r = *this;
    for (auto& x : r.c_) x = -x;
    return r;
  }
  Number& operator+=(const Number& o) {
    same_level(o);
    for (std::size_t m = 0; m < c_.size(); ++m) c_[m] += o.c_[m];
    return *this;
  }
  Number& operator-=(const Number& o) {
    same_level(o);
    for (std::size_t m = 0; m < c_.size(); ++m) c_[m] -= o.c_[m];
    return *this;
  }
  Number& operator*=(const T& s) {
    for (auto& x : c_) x *= s;
    return *this;
  }
  Number& operator/=(const T& s) {
    for (auto& x : c_) x /= s;
    return *this;
  }
  friend Number operator+(Number a, const Number& b) { return a += b; }
  friend Number operator-(Number a, const Number& b) { return a -= b; }
  friend Number operator*(Number a, const T& s) { return a *= s; }
  friend Number operator*(const T& s, Number a) { return a *= s; }
  friend Number operator/(Number a, const T& s) { return a /= s; }
  friend bool operator==(const Number& a, const Number& b) { return a.p_ == b.p_ && a.c_ == b.c_; }

  void same_level(const Number& o) const {
    if (o.p_ != p_) throw LevelMismatch("operands live at different levels");
  }

 private:
  static int check_level(int p) {
    if (p < 0 || p > 20) throw UnsupportedLevel("level out of range");
    return p;
  }
  int p_;
  std::vector<T> c_;
};

template <class T>
std::ostream& operator<<(std::ostream& os, const Number<T>& a) {
  os << '[';
  for (std::size_t m = 0; m < a.dim(); ++m) os << (m ? ", " : "") << a[m];
  return os << ']';
}

template <class T>
using Vector = std::vector<Number<T>>;

using Num = Number<double>;
using Vec = Vector<double>;

namespace detail {

// Sign s with e_a e_b = s e_{a^b}, by the doubling rules
// (A,0)(C,0) = (AC,0), (A,0)(0,D) = (0,DA), (0,B)(C,0) = (0,B conj C),
// (0,B)(0,D) = (-conj(D) B, 0).
inline int basis_sign_slow(int p, unsigned a, unsigned b) {
  int s = 1;
  while (p > 0) {
    unsigned h = 1u << (p - 1);
    bool ua = a >= h, ub = b >= h;
    if (ua) a -= h;
    if (ub) b -= h;
    if (!ua && ub) {
      std::swap(a, b);
    } else if (ua && !ub) {
      if (b != 0) s = -s;
    } else if (ua && ub) {
      s = -s;
      if (b != 0) s = -s;
      std::swap(a, b);
    }
    --p;
  }
  return s;
}

constexpr int kTableLevels = 7;

struct SignTables {
  std::array<std::vector<std::int8_t>, kTableLevels> t;
  SignTables() {
    for (int p = 0; p < kTableLevels; ++p) {
      unsigned n = 1u << p;
      t[p].resize(std::size_t{n} * n);
      for (unsigned a = 0; a < n; ++a)
        for (unsigned b = 0; b < n; ++b) t[p][a * n + b] = static_cast<std::int8_t>(basis_sign_slow(p, a, b));
    }
  }
};

inline const SignTables& sign_tables() {
  static const SignTables tables;
  return tables;
}

}  // namespace detail

inline int basis_sign(int p, unsigned a, unsigned b) {
  if (p < detail::kTableLevels) return detail::sign_tables().t[p][(a << p) + b];
  return detail::basis_sign_slow(p, a, b);
}

template <class T>
Number<T> conj(const Number<T>& a) {
  Number<T> r = -a;
  r[0] = a[0];
  return r;
}

template <class T>
Number<T> mul(const Number<T>& a, const Number<T>& b) {
  a.same_level(b);
  const int p = a.level();
  const unsigned n = static_cast<unsigned>(a.dim());
  Number<T> r(p);
  if (p < detail::kTableLevels) {
    const std::int8_t* tab = detail::sign_tables().t[p].data();
    for (unsigned i = 0; i < n; ++i) {
      if (a[i] == T(0)) continue;
      for (unsigned j = 0; j < n; ++j) {
        if (b[j] == T(0)) continue;
        T prod = a[i] * b[j];
        if (tab[i * n + j] > 0)
          r[i ^ j] += prod;
        else
          r[i ^ j] -= prod;
      }
    }
    return r;
  }
  for (unsigned i = 0; i < n; ++i)
    for (unsigned j = 0; j < n; ++j) {
      T prod = a[i] * b[j];
      if (detail::basis_sign_slow(p, i, j) > 0)
        r[i ^ j] += prod;
      else
        r[i ^ j] -= prod;
    }
  return r;
}

template <class T>
Number<T> operator*(const Number<T>& a, const Number<T>& b) {
  return mul(a, b);
}

// The doubling formula evaluated literally, split into halves.
template <class T>
Number<T> mul_doubling(const Number<T>& x, const Number<T>& y) {
  x.same_level(y);
  const int p = x.level();
  if (p == 0) return Number<T>(0, {x[0] * y[0]});
  const std::size_t h = x.dim() / 2;
  auto half = [&](const Number<T>& v, std::size_t off) {
    std::vector<T> c(v.coeffs().begin() + off, v.coeffs().begin() + off + h);
    return Number<T>(p - 1, std::move(c));
  };
  Number<T> a = half(x, 0), b = half(x, h), c = half(y, 0), d = half(y, h);
  Number<T> lo = mul_doubling(a, c) - mul_doubling(conj(d), b);
  Number<T> hi = mul_doubling(d, a) + mul_doubling(b, conj(c));
  std::vector<T> out(lo.coeffs());
  out.insert(out.end(), hi.coeffs().begin(), hi.coeffs().end());
  return Number<T>(p, std::move(out));
}

// z~ = (2^p - 2)^{-1} { -z + sum over imaginary generators s of s (z s~) }.
template <class T>
Number<T> conj_via_generators(const Number<T>& z) {
  const int p = z.level();
  if (p < 2) throw UnsupportedLevel("generator formula needs p >= 2");
  Number<T> acc = -z;
  for (int m = 1; m < static_cast<int>(z.dim()); ++m) {
    Number<T> s = Number<T>::unit(p, m);
    acc += mul(s, mul(z, conj(s)));
  }
  return acc / T(static_cast<long long>(z.dim()) - 2);
}

template <class T>
Number<T> inv(const Number<T>& a) {
  T n2 = a.norm2();
  if (n2 == T(0)) throw DivisionByZero("inverse of zero");
  return conj(a) / n2;
}

inline Num inv_checked(const Num& a, double tiny = 1e-300) {
  if (a.norm2() <= tiny) throw DivisionByZero("inverse of (near) zero");
  return conj(a) / a.norm2();
}

// Left-bracketed power ((z z) z)...
template <class T>
Number<T> pow(const Number<T>& z, int m) {
  if (m < 0) return pow(inv(z), -m);
  Number<T> r = Number<T>::one(z.level());
  for (int k = 0; k < m; ++k) r = mul(r, z);
  return r;
}

class UnitDirection {
 public:
  explicit UnitDirection(Num v, double tol = 1e-10) : v_(std::move(v)) {
    if (std::abs(v_[0]) > tol || std::abs(v_.norm() - 1.0) > tol)
      throw DomainError("direction must be a unit imaginary element");
    v_[0] = 0.0;
  }
  static UnitDirection generator(int p, int m) { return UnitDirection(Num::unit(p, m)); }
  const Num& value() const { return v_; }
  int level() const { return v_.level(); }

 private:
  Num v_;
};

// sin(r)/r with a short series near zero.
inline double sinc(double r) {
  if (std::abs(r) < 1e-4) {
    double r2 = r * r;
    return 1.0 - r2 / 6.0 + r2 * r2 / 120.0;
  }
  return std::sin(r) / r;
}

inline Num exp(const Num& a) {
  Num v = a.imag();
  double r = v.norm();
  double s = std::exp(a[0]);
  Num out = v * (s * sinc(r));
  out[0] = s * std::cos(r);
  return out;
}

// Principal logarithm: a = |a| exp(phi M), phi in [0, pi].
inline Num ln(const Num& a, const std::optional<UnitDirection>& branch = std::nullopt) {
  double n = a.norm();
  if (n == 0.0) throw DomainError("logarithm of zero");
  Num v = a.imag();
  double r = v.norm();
  Num out(a.level());
  if (r == 0.0) {
    if (a[0] < 0.0) {
      if (!branch) throw AmbiguousBranch("negative real needs a branch direction");
      branch->value().same_level(a);
      out = branch->value() * std::numbers::pi;
    }
  } else {
    out = v * (std::atan2(r, a[0]) / r);
  }
  out[0] = std::log(n);
  return out;
}

template <class T>
Number<T> scalar_product(const Vector<T>& zeta, const Vector<T>& z) {
  if (zeta.size() != z.size() || zeta.empty()) throw DimensionMismatch("scalar product needs equal nonempty vectors");
  Number<T> acc(zeta[0].level());
  for (std::size_t l = 0; l < z.size(); ++l) acc += mul(conj(zeta[l]), z[l]);
  return acc;
}

template <class T>
double norm(const Vector<T>& v) {
  double s = 0;
  for (const auto& x : v) s += to_double(x.norm2());
  return std::sqrt(s);
}

template <class T>
Vector<T> operator-(const Vector<T>& a, const Vector<T>& b) {
  if (a.size() != b.size()) throw DimensionMismatch("vector sizes differ");
  Vector<T> r = a;
  for (std::size_t l = 0; l < a.size(); ++l) r[l] -= b[l];
  return r;
}

template <class T>
Vector<T> operator+(const Vector<T>& a, const Vector<T>& b) {
  if (a.size() != b.size()) throw DimensionMismatch("vector sizes differ");
  Vector<T> r = a;
  for (std::size_t l = 0; l < a.size(); ++l) r[l] += b[l];
  return r;
}

// Real coordinates x_{l 2^p + m} of a vector in A_p^n, and back.
inline std::vector<double> to_real(const Vec& v) {
  std::vector<double> x;
  for (const auto& c : v) x.insert(x.end(), c.coeffs().begin(), c.coeffs().end());
  return x;
}

inline Vec from_real(int p, const std::vector<double>& x) {
  const std::size_t d = std::size_t{1} << p;
  if (x.size() % d != 0) throw DimensionMismatch("coordinate count not a multiple of 2^p");
  Vec v;
  for (std::size_t off = 0; off < x.size(); off += d)
    v.emplace_back(p, std::vector<double>(x.begin() + off, x.begin() + off + d));
  return v;
}

// Exhaustive search for (e_a +- e_b)(e_c +- e_d) = 0 with a<b, c<d.
inline std::optional<std::pair<Num, Num>> zero_divisor_search(int p) {
  if (p < 2 || p > 5) throw UnsupportedLevel("zero-divisor search supports 2 <= p <= 5");
  const int n = 1 << p;
  std::vector<Num> cands;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      for (double s : {1.0, -1.0}) cands.push_back(Num::unit(p, a) + Num::unit(p, b) * s);
  for (const auto& x : cands)
    for (const auto& y : cands)
      if (mul(x, y).norm2() < 1e-24) return std::make_pair(x, y);
  return std::nullopt;
}

}  // namespace cdh
