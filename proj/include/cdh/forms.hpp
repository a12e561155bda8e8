#pragma once

// A_p-valued exterior forms over real coordinates x_0..x_{dim-1}.
//
// A term is (c, I): coefficient c written to the left of the real monomial
// dx_I with I strictly increasing (stored as a bitmask). Real differentials
// anticommute and commute with every coefficient, so a wedge of two terms
// multiplies the coefficients in encounter order and picks up the sign of
// the permutation sorting I ++ J. Chains of wedges fold to the left.

#include <bit>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "cdh/algebra.hpp"

namespace cdh {

using Mask = std::uint64_t;

inline Mask mask_of(std::initializer_list<int> idx) {
  Mask m = 0;
  for (int i : idx) m |= Mask{1} << i;
  return m;
}

inline std::vector<int> indices_of(Mask m) {
  std::vector<int> r;
  for (int i = 0; m; ++i, m >>= 1)
    if (m & 1) r.push_back(i);
  return r;
}

// (-1)^{#pairs i in I, j in J with i > j}
inline int merge_sign(Mask I, Mask J) {
  int inv = 0;
  for (Mask j = J; j; j &= j - 1) {
    int b = std::countr_zero(j);
    inv += std::popcount(b >= 63 ? Mask{0} : (I >> (b + 1)));
  }
  return (inv & 1) ? -1 : 1;
}

template <class T>
class Form {
 public:
  using Terms = std::map<Mask, Number<T>>;

  Form(int p, int dim) : p_(p), dim_(dim) {
    if (dim < 0 || dim > 64) throw DimensionMismatch("forms support at most 64 coordinates");
  }

  static Form scalar(const Number<T>& c, int dim) {
    Form f(c.level(), dim);
    f.add(0, c);
    return f;
  }
  static Form monomial(const Number<T>& c, int dim, std::vector<int> idx) {
    Form f(c.level(), dim);
    Mask m = 0;
    int sign = 1;
    for (int i : idx) {
      if (i < 0 || i >= dim) throw DimensionMismatch("differential index out of range");
      Mask b = Mask{1} << i;
      if (m & b) return f;
      sign *= merge_sign(m, b);
      m |= b;
    }
    f.add(m, sign > 0 ? c : -c);
    return f;
  }

  int level() const { return p_; }
  int dim() const { return dim_; }
  const Terms& terms() const { return t_; }
  bool is_zero() const { return t_.empty(); }
  std::size_t size() const { return t_.size(); }

  void add(Mask m, const Number<T>& c) {
    if (c.level() != p_) throw LevelMismatch("coefficient level differs from form level");
    if (dim_ < 64 && (m >> dim_)) throw DimensionMismatch("monomial outside the coordinate range");
    auto it = t_.find(m);
    if (it == t_.end()) {
      if (!c.is_zero()) t_.emplace(m, c);
      return;
    }
    it->second += c;
    if (it->second.is_zero()) t_.erase(it);
  }

  Number<T> coeff(Mask m) const {
    auto it = t_.find(m);
    return it == t_.end() ? Number<T>(p_) : it->second;
  }

  int max_degree() const {
    int d = -1;
    for (const auto& [m, c] : t_) d = std::max(d, std::popcount(m));
    return d;
  }

  Form& operator+=(const Form& o) {
    compatible(o);
    for (const auto& [m, c] : o.t_) add(m, c);
    return *this;
  }
  Form& operator-=(const Form& o) {
    compatible(o);
    for (const auto& [m, c] : o.t_) add(m, -c);
    return *this;
  }
  friend Form operator+(Form a, const Form& b) { return a += b; }
  friend Form operator-(Form a, const Form& b) { return a -= b; }
  Form operator-() const {
    Form r = *this;
    for (auto& [m, c] : r.t_) c = -c;
    return r;
  }
  friend bool operator==(const Form& a, const Form& b) { return a.p_ == b.p_ && a.dim_ == b.dim_ && a.t_ == b.t_; }

  Form scaled(const T& s) const {
    return map([&](const Number<T>& c) { return c * s; });
  }
  // c . coefficient
  Form left(const Number<T>& s) const {
    return map([&](const Number<T>& c) { return mul(s, c); });
  }
  // coefficient . c
  Form right(const Number<T>& s) const {
    return map([&](const Number<T>& c) { return mul(c, s); });
  }
  // s (coefficient s)
  Form conjugated_by(const Number<T>& s) const {
    return map([&](const Number<T>& c) { return mul(s, mul(c, s)); });
  }

  template <class F>
  Form map(F&& fn) const {
    Form r(p_, dim_);
    for (const auto& [m, c] : t_) r.add(m, fn(c));
    return r;
  }

  // Drops every term containing a differential from `coords`.
  Form without(Mask coords) const {
    Form r(p_, dim_);
    for (const auto& [m, c] : t_)
      if (!(m & coords)) r.add(m, c);
    return r;
  }

  Form<double> to_double() const {
    Form<double> r(p_, dim_);
    for (const auto& [m, c] : t_) {
      std::vector<double> v;
      for (const auto& x : c.coeffs()) v.push_back(cdh::to_double(x));
      r.add(m, Num(p_, std::move(v)));
    }
    return r;
  }

  double max_abs_coeff() const {
    double r = 0;
    for (const auto& [m, c] : t_)
      for (const auto& x : c.coeffs()) r = std::max(r, std::abs(cdh::to_double(x)));
    return r;
  }

  Form pruned(double tol) const {
    Form r(p_, dim_);
    for (const auto& [m, c] : t_)
      if (c.norm() > tol) r.t_.emplace(m, c);
    return r;
  }

  void compatible(const Form& o) const {
    if (o.p_ != p_) throw LevelMismatch("forms live at different levels");
    if (o.dim_ != dim_) throw DimensionMismatch("forms live on different coordinate spaces");
  }

 private:
  int p_;
  int dim_;
  Terms t_;
};

template <class T>
std::ostream& operator<<(std::ostream& os, const Form<T>& f) {
  os << '{';
  bool first = true;
  for (const auto& [m, c] : f.terms()) {
    os << (first ? "" : " + ") << c << " d";
    for (int i : indices_of(m)) os << 'x' << i;
    first = false;
  }
  return os << '}';
}

template <class T>
Form<T> wedge(const Form<T>& a, const Form<T>& b) {
  a.compatible(b);
  Form<T> r(a.level(), a.dim());
  for (const auto& [I, x] : a.terms())
    for (const auto& [J, y] : b.terms()) {
      if (I & J) continue;
      Number<T> c = mul(x, y);
      r.add(I | J, merge_sign(I, J) > 0 ? c : -c);
    }
  return r;
}

// {f_0 ^ f_1 ^ ... }, brackets opening to the left.
template <class T>
Form<T> wedge_chain(const std::vector<Form<T>>& fs) {
  if (fs.empty()) throw DimensionMismatch("empty wedge chain");
  Form<T> acc = fs[0];
  for (std::size_t k = 1; k < fs.size(); ++k) acc = wedge(acc, fs[k]);
  return acc;
}

// dz = sum_m e_m dx_{off+m} and dz~ = dx_off - sum_{m>0} e_m dx_{off+m}.
template <class T>
Form<T> d_z_form(int p, int dim = -1, int offset = 0) {
  const int d = 1 << p;
  Form<T> f(p, dim < 0 ? d : dim);
  for (int m = 0; m < d; ++m) f.add(Mask{1} << (offset + m), Number<T>::unit(p, m));
  return f;
}

template <class T>
Form<T> d_zconj_form(int p, int dim = -1, int offset = 0) {
  const int d = 1 << p;
  Form<T> f(p, dim < 0 ? d : dim);
  for (int m = 0; m < d; ++m) f.add(Mask{1} << (offset + m), conj(Number<T>::unit(p, m)));
  return f;
}

inline double factorial(int n) {
  double r = 1;
  for (int k = 2; k <= n; ++k) r *= k;
  return r;
}

inline double double_factorial(int n) {
  double r = 1;
  for (int k = n; k > 1; k -= 2) r *= k;
  return r;
}

struct KernelConstants {
  int p = 2;
  int n = 1;
  double c_p = 0;
  double c_prime = 0;
};

// C_p = 1/((2^p-2)! 2 (2^{p-1}-1)),  C'_p = (2^p n)!! (2 pi)^{-2^{p-1} n}.
inline KernelConstants kernel_constants(int p, int n) {
  if (p < 2) throw UnsupportedLevel("kernel constants need p >= 2");
  KernelConstants k;
  k.p = p;
  k.n = n;
  const int d = 1 << p;
  k.c_p = 1.0 / (factorial(d - 2) * 2.0 * (d / 2 - 1));
  k.c_prime = double_factorial(d * n) * std::pow(2.0 * std::numbers::pi, -(d / 2) * n);
  return k;
}

template <class T>
T c_p_value(int p) {
  if (p < 2) throw UnsupportedLevel("C_p needs p >= 2");
  const int d = 1 << p;
  long long den = 2LL * (d / 2 - 1);
  for (int k = 2; k <= d - 2; ++k) den *= k;
  return T(1) / T(den);
}

// Ingredients of one slot: phi_0 = A ^ C0, phi_k = (s(A s)) ^ (s(B s)),
// phi'_0 = v C0, phi'_k = (s(v s)) (s(B s)), with s = i_{2k}.
template <class T>
struct BlockData {
  Number<T> v;
  Form<T> A, C0, B;
};

template <class T>
Form<T> phi_block(const BlockData<T>& b, int k) {
  const int p = b.A.level();
  if (k < 0 || k >= (1 << (p - 1))) throw DimensionMismatch("phi index out of range");
  if (k == 0) return wedge(b.A, b.C0);
  Number<T> s = Number<T>::unit(p, 2 * k);
  return wedge(b.A.conjugated_by(s), b.B.conjugated_by(s));
}

template <class T>
Form<T> phi_primed_block(const BlockData<T>& b, int k) {
  const int p = b.A.level();
  if (k < 0 || k >= (1 << (p - 1))) throw DimensionMismatch("phi index out of range");
  if (k == 0) return b.C0.left(b.v);
  Number<T> s = Number<T>::unit(p, 2 * k);
  return b.B.conjugated_by(s).left(mul(s, mul(b.v, s)));
}

// C_p {phi_0 ^ ... ^ phi_{K-1}}
template <class T>
Form<T> w_block(const BlockData<T>& b) {
  const int p = b.A.level();
  std::vector<Form<T>> f;
  for (int k = 0; k < (1 << (p - 1)); ++k) f.push_back(phi_block(b, k));
  return wedge_chain(f).scaled(c_p_value<T>(p));
}

// {phi_0 ^ ... ^ phi'_k ^ ... ^ phi_{K-1}}
template <class T>
Form<T> w_primed_block(const BlockData<T>& b, int k) {
  const int p = b.A.level();
  std::vector<Form<T>> f;
  for (int q = 0; q < (1 << (p - 1)); ++q) f.push_back(q == k ? phi_primed_block(b, q) : phi_block(b, q));
  return wedge_chain(f);
}

// sum_s sum_q {W_1 ^ ... ^ W'_{s,q} ^ ... ^ W_n}
template <class T>
Form<T> assemble_blocks(const std::vector<BlockData<T>>& slots) {
  if (slots.empty()) throw DimensionMismatch("no slots");
  const int p = slots[0].A.level();
  const int n = static_cast<int>(slots.size());
  std::vector<Form<T>> full;
  for (const auto& b : slots) full.push_back(w_block(b));
  Form<T> acc(p, slots[0].A.dim());
  for (int s = 0; s < n; ++s)
    for (int q = 0; q < (1 << (p - 1)); ++q) {
      std::vector<Form<T>> chain = full;
      chain[s] = w_primed_block(slots[s], q);
      acc += wedge_chain(chain);
    }
  return acc;
}

enum class Variant { Plain, Check, Hat };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Plain: return "plain";
    case Variant::Check: return "check";
    case Variant::Hat: return "hat";
  }
  return "?";
}

// Coordinates: zeta slot l on [l 2^p, (l+1) 2^p); z slot l shifted by
// N = 2^p n. The plain variant only carries zeta differentials.
inline int variant_dim(int p, int n, Variant v) { return (v == Variant::Plain ? 1 : 2) * (1 << p) * n; }

template <class T>
BlockData<T> kernel_slot(int p, int n, int slot, const Number<T>& u, Variant v) {
  const int d = 1 << p, N = d * n, dim = variant_dim(p, n, v);
  Form<T> dzeta = d_z_form<T>(p, dim, slot * d);
  Form<T> dzetac = d_zconj_form<T>(p, dim, slot * d);
  BlockData<T> b{conj(u), dzetac, dzetac, dzeta};
  if (v == Variant::Check) {
    b.A = dzetac - d_zconj_form<T>(p, dim, N + slot * d);
  } else if (v == Variant::Hat) {
    b.A = dzetac - d_zconj_form<T>(p, dim, N + slot * d);
    b.C0 = b.A;
    b.B = dzeta - d_z_form<T>(p, dim, N + slot * d);
  }
  return b;
}

template <class T>
Form<T> build_phi(int p, int k, Variant v, bool primed, const Number<T>& zeta, const Number<T>& z) {
  BlockData<T> b = kernel_slot<T>(p, 1, 0, zeta - z, v);
  return primed ? phi_primed_block(b, k) : phi_block(b, k);
}

template <class T>
Form<T> build_w(int p) {
  return w_block(kernel_slot<T>(p, 1, 0, Number<T>(p), Variant::Plain));
}

template <class T>
Form<T> build_w_k(int p, int k, const Number<T>& zeta, const Number<T>& z, Variant v) {
  return w_primed_block(kernel_slot<T>(p, 1, 0, zeta - z, v), k);
}

// kappa_0 = dz ^ dz~, kappa_q = (s(dz s)) ^ (s(dz s)).
template <class T>
Form<T> build_kappa(int p, int q) {
  Form<T> dz = d_z_form<T>(p);
  if (q == 0) return wedge(dz, d_zconj_form<T>(p));
  Number<T> s = Number<T>::unit(p, 2 * q);
  Form<T> c = dz.conjugated_by(s);
  return wedge(c, c);
}

// The w_{2^p} chain with phi_v replaced by kappa_v.
template <class T>
Form<T> build_w_kappa(int p, int v) {
  BlockData<T> b = kernel_slot<T>(p, 1, 0, Number<T>(p), Variant::Plain);
  std::vector<Form<T>> f;
  for (int q = 0; q < (1 << (p - 1)); ++q) f.push_back(q == v ? build_kappa<T>(p, q) : phi_block(b, q));
  return wedge_chain(f).scaled(c_p_value<T>(p));
}

// Block sum of the kernel without the C'_p |u|^{-2^p n} scale.
template <class T>
Form<T> theta_block_sum(int p, const Vector<T>& u, Variant v) {
  const int n = static_cast<int>(u.size());
  std::vector<BlockData<T>> slots;
  for (int l = 0; l < n; ++l) slots.push_back(kernel_slot<T>(p, n, l, u[l], v));
  return assemble_blocks(slots);
}

inline Form<double> build_theta(int p, const Vec& zeta, const Vec& z, Variant v = Variant::Plain) {
  Vec u = zeta - z;
  const int n = static_cast<int>(u.size());
  double r = norm(u);
  if (r == 0.0) throw SingularKernel("kernel evaluated at its pole");
  KernelConstants kc = kernel_constants(p, n);
  return theta_block_sum<double>(p, u, v).scaled(kc.c_prime * std::pow(r, -(1 << p) * n));
}

// theta_z is R-linear in u up to the scalar factor; caches the blocks of
// each real basis direction so evaluation is a dense combination.
class ThetaCache {
 public:
  ThetaCache(int p, int n) : p_(p), n_(n), kc_(kernel_constants(p, n)) {
    const int N = (1 << p) * n;
    std::map<Mask, int> slot;
    std::vector<Form<double>> basis;
    for (int j = 0; j < N; ++j) {
      std::vector<double> x(N, 0.0);
      x[j] = 1.0;
      basis.push_back(theta_block_sum<double>(p, from_real(p, x), Variant::Plain));
      for (const auto& [m, c] : basis.back().terms())
        if (!slot.count(m)) slot.emplace(m, 0);
    }
    for (auto& [m, i] : slot) {
      i = static_cast<int>(masks_.size());
      masks_.push_back(m);
    }
    const int d = 1 << p;
    omega_.assign(static_cast<std::size_t>(N) * masks_.size() * d, 0.0);
    for (int j = 0; j < N; ++j)
      for (const auto& [m, c] : basis[j].terms())
        for (int a = 0; a < d; ++a) omega_[(static_cast<std::size_t>(j) * masks_.size() + slot[m]) * d + a] = c[a];
  }

  int level() const { return p_; }
  int n() const { return n_; }
  const std::vector<Mask>& masks() const { return masks_; }

  // Coefficients (per mask, 2^p reals each) of theta at offset u = zeta - z.
  std::vector<double> coefficients(const std::vector<double>& u) const {
    const int d = 1 << p_;
    const std::size_t M = masks_.size();
    double r2 = 0;
    for (double x : u) r2 += x * x;
    if (r2 == 0.0) throw SingularKernel("kernel evaluated at its pole");
    const double scale = kc_.c_prime * std::pow(r2, -0.5 * (1 << p_) * n_);
    std::vector<double> out(M * d, 0.0);
    for (std::size_t j = 0; j < u.size(); ++j) {
      if (u[j] == 0.0) continue;
      const double* w = &omega_[j * M * d];
      for (std::size_t k = 0; k < M * d; ++k) out[k] += u[j] * w[k];
    }
    for (double& x : out) x *= scale;
    return out;
  }

  Form<double> evaluate(const std::vector<double>& u) const {
    const int d = 1 << p_;
    std::vector<double> c = coefficients(u);
    Form<double> f(p_, (1 << p_) * n_);
    for (std::size_t i = 0; i < masks_.size(); ++i) f.add(masks_[i], Num(p_, std::vector<double>(c.begin() + i * d, c.begin() + (i + 1) * d)));
    return f;
  }

 private:
  int p_, n_;
  KernelConstants kc_;
  std::vector<Mask> masks_;
  std::vector<double> omega_;
};

// Minor det J[rows I, cols K] of a real chart Jacobian.
inline double minor_det(const Eigen::MatrixXd& J, const std::vector<int>& rows, const std::vector<int>& cols) {
  const int d = static_cast<int>(rows.size());
  if (d == 0) return 1.0;
  Eigen::MatrixXd m(d, d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) m(a, b) = J(rows[a], cols[b]);
  return m.determinant();
}

// Substitutes dx_m = sum_k J(m,k) du_k; the result lives on J.cols() coordinates.
inline Form<double> pullback(const Form<double>& f, const Eigen::MatrixXd& J) {
  if (J.rows() != f.dim()) throw DimensionMismatch("Jacobian rows differ from form dimension");
  const int k = static_cast<int>(J.cols());
  Form<double> r(f.level(), k);
  for (const auto& [m, c] : f.terms()) {
    std::vector<int> rows = indices_of(m);
    const int d = static_cast<int>(rows.size());
    if (d > k) continue;
    for (Mask K = 0; K < (Mask{1} << k); ++K) {
      if (std::popcount(K) != d) continue;
      double det = minor_det(J, rows, indices_of(K));
      if (det != 0.0) r.add(K, c * det);
    }
  }
  return r;
}

// Integrand of a top-degree pullback: only the coefficient of
// du_0 ^ ... ^ du_{k-1} where k = J.cols(). Skips lower-degree work.
inline Num pullback_top(const Form<double>& f, const Eigen::MatrixXd& J) {
  if (J.rows() != f.dim()) throw DimensionMismatch("Jacobian rows differ from form dimension");
  const int k = static_cast<int>(J.cols());
  std::vector<int> cols(k);
  for (int i = 0; i < k; ++i) cols[i] = i;
  Num acc(f.level());
  for (const auto& [m, c] : f.terms())
    if (std::popcount(m) == k) acc += c * minor_det(J, indices_of(m), cols);
  return acc;
}

inline Num top_coefficient(const Form<double>& f, int degree, double tol = 1e-9) {
  Num out(f.level());
  bool found = false;
  for (const auto& [m, c] : f.terms()) {
    if (c.norm() <= tol) continue;
    if (std::popcount(m) != degree) throw MalformedIntegrand("nonzero term of unexpected degree");
    if (found) throw MalformedIntegrand("more than one monomial of the expected degree");
    out = c;
    found = true;
  }
  return out;
}

}  // namespace cdh
