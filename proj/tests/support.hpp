#pragma once

#include <random>

#include "cdh/algebra.hpp"
#include "cdh/forms.hpp"

namespace cdh::test {

inline Num random_num(int p, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Num r(p);
  for (std::size_t m = 0; m < r.dim(); ++m) r[m] = g(rng);
  return r;
}

inline double max_diff(const Num& a, const Num& b) {
  double d = 0;
  for (std::size_t m = 0; m < a.dim(); ++m) d = std::max(d, std::abs(a[m] - b[m]));
  return d;
}

// |u|^{2^p n} theta_z = C'_p P(u) with P linear in u. With dP = kappa dV,
// Stokes gives int_{S(z,eps)} theta_z = C'_p V_{2^p n} kappa = kappa.
inline Number<Rational> stokes_constant(int p, int n) {
  const int d = 1 << p, N = d * n;
  Number<Rational> kappa(p);
  for (int j = 0; j < N; ++j) {
    Vector<Rational> u(n, Number<Rational>(p));
    u[j / d][j % d] = Rational(1);
    Form<Rational> om = theta_block_sum<Rational>(p, u, Variant::Plain);
    Form<Rational> dx = Form<Rational>::monomial(Number<Rational>::one(p), N, {j});
    kappa += wedge(dx, om).coeff((Mask{1} << N) - 1);
  }
  return kappa;
}

}  // namespace cdh::test
