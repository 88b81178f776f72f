#pragma once

// Holomorphic self-maps of the punctured plane of finite order:
//   f(z) = z^n * exp(P(z) + Q(1/z))
// with P, Q polynomials, deg P >= 1, deg Q >= 1, Q(0) = 0.

#include <complex>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

namespace cstar {

using cplx = std::complex<double>;

// Largest |Re u| we allow before exp(u) is considered out of range.
// Slightly inside the double limit so downstream arithmetic stays finite.
inline constexpr double exp_arg_limit = 690.0;

// Polynomial with coefficients in ascending degree order.
using poly = std::vector<cplx>;

inline cplx horner(const poly& c, cplx z) {
  cplx acc = 0.0;
  for (std::size_t i = c.size(); i-- > 0;) acc = acc * z + c[i];
  return acc;
}

inline poly differentiate(const poly& c) {
  poly d;
  for (std::size_t i = 1; i < c.size(); ++i) d.push_back(double(i) * c[i]);
  if (d.empty()) d.push_back(0.0);
  return d;
}

inline int poly_degree(const poly& c) {
  for (std::size_t i = c.size(); i-- > 0;)
    if (c[i] != cplx(0.0)) return int(i);
  return -1;
}

struct PuncturedPolyMap {
  int n = 0;  // index: winding of f around the origin
  poly P;     // P(z), deg >= 1
  poly Q;     // Q(w) evaluated at w = 1/z; Q(0) = 0 by convention, deg >= 1

  PuncturedPolyMap(int index, poly p_coeffs, poly q_coeffs)
      : n(index), P(std::move(p_coeffs)), Q(std::move(q_coeffs)) {
    if (poly_degree(P) < 1)
      throw std::invalid_argument("PuncturedPolyMap: deg P must be >= 1");
    if (poly_degree(Q) < 1)
      throw std::invalid_argument("PuncturedPolyMap: deg Q must be >= 1");
    if (!Q.empty() && Q[0] != cplx(0.0))
      throw std::invalid_argument(
          "PuncturedPolyMap: Q must have zero constant term (fold it into P)");
    if (Q.empty()) Q.push_back(0.0);
    P.resize(std::size_t(poly_degree(P)) + 1);
    Q.resize(std::size_t(poly_degree(Q)) + 1);
  }

  int deg_p() const { return int(P.size()) - 1; }
  int deg_q() const { return int(Q.size()) - 1; }
  cplx lead_p() const { return P.back(); }
  cplx lead_q() const { return Q.back(); }
};

struct OrderData {
  int rho_inf;   // order at infinity = deg P
  int rho_zero;  // order at zero = deg Q
  // The lower order lambda coincides with rho for these maps.
  int lambda_inf;
  int lambda_zero;
};

inline OrderData order(const PuncturedPolyMap& f) {
  return {f.deg_p(), f.deg_q(), f.deg_p(), f.deg_q()};
}

// f(z), computed as exp(n log z + P(z) + Q(1/z)) so the result is never 0.
inline cplx eval(const PuncturedPolyMap& f, cplx z) {
  if (z == cplx(0.0))
    throw std::domain_error("eval: z = 0 is outside the punctured plane");
  cplx u = double(f.n) * std::log(z) + horner(f.P, z) + horner(f.Q, 1.0 / z);
  if (!(std::abs(u.real()) <= exp_arg_limit))
    throw std::range_error(
        "eval: |f(z)| out of double range; use the logarithmic transform");
  return std::exp(u);
}

// f'(z)/f(z) = n/z + P'(z) - Q'(1/z)/z^2. Finite and nonzero-safe off 0.
inline cplx log_derivative(const PuncturedPolyMap& f, cplx z) {
  if (z == cplx(0.0))
    throw std::domain_error("log_derivative: z = 0 is outside the domain");
  cplx w = 1.0 / z;
  return double(f.n) * w + horner(differentiate(f.P), z) -
         horner(differentiate(f.Q), w) * w * w;
}

// Clearing denominators in f'/f = 0 gives the critical polynomial
//   n z^q + z^{q+1} P'(z) - sum_{j=1..q} j b_j z^{q-j},
// of exact degree p+q with nonzero constant term, so f has p+q critical
// points in C* counted with multiplicity.
inline poly critical_polynomial(const PuncturedPolyMap& f) {
  int p = f.deg_p(), q = f.deg_q();
  poly c(std::size_t(p + q) + 1, cplx(0.0));
  c[std::size_t(q)] += double(f.n);
  for (int i = 1; i <= p; ++i) c[std::size_t(i + q)] += double(i) * f.P[std::size_t(i)];
  for (int j = 1; j <= q; ++j) c[std::size_t(q - j)] -= double(j) * f.Q[std::size_t(j)];
  return c;
}

}  // namespace cstar
