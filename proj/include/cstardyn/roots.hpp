#pragma once

// Dense complex polynomial roots: Aberth-Ehrlich simultaneous iteration,
// with a Laguerre + deflation fallback for the rare stubborn case.

#include <cmath>
#include <numbers>
#include <random>

#include "cstardyn/map.hpp"

namespace cstar {

namespace detail {

// Backward-error style residual scale: |p(z)| measured against sum |a_i||z|^i.
inline double residual_scale(const poly& c, cplx z) {
  double az = std::abs(z), t = 1.0, s = 0.0;
  for (const cplx& a : c) {
    s += std::abs(a) * t;
    t *= az;
  }
  return s > 0.0 ? s : 1.0;
}

inline void horner_pair(const poly& c, cplx z, cplx& v, cplx& dv) {
  v = 0.0;
  dv = 0.0;
  for (std::size_t i = c.size(); i-- > 0;) {
    dv = dv * z + v;
    v = v * z + c[i];
  }
}

inline double cauchy_radius(const poly& c) {
  double an = std::abs(c.back());
  double m = 0.0;
  for (std::size_t i = 0; i + 1 < c.size(); ++i)
    m = std::max(m, std::abs(c[i]) / an);
  return 1.0 + m;
}

inline bool aberth_sweeps(const poly& c, std::vector<cplx>& z, double rel_tol,
                          int max_sweeps) {
  const std::size_t N = z.size();
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool all_ok = true;
    for (std::size_t k = 0; k < N; ++k) {
      cplx v, dv;
      horner_pair(c, z[k], v, dv);
      if (std::abs(v) <= rel_tol * residual_scale(c, z[k])) continue;
      all_ok = false;
      cplx newton = (dv != cplx(0.0)) ? v / dv : cplx(1e-3, 1e-3);
      cplx rep = 0.0;
      for (std::size_t j = 0; j < N; ++j)
        if (j != k && z[k] != z[j]) rep += 1.0 / (z[k] - z[j]);
      cplx denom = 1.0 - newton * rep;
      cplx step = (std::abs(denom) > 1e-14) ? newton / denom : newton;
      z[k] -= step;
    }
    if (all_ok) return true;
  }
  for (std::size_t k = 0; k < N; ++k) {
    cplx v, dv;
    horner_pair(c, z[k], v, dv);
    if (std::abs(v) > rel_tol * residual_scale(c, z[k])) return false;
  }
  return true;
}

// One Laguerre root of c, seeded at z0. Degree from coefficient count.
inline cplx laguerre_root(const poly& c, cplx z0, int max_iter = 200) {
  const double n = double(c.size() - 1);
  cplx z = z0;
  std::mt19937_64 rng(0x5eedULL);
  std::uniform_real_distribution<double> jitter(-0.5, 0.5);
  for (int it = 0; it < max_iter; ++it) {
    cplx v, dv;
    horner_pair(c, z, v, dv);
    if (std::abs(v) <= 1e-14 * residual_scale(c, z)) return z;
    // second derivative via Horner on c''
    cplx ddv = 0.0, t1 = 0.0, t0 = 0.0;
    for (std::size_t i = c.size(); i-- > 0;) {
      ddv = ddv * z + 2.0 * t1;
      t1 = t1 * z + t0;
      t0 = t0 * z + c[i];
    }
    cplx g = dv / v;
    cplx g2 = g * g;
    cplx h = g2 - ddv / v;
    cplx rad = std::sqrt((n - 1.0) * (n * h - g2));
    cplx d1 = g + rad, d2 = g - rad;
    cplx den = (std::abs(d1) > std::abs(d2)) ? d1 : d2;
    cplx step = (std::abs(den) > 1e-300) ? n / den : cplx(1.0 + jitter(rng), jitter(rng));
    z -= step;
  }
  return z;
}

}  // namespace detail

/// All roots of a dense complex polynomial (with multiplicity). Roots at the
/// origin are split off exactly; the rest go through Aberth-Ehrlich with
/// randomized restarts, then a Laguerre/deflation pass if that stalls.
/// Throws std::runtime_error with the worst residual if nothing converges.
inline std::vector<cplx> poly_roots(poly c, double rel_tol = 1e-12) {
  int deg = poly_degree(c);
  if (deg < 0) throw std::invalid_argument("poly_roots: zero polynomial");
  c.resize(std::size_t(deg) + 1);
  std::vector<cplx> roots;
  std::size_t nz = 0;
  while (nz < c.size() && c[nz] == cplx(0.0)) ++nz;
  for (std::size_t i = 0; i < nz; ++i) roots.push_back(0.0);
  if (nz > 0) c.erase(c.begin(), c.begin() + long(nz));
  const std::size_t N = c.size() - 1;
  if (N == 0) return roots;
  if (N == 1) {
    roots.push_back(-c[0] / c[1]);
    return roots;
  }

  const double r0 = detail::cauchy_radius(c);
  std::mt19937_64 rng(0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<cplx> z(N);
  for (int attempt = 0; attempt < 4; ++attempt) {
    double phase0 = 0.7 + (attempt ? 2.0 * std::numbers::pi * u(rng) : 0.0);
    double radius = r0 * (attempt ? (0.5 + u(rng)) : 1.0);
    for (std::size_t k = 0; k < N; ++k) {
      double ang = phase0 + 2.0 * std::numbers::pi * double(k) / double(N);
      z[k] = std::polar(radius * (0.6 + 0.4 * double(k + 1) / double(N)), ang);
    }
    if (detail::aberth_sweeps(c, z, rel_tol, 200)) {
      roots.insert(roots.end(), z.begin(), z.end());
      return roots;
    }
  }

  // Fallback: peel roots one by one with Laguerre and synthetic division,
  // then polish the full set with a last Aberth pass.
  poly work = c;
  std::vector<cplx> got;
  for (std::size_t k = 0; k < N; ++k) {
    cplx r = detail::laguerre_root(work, cplx(0.3, 0.2));
    got.push_back(r);
    poly next(work.size() - 1);
    cplx carry = work.back();
    for (std::size_t i = work.size() - 1; i-- > 0;) {
      next[i] = carry;
      carry = work[i] + carry * r;
    }
    work = std::move(next);
  }
  if (detail::aberth_sweeps(c, got, rel_tol, 100)) {
    roots.insert(roots.end(), got.begin(), got.end());
    return roots;
  }
  double worst = 0.0;
  for (const cplx& zr : got) {
    cplx v, dv;
    detail::horner_pair(c, zr, v, dv);
    worst = std::max(worst, std::abs(v) / detail::residual_scale(c, zr));
  }
  throw std::runtime_error("poly_roots: no convergence, worst relative residual " +
                           std::to_string(worst));
}

/// Critical points of f: the p+q roots of the cleared f'/f. Each root gets a
/// final Newton polish on the log-derivative itself, so residuals are measured
/// against the function the caller actually cares about.
inline std::vector<cplx> critical_points(const PuncturedPolyMap& f,
                                         double rel_tol = 1e-12) {
  std::vector<cplx> roots = poly_roots(critical_polynomial(f), rel_tol);
  const poly dP = differentiate(f.P);
  const poly ddP = differentiate(dP);
  const poly dQ = differentiate(f.Q);
  const poly ddQ = differentiate(dQ);
  for (cplx& z : roots) {
    for (int it = 0; it < 3 && z != cplx(0.0); ++it) {
      cplx w = 1.0 / z;
      cplx h = double(f.n) * w + horner(dP, z) - horner(dQ, w) * w * w;
      cplx dh = -double(f.n) * w * w + horner(ddP, z) +
                horner(ddQ, w) * w * w * w * w + 2.0 * horner(dQ, w) * w * w * w;
      if (std::abs(dh) < 1e-300) break;
      cplx step = h / dh;
      if (!std::isfinite(step.real()) || !std::isfinite(step.imag())) break;
      z -= step;
    }
  }
  return roots;
}

}  // namespace cstar
