#pragma once

// Periodic orbits by Newton iteration on f^p(z) - z, plus a truncated
// sample of the postsingular set.

#include <limits>
#include <numbers>
#include <optional>

#include "cstardyn/map.hpp"
#include "cstardyn/roots.hpp"

namespace cstar {

enum class Stability { attracting, repelling, parabolic, indifferent };

struct PeriodicOrbit {
  int period = 1;                // exact period (divisor of the requested one)
  std::vector<cplx> points;      // the cycle, starting at the converged point
  cplx multiplier = 0.0;         // product of f' over the exact cycle
  Stability stability = Stability::indifferent;
  double residual = 0.0;         // |f^period(z*) - z*|
};

namespace detail {

// f^p(z) and the chain-rule derivative prod f'(z_i); f'(z) = f(z) logder(z).
// Returns false if the orbit leaves the representable range of eval.
inline bool iterate_with_deriv(const PuncturedPolyMap& f, cplx z, int p,
                               cplx& out, cplx& deriv) {
  deriv = 1.0;
  for (int i = 0; i < p; ++i) {
    cplx fz;
    try {
      fz = eval(f, z);
    } catch (const std::exception&) {
      return false;
    }
    deriv *= fz * log_derivative(f, z);
    z = fz;
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  }
  out = z;
  return true;
}

inline bool multiplier_is_root_of_unity(cplx m, double tol, int max_order) {
  for (int k = 1; k <= max_order; ++k)
    for (int j = 0; j < k; ++j) {
      cplx root = std::polar(1.0, 2.0 * std::numbers::pi * double(j) / double(k));
      if (std::abs(m - root) <= tol) return true;
    }
  return false;
}

}  // namespace detail

inline Stability classify_multiplier(cplx m, double parabolic_tol = 1e-8,
                                     int max_order = 64) {
  if (detail::multiplier_is_root_of_unity(m, parabolic_tol, max_order))
    return Stability::parabolic;
  double am = std::abs(m);
  if (am < 1.0 - 1e-10) return Stability::attracting;
  if (am > 1.0 + 1e-10) return Stability::repelling;
  return Stability::indifferent;
}

/// Damped Newton on f^p(z) - z from the given seed. On success the orbit is
/// reduced to its exact period (smallest divisor d of p with f^d(z*) = z*)
/// and the multiplier is taken over that cycle. Seeds whose Newton path
/// leaves C* or the representable range give nullopt, not an exception.
inline std::optional<PeriodicOrbit> find_periodic_orbit(
    const PuncturedPolyMap& f, int period, cplx seed, double tol = 1e-12,
    int max_iter = 200) {
  if (period < 1) throw std::invalid_argument("find_periodic_orbit: period >= 1");
  cplx z = seed;
  double g_abs_prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iter; ++it) {
    cplx fp, deriv;
    if (z == cplx(0.0) || !detail::iterate_with_deriv(f, z, period, fp, deriv))
      return std::nullopt;
    cplx g = fp - z;
    double g_abs = std::abs(g);
    if (g_abs <= tol * (1.0 + std::abs(z))) break;
    cplx dg = deriv - 1.0;
    if (std::abs(dg) < 1e-300) return std::nullopt;
    cplx step = g / dg;
    // halve the step while it makes things worse or leaves the domain
    cplx znew = z - step;
    for (int h = 0; h < 30; ++h) {
      cplx fp2, d2;
      if (znew != cplx(0.0) && detail::iterate_with_deriv(f, znew, period, fp2, d2) &&
          std::abs(fp2 - znew) < std::max(g_abs, g_abs_prev))
        break;
      step *= 0.5;
      znew = z - step;
    }
    z = znew;
    g_abs_prev = g_abs;
  }
  cplx fp, deriv;
  if (z == cplx(0.0) || !detail::iterate_with_deriv(f, z, period, fp, deriv))
    return std::nullopt;
  if (std::abs(fp - z) > tol * (1.0 + std::abs(z))) return std::nullopt;

  PeriodicOrbit orbit;
  orbit.period = period;
  for (int d = 1; d < period; ++d) {
    if (period % d != 0) continue;
    cplx fd, dd;
    if (detail::iterate_with_deriv(f, z, d, fd, dd) &&
        std::abs(fd - z) <= 100.0 * tol * (1.0 + std::abs(z))) {
      orbit.period = d;
      break;
    }
  }
  cplx m;
  detail::iterate_with_deriv(f, z, orbit.period, fp, m);
  orbit.residual = std::abs(fp - z);
  orbit.multiplier = m;
  orbit.stability = classify_multiplier(m);
  cplx zi = z;
  for (int i = 0; i < orbit.period; ++i) {
    orbit.points.push_back(zi);
    zi = eval(f, zi);
  }
  return orbit;
}

struct PostsingularSample {
  std::vector<std::vector<cplx>> orbits;  // one forward orbit per critical value
  bool bounded = true;  // all sampled points kept |log|z|| <= log_radius
};

/// Forward orbits of the critical values to the given depth. Iteration runs
/// in log coordinates (w -> n w + P(e^w) + Q(e^-w)) so escape toward either
/// essential singularity saturates the flag instead of overflowing.
inline PostsingularSample postsingular_sample(const PuncturedPolyMap& f,
                                              int depth,
                                              double log_radius = 50.0) {
  if (depth < 1) throw std::invalid_argument("postsingular_sample: depth >= 1");
  PostsingularSample out;
  auto F = [&](cplx w) {
    return double(f.n) * w + horner(f.P, std::exp(w)) + horner(f.Q, std::exp(-w));
  };
  auto safe = [&](cplx w) {
    double x = w.real();
    return double(f.deg_p()) * x + std::log(std::abs(f.lead_p())) < exp_arg_limit &&
           double(f.deg_q()) * (-x) + std::log(std::abs(f.lead_q())) < exp_arg_limit;
  };
  for (cplx c : critical_points(f)) {
    // w = log f(c): orbits start at the critical value
    cplx w = std::log(c) + cplx(horner(f.P, c) + horner(f.Q, 1.0 / c));
    std::vector<cplx> orbit{std::exp(w)};
    for (int i = 1; i < depth; ++i) {
      if (std::abs(w.real()) > log_radius || !safe(w)) {
        out.bounded = false;  // escaped the annulus; truncate this orbit
        break;
      }
      w = F(w);
      if (std::abs(w.real()) > log_radius) {
        out.bounded = false;
        break;
      }
      orbit.push_back(std::exp(w));
    }
    out.orbits.push_back(std::move(orbit));
  }
  return out;
}

}  // namespace cstar
