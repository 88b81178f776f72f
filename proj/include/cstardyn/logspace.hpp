#pragma once

// Logarithmic coordinates. F(w) = n w + P(e^w) + Q(e^-w) satisfies
// exp(F(w)) = f(exp(w)) and F(w + 2 pi i) = F(w) + 2 pi i n.
//
// Far toward Re w -> +inf, F is dominated by a_p e^{p w}: the preimage of
// {|Re F| > R} splits into 2p bands per 2 pi strip, alternating between
// target infinity and target zero, and symmetrically (with b_q e^{-q w})
// toward Re w -> -inf. Tract bookkeeping below is all in terms of those
// asymptotic bands.

#include <algorithm>
#include <optional>
#include <random>
#include <thread>

#include "cstardyn/orbits.hpp"

namespace cstar {

enum class Side : unsigned char { zero = 0, inf = 1 };

inline Side opposite(Side s) { return s == Side::inf ? Side::zero : Side::inf; }
inline const char* side_name(Side s) { return s == Side::inf ? "inf" : "0"; }

// Band index m lives in [0, 2 deg); even bands have target infinity, odd
// bands target zero. Strip k is the 2 pi i translate: the band's center line
// sits at ((m + 2 deg k) pi -+ phase)/deg. Equality of ids is equality of
// the fields; locate_tract breaks exact boundary ties toward the lower band.
struct TractId {
  Side side = Side::inf;
  int band = 0;
  int strip = 0;
  friend bool operator==(const TractId&, const TractId&) = default;
  friend auto operator<=>(const TractId&, const TractId&) = default;
};

inline Side tract_target(const TractId& t) {
  return t.band % 2 == 0 ? Side::inf : Side::zero;
}

struct TractInfo {
  TractId id;
  Side target = Side::inf;
  double center_im = 0.0;   // asymptotic center line Im w
  double band_width = 0.0;  // pi/deg: full angular width of the band
  cplx lead;                // dominant coefficient (a_p or b_q)
  int deg = 1;              // p on side inf, q on side 0
};

struct F_result;  // fwd

class LogTransform {
 public:
  PuncturedPolyMap map;
  double r_norm = 0.0;            // certified normalization radius
  double singular_log_bound = 0.0;  // max(log r_max, -log r_min) of the margined
                                    // annulus around the critical values
  double delta_line_im = 0.0;     // height of the delta cut (mod 2 pi)
  bool delta_tight = false;       // the best gap was uncomfortably narrow

  explicit LogTransform(PuncturedPolyMap m) : map(std::move(m)) {}

  int deg(Side s) const { return s == Side::inf ? map.deg_p() : map.deg_q(); }
  cplx lead(Side s) const { return s == Side::inf ? map.lead_p() : map.lead_q(); }
  // phase entering the band-center formula: arg a_p at infinity, arg b_q at 0
  double phase(Side s) const { return std::arg(lead(s)); }

  double band_center_im(Side s, long global_band) const {
    double ph = phase(s);
    double c = s == Side::inf ? (double(global_band) * std::numbers::pi - ph)
                              : (double(global_band) * std::numbers::pi + ph);
    return c / double(deg(s));
  }
  double band_center_im(const TractId& t) const {
    return band_center_im(t.side, long(t.band) + 2L * deg(t.side) * t.strip);
  }
  double band_width(Side s) const { return std::numbers::pi / double(deg(s)); }

  // Band containing Im w = y on the given side; exact half-width ties go to
  // the lower band.
  TractId band_at(Side s, double y) const {
    int d = deg(s);
    double ph = phase(s);
    double u = s == Side::inf ? (y * d + ph) / std::numbers::pi
                              : (y * d - ph) / std::numbers::pi;
    long M = long(std::ceil(u - 0.5));
    long two_d = 2L * d;
    long m = M % two_d;
    if (m < 0) m += two_d;
    long k = (M - m) / two_d;
    return {s, int(m), int(k)};
  }
};

inline cplx F_eval(const LogTransform& L, cplx w) {
  const PuncturedPolyMap& f = L.map;
  double x = w.real();
  if (double(f.deg_p()) * x + std::log(std::abs(f.lead_p())) > exp_arg_limit)
    throw std::range_error("F_eval: P(e^w) overflows (dominant term a_p e^{pw})");
  if (double(f.deg_q()) * (-x) + std::log(std::abs(f.lead_q())) > exp_arg_limit)
    throw std::range_error("F_eval: Q(e^-w) overflows (dominant term b_q e^{-qw})");
  return double(f.n) * w + horner(f.P, std::exp(w)) + horner(f.Q, std::exp(-w));
}

inline cplx F_deriv(const LogTransform& L, cplx w) {
  const PuncturedPolyMap& f = L.map;
  cplx ew = std::exp(w), emw = std::exp(-w);
  return double(f.n) + horner(differentiate(f.P), ew) * ew -
         horner(differentiate(f.Q), emw) * emw;
}

inline bool F_safe(const LogTransform& L, cplx w) {
  double x = w.real();
  return double(L.map.deg_p()) * x + std::log(std::abs(L.map.lead_p())) <= exp_arg_limit &&
         double(L.map.deg_q()) * (-x) + std::log(std::abs(L.map.lead_q())) <= exp_arg_limit;
}

inline std::vector<TractInfo> tract_catalog(const LogTransform& L, int strip_min,
                                            int strip_max) {
  std::vector<TractInfo> out;
  for (int k = strip_min; k <= strip_max; ++k)
    for (Side s : {Side::inf, Side::zero})
      for (int m = 0; m < 2 * L.deg(s); ++m) {
        TractId id{s, m, k};
        out.push_back({id, tract_target(id), L.band_center_im(id),
                       L.band_width(s), L.lead(s), L.deg(s)});
      }
  return out;
}

namespace detail {

inline int resolve_threads(int threads) {
  if (threads > 0) return threads;
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : int(hc);
}

// Annulus around the critical values with the fixed 10% margin, reported as
// the log-radius bound max(log r_max, -log r_min).
inline double singular_annulus_bound(const PuncturedPolyMap& f) {
  double r_min = std::numeric_limits<double>::infinity(), r_max = 0.0;
  for (cplx c : critical_points(f)) {
    double m = std::abs(eval(f, c));
    r_min = std::min(r_min, m);
    r_max = std::max(r_max, m);
  }
  r_min *= 0.9;
  r_max *= 1.1;
  return std::max(std::log(r_max), -std::log(r_min));
}

struct NormCert {
  double R = 0.0;
  double min_abs_deriv = 0.0;
};

// Sampling certificate for one candidate R:
//  (a) no point of the imaginary axis reaches level R (tract closures stay
//      off Re w = 0), and
//  (b) every sampled band point at level >= 0.95 R has |F'| >= 2.05.
// The margins make the certificate robust against later re-sampling at R.
inline bool certify_radius(const LogTransform& L, double R, int nx, int ny,
                           double* min_deriv_out) {
  for (int i = 0; i < 512; ++i) {
    double y = 2.0 * std::numbers::pi * double(i) / 512.0;
    if (std::abs(F_eval(L, cplx(0.0, y)).real()) >= 0.98 * R) return false;
  }
  double min_deriv = std::numeric_limits<double>::infinity();
  for (Side s : {Side::inf, Side::zero}) {
    int d = L.deg(s);
    double sign = s == Side::inf ? 1.0 : -1.0;
    // sample out to where the dominant term alone is far past level R
    double x_hi = (std::log(R) + 20.0 - std::log(std::abs(L.lead(s)))) / double(d);
    x_hi = std::max(x_hi, 2.0);
    for (int m = 0; m < 2 * d; ++m) {
      double c = L.band_center_im(s, m);
      double hw = 0.5 * L.band_width(s);
      for (int ix = 0; ix < nx; ++ix) {
        double x = sign * (0.02 + (x_hi - 0.02) * double(ix) / double(nx - 1));
        for (int iy = 0; iy < ny; ++iy) {
          double y = c - hw + 2.0 * hw * double(iy) / double(ny - 1);
          cplx w(x, y);
          if (!F_safe(L, w)) continue;
          if (std::abs(F_eval(L, w).real()) < 0.95 * R) continue;
          double dv = std::abs(F_deriv(L, w));
          min_deriv = std::min(min_deriv, dv);
          if (dv < 2.05) return false;
        }
      }
    }
  }
  if (min_deriv_out) *min_deriv_out = min_deriv;
  return true;
}

}  // namespace detail

/// Smallest radius from a geometric grid that passes the sampling
/// certificate and dominates the singular annulus. Samples default to the
/// order of 10^4 per tract. Throws if the budget is exhausted.
inline double normalization_radius(const LogTransform& L, int nx = 320, int ny = 33) {
  double bound = detail::singular_annulus_bound(L.map);
  if (bound > 300.0)
    throw std::runtime_error(
        "normalization_radius: critical values too extreme for double range");
  double R = std::max(1.0, bound * 1.0001);
  for (int step = 0; step < 80; ++step) {
    double min_deriv = 0.0;
    if (detail::certify_radius(L, R, nx, ny, &min_deriv)) return R;
    R *= 1.2;
  }
  throw std::runtime_error("normalization_radius: no certified radius within budget");
}

/// Height of the horizontal delta cut: the gap midpoint between adjacent
/// asymptotic band centers (both sides pooled, mod 2 pi) with the largest
/// clearance. Straight lines clip tract bulges near the origin for lopsided
/// maps; delta_tight flags a clearance under 0.05.
inline double choose_delta_line(const LogTransform& L, bool* tight) {
  std::vector<double> centers;
  auto wrap = [](double y) {
    double t = std::fmod(y, 2.0 * std::numbers::pi);
    return t < 0 ? t + 2.0 * std::numbers::pi : t;
  };
  for (Side s : {Side::inf, Side::zero})
    for (int m = 0; m < 2 * L.deg(s); ++m)
      centers.push_back(wrap(L.band_center_im(s, m)));
  std::sort(centers.begin(), centers.end());
  centers.erase(std::unique(centers.begin(), centers.end(),
                            [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                centers.end());
  double best_gap = -1.0, best_mid = 0.0;
  for (std::size_t i = 0; i < centers.size(); ++i) {
    double a = centers[i];
    double b = i + 1 < centers.size() ? centers[i + 1]
                                      : centers[0] + 2.0 * std::numbers::pi;
    if (b - a > best_gap) {
      best_gap = b - a;
      best_mid = wrap(0.5 * (a + b));
    }
  }
  if (tight) *tight = best_gap * 0.5 < 0.05;
  return best_mid;
}

/// Builds the transform with certified r_norm and the delta cut chosen.
inline LogTransform make_log_transform(PuncturedPolyMap f) {
  LogTransform L(std::move(f));
  L.singular_log_bound = detail::singular_annulus_bound(L.map);
  L.r_norm = normalization_radius(L);
  L.delta_line_im = choose_delta_line(L, &L.delta_tight);
  return L;
}

enum class LocateStatus { ok, below_level, on_axis, continuation_failed };

struct LocateResult {
  std::optional<TractId> id;
  LocateStatus status = LocateStatus::ok;
};

/// Tract membership: side from sign Re w, band from Im w, validity from
/// |Re F(w)| > r_norm plus a continuation march toward the band center line
/// (level must stay above r_norm (1 - slack), slack = 0.2). Points on the
/// imaginary axis or below level are reported, not thrown.
inline LocateResult locate_tract(const LogTransform& L, cplx w) {
  if (w.real() == 0.0) return {std::nullopt, LocateStatus::on_axis};
  Side s = w.real() > 0 ? Side::inf : Side::zero;
  TractId id = L.band_at(s, w.imag());
  if (std::abs(F_eval(L, w).real()) <= L.r_norm)
    return {std::nullopt, LocateStatus::below_level};
  double c = L.band_center_im(id);
  const int steps = 24;
  for (int i = 1; i <= steps; ++i) {
    double y = w.imag() + (c - w.imag()) * double(i) / double(steps);
    if (std::abs(F_eval(L, cplx(w.real(), y)).real()) <= L.r_norm * 0.8)
      return {std::nullopt, LocateStatus::continuation_failed};
  }
  return {id, LocateStatus::ok};
}

/// Conformal inverse branch of F into tract T, for zeta in the target
/// half-plane of T beyond min_re (defaults to r_norm). Seeded by inverting
/// the dominant term, with one fixed-point pass for the n w correction, then
/// damped Newton confined to the band rectangle. With seed_hint the Newton is
/// instead confined near the hint, so a caller holding a nearby point of the
/// same branch can continue it below the normalized levels where the
/// asymptotic seed breaks down. Throws std::runtime_error on precondition
/// violations or non-convergence.
inline cplx inverse_branch(const LogTransform& L, cplx zeta, const TractId& T,
                           double min_re = -1.0,
                           const cplx* seed_hint = nullptr) {
  if (min_re < 0.0) min_re = L.r_norm;
  Side tgt = tract_target(T);
  if ((tgt == Side::inf) != (zeta.real() > 0.0) || zeta.real() == 0.0)
    throw std::runtime_error("inverse_branch: zeta not in the target half-plane of T");
  if (std::abs(zeta.real()) <= min_re)
    throw std::runtime_error("inverse_branch: |Re zeta| below branch level");

  int d = L.deg(T.side);
  double ph = L.phase(T.side);
  double center = L.band_center_im(T);
  double width = L.band_width(T.side);

  cplx w;
  if (seed_hint) {
    w = *seed_hint;
    center = seed_hint->imag();
  } else {
    // Solve lead e^{+-d w} = zeta - n w~ on the branch whose Im lands at the
    // band center; w~ is a first pass with the n w term dropped.
    long M = long(T.band) + 2L * d * T.strip;
    auto asym = [&](cplx rhs) {
      double theta = tgt == Side::inf ? std::arg(rhs) : std::arg(-rhs) + std::numbers::pi;
      double r = std::log(std::abs(rhs / L.lead(T.side)));
      if (T.side == Side::inf) {
        double K = std::round((double(M) * std::numbers::pi - theta) /
                              (2.0 * std::numbers::pi));
        return cplx(r / d, (theta - ph + 2.0 * std::numbers::pi * K) / d);
      }
      double K = std::round((-double(M) * std::numbers::pi - theta) /
                            (2.0 * std::numbers::pi));
      return cplx(-r / d, -(theta - ph + 2.0 * std::numbers::pi * K) / d);
    };
    w = asym(zeta);
    if (L.map.n != 0) w = asym(zeta - double(L.map.n) * w);
  }

  const double tol = 1e-10 * std::max(1.0, std::abs(zeta));
  for (int it = 0; it < 200; ++it) {
    if (!F_safe(L, w))
      throw std::runtime_error("inverse_branch: iterate left the representable range");
    cplx g = F_eval(L, w) - zeta;
    if (std::abs(g) <= tol) {
      if (std::abs(w.imag() - center) > width)
        throw std::runtime_error("inverse_branch: converged outside the band");
      return w;
    }
    cplx dF = F_deriv(L, w);
    if (std::abs(dF) < 1e-300)
      throw std::runtime_error("inverse_branch: vanishing derivative");
    cplx step = g / dF;
    cplx wn = w - step;
    for (int h = 0; h < 30 && std::abs(wn.imag() - center) >= width; ++h) {
      step *= 0.5;
      wn = w - step;
    }
    if (std::abs(wn.imag() - center) >= width)
      throw std::runtime_error("inverse_branch: Newton left the band rectangle");
    w = wn;
  }
  throw std::runtime_error("inverse_branch: no convergence in 200 iterations");
}

/// Index of the fundamental strip (cut by the delta lines) containing F(w).
inline int fundamental_domain_index(const LogTransform& L, cplx w) {
  double y = F_eval(L, w).imag();
  double t = (y - L.delta_line_im) / (2.0 * std::numbers::pi);
  double nearest = std::round(t);
  if (std::abs(y - (L.delta_line_im + 2.0 * std::numbers::pi * nearest)) < 1e-9)
    throw std::domain_error("fundamental_domain_index: Im F(w) on a delta line");
  return int(std::floor(t));
}

struct ExpansivityReport {
  int point_samples = 0;
  int point_violations = 0;      // |F'| < 2 at level >= r_norm
  double min_abs_deriv = 0.0;
  double empirical_linear_R = 0.0;  // max(0, (1/4pi)|Re F| - |F'|) over samples
  int pair_samples = 0;
  int pair_violations = 0;       // strong expansivity with R = r_norm
  double min_pair_slack = 0.0;   // min of LHS - RHS over tested pairs
  bool pass = true;
};

/// Monte Carlo check of the two expansivity statements on the normalized
/// region: pointwise |F'| >= 2, and for same-tract pairs at distance >= 8 pi,
/// |F(z)-F(w)| >= exp(|z-w|/8pi) (min |Re F| - r_norm).
inline ExpansivityReport expansivity_report(const LogTransform& L,
                                            int point_samples = 10000,
                                            int pair_samples = 1000,
                                            unsigned long long rng_seed = 1) {
  ExpansivityReport rep;
  rep.min_abs_deriv = std::numeric_limits<double>::infinity();
  rep.min_pair_slack = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(rng_seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto tracts = tract_catalog(L, 0, 0);

  auto sample_in_tract = [&](const TractInfo& t, double x_span) -> std::optional<cplx> {
    double sign = t.id.side == Side::inf ? 1.0 : -1.0;
    double x_lo = 0.05;
    double x_hi = (std::log(L.r_norm) + x_span - std::log(std::abs(t.lead))) /
                  double(t.deg);
    x_hi = std::max(x_hi, x_lo + 1.0);
    for (int tries = 0; tries < 64; ++tries) {
      double x = sign * (x_lo + (x_hi - x_lo) * u01(rng));
      double y = t.center_im + (u01(rng) - 0.5) * t.band_width;
      cplx w(x, y);
      if (!F_safe(L, w)) continue;
      if (std::abs(F_eval(L, w).real()) > L.r_norm) return w;
    }
    return std::nullopt;
  };

  const double four_pi = 4.0 * std::numbers::pi;
  const double eight_pi = 8.0 * std::numbers::pi;
  for (const TractInfo& t : tracts) {
    int per_tract = point_samples / int(tracts.size()) + 1;
    for (int i = 0; i < per_tract; ++i) {
      auto ws = sample_in_tract(t, 25.0);
      if (!ws) continue;
      ++rep.point_samples;
      double dv = std::abs(F_deriv(L, *ws));
      double lvl = std::abs(F_eval(L, *ws).real());
      rep.min_abs_deriv = std::min(rep.min_abs_deriv, dv);
      rep.empirical_linear_R =
          std::max(rep.empirical_linear_R, lvl / four_pi - dv);
      if (dv < 2.0) ++rep.point_violations;
    }
  }
  for (int i = 0; i < pair_samples; ++i) {
    const TractInfo& t = tracts[std::size_t(double(tracts.size()) * u01(rng))];
    auto wa = sample_in_tract(t, 6.0);
    if (!wa) continue;
    // push the partner far along the band so |z - w| >= 8 pi is reachable
    double sign = t.id.side == Side::inf ? 1.0 : -1.0;
    double extra = eight_pi + 8.0 * u01(rng);
    cplx wb(wa->real() + sign * extra,
            t.center_im + (u01(rng) - 0.5) * t.band_width * 0.8);
    if (!F_safe(L, wb) || std::abs(F_eval(L, wb).real()) <= L.r_norm) continue;
    if (std::abs(*wa - wb) < eight_pi) continue;
    ++rep.pair_samples;
    double lhs = std::abs(F_eval(L, *wa) - F_eval(L, wb));
    double minlvl = std::min(std::abs(F_eval(L, *wa).real()),
                             std::abs(F_eval(L, wb).real()));
    double rhs = std::exp(std::abs(*wa - wb) / eight_pi) * (minlvl - L.r_norm);
    rep.min_pair_slack = std::min(rep.min_pair_slack, lhs - rhs);
    if (lhs < rhs) ++rep.pair_violations;
  }
  rep.pass = rep.point_violations == 0 && rep.pair_violations == 0;
  return rep;
}

}  // namespace cstar
