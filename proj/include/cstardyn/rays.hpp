#pragma once

// Dynamic ray machinery. A ray tail with address (T_n) is computed by the
// pullback construction: place a seed far out in the deepest tract's target
// half-plane, apply the inverse branches along the address, and deepen until
// the base point stops moving. Expansion |F'| >= 2 on the normalized region
// makes successive base points a Cauchy sequence with ratio <= 1/2.

#include <thread>

#include "cstardyn/symbolic.hpp"

namespace cstar {

struct RaySample {
  double t = 0.0;  // tower parameter; |Re w| tracks it where the tower grows
  cplx w;          // base point in log coordinates
  cplx z;          // exp(w)
};

struct RayTail {
  ExternalAddress address;
  std::vector<RaySample> samples;  // t strictly increasing
  // per sample: base-point displacement between consecutive depths,
  // starting with the jump from the depth-0 proxy
  std::vector<std::vector<double>> movements;
  int depth_used = 0;
  std::optional<cplx> endpoint_estimate;  // plane point, filled by landing
  bool converged = false;
};

struct trace_error : std::runtime_error {
  int depth;
  double t;
  trace_error(const std::string& what, int d, double t_)
      : std::runtime_error(what), depth(d), t(t_) {}
};

namespace detail {

// Dominant-term level map of a tract: a point of T at |Re w| = s maps to
// level roughly |lead| e^{deg s}.
inline double level_growth(const LogTransform& L, Side s, double x) {
  return std::abs(L.lead(s)) * std::exp(double(L.deg(s)) * x);
}

// log of level_growth, safe for huge x
inline double log_level_growth(const LogTransform& L, Side s, double x) {
  return std::log(std::abs(L.lead(s))) + double(L.deg(s)) * x;
}

struct PointTrace {
  cplx w;
  std::vector<double> movements;
  int depth = 0;
  bool converged = false;
};

// One parameter value: deepen the pullback until the base point is Cauchy.
// Saturation of the seed tower (the next level would leave the safe range of
// exp) also counts as convergence: a seed at level e^600 and any deeper seed
// pull back to base points closer than 1e-100, far below any usable tol.
inline PointTrace trace_point(const LogTransform& L, const ExternalAddress& addr,
                              double t, double tol, double min_re, int depth_cap,
                              double seed_im_offset) {
  PointTrace out;
  const double sat_limit = 600.0;
  Side s0 = addr.at(0).side;
  cplx prev(s0 == Side::inf ? t : -t, L.band_center_im(addr.at(0)));

  std::vector<double> tower{t};
  for (int N = 1; N <= depth_cap; ++N) {
    bool saturated = log_level_growth(L, addr.at(N - 1).side, tower.back()) > sat_limit;
    if (saturated && N == 1)
      throw trace_error("trace: parameter too large for a single pullback", 0, t);
    if (!saturated)
      tower.push_back(level_growth(L, addr.at(N - 1).side, tower.back()));
    int n_eff = saturated ? N - 1 : N;

    if (!saturated) {
      const TractId& deep = addr.at(std::size_t(n_eff));
      double sign = deep.side == Side::inf ? 1.0 : -1.0;
      cplx zeta(sign * tower[std::size_t(n_eff)],
                L.band_center_im(deep) + seed_im_offset);
      for (int j = n_eff - 1; j >= 0; --j) {
        try {
          zeta = inverse_branch(L, zeta, addr.at(std::size_t(j)), min_re);
        } catch (const std::exception& e) {
          throw trace_error(std::string("trace: inverse branch failed at depth ") +
                                std::to_string(j) + ": " + e.what(),
                            j, t);
        }
      }
      out.movements.push_back(std::abs(zeta - prev));
      prev = zeta;
      out.depth = n_eff;
      if (N >= 2 && out.movements.back() < tol) {
        out.converged = true;
        break;
      }
    } else {
      out.depth = n_eff;
      out.converged = true;
      break;
    }
  }
  out.w = prev;
  return out;
}

inline RayTail trace_impl(const LogTransform& L, const ExternalAddress& addr,
                          const std::vector<double>& t_grid, double tol,
                          double min_re, int depth_cap, int threads,
                          double seed_im_offset) {
  if (!admissible(addr))
    throw std::invalid_argument("trace_ray_tail: address is not admissible");
  if (t_grid.empty()) throw std::invalid_argument("trace_ray_tail: empty t grid");
  for (std::size_t i = 1; i < t_grid.size(); ++i)
    if (!(t_grid[i] > t_grid[i - 1]))
      throw std::invalid_argument("trace_ray_tail: t grid must strictly increase");

  RayTail ray;
  ray.address = addr;
  ray.samples.resize(t_grid.size());
  ray.movements.resize(t_grid.size());
  std::vector<int> depths(t_grid.size(), 0);
  std::vector<char> ok(t_grid.size(), 0);
  std::vector<std::exception_ptr> errors(t_grid.size());

  int nt = std::min<int>(resolve_threads(threads), int(t_grid.size()));
  auto worker = [&](int wid) {
    for (std::size_t i = std::size_t(wid); i < t_grid.size(); i += std::size_t(nt)) {
      try {
        PointTrace p = trace_point(L, addr, t_grid[i], tol, min_re, depth_cap,
                                   seed_im_offset);
        ray.samples[i] = {t_grid[i], p.w, std::exp(p.w)};
        ray.movements[i] = std::move(p.movements);
        depths[i] = p.depth;
        ok[i] = p.converged ? 1 : 0;
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (nt <= 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < nt; ++i) pool.emplace_back(worker, i);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  ray.converged = true;
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    ray.depth_used = std::max(ray.depth_used, depths[i]);
    if (!ok[i]) ray.converged = false;
  }
  return ray;
}

}  // namespace detail

/// Smallest parameter (at least a nudge above r_norm) from which the seed
/// tower strictly grows for every side the address visits.
inline double min_trace_parameter(const LogTransform& L, const ExternalAddress& a) {
  bool use[2] = {false, false};
  for (std::size_t n = 0; n < a.symbol_count(); ++n) use[int(a.at(n).side)] = true;
  double s = L.r_norm * 1.05;
  for (int i = 0; i < 400; ++i, s += 0.5) {
    bool grows = true;
    for (Side side : {Side::zero, Side::inf})
      if (use[int(side)] && detail::level_growth(L, side, s) < s + 1.0) grows = false;
    if (grows) return s;
  }
  throw std::runtime_error("min_trace_parameter: level map never outgrows s + 1");
}

inline RayTail trace_ray_tail(const LogTransform& L, const ExternalAddress& addr,
                              const std::vector<double>& t_grid, double tol = 1e-9,
                              int threads = 0, double seed_im_offset = 0.0) {
  if (!t_grid.empty() && !(t_grid.front() > L.r_norm))
    throw std::invalid_argument("trace_ray_tail: t grid must start above r_norm");
  return detail::trace_impl(L, addr, t_grid, tol, L.r_norm, 64, threads,
                            seed_im_offset);
}

/// Brokenness: does some forward image of the ray contain a critical point?
/// Two detectors, either suffices.
///   1. A critical point whose F-orbit follows (a shift of) the ray's address
///      tract-by-tract at escaping levels lies on the extended ray.
///   2. Polyline proximity: forward images of the stored samples pass within
///      tol of a critical point (with local refinement of the segment).
/// Detector 1 catches critical points below the sampled parameter range,
/// where detector 2 is blind.
inline bool is_broken(const LogTransform& L, const RayTail& ray, int horizon = 12,
                      double tol = 1e-6) {
  if (!ray.converged)
    throw std::invalid_argument("is_broken: ray did not converge");
  const ExternalAddress& addr = ray.address;
  std::vector<cplx> crit = critical_points(L.map);
  double floor = L.singular_log_bound * 0.9;
  const double tiny = 1e-9;

  // detector 1: address-following critical orbits
  for (cplx c : crit) {
    for (std::size_t shift_by = 0;
         shift_by < std::min<std::size_t>(std::size_t(horizon) + 1,
                                          addr.symbol_count() + 1);
         ++shift_by) {
      // lift c toward the band of the shifted address's first tract
      const TractId& t0 = addr.at(shift_by);
      double base_im = std::arg(c);
      double target_im = L.band_center_im(t0);
      double two_pi = 2.0 * std::numbers::pi;
      double im = base_im + two_pi * std::round((target_im - base_im) / two_pi);
      cplx w(std::log(std::abs(c)), im);

      bool matches = true;
      std::size_t steps = addr.symbol_count() + std::size_t(horizon);
      for (std::size_t n = 0; n < steps && matches; ++n) {
        const TractId& expect = addr.at(shift_by + n);
        if (std::abs(w.real()) > tiny) {
          Side s = w.real() > 0 ? Side::inf : Side::zero;
          if (s != expect.side || !(L.band_at(s, w.imag()) == expect)) {
            matches = false;
            break;
          }
        } else if (std::abs(w.imag() - L.band_center_im(expect)) >
                   L.band_width(expect.side)) {
          matches = false;
          break;
        }
        if (!F_safe(L, w)) break;  // double-exponential escape inside the tracts
        w = F_eval(L, w);
        if (n > 0 && std::abs(w.real()) < floor) {
          matches = false;  // orbit lingers at the singular levels: not a ray point
          break;
        }
      }
      if (matches) return true;
    }
  }

  // detector 2: sampled polyline sweeps near a critical point
  auto seg_dist = [](cplx a, cplx b, cplx p) {
    cplx d = b - a;
    double len2 = std::norm(d);
    if (len2 == 0.0) return std::abs(p - a);
    double s = std::clamp(((p - a) * std::conj(d)).real() / len2, 0.0, 1.0);
    return std::abs(a + s * d - p);
  };
  std::size_t ns = ray.samples.size();
  std::vector<cplx> img(ns);
  std::vector<char> alive(ns, 1);
  for (std::size_t i = 0; i < ns; ++i) img[i] = ray.samples[i].w;
  for (int n = 0; n <= horizon; ++n) {
    for (std::size_t i = 0; i + 1 < ns; ++i) {
      if (!alive[i] || !alive[i + 1]) continue;
      if (std::abs(img[i].real()) > 300.0) continue;  // far from every finite point
      cplx za = std::exp(img[i]), zb = std::exp(img[i + 1]);
      for (cplx c : crit) {
        if (seg_dist(za, zb, c) >= 1e-3) continue;
        // refine: retrace the parameter interval densely and re-iterate
        double lo = ray.samples[i].t, hi = ray.samples[i + 1].t;
        cplx prev_img;
        bool have_prev = false;
        for (int k = 0; k <= 32; ++k) {
          double tt = lo + (hi - lo) * double(k) / 32.0;
          cplx wv;
          try {
            wv = detail::trace_point(L, addr, tt, 1e-11, L.r_norm, 64, 0.0).w;
            for (int m = 0; m < n; ++m) {
              if (!F_safe(L, wv)) throw std::runtime_error("sat");
              wv = F_eval(L, wv);
            }
          } catch (...) {
            have_prev = false;
            continue;
          }
          cplx zz = std::abs(wv.real()) > 300.0 ? cplx(0) : std::exp(wv);
          if (have_prev && seg_dist(prev_img, zz, c) < tol) return true;
          prev_img = zz;
          have_prev = true;
        }
      }
    }
    for (std::size_t i = 0; i < ns; ++i) {
      if (!alive[i]) continue;
      if (!F_safe(L, img[i])) {
        alive[i] = 0;
        continue;
      }
      img[i] = F_eval(L, img[i]);
    }
  }
  return false;
}

enum class LandingVerdict { lands_repelling, lands_parabolic, broken, inconclusive };

inline const char* verdict_name(LandingVerdict v) {
  switch (v) {
    case LandingVerdict::lands_repelling: return "lands_repelling";
    case LandingVerdict::lands_parabolic: return "lands_parabolic";
    case LandingVerdict::broken: return "broken";
    default: return "inconclusive";
  }
}

struct LandingReport {
  RayTail ray;
  std::optional<cplx> landing_point;
  std::optional<PeriodicOrbit> orbit;
  LandingVerdict verdict = LandingVerdict::inconclusive;
  std::string diagnostics;
};

/// Landing detection for a purely periodic address: trace a tail, check
/// brokenness, then descend. The descent first lowers the parameter
/// geometrically, then pulls the base point back period by period inside the
/// singular-annulus floor, extrapolates the resulting Cauchy-ish sequence,
/// and polishes with a Newton periodic-orbit search.
inline LandingReport land_periodic_ray(const LogTransform& L,
                                       const ExternalAddress& addr,
                                       double tol = 1e-9, int threads = 0) {
  if (!addr.preperiod.empty())
    throw std::invalid_argument("land_periodic_ray: address must be purely periodic");
  std::size_t period = addr.period.size();
  LandingReport rep;

  double t0 = min_trace_parameter(L, addr);
  std::vector<double> grid;
  for (int i = 0; i <= 24; ++i) grid.push_back(t0 + double(i) * 0.75);
  rep.ray = trace_ray_tail(L, addr, grid, tol, threads);
  if (!rep.ray.converged) {
    rep.diagnostics = "trace did not converge";
    return rep;
  }

  if (is_broken(L, rep.ray)) {
    rep.verdict = LandingVerdict::broken;
    rep.diagnostics = "a critical point lies on a forward image of the ray";
    return rep;
  }

  const double annulus_floor = L.singular_log_bound * 1.02;
  const double deep_floor = 1e-9;
  std::vector<cplx> est;
  est.push_back(rep.ray.samples.front().w);

  // phase 1: push the parameter down while the tower still pulls back. The
  // same descent on every cyclic shift of the address seeds the deep walk
  // below with one base point per slot of the period.
  std::vector<std::optional<cplx>> chain(period);
  for (std::size_t j = 0; j < period; ++j) {
    ExternalAddress sa = shift(addr, j);
    double t = min_trace_parameter(L, sa);
    std::optional<cplx> last;
    for (int k = 0; k < 60; ++k) {
      t *= 0.7;
      if (detail::level_growth(L, sa.at(0).side, t) <= annulus_floor * 1.05) break;
      cplx w;
      try {
        w = detail::trace_point(L, sa, t, tol, annulus_floor, 64, 0.0).w;
      } catch (...) {
        break;
      }
      if (j == 0) est.push_back(w);
      bool settled = last && std::abs(w - *last) < tol;
      last = w;
      if (settled) break;
    }
    chain[j] = last;
  }

  // phase 2: period-by-period pullback of the whole chain of shifted base
  // points. Each inverse step is seeded with the previous point on the same
  // shifted ray, which locks the branch choice by continuity and lets the
  // walk descend below the singular annulus. Landing points near the unit
  // circle live at log levels close to zero, far under the annulus floor,
  // where the asymptotic seed of inverse_branch is no longer trustworthy.
  if (chain[0]) {
    cplx w = *chain[0];
    for (int k = 0; k < 200; ++k) {
      cplx y = w;
      bool fail = false;
      for (std::size_t j = 0; j < period; ++j) {
        std::size_t slot = period - 1 - j;
        const std::optional<cplx>& hint = chain[slot];
        double floor_j = hint ? deep_floor : annulus_floor;
        if (std::abs(y.real()) <= floor_j) {
          fail = true;
          break;
        }
        try {
          y = inverse_branch(L, y, addr.at(slot), floor_j,
                             hint ? &*hint : nullptr);
        } catch (...) {
          fail = true;
          break;
        }
        chain[slot] = y;
      }
      if (fail) break;
      est.push_back(y);
      double moved = std::abs(y - w);
      w = y;
      if (moved < tol) break;
    }
  }

  // Aitken extrapolation of the tail of the estimate sequence
  cplx w_est = est.back();
  if (est.size() >= 3) {
    cplx a = est[est.size() - 3], b = est[est.size() - 2], c = est.back();
    cplx den = (c - b) - (b - a);
    if (std::abs(den) > 1e-14) w_est = c - (c - b) * (c - b) / den;
  }

  cplx z_est = std::exp(w_est);
  rep.ray.endpoint_estimate = z_est;

  std::vector<cplx> seeds{z_est, std::exp(est.back())};
  if (est.size() >= 2) seeds.push_back(std::exp(est[est.size() - 2]));

  // The landing point's exact period divides the address period, and Newton
  // on the full-period iterate can be too stiff to converge from a
  // floor-limited estimate (the multiplier compounds across the period).
  // Polish with every divisor period and keep the orbit nearest the estimate.
  std::optional<PeriodicOrbit> best_orbit;
  cplx best_zp;
  double best_dist = std::numeric_limits<double>::infinity();
  for (cplx seed : seeds) {
    for (int d = int(period); d >= 1; --d) {
      if (period % d != 0) continue;
      auto orbit = find_periodic_orbit(L.map, d, seed, 1e-12);
      if (!orbit) continue;
      for (cplx p : orbit->points) {
        double dist = std::abs(p - z_est);
        if (dist < best_dist) {
          best_dist = dist;
          best_orbit = orbit;
          best_zp = p;
        }
      }
    }
  }
  // Accept the polished orbit only within a radius the walk actually
  // resolved. A wide blanket radius would happily certify a neighboring
  // orbit when the walk stalled far from the endpoint.
  double resolved = est.size() >= 2
                        ? std::abs(est.back() - est[est.size() - 2])
                        : 0.25 * (1.0 + std::abs(z_est));
  double gate = std::clamp(50.0 * (resolved + tol),
                           1e-3 * (1.0 + std::abs(z_est)),
                           0.4 * (1.0 + std::abs(z_est)));
  if (best_orbit && best_dist <= gate) {
    rep.orbit = best_orbit;
    rep.landing_point = best_zp;
    switch (best_orbit->stability) {
      case Stability::repelling:
        rep.verdict = LandingVerdict::lands_repelling;
        break;
      case Stability::parabolic:
        rep.verdict = LandingVerdict::lands_parabolic;
        break;
      default:
        rep.verdict = LandingVerdict::inconclusive;
        rep.diagnostics = "polished orbit is not repelling or parabolic";
        break;
    }
    return rep;
  }
  rep.diagnostics = "endpoint estimate did not polish to a periodic orbit";
  return rep;
}

struct HeadStartReport {
  TractId from, to;
  HeadStartProfile profile;
  int pairs_tested = 0;
  int antecedent_count = 0;
  int violations = 0;
  bool pass = false;
  std::optional<HeadStartProfile> minimal_workable;
};

/// Samples pairs z, w in T with images in T' and counts violations of the
/// head-start implication |Re w| > phi(|Re z|) => |Re F(w)| > phi(|Re F(z)|).
/// Sampling runs through the inverse branch so image membership in T' is
/// exact; image levels are drawn log-uniformly up to the double range cap so
/// the point levels spread wide enough for the premise to actually fire. A
/// profile whose premise never fires is reported as not passing (a vacuous
/// implication certifies nothing). Also grid-searches the smallest workable
/// profile on the same data.
inline HeadStartReport head_start_check(const LogTransform& L, const TractId& T,
                                        const TractId& Tp,
                                        const HeadStartProfile& profile,
                                        int sample_pairs = 10000,
                                        unsigned long long rng_seed = 7) {
  if (tract_target(T) != Tp.side)
    throw std::invalid_argument("head_start_check: F(T) does not reach the side of T'");
  HeadStartReport rep;
  rep.from = T;
  rep.to = Tp;
  rep.profile = profile;

  int want = int(std::ceil(std::sqrt(double(sample_pairs) * 2.0))) + 2;
  std::mt19937_64 rng(rng_seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  double sign = Tp.side == Side::inf ? 1.0 : -1.0;
  double c_im = L.band_center_im(Tp);
  double hw = 0.5 * L.band_width(Tp.side);

  // zeta must keep F(zeta) representable, which caps its level
  double lvl_lo = L.r_norm * 1.05;
  double lvl_cap = 0.9 * (exp_arg_limit - std::log(std::abs(L.lead(Tp.side)))) /
                   double(L.deg(Tp.side));
  double lvl_hi = std::max(lvl_lo * 2.0, std::min(lvl_cap, lvl_lo * std::exp(25.0)));

  // points of T stored with their images: (z, F(z)) = (pullback(zeta), zeta)
  std::vector<std::pair<cplx, cplx>> pts;
  for (int tries = 0; tries < want * 40 && int(pts.size()) < want; ++tries) {
    double lvl = lvl_lo * std::exp(u01(rng) * std::log(lvl_hi / lvl_lo));
    cplx zeta(sign * lvl, c_im + 0.8 * hw * (2.0 * u01(rng) - 1.0));
    if (!F_safe(L, zeta) || std::abs(F_eval(L, zeta).real()) <= L.r_norm)
      continue;  // the image point must itself lie in the normalized tract T'
    try {
      pts.emplace_back(inverse_branch(L, zeta, T), zeta);
    } catch (...) {
    }
  }
  if (int(pts.size()) < want / 2)
    throw std::runtime_error("head_start_check: only sampled " +
                             std::to_string(pts.size()) + " valid points for " +
                             std::to_string(sample_pairs) + " pairs");

  auto count_violations = [&](const HeadStartProfile& phi, int limit, int* tested,
                              int* antecedents) {
    int bad = 0;
    *tested = 0;
    *antecedents = 0;
    for (std::size_t i = 0; i < pts.size() && *tested < limit; ++i)
      for (std::size_t j = 0; j < pts.size() && *tested < limit; ++j) {
        if (i == j) continue;
        ++*tested;
        const auto& [z, fz] = pts[i];
        const auto& [wv, fw] = pts[j];
        if (std::abs(wv.real()) <= phi(std::abs(z.real()))) continue;
        ++*antecedents;
        if (!(std::abs(fw.real()) > phi(std::abs(fz.real())))) ++bad;
      }
    return bad;
  };

  rep.violations =
      count_violations(profile, sample_pairs, &rep.pairs_tested, &rep.antecedent_count);
  rep.pass = rep.violations == 0 && rep.antecedent_count > 0;

  for (double K : {1.25, 1.5, 2.0, 4.0}) {
    for (double off : {1.0, 10.0, 100.0, 1000.0}) {
      HeadStartProfile cand(K, off);
      int tested = 0, ante = 0;
      if (count_violations(cand, sample_pairs, &tested, &ante) == 0 && ante > 0) {
        rep.minimal_workable = cand;
        break;
      }
    }
    if (rep.minimal_workable) break;
  }
  return rep;
}

enum class SpeedOrder { faster, slower, undecided };

struct speed_inconsistency : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Speed (head-start) ordering of two plane points: z outruns w when
/// |Re F^k(log z)| > phi(|Re F^k(log w)|) at some step. Once strict, the
/// inequality must persist for every later computed step; a flip throws.
inline SpeedOrder speed_compare(const LogTransform& L, cplx z, cplx w,
                                const HeadStartProfile& profile, int horizon = 64) {
  if (z == cplx(0) || w == cplx(0))
    throw std::invalid_argument("speed_compare: points must be nonzero");
  cplx a = std::log(z), b = std::log(w);
  SpeedOrder decided = SpeedOrder::undecided;
  for (int k = 0; k <= horizon; ++k) {
    double ra = std::abs(a.real()), rb = std::abs(b.real());
    bool z_ahead = ra > profile(rb);
    bool w_ahead = rb > profile(ra);
    if (decided == SpeedOrder::faster && !z_ahead)
      throw speed_inconsistency("speed_compare: z lost an established head start");
    if (decided == SpeedOrder::slower && !w_ahead)
      throw speed_inconsistency("speed_compare: w lost an established head start");
    if (decided == SpeedOrder::undecided && z_ahead) decided = SpeedOrder::faster;
    if (decided == SpeedOrder::undecided && w_ahead) decided = SpeedOrder::slower;
    if (!F_safe(L, a) || !F_safe(L, b)) return decided;
    a = F_eval(L, a);
    b = F_eval(L, b);
  }
  return decided;
}

struct BouquetResult {
  std::vector<ExternalAddress> addresses;  // lexicographic order
  std::vector<RayTail> rays;               // converged, parallel to addresses
  std::vector<std::pair<ExternalAddress, std::string>> failures;
};

/// Traces every admissible purely periodic address over the given symbols
/// whose itinerary is shift-equivalent to e, one representative per cycle,
/// with primitive period at most max_period.
inline BouquetResult sample_bouquet(const LogTransform& L,
                                    const EssentialItinerary& e,
                                    const std::vector<TractId>& symbols,
                                    int max_period,
                                    const std::vector<double>& t_grid,
                                    double tol = 1e-9, int threads = 0) {
  if (symbols.empty() || max_period < 1)
    throw std::invalid_argument("sample_bouquet: need symbols and a period bound");
  double total_words = std::pow(double(symbols.size()), double(max_period));
  if (total_words > 2e6)
    throw std::invalid_argument("sample_bouquet: symbol set too large for the bound");

  std::vector<ExternalAddress> candidates;
  std::vector<int> word;
  for (int len = 1; len <= max_period; ++len) {
    word.assign(std::size_t(len), 0);
    while (true) {
      // keep only the least rotation of each primitive word
      bool least = true;
      for (int r = 1; r < len && least; ++r) {
        for (int i = 0; i < len; ++i) {
          int d = word[std::size_t((i + r) % len)] - word[std::size_t(i)];
          if (d < 0) least = false;
          if (d != 0) break;
        }
      }
      if (least) {
        bool primitive = true;
        for (int d = 1; d < len && primitive; ++d)
          if (len % d == 0) {
            bool rep = true;
            for (int i = d; i < len && rep; ++i)
              rep = word[std::size_t(i)] == word[std::size_t(i - d)];
            if (rep) primitive = false;
          }
        if (primitive) {
          std::vector<TractId> per;
          for (int i : word) per.push_back(symbols[std::size_t(i)]);
          ExternalAddress a({}, per);
          if (admissible(a) && equivalent(itinerary_of_address(a), e))
            candidates.push_back(std::move(a));
        }
      }
      int pos = len - 1;
      while (pos >= 0 && word[std::size_t(pos)] == int(symbols.size()) - 1)
        word[std::size_t(pos--)] = 0;
      if (pos < 0) break;
      ++word[std::size_t(pos)];
    }
  }

  std::sort(candidates.begin(), candidates.end(),
            [&](const ExternalAddress& a, const ExternalAddress& b) {
              try {
                return lex_compare_addresses(L, a, b) == std::strong_ordering::less;
              } catch (const incomparable_error&) {
                return format_address(a) < format_address(b);
              }
            });

  // Sibling rays that first differ at index k collapse onto each other at
  // double precision once the tower level S_k saturates, so bouquets are
  // traced with the singular-annulus floor instead of r_norm: parameters may
  // dip below the normalized level, where sibling separation is still
  // representable, as long as every inverse-branch input stays above the
  // floor.
  double floor = std::max(L.singular_log_bound * 1.02, 1e-6);
  BouquetResult out;
  for (const ExternalAddress& a : candidates) {
    try {
      RayTail r = detail::trace_impl(L, a, t_grid, tol, floor, 64, threads, 0.0);
      if (r.converged) {
        out.addresses.push_back(a);
        out.rays.push_back(std::move(r));
      } else {
        out.failures.emplace_back(a, "trace did not converge");
      }
    } catch (const std::exception& ex) {
      out.failures.emplace_back(a, ex.what());
    }
  }
  return out;
}

}  // namespace cstar
