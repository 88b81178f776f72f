// Acceptance gate: one line per criterion, PASS only when the pinned
// tolerances and the runtime budget both hold. Exits nonzero on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cstardyn/escape.hpp"
#include "cstardyn/logspace.hpp"
#include "cstardyn/map.hpp"
#include "cstardyn/orbits.hpp"
#include "cstardyn/rays.hpp"
#include "cstardyn/roots.hpp"
#include "cstardyn/symbolic.hpp"

using namespace cstar;

namespace {

constexpr double pi = std::numbers::pi;

int failures = 0;

// rays traced by criteria 2-4, re-examined by criterion 7
std::vector<RayTail> traced_rays;

struct Check {
  std::string name;
  double budget_s;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string detail;

  Check(std::string n, double budget) : name(std::move(n)), budget_s(budget) {}

  void require(bool cond, const std::string& what) {
    if (!cond && detail.empty()) detail = what;
    ok = ok && cond;
  }

  void finish(int idx) {
    double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    bool in_budget = elapsed < budget_s;
    bool pass = ok && in_budget;
    if (!pass) ++failures;
    std::printf("%s  %2d  %-58s  %7.2fs / %gs%s%s\n", pass ? "PASS" : "FAIL",
                idx, name.c_str(), elapsed, budget_s,
                !ok && !detail.empty() ? "  " : "",
                !ok && !detail.empty() ? detail.c_str() : "");
    if (ok && !in_budget) std::printf("          over budget\n");
    std::fflush(stdout);
  }
};

PuncturedPolyMap circle_map() {
  double alpha = 2.0 * pi * 0.19725, beta = 2.0 * pi * 0.48348;
  return {1, {cplx(0.0, alpha), beta / 2.0}, {0.0, -beta / 2.0}};
}

std::vector<std::pair<std::string, PuncturedPolyMap>> example_maps() {
  return {
      {"exp(0.3(z+1/z))", {0, {0.0, 0.3}, {0.0, 0.3}}},
      {"exp(z+1/z)", {0, {0.0, 1.0}, {0.0, 1.0}}},
      {"exp(-z+1/z)", {0, {0.0, -1.0}, {0.0, 1.0}}},
      {"exp(z^2+1/z)", {0, {0.0, 0.0, 1.0}, {0.0, 1.0}}},
      {"circle(0.19725,0.48348)", circle_map()},
  };
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> out;
  for (int i = 0; i < n; ++i)
    out.push_back(a + (b - a) * double(i) / double(n - 1));
  return out;
}

void criterion_1() {
  Check c("attracting fixed point of exp(0.3(z+1/z))", 1.0);
  PuncturedPolyMap f(0, {0.0, 0.3}, {0.0, 0.3});
  auto orb = find_periodic_orbit(f, 1, cplx(2.0));
  c.require(bool(orb), "no orbit found");
  if (orb) {
    c.require(std::abs(orb->points[0] - cplx(2.2373)) < 5e-4,
              "fixed point off 2.2373");
    c.require(std::abs(orb->multiplier) < 1.0, "not attracting");
  }
  c.finish(1);
}

void criterion_2() {
  Check c("circle-map period-4 orbit and period-8 ray cycle", 60.0);
  PuncturedPolyMap f = circle_map();

  std::optional<PeriodicOrbit> best;
  double best_dev = 1e300;
  for (int k = 0; k < 192; ++k) {
    auto orb = find_periodic_orbit(f, 4, std::polar(1.0, 2.0 * pi * k / 192.0));
    if (!orb || orb->period != 4) continue;
    double dev = 0.0;
    for (cplx z : orb->points) dev = std::max(dev, std::abs(std::abs(z) - 1.0));
    if (dev < best_dev) {
      best_dev = dev;
      best = orb;
    }
  }
  c.require(bool(best), "no period-4 orbit from the unit-circle seed fan");
  if (best) {
    c.require(best_dev < 1e-8, "orbit strays from |z| = 1");
    c.require(std::abs(best->multiplier) > 1.0, "orbit is not repelling");
  }

  if (best) {
    auto L = make_log_transform(f);
    ExternalAddress addr8 = parse_address(
        "[]([(inf,0,1),(inf,1,0),(0,0,0),(inf,1,0),(0,1,0),(0,0,0),(inf,1,0),"
        "(0,0,0)])");
    for (std::size_t k = 0; k < 8 && c.ok; ++k) {
      LandingReport rep = land_periodic_ray(L, shift(addr8, k), 1e-9);
      c.require(rep.verdict == LandingVerdict::lands_repelling,
                "shift " + std::to_string(k) + ": " +
                    verdict_name(rep.verdict) + " " + rep.diagnostics);
      if (!rep.landing_point) continue;
      double dist = 1e300;
      for (cplx z : best->points)
        dist = std::min(dist, std::abs(*rep.landing_point - z));
      c.require(dist < 1e-6,
                "shift " + std::to_string(k) + " lands off the orbit");
      traced_rays.push_back(rep.ray);
    }
  }
  c.finish(2);
}

void criterion_3() {
  Check c("constant real address of exp(z+1/z), broken by z = 1", 5.0);
  auto L = make_log_transform({0, {0.0, 1.0}, {0.0, 1.0}});
  ExternalAddress addr({}, {TractId{Side::inf, 0, 0}});
  double t0 = min_trace_parameter(L, addr);
  RayTail ray = trace_ray_tail(L, addr, linspace(t0 + 0.05, t0 + 12.0, 100));
  c.require(ray.converged, "trace did not converge");
  if (ray.converged) {
    double worst = 0.0;
    for (const RaySample& s : ray.samples)
      worst = std::max(worst, std::abs(s.z.imag()));
    c.require(worst < 1e-8, "ray leaves the real axis");
    c.require(is_broken(L, ray), "critical point not detected on the ray");
    traced_rays.push_back(ray);
  }
  c.finish(3);
}

void criterion_4() {
  Check c("period-2 rays of exp(-z+1/z) land at z = 1, multiplier -2", 10.0);
  auto L = make_log_transform({0, {0.0, -1.0}, {0.0, 1.0}});
  ExternalAddress per2({},
                       {TractId{Side::inf, 1, 0}, TractId{Side::zero, 0, 0}});
  for (std::size_t k = 0; k < 2; ++k) {
    LandingReport rep = land_periodic_ray(L, shift(per2, k), 1e-9);
    c.require(rep.verdict == LandingVerdict::lands_repelling,
              std::string("branch ") + std::to_string(k) + ": " +
                  verdict_name(rep.verdict));
    if (rep.landing_point)
      c.require(std::abs(*rep.landing_point - cplx(1.0)) < 1e-9,
                "landing point off z = 1");
    else
      c.require(false, "no landing point");
    if (rep.orbit)
      c.require(std::abs(rep.orbit->multiplier - cplx(-2.0)) < 1e-9,
                "multiplier off -2");
    else
      c.require(false, "no orbit report");
    if (rep.ray.converged) traced_rays.push_back(rep.ray);
  }
  c.finish(4);
}

void criterion_5() {
  Check c("100 random maps have exactly p+q critical points", 10.0);
  std::mt19937_64 rng(2026);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 100 && c.ok; ++trial) {
    int p = 1 + int(rng() % 4), q = 1 + int(rng() % 4);
    poly P(std::size_t(p) + 1), Q(std::size_t(q) + 1);
    for (auto& a : P) a = cplx(u(rng), u(rng));
    for (std::size_t j = 1; j < Q.size(); ++j) Q[j] = cplx(u(rng), u(rng));
    Q[0] = 0.0;
    P.back() += cplx(1.2);
    Q.back() += cplx(1.2);
    PuncturedPolyMap f(int(rng() % 5) - 2, P, Q);
    auto cps = critical_points(f);
    c.require(int(cps.size()) == p + q,
              "trial " + std::to_string(trial) + ": " +
                  std::to_string(cps.size()) + " points for p+q = " +
                  std::to_string(p + q));
    for (cplx z : cps)
      c.require(std::abs(log_derivative(f, z)) < 1e-10,
                "trial " + std::to_string(trial) + ": residual too large");
  }
  c.finish(5);
}

void criterion_6() {
  Check c("expansivity: |F'| >= 2 and the pairwise lower bound", 30.0);
  for (const auto& [name, f] : example_maps()) {
    auto L = make_log_transform(f);
    auto rep = expansivity_report(L, 10000, 1000);
    c.require(rep.point_violations == 0, name + ": pointwise violations");
    c.require(rep.pair_violations == 0, name + ": pairwise violations");
    c.require(rep.pass, name + ": report not passing");
  }
  c.finish(6);
}

void criterion_7() {
  Check c("pullback displacements at least halve at every depth", 60.0);
  c.require(!traced_rays.empty(), "no rays collected");
  for (const RayTail& ray : traced_rays)
    for (const auto& mv : ray.movements)
      for (std::size_t k = 1; k < mv.size(); ++k)
        if (mv[k - 1] > 1e-12)
          c.require(mv[k] <= 0.5 * mv[k - 1] + 1e-15,
                    "ratio above 1/2 at depth " + std::to_string(k));
  c.finish(7);
}

void criterion_8() {
  Check c("a linear head-start profile certifies every tract handoff", 60.0);
  for (const auto& [name, f] : example_maps()) {
    auto L = make_log_transform(f);
    auto catalog = tract_catalog(L, 0, 0);
    for (const TractInfo& from : catalog)
      for (const TractInfo& to : catalog) {
        if (from.target != to.id.side) continue;
        auto rep =
            head_start_check(L, from.id, to.id, HeadStartProfile{}, 10000);
        HeadStartReport certified = rep;
        if (!rep.pass && rep.minimal_workable)
          certified =
              head_start_check(L, from.id, to.id, *rep.minimal_workable, 10000);
        std::string pair_name = name + " " + format_tract(from.id) + " -> " +
                                format_tract(to.id);
        c.require(certified.pass, pair_name + ": no workable profile");
        c.require(certified.violations == 0, pair_name + ": violations");
        c.require(certified.antecedent_count > 0, pair_name + ": vacuous");
      }
  }
  c.finish(8);
}

void criterion_9() {
  Check c("symbolic suite: shifts, equivalence, admissibility, lex order", 5.0);
  auto L = make_log_transform({0, {0.0, 0.0, 1.0}, {0.0, 1.0}});
  std::mt19937_64 rng(7);
  auto coin = [&] { return rng() & 1 ? Side::inf : Side::zero; };
  auto random_admissible = [&](int pre_len, int per_len) {
    std::uniform_int_distribution<int> st(-2, 2);
    std::vector<Side> pre_sides(static_cast<std::size_t>(pre_len));
    std::vector<Side> per_sides(static_cast<std::size_t>(per_len));
    for (auto& s : pre_sides) s = coin();
    for (auto& s : per_sides) s = coin();
    auto pick = [&](Side cur, Side next) {
      std::uniform_int_distribution<int> half(0, L.deg(cur) - 1);
      return TractId{cur, 2 * half(rng) + (next == Side::inf ? 0 : 1), st(rng)};
    };
    std::vector<TractId> pre(static_cast<std::size_t>(pre_len)), per(static_cast<std::size_t>(per_len));
    for (int i = 0; i < per_len; ++i)
      per[std::size_t(i)] = pick(per_sides[std::size_t(i)],
                                 per_sides[std::size_t((i + 1) % per_len)]);
    for (int i = 0; i < pre_len; ++i)
      pre[std::size_t(i)] = pick(pre_sides[std::size_t(i)],
                                 i + 1 < pre_len ? pre_sides[std::size_t(i + 1)]
                                                 : per_sides[0]);
    return ExternalAddress(std::move(pre), std::move(per));
  };

  // admissibility is shift-invariant
  for (int trial = 0; trial < 1000 && c.ok; ++trial) {
    ExternalAddress a = random_admissible(int(rng() % 3), 1 + int(rng() % 4));
    c.require(admissible(a), "generator produced an inadmissible address");
    for (std::size_t k = 1; k <= 6; ++k)
      c.require(admissible(shift(a, k)), "shift broke admissibility");
  }

  // itinerary commutes with shift
  auto random_tract = [&] {
    std::uniform_int_distribution<int> bd(-5, 5), st(-2, 2);
    return TractId{coin(), bd(rng), st(rng)};
  };
  for (int trial = 0; trial < 1000 && c.ok; ++trial) {
    std::vector<TractId> pre(rng() % 3), per(1 + rng() % 4);
    for (auto& t : pre) t = random_tract();
    for (auto& t : per) t = random_tract();
    ExternalAddress a(pre, per);
    std::size_t k = rng() % 8;
    c.require(itinerary_of_address(shift(a, k)) ==
                  shift(itinerary_of_address(a), k),
              "itinerary does not commute with shift");
  }

  // equivalence axioms over a pool closed under shifts
  std::vector<EssentialItinerary> pool;
  for (int i = 0; i < 10; ++i) {
    std::vector<Side> pre(rng() % 3), per(1 + rng() % 5);
    for (auto& s : pre) s = coin();
    for (auto& s : per) s = coin();
    EssentialItinerary base(pre, per);
    for (std::size_t k = 0; k <= per.size(); ++k) pool.push_back(shift(base, k));
  }
  for (int trial = 0; trial < 1000 && c.ok; ++trial) {
    const auto& a = pool[rng() % pool.size()];
    const auto& b = pool[rng() % pool.size()];
    const auto& d = pool[rng() % pool.size()];
    c.require(equivalent(a, a), "equivalence not reflexive");
    c.require(equivalent(a, b) == equivalent(b, a), "equivalence not symmetric");
    if (equivalent(a, b) && equivalent(b, d))
      c.require(equivalent(a, d), "equivalence not transitive");
  }

  // total order over a one-sided address pool
  std::vector<ExternalAddress> addrs;
  std::uniform_int_distribution<int> band(0, 1), st(-1, 1);
  for (int i = 0; i < 50; ++i) {
    std::vector<TractId> pre(rng() % 2), per(1 + rng() % 4);
    for (auto& t : pre) t = {Side::inf, 2 * band(rng), st(rng)};
    for (auto& t : per) t = {Side::inf, 2 * band(rng), st(rng)};
    addrs.emplace_back(pre, per);
  }
  auto cmp = [&](const ExternalAddress& a, const ExternalAddress& b) {
    return lex_compare_addresses(L, a, b);
  };
  for (int trial = 0; trial < 1000 && c.ok; ++trial) {
    const auto& a = addrs[rng() % addrs.size()];
    const auto& b = addrs[rng() % addrs.size()];
    const auto& d = addrs[rng() % addrs.size()];
    auto ab = cmp(a, b);
    c.require(ab == detail::reverse_order(cmp(b, a)), "lex order not antisymmetric");
    c.require((ab == std::strong_ordering::equal) == (a == b),
              "lex equality disagrees with ==");
    if (ab != std::strong_ordering::greater &&
        cmp(b, d) != std::strong_ordering::greater)
      c.require(cmp(a, d) != std::strong_ordering::greater,
                "lex order not transitive");
  }
  c.finish(9);
}

void criterion_10() {
  Check c("render determinism and basin consistency", 30.0);
  auto L = make_log_transform({0, {0.0, 0.3}, {0.0, 0.3}});
  Viewport vp = square_viewport(cplx(0.0), 16.0, 512, 512);
  Raster base = classify_grid(L, vp, 256, -1.0, 4, 1);
  for (int threads : {4, 8}) {
    Raster other = classify_grid(L, vp, 256, -1.0, 4, threads);
    bool same = base.pixels.size() == other.pixels.size();
    for (std::size_t i = 0; same && i < base.pixels.size(); ++i)
      same = base.pixels[i].status == other.pixels[i].status &&
             base.pixels[i].first_escape_iter ==
                 other.pixels[i].first_escape_iter &&
             base.pixels[i].itinerary_prefix ==
                 other.pixels[i].itinerary_prefix &&
             base.pixels[i].last_log_modulus == other.pixels[i].last_log_modulus;
    c.require(same,
              "grid differs between 1 and " + std::to_string(threads) +
                  " threads");
  }

  // the pixel containing the attracting fixed point is bounded
  cplx z0(2.2373, 0.0);
  int col = int(std::floor((z0.real() - (vp.center.real() - vp.half_width)) /
                           (2.0 * vp.half_width) * vp.px_w));
  int row = int(std::floor(((vp.center.imag() + vp.half_height) - z0.imag()) /
                           (2.0 * vp.half_height) * vp.px_h));
  c.require(base.pixels[std::size_t(row) * vp.px_w + col].status ==
                PixelStatus::bounded,
            "fixed-point pixel not bounded");

  // exp(-z+1/z) populates both alternating itinerary buckets
  auto L2 = make_log_transform({0, {0.0, -1.0}, {0.0, 1.0}});
  Raster r2 = classify_grid(L2, square_viewport(cplx(0.0), 3.0, 128, 128), 64);
  auto hist = itinerary_histogram(r2);
  ItineraryPrefix zi, iz;
  for (int n = 0; n < 4; ++n) {
    zi.push(n % 2 == 1);
    iz.push(n % 2 == 0);
  }
  c.require(hist.count(zi) && hist[zi] > 0, "bucket 0,inf,0,inf empty");
  c.require(hist.count(iz) && hist[iz] > 0, "bucket inf,0,inf,0 empty");
  c.finish(10);
}

void criterion_11() {
  Check c("bouquet of period <= 3 rays over two symbols stays ordered", 60.0);
  auto L = make_log_transform({0, {0.0, 0.0, 1.0}, {0.0, 1.0}});
  EssentialItinerary inf_bar({}, {Side::inf});
  std::vector<TractId> symbols{{Side::inf, 0, 0}, {Side::inf, 2, 0}};
  std::vector<double> grid;
  for (int i = 0; i < 12; ++i) grid.push_back(0.55 + 0.03 * i);

  BouquetResult res = sample_bouquet(L, inf_bar, symbols, 3, grid, 1e-9);
  for (const auto& [addr, why] : res.failures)
    c.require(false, format_address(addr) + ": " + why);
  c.require(res.rays.size() == 5,
            std::to_string(res.rays.size()) + " rays, expected 5");

  // pairwise disjoint at sample resolution
  for (std::size_t i = 0; i < res.rays.size(); ++i)
    for (std::size_t j = i + 1; j < res.rays.size(); ++j) {
      std::size_t m =
          std::min(res.rays[i].samples.size(), res.rays[j].samples.size());
      double gap = 1e300;
      for (std::size_t s = 0; s < m; ++s)
        gap = std::min(gap, std::abs(res.rays[i].samples[s].w -
                                     res.rays[j].samples[s].w));
      c.require(gap > 1e-6, "rays " + std::to_string(i) + " and " +
                                std::to_string(j) + " collide");
    }

  // vertical position at the last shared parameter follows the lex order
  for (std::size_t i = 0; i + 1 < res.rays.size(); ++i) {
    c.require(lex_compare_addresses(L, res.addresses[i],
                                    res.addresses[i + 1]) ==
                  std::strong_ordering::less,
              "addresses out of lex order");
    c.require(res.rays[i].samples.back().w.imag() <
                  res.rays[i + 1].samples.back().w.imag(),
              "vertical order disagrees with lex order");
  }
  c.finish(11);
}

}  // namespace

int main() {
  void (*criteria[])() = {criterion_1, criterion_2, criterion_3, criterion_4,
                          criterion_5, criterion_6, criterion_7, criterion_8,
                          criterion_9, criterion_10, criterion_11};
  for (std::size_t i = 0; i < std::size(criteria); ++i) {
    try {
      criteria[i]();
    } catch (const std::exception& e) {
      ++failures;
      std::printf("FAIL  %2zu  unhandled exception: %s\n", i + 1, e.what());
      std::fflush(stdout);
    }
  }
  std::printf("%d/11 criteria passed\n", 11 - failures);
  return failures == 0 ? 0 : 1;
}
