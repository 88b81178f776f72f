#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>
#include <stdexcept>
#include <vector>

#include "cstardyn/logspace.hpp"
#include "cstardyn/map.hpp"

using namespace cstar;
using Catch::Approx;

namespace {

constexpr double pi = std::numbers::pi;

LogTransform exp_zpinv() {
  return make_log_transform({0, {0.0, 1.0}, {0.0, 1.0}});
}

LogTransform exp_z2pinv() {
  return make_log_transform({0, {0.0, 0.0, 1.0}, {0.0, 1.0}});
}

}  // namespace

TEST_CASE("logspace: F is the logarithmic lift of f") {
  auto L = make_log_transform({1, {cplx(0.0, 1.2), 0.7}, {0.0, -0.4, 0.2}});
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ux(-3.0, 3.0), uy(-7.0, 7.0);
  for (int i = 0; i < 200; ++i) {
    cplx w(ux(rng), uy(rng));
    cplx lhs = std::exp(F_eval(L, w));
    cplx rhs = eval(L.map, std::exp(w));
    CHECK(std::abs(lhs - rhs) < 1e-9 * std::abs(rhs));
  }
}

TEST_CASE("logspace: F_deriv matches a difference quotient") {
  auto L = exp_zpinv();
  for (cplx w : {cplx(1.5, 0.4), cplx(-2.0, 2.2), cplx(0.3, -1.0)}) {
    cplx h(1e-6, 0.0);
    cplx num = (F_eval(L, w + h) - F_eval(L, w - h)) / (2.0 * h);
    CHECK(std::abs(F_deriv(L, w) - num) < 1e-5 * (1.0 + std::abs(num)));
  }
}

TEST_CASE("logspace: F_safe flags saturating inputs") {
  auto L = exp_zpinv();
  CHECK(F_safe(L, cplx(0.0)));
  CHECK(F_safe(L, cplx(100.0, 5.0)));
  CHECK(!F_safe(L, cplx(800.0)));
  CHECK(!F_safe(L, cplx(-800.0)));
}

TEST_CASE("logspace: certified normalization data for the example maps") {
  struct Row {
    PuncturedPolyMap f;
    double r_norm, singular, delta;
  };
  double alpha = 2.0 * pi * 0.19725, beta = 2.0 * pi * 0.48348;
  Row rows[] = {
      {{0, {0.0, 1.0}, {0.0, 1.0}}, 3.032022, 2.105361, pi / 2.0},
      {{0, {0.0, -1.0}, {0.0, 1.0}}, 1.2, 0.105361, pi / 2.0},
      {{0, {0.0, 0.3}, {0.0, 0.3}}, 2.48832, 0.705361, pi / 2.0},
      {{0, {0.0, 0.0, 1.0}, {0.0, 1.0}}, 2.858962, 1.985192, pi / 4.0},
      {{1, {cplx(0.0, alpha), beta / 2.0}, {0.0, -beta / 2.0}},
       1.0, 0.105361, pi / 2.0},
  };
  for (const Row& row : rows) {
    auto L = make_log_transform(row.f);
    CHECK(L.r_norm == Approx(row.r_norm).margin(1e-6));
    CHECK(L.singular_log_bound == Approx(row.singular).margin(1e-6));
    CHECK(L.delta_line_im == Approx(row.delta).margin(1e-9));
    CHECK(L.r_norm > L.singular_log_bound);
  }
}

TEST_CASE("logspace: band geometry") {
  auto L = exp_zpinv();
  // both leading coefficients are 1, so the centers sit on multiples of pi
  CHECK(L.band_center_im({Side::inf, 0, 0}) == Approx(0.0).margin(1e-12));
  CHECK(L.band_center_im({Side::inf, 1, 0}) == Approx(pi).margin(1e-12));
  CHECK(L.band_center_im({Side::zero, 1, 0}) == Approx(pi).margin(1e-12));
  CHECK(L.band_width(Side::inf) == Approx(pi));

  auto L2 = make_log_transform({1, {cplx(0.0, 1.0), cplx(0.4, 0.3)},
                                {0.0, cplx(-0.2, 0.9)}});
  for (Side s : {Side::inf, Side::zero}) {
    CHECK(L2.band_width(s) == Approx(pi / L2.deg(s)));
    for (int b = -2; b <= 2; ++b)
      for (int k = -2; k <= 2; ++k)
        CHECK(L2.band_center_im({s, b, k}) ==
              Approx(L2.band_center_im({s, b, 0}) + 2.0 * pi * k).margin(1e-12));
  }
}

TEST_CASE("logspace: tract targets follow band parity") {
  CHECK(tract_target({Side::inf, 0, 0}) == Side::inf);
  CHECK(tract_target({Side::inf, 1, 0}) == Side::zero);
  CHECK(tract_target({Side::zero, -1, 2}) == Side::zero);
  CHECK(tract_target({Side::zero, -2, -3}) == Side::inf);
  CHECK(opposite(Side::inf) == Side::zero);
  CHECK(opposite(Side::zero) == Side::inf);
}

TEST_CASE("logspace: tract catalog covers 2p + 2q bands per strip") {
  auto L = exp_z2pinv();  // p = 2, q = 1
  auto cat = tract_catalog(L, 0, 0);
  REQUIRE(cat.size() == 6);
  for (const TractInfo& t : cat) {
    CHECK(t.id.strip == 0);
    CHECK(t.deg == (t.id.side == Side::inf ? 2 : 1));
    CHECK(t.band_width == Approx(pi / t.deg));
    CHECK(t.target == tract_target(t.id));
    CHECK(t.center_im == Approx(L.band_center_im(t.id)).margin(1e-12));
  }
  CHECK(tract_catalog(L, -1, 1).size() == 18);
}

TEST_CASE("logspace: inverse_branch inverts F into the requested tract") {
  auto L = exp_z2pinv();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uy(-3.0, 3.0), ul(1.5, 3.0);
  for (const TractInfo& t : tract_catalog(L, -1, 1)) {
    for (int i = 0; i < 4; ++i) {
      double sign = t.target == Side::inf ? 1.0 : -1.0;
      cplx zeta(sign * L.r_norm * ul(rng), uy(rng));
      cplx w = inverse_branch(L, zeta, t.id);
      CHECK(std::abs(F_eval(L, w) - zeta) < 1e-9 * std::abs(zeta));
      CHECK(std::abs(w.imag() - t.center_im) < t.band_width / 2.0 + 0.2);
      auto loc = locate_tract(L, w);
      REQUIRE(loc.id);
      CHECK(*loc.id == t.id);
    }
  }
}

TEST_CASE("logspace: inverse_branch rejects points off the target half-plane") {
  auto L = exp_zpinv();
  TractId t{Side::inf, 0, 0};  // target side inf, so Re zeta must be positive
  CHECK_THROWS_AS(inverse_branch(L, cplx(-8.0, 0.0), t), std::runtime_error);
  CHECK_THROWS_AS(inverse_branch(L, cplx(L.r_norm * 0.5, 0.0), t),
                  std::runtime_error);
}

TEST_CASE("logspace: locate_tract reports edge statuses") {
  auto L = exp_zpinv();
  CHECK(locate_tract(L, cplx(0.0, 1.0)).status == LocateStatus::on_axis);
  CHECK(locate_tract(L, cplx(0.01, 0.0)).status == LocateStatus::below_level);
}

TEST_CASE("logspace: fundamental domain index counts delta-line crossings") {
  auto L = exp_zpinv();
  // F(2) is real, the delta line sits at pi/2, so index -1
  CHECK(fundamental_domain_index(L, cplx(2.0)) == -1);

  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> ux(1.2, 3.0), uy(-6.0, 6.0);
  for (int i = 0; i < 100; ++i) {
    cplx w(ux(rng), uy(rng));
    int idx = fundamental_domain_index(L, w);
    double y = F_eval(L, w).imag();
    double r = y - L.delta_line_im - 2.0 * pi * idx;
    CHECK(r > 0.0);
    CHECK(r < 2.0 * pi);
  }
}

TEST_CASE("logspace: expansivity holds on the normalized region") {
  auto L = exp_zpinv();
  auto rep = expansivity_report(L, 2000, 200);
  CHECK(rep.pass);
  CHECK(rep.point_violations == 0);
  CHECK(rep.pair_violations == 0);
  CHECK(rep.point_samples > 0);
  CHECK(rep.pair_samples > 0);
  CHECK(rep.min_abs_deriv >= 2.0);
}
