#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>
#include <stdexcept>

#include "cstardyn/map.hpp"

using namespace cstar;

namespace {

// exp(z + 1/z)
PuncturedPolyMap exp_zpinv() { return {0, {0.0, 1.0}, {0.0, 1.0}}; }

// symmetric difference quotient of f'/f, for cross-checking log_derivative
cplx numeric_logder(const PuncturedPolyMap& f, cplx z, double h = 1e-6) {
  cplx step(h, 0.0);
  return (eval(f, z + step) - eval(f, z - step)) / (2.0 * step * eval(f, z));
}

}  // namespace

TEST_CASE("map: constructor enforces the family invariants") {
  CHECK_THROWS_AS(PuncturedPolyMap(0, {1.0}, {0.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(PuncturedPolyMap(0, {0.0, 1.0}, {5.0}), std::invalid_argument);
  CHECK_THROWS_AS(PuncturedPolyMap(0, {0.0, 1.0}, {1.0, 1.0}),
                  std::invalid_argument);

  // trailing zero coefficients do not inflate the degrees
  PuncturedPolyMap f(2, {1.0, 2.0, 0.0, 0.0}, {0.0, 3.0, 0.0});
  CHECK(f.n == 2);
  CHECK(f.deg_p() == 1);
  CHECK(f.deg_q() == 1);
  CHECK(f.lead_p() == cplx(2.0));
  CHECK(f.lead_q() == cplx(3.0));
}

TEST_CASE("map: order reads the degrees at both essential singularities") {
  PuncturedPolyMap f(1, {0.0, 1.0, 0.5}, {0.0, 0.0, 0.0, 2.0});
  OrderData od = order(f);
  CHECK(od.rho_inf == 2);
  CHECK(od.rho_zero == 3);
  CHECK(od.lambda_inf == od.rho_inf);
  CHECK(od.lambda_zero == od.rho_zero);
}

TEST_CASE("map: eval matches hand-computed values") {
  PuncturedPolyMap f = exp_zpinv();
  CHECK(std::abs(eval(f, cplx(1.0)) - std::exp(cplx(2.0))) < 1e-12 * std::exp(2.0));
  CHECK(std::abs(eval(f, cplx(2.0)) - std::exp(cplx(2.5))) < 1e-12 * std::exp(2.5));

  // the z^n factor: z exp(z + 1/z) at z = -1 is -exp(-2)
  PuncturedPolyMap g(1, {0.0, 1.0}, {0.0, 1.0});
  CHECK(std::abs(eval(g, cplx(-1.0)) - cplx(-std::exp(-2.0))) < 1e-14);

  // circle-maps family at z = 1: the P and Q contributions cancel to exp(i alpha)
  double alpha = 2.0 * std::numbers::pi * 0.19725;
  double beta = 2.0 * std::numbers::pi * 0.48348;
  PuncturedPolyMap arn(1, {cplx(0.0, alpha), beta / 2.0}, {0.0, -beta / 2.0});
  CHECK(std::abs(eval(arn, cplx(1.0)) - std::polar(1.0, alpha)) < 1e-12);
}

TEST_CASE("map: eval never returns the puncture") {
  PuncturedPolyMap f = exp_zpinv();
  for (cplx z : {cplx(0.01), cplx(-3.0, 2.0), cplx(0.0, -0.05), cplx(5.0, 4.0)})
    CHECK(eval(f, z) != cplx(0.0));
}

TEST_CASE("map: log_derivative agrees with the closed form") {
  // f'/f = 1 - 1/z^2 for exp(z + 1/z)
  PuncturedPolyMap f = exp_zpinv();
  CHECK(std::abs(log_derivative(f, cplx(2.0)) - cplx(0.75)) < 1e-14);
  CHECK(std::abs(log_derivative(f, cplx(0.0, 1.0)) - cplx(2.0)) < 1e-14);
}

TEST_CASE("map: log_derivative agrees with a difference quotient") {
  PuncturedPolyMap g(3, {0.5, cplx(0.0, 1.0), 2.0}, {0.0, 1.0, -0.7});
  for (cplx z : {cplx(0.8, 0.3), cplx(-1.2, 0.9), cplx(0.1, -1.4)}) {
    cplx ld = log_derivative(g, z);
    CHECK(std::abs(ld - numeric_logder(g, z)) < 1e-5 * (1.0 + std::abs(ld)));
  }
}

TEST_CASE("map: critical polynomial has degree p+q and the right roots") {
  PuncturedPolyMap f = exp_zpinv();
  poly c = critical_polynomial(f);
  CHECK(poly_degree(c) == 2);
  CHECK(std::abs(horner(c, cplx(1.0))) < 1e-14);
  CHECK(std::abs(horner(c, cplx(-1.0))) < 1e-14);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    int p = 1 + int(rng() % 4), q = 1 + int(rng() % 4);
    poly P(std::size_t(p) + 1), Q(std::size_t(q) + 1);
    for (auto& a : P) a = cplx(u(rng), u(rng));
    for (std::size_t j = 1; j < Q.size(); ++j) Q[j] = cplx(u(rng), u(rng));
    Q[0] = 0.0;
    P.back() += cplx(1.5);  // keep the leading coefficients away from zero
    Q.back() += cplx(1.5);
    PuncturedPolyMap g(int(rng() % 5) - 2, P, Q);
    CHECK(poly_degree(critical_polynomial(g)) == p + q);
  }
}

TEST_CASE("map: polynomial helpers") {
  CHECK(poly_degree(poly{}) == -1);
  CHECK(poly_degree(poly{0.0}) == -1);
  CHECK(poly_degree(poly{0.0, 0.0, 1.0}) == 2);

  poly d = differentiate({1.0, 2.0, 3.0});
  REQUIRE(d.size() == 2);
  CHECK(d[0] == cplx(2.0));
  CHECK(d[1] == cplx(6.0));

  CHECK(horner({1.0, 0.0, 1.0}, cplx(0.0, 2.0)) == cplx(-3.0));
  CHECK(horner(poly{}, cplx(7.0)) == cplx(0.0));
}
