#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <stdexcept>

#include "cstardyn/escape.hpp"
#include "cstardyn/logspace.hpp"
#include "cstardyn/map.hpp"

using namespace cstar;
using Catch::Approx;

namespace {

LogTransform fig_map() { return make_log_transform({0, {0.0, 0.3}, {0.0, 0.3}}); }

std::size_t count(const Raster& r, PixelStatus s) {
  std::size_t n = 0;
  for (const PixelClass& px : r.pixels) n += px.status == s;
  return n;
}

}  // namespace

TEST_CASE("escape: viewport pixel centers") {
  Viewport vp(cplx(0.0), 2.0, 2.0, 4, 4);
  CHECK(vp.at(0, 0) == cplx(-1.5, 1.5));
  CHECK(vp.at(3, 3) == cplx(1.5, -1.5));
  CHECK(vp.at(0, 3) == cplx(1.5, 1.5));
  CHECK(vp.at(3, 0) == cplx(-1.5, -1.5));

  Viewport rect = square_viewport(cplx(1.0, 2.0), 2.0, 64, 32);
  CHECK(rect.half_height == Approx(1.0));
  CHECK(rect.at(0, 0).real() == Approx(1.0 - 2.0 + 2.0 * 2.0 * 0.5 / 64.0));

  CHECK_THROWS_AS(Viewport(cplx(0.0), 2.0, 1.0, 4, 4), std::invalid_argument);
  CHECK_THROWS_AS(Viewport(cplx(0.0), 2.0, 2.0, 0, 4), std::invalid_argument);
  CHECK_THROWS_AS(Viewport(cplx(0.0), -1.0, 1.0, 4, 4), std::invalid_argument);
}

TEST_CASE("escape: itinerary prefix packing") {
  ItineraryPrefix p;
  p.push(true);
  p.push(false);
  p.push(true);
  CHECK(p.len == 3);
  CHECK(p.at(0));
  CHECK(!p.at(1));
  CHECK(p.at(2));
  CHECK(format_prefix(p) == "inf,0,inf");
  CHECK(format_prefix(ItineraryPrefix{}) == "");
}

TEST_CASE("escape: classification of hand-checked points") {
  auto L = make_log_transform({0, {0.0, 1.0}, {0.0, 1.0}});
  CHECK(default_escape_log_radius(L) == Approx(50.0));

  // orbit of z = 3: levels 1.1, 3.3, 28, e^28; every iterate stays outside
  // the unit circle and the level first clears 50 at iterate 3
  PixelClass px = classify_point(L, cplx(3.0));
  CHECK(px.status == PixelStatus::escaped);
  REQUIRE(px.first_escape_iter);
  CHECK(*px.first_escape_iter == 3);
  CHECK(format_prefix(px.itinerary_prefix) == "inf,inf,inf,inf");

  // the puncture and non-finite inputs are undecided, not errors
  CHECK(classify_point(L, cplx(0.0)).status == PixelStatus::undecided);
  double inf = std::numeric_limits<double>::infinity();
  double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK(classify_point(L, cplx(inf, 0.0)).status == PixelStatus::undecided);
  CHECK(classify_point(L, cplx(0.0, nan)).status == PixelStatus::undecided);
}

TEST_CASE("escape: bounded orbit reports its final level") {
  auto L = fig_map();
  PixelClass px = classify_point(L, cplx(2.0));
  CHECK(px.status == PixelStatus::bounded);
  CHECK(!px.first_escape_iter);
  // the orbit settles on the attracting fixed point, log 2.23735... = 0.805292
  CHECK(px.last_log_modulus == Approx(0.805292).margin(1e-5));
}

TEST_CASE("escape: alternating itinerary of exp(-z+1/z)") {
  auto L = make_log_transform({0, {0.0, -1.0}, {0.0, 1.0}});
  PixelClass px = classify_point(L, cplx(0.5));
  CHECK(px.status == PixelStatus::escaped);
  CHECK(format_prefix(px.itinerary_prefix) == "0,inf,0,inf");
}

TEST_CASE("escape: prefix freezes at tower saturation") {
  auto L = make_log_transform({0, {0.0, 1.0}, {0.0, 1.0}});
  PixelClass px = classify_point(L, cplx(3.0), 64, -1.0, 8);
  CHECK(px.status == PixelStatus::escaped);
  CHECK(px.itinerary_prefix.len >= 4);
  CHECK(px.itinerary_prefix.len <= 8);
  for (int n = 0; n < px.itinerary_prefix.len; ++n)
    CHECK(px.itinerary_prefix.at(n));
}

TEST_CASE("escape: frozen grid counts for exp(0.3(z+1/z))") {
  auto L = fig_map();
  Raster r = classify_grid(L, square_viewport(cplx(0.0), 16.0, 64, 64), 256);
  CHECK(count(r, PixelStatus::bounded) == 2424);
  CHECK(count(r, PixelStatus::escaped) == 1672);
  CHECK(count(r, PixelStatus::undecided) == 0);
}

TEST_CASE("escape: grids are identical for every thread count") {
  auto L = fig_map();
  Viewport vp = square_viewport(cplx(0.0), 16.0, 48, 48);
  Raster a = classify_grid(L, vp, 128, -1.0, 4, 1);
  Raster b = classify_grid(L, vp, 128, -1.0, 4, 3);
  Raster c = classify_grid(L, vp, 128, -1.0, 4, 7);
  REQUIRE(a.pixels.size() == b.pixels.size());
  REQUIRE(a.pixels.size() == c.pixels.size());
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    CHECK(a.pixels[i].status == b.pixels[i].status);
    CHECK(a.pixels[i].status == c.pixels[i].status);
    CHECK(a.pixels[i].first_escape_iter == b.pixels[i].first_escape_iter);
    CHECK(a.pixels[i].first_escape_iter == c.pixels[i].first_escape_iter);
    CHECK(a.pixels[i].itinerary_prefix == b.pixels[i].itinerary_prefix);
    CHECK(a.pixels[i].itinerary_prefix == c.pixels[i].itinerary_prefix);
    CHECK(a.pixels[i].last_log_modulus == b.pixels[i].last_log_modulus);
    CHECK(a.pixels[i].last_log_modulus == c.pixels[i].last_log_modulus);
  }
}

TEST_CASE("escape: histogram sees both alternating buckets") {
  auto L = make_log_transform({0, {0.0, -1.0}, {0.0, 1.0}});
  Raster r = classify_grid(L, square_viewport(cplx(0.0), 3.0, 64, 64), 64);
  auto hist = itinerary_histogram(r);

  ItineraryPrefix zi, iz;
  for (int n = 0; n < 4; ++n) {
    zi.push(n % 2 == 1);
    iz.push(n % 2 == 0);
  }
  REQUIRE(hist.count(zi));
  REQUIRE(hist.count(iz));
  CHECK(hist[zi] > 0);
  CHECK(hist[iz] > 0);

  std::size_t total = 0;
  for (const auto& [key, n] : hist) total += n;
  CHECK(total == count(r, PixelStatus::escaped));
}
