#pragma once

// Escape-set classification. A point escapes when its orbit leaves the
// annulus |log|z|| <= escape_log_radius; the essential itinerary records,
// per iterate, whether the orbit sits beyond the unit circle (symbol inf)
// or inside it (symbol 0). Everything iterates in log coordinates, so the
// double-exponential growth of the maps never overflows the classifier.

#include <cstdint>
#include <map>
#include <thread>

#include "cstardyn/logspace.hpp"

namespace cstar {

struct Viewport {
  cplx center;
  double half_width = 0.0, half_height = 0.0;
  int px_w = 0, px_h = 0;

  Viewport(cplx c, double hw, double hh, int pw, int ph)
      : center(c), half_width(hw), half_height(hh), px_w(pw), px_h(ph) {
    if (!(hw > 0.0) || !(hh > 0.0))
      throw std::invalid_argument("Viewport: half extents must be positive");
    if (pw < 1 || ph < 1)
      throw std::invalid_argument("Viewport: pixel counts must be positive");
    double aspect = (hw / hh) * (double(ph) / double(pw));
    if (std::abs(aspect - 1.0) > 1e-3)
      throw std::invalid_argument("Viewport: pixel aspect deviates more than 0.1%");
  }

  /// Center of pixel (row, col); row 0 is the top scanline.
  cplx at(int row, int col) const {
    double x = center.real() - half_width +
               (2.0 * half_width) * (double(col) + 0.5) / double(px_w);
    double y = center.imag() + half_height -
               (2.0 * half_height) * (double(row) + 0.5) / double(px_h);
    return {x, y};
  }
};

/// Viewport with square pixels: the vertical extent follows from the pixel
/// dimensions.
inline Viewport square_viewport(cplx center, double half_width, int px_w,
                                int px_h) {
  return Viewport(center, half_width,
                  half_width * double(px_h) / double(px_w), px_w, px_h);
}

enum class PixelStatus { escaped, bounded, undecided };

/// Leading symbols of the essential itinerary, bit n set when e_n = inf.
struct ItineraryPrefix {
  std::uint32_t bits = 0;
  int len = 0;

  void push(bool is_inf) {
    if (is_inf) bits |= std::uint32_t(1) << len;
    ++len;
  }
  bool at(int n) const { return (bits >> n) & 1u; }
  friend bool operator==(const ItineraryPrefix&, const ItineraryPrefix&) = default;
  friend auto operator<=>(const ItineraryPrefix& a, const ItineraryPrefix& b) {
    return std::pair(a.len, a.bits) <=> std::pair(b.len, b.bits);
  }
};

inline std::string format_prefix(const ItineraryPrefix& p) {
  std::string out;
  for (int n = 0; n < p.len; ++n) {
    if (n) out += ',';
    out += side_name(p.at(n) ? Side::inf : Side::zero);
  }
  return out;
}

struct PixelClass {
  PixelStatus status = PixelStatus::undecided;
  std::optional<int> first_escape_iter;
  ItineraryPrefix itinerary_prefix;
  double last_log_modulus = 0.0;
};

inline double default_escape_log_radius(const LogTransform& L) {
  return std::max(L.r_norm, 50.0);
}

/// Escape classification of one point. Statuses encode every outcome: the
/// zero puncture and angle-precision loss (|Im w| beyond 1e14) report
/// undecided rather than throwing, so grids over arbitrary viewports stay
/// total. Itinerary symbols e_n = (|f^n(z)| > 1 ? inf : 0) are recorded from
/// n = 0; once the next iterate would saturate doubles, the current tract's
/// target is recorded as one final symbol and the prefix freezes.
inline PixelClass classify_point(const LogTransform& L, cplx z,
                                 int max_iter = 256,
                                 double escape_log_radius = -1.0,
                                 int prefix_len = 4) {
  PixelClass out;
  if (!std::isfinite(z.real()) || !std::isfinite(z.imag()) || z == cplx())
    return out;
  if (escape_log_radius <= 0.0) escape_log_radius = default_escape_log_radius(L);
  prefix_len = std::clamp(prefix_len, 1, 32);

  cplx w = std::log(z);
  for (int n = 0;; ++n) {
    double x = w.real();
    out.last_log_modulus = x;
    if (out.itinerary_prefix.len < prefix_len) out.itinerary_prefix.push(x > 0.0);
    if (!out.first_escape_iter && std::abs(x) > escape_log_radius) {
      out.status = PixelStatus::escaped;
      out.first_escape_iter = n;
    }
    if (out.first_escape_iter && out.itinerary_prefix.len >= prefix_len) return out;
    if (n == max_iter) break;
    if (std::abs(w.imag()) > 1e14) {
      if (!out.first_escape_iter) out.status = PixelStatus::undecided;
      return out;
    }
    if (!F_safe(L, w)) {
      // saturation: the orbit is committed to the current tract's target
      if (out.itinerary_prefix.len < prefix_len) {
        Side s = x > 0.0 ? Side::inf : Side::zero;
        out.itinerary_prefix.push(tract_target(L.band_at(s, w.imag())) == Side::inf);
      }
      return out;
    }
    w = F_eval(L, w);
  }
  if (!out.first_escape_iter) out.status = PixelStatus::bounded;
  return out;
}

struct Raster {
  Viewport vp;
  std::vector<PixelClass> pixels;  // row-major, vp.px_w * vp.px_h entries
};

/// Row-partitioned grid classification. Each pixel is a pure function of its
/// coordinates, so the raster is bit-identical for every thread count.
inline Raster classify_grid(const LogTransform& L, const Viewport& vp,
                            int max_iter = 256, double escape_log_radius = -1.0,
                            int prefix_len = 4, int threads = 0) {
  Raster out{vp, std::vector<PixelClass>(std::size_t(vp.px_w) * vp.px_h)};
  int nthreads = std::min(detail::resolve_threads(threads), vp.px_h);
  std::vector<std::thread> pool;
  pool.reserve(std::size_t(nthreads));
  for (int tid = 0; tid < nthreads; ++tid) {
    pool.emplace_back([&, tid] {
      for (int row = tid; row < vp.px_h; row += nthreads)
        for (int col = 0; col < vp.px_w; ++col)
          out.pixels[std::size_t(row) * vp.px_w + col] = classify_point(
              L, vp.at(row, col), max_iter, escape_log_radius, prefix_len);
    });
  }
  for (auto& th : pool) th.join();
  return out;
}

/// Pixel counts per itinerary prefix over the escaped pixels.
inline std::map<ItineraryPrefix, std::size_t> itinerary_histogram(
    const Raster& raster) {
  std::map<ItineraryPrefix, std::size_t> out;
  for (const PixelClass& px : raster.pixels)
    if (px.status == PixelStatus::escaped) ++out[px.itinerary_prefix];
  return out;
}

}  // namespace cstar
