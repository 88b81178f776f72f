#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "cstardyn/escape.hpp"
#include "cstardyn/io.hpp"
#include "cstardyn/logspace.hpp"
#include "cstardyn/map.hpp"
#include "cstardyn/orbits.hpp"
#include "cstardyn/rays.hpp"
#include "cstardyn/roots.hpp"
#include "cstardyn/symbolic.hpp"
#include "cstardyn/version.hpp"

namespace {

using namespace cstar;

constexpr int exit_ok = 0;
constexpr int exit_failure = 1;
constexpr int exit_usage = 2;

struct usage_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string g6(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::string c6(cplx z) {
  return g6(z.real()) + (z.imag() < 0 ? " - " : " + ") + g6(std::abs(z.imag())) + "i";
}

const char* status_name(PixelStatus s) {
  switch (s) {
    case PixelStatus::escaped: return "escaped";
    case PixelStatus::bounded: return "bounded";
    default: return "undecided";
  }
}

const char* stability_name(Stability s) {
  switch (s) {
    case Stability::attracting: return "attracting";
    case Stability::repelling: return "repelling";
    case Stability::parabolic: return "parabolic";
    default: return "indifferent";
  }
}

void trailer(const nlohmann::ordered_json& j) { std::cout << j.dump() << "\n"; }

/// Command-line values; optionals stay empty when the flag was not given so
/// config-file values survive the merge.
struct Flags {
  std::optional<std::string> config_path, out, style, preset, map_json;
  std::optional<std::string> address, itinerary;
  std::optional<int> threads, max_iter, prefix_len, period, max_period;
  std::optional<int> px_w, px_h, t_count, points, pairs;
  std::optional<double> half_width, escape_log_radius, tol, t_start, t_stop;
  std::vector<double> center, seed, params;
  std::vector<std::string> symbols;
  bool on_circle = false;
  int strip_min = 0, strip_max = 0;
};

/// Config file first, then flags override field by field.
RunConfig build_config(const Flags& fl) {
  RunConfig cfg;
  if (fl.config_path) {
    std::string text;
    try {
      text = read_text_file(*fl.config_path);
    } catch (const std::exception& e) {
      throw usage_error(e.what());
    }
    cfg = parse_config(text);
  }

  if (fl.map_json) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(*fl.map_json);
    } catch (const nlohmann::json::parse_error& e) {
      throw usage_error(std::string("--map-json: ") + e.what());
    }
    cfg.map = detail::parse_map_spec(j);
  }
  if (fl.preset) {
    cfg.map = MapSpec{};
    cfg.map.preset = *fl.preset;
    cfg.map.params = fl.params;
  } else if (!fl.params.empty()) {
    if (!cfg.map.is_preset())
      throw usage_error("--params needs a preset map (--preset or a preset config)");
    cfg.map.params = fl.params;
  }
  if (!cfg.map.is_preset() && cfg.map.P.empty())
    throw usage_error("no map given; use --config, --preset or --map-json");

  if (!fl.center.empty() || fl.half_width || fl.px_w || fl.px_h) {
    ViewportSpec vs = cfg.viewport.value_or(ViewportSpec{});
    if (!fl.center.empty()) vs.center = {fl.center[0], fl.center[1]};
    if (fl.half_width) vs.half_width = *fl.half_width;
    if (fl.px_w) vs.px_w = *fl.px_w;
    if (fl.px_h) vs.px_h = *fl.px_h;
    cfg.viewport = vs;
  }
  if (fl.max_iter || fl.escape_log_radius || fl.prefix_len || fl.style) {
    RenderSpec rs = cfg.render.value_or(RenderSpec{});
    if (fl.max_iter) rs.max_iter = *fl.max_iter;
    if (fl.escape_log_radius) rs.escape_log_radius = *fl.escape_log_radius;
    if (fl.prefix_len) rs.prefix_len = *fl.prefix_len;
    if (fl.style) {
      rs.style = *fl.style;
      if (rs.style != "itinerary" && rs.style != "phase")
        throw usage_error("--style must be itinerary or phase");
    }
    cfg.render = rs;
  }
  if (fl.address) cfg.address = fl.address;
  if (fl.itinerary) cfg.itinerary = fl.itinerary;
  if (!fl.symbols.empty()) cfg.symbols = fl.symbols;
  if (fl.t_start || fl.t_stop || fl.t_count) {
    TGridSpec ts = cfg.t_grid.value_or(TGridSpec{});
    if (fl.t_start) ts.start = *fl.t_start;
    if (fl.t_stop) ts.stop = *fl.t_stop;
    if (fl.t_count) ts.count = *fl.t_count;
    cfg.t_grid = ts;
  }
  if (fl.tol) cfg.tolerance = fl.tol;
  if (fl.points || fl.pairs) {
    SampleSpec ss = cfg.samples.value_or(SampleSpec{});
    if (fl.points) ss.points = *fl.points;
    if (fl.pairs) ss.pairs = *fl.pairs;
    cfg.samples = ss;
  }
  if (fl.period) cfg.period = fl.period;
  if (fl.max_period) cfg.max_period = fl.max_period;
  if (fl.on_circle) cfg.on_circle = true;
  if (!fl.seed.empty()) cfg.seed = cplx(fl.seed[0], fl.seed[1]);
  if (fl.out) cfg.out = fl.out;
  if (fl.threads) cfg.threads = fl.threads;
  return cfg;
}

/// Flag beats config beats CSTARDYN_THREADS; 0 means hardware concurrency.
int resolve_thread_count(const RunConfig& cfg) {
  if (cfg.threads) return *cfg.threads;
  if (const char* env = std::getenv("CSTARDYN_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end && *end == '\0' && v >= 0) return int(v);
  }
  return 0;
}

Viewport viewport_or_usage(const RunConfig& cfg, const char* cmd) {
  if (!cfg.viewport)
    throw usage_error(std::string(cmd) +
                      " needs a viewport; set --center/--half-width/--px-w or the "
                      "config \"viewport\"");
  try {
    return make_viewport(*cfg.viewport);
  } catch (const std::invalid_argument& e) {
    throw usage_error(e.what());
  }
}

std::vector<double> t_grid_or(const RunConfig& cfg,
                              const std::vector<double>& fallback) {
  if (!cfg.t_grid) return fallback;
  const TGridSpec& g = *cfg.t_grid;
  if (!(g.start > 0.0) || g.count < 1 || !(g.stop >= g.start))
    throw usage_error("t_grid needs start > 0, stop >= start, count >= 1");
  return make_t_grid(g);
}

std::optional<std::pair<int, int>> pixel_of(const Viewport& vp, cplx z) {
  double fx = (z.real() - (vp.center.real() - vp.half_width)) / (2.0 * vp.half_width);
  double fy = ((vp.center.imag() + vp.half_height) - z.imag()) / (2.0 * vp.half_height);
  int col = int(std::floor(fx * vp.px_w));
  int row = int(std::floor(fy * vp.px_h));
  if (col < 0 || col >= vp.px_w || row < 0 || row >= vp.px_h) return std::nullopt;
  return std::pair(row, col);
}

/// Itinerary render with the given ray samples painted white, for eyeballing
/// where a traced ray sits against the escape classification.
void write_overlay(const LogTransform& L, const Viewport& vp, const RenderSpec& rs,
                   const std::vector<NamedRay>& rays, int threads,
                   const std::string& path) {
  Raster raster =
      classify_grid(L, vp, rs.max_iter, rs.escape_log_radius, rs.prefix_len, threads);
  std::vector<std::uint8_t> rgb = render_itinerary(raster, rs.bounded_color);
  for (const NamedRay& r : rays)
    for (const RaySample& s : r.tail.samples)
      if (auto px = pixel_of(vp, s.z)) {
        std::size_t at = (std::size_t(px->first) * std::size_t(vp.px_w) +
                          std::size_t(px->second)) *
                         3;
        rgb[at] = rgb[at + 1] = rgb[at + 2] = 255;
      }
  write_p6(path, vp.px_w, vp.px_h, rgb);
}

int cmd_info(const RunConfig& cfg) {
  PuncturedPolyMap f = make_map(cfg.map);
  OrderData od = order(f);
  LogTransform L = make_log_transform(f);
  std::vector<cplx> cps = critical_points(f);

  std::cout << "map: n=" << f.n << "  deg P=" << f.deg_p() << "  deg Q=" << f.deg_q()
            << "\n";
  std::cout << "  P:";
  for (std::size_t k = 0; k < f.P.size(); ++k)
    std::cout << (k ? "  +  " : "  ") << "(" << c6(f.P[k]) << ") z^" << k;
  std::cout << "\n  Q:";
  for (std::size_t k = 1; k < f.Q.size(); ++k)
    std::cout << (k > 1 ? "  +  " : "  ") << "(" << c6(f.Q[k]) << ") z^-" << k;
  std::cout << "\norder: rho_inf=" << od.rho_inf << "  rho_zero=" << od.rho_zero
            << "  (lower orders coincide)\n";

  std::cout << "critical points (" << cps.size() << "):\n";
  for (cplx z : cps) {
    std::cout << "  z = " << c6(z) << "  |z| = " << g6(std::abs(z))
              << "  |f'/f residual| = " << g6(std::abs(log_derivative(f, z)));
    try {
      std::cout << "  f(z) = " << c6(eval(f, z));
    } catch (const std::range_error&) {
      std::cout << "  f(z) out of double range";
    }
    std::cout << "\n";
  }

  std::cout << "normalization: r_norm=" << g6(L.r_norm)
            << "  singular_log_bound=" << g6(L.singular_log_bound)
            << "  delta_line_im=" << g6(L.delta_line_im)
            << (L.delta_tight ? "  (delta gap tight)" : "") << "\n";

  auto tracts = tract_catalog(L, 0, 0);
  std::cout << "tracts, strip 0 (" << tracts.size() << "):\n";
  for (const TractInfo& t : tracts)
    std::cout << "  " << format_tract(t.id) << " -> " << side_name(t.target)
              << "  center_im=" << g6(t.center_im) << "  width=" << g6(t.band_width)
              << "\n";

  trailer({{"command", "info"},
           {"n", f.n},
           {"rho_inf", od.rho_inf},
           {"rho_zero", od.rho_zero},
           {"critical_points", cps.size()},
           {"r_norm", L.r_norm},
           {"singular_log_bound", L.singular_log_bound},
           {"delta_line_im", L.delta_line_im},
           {"tracts_strip0", tracts.size()}});
  return exit_ok;
}

int cmd_render(const RunConfig& cfg, int threads) {
  Viewport vp = viewport_or_usage(cfg, "render");
  RenderSpec rs = cfg.render.value_or(RenderSpec{});
  LogTransform L = make_log_transform(make_map(cfg.map));
  std::string out = cfg.out.value_or("render.ppm");

  if (rs.style == "phase") {
    write_p6(out, vp.px_w, vp.px_h, render_phase(L, vp));
    std::cout << "phase portrait " << vp.px_w << "x" << vp.px_h << " -> " << out
              << "\n";
    trailer({{"command", "render"},
             {"style", "phase"},
             {"px_w", vp.px_w},
             {"px_h", vp.px_h},
             {"image", out}});
    return exit_ok;
  }

  Raster raster =
      classify_grid(L, vp, rs.max_iter, rs.escape_log_radius, rs.prefix_len, threads);
  write_p6(out, vp.px_w, vp.px_h, render_itinerary(raster, rs.bounded_color));

  std::string dump_path = out + ".txt";
  {
    std::string dump = std::string("# ") + version_string +
                       " raster dump: row col status first_escape_iter prefix "
                       "last_log_modulus\n";
    char line[160];
    for (int row = 0; row < vp.px_h; ++row)
      for (int col = 0; col < vp.px_w; ++col) {
        const PixelClass& px =
            raster.pixels[std::size_t(row) * std::size_t(vp.px_w) + std::size_t(col)];
        std::string prefix = format_prefix(px.itinerary_prefix);
        std::snprintf(line, sizeof line, "%d %d %s %d %s %.17g\n", row, col,
                      status_name(px.status), px.first_escape_iter.value_or(-1),
                      prefix.empty() ? "-" : prefix.c_str(), px.last_log_modulus);
        dump += line;
      }
    write_binary_file(dump_path, dump);
  }

  std::size_t escaped = 0, bounded = 0, undecided = 0;
  for (const PixelClass& px : raster.pixels) {
    if (px.status == PixelStatus::escaped) ++escaped;
    if (px.status == PixelStatus::bounded) ++bounded;
    if (px.status == PixelStatus::undecided) ++undecided;
  }
  std::cout << "render " << vp.px_w << "x" << vp.px_h << ": escaped=" << escaped
            << " bounded=" << bounded << " undecided=" << undecided << " -> " << out
            << "\n";
  auto hist = itinerary_histogram(raster);
  std::vector<std::pair<ItineraryPrefix, std::size_t>> buckets(hist.begin(),
                                                               hist.end());
  std::sort(buckets.begin(), buckets.end(),
            [](const auto& a, const auto& b) { return a.second > b.second; });
  for (std::size_t i = 0; i < buckets.size() && i < 8; ++i)
    std::cout << "  prefix " << format_prefix(buckets[i].first) << ": "
              << buckets[i].second << " px\n";
  if (buckets.size() > 8) std::cout << "  (" << buckets.size() - 8 << " more)\n";

  trailer({{"command", "render"},
           {"style", "itinerary"},
           {"px_w", vp.px_w},
           {"px_h", vp.px_h},
           {"escaped", escaped},
           {"bounded", bounded},
           {"undecided", undecided},
           {"prefix_buckets", buckets.size()},
           {"image", out},
           {"dump", dump_path}});
  return exit_ok;
}

int cmd_trace_ray(const RunConfig& cfg, int threads) {
  if (!cfg.address)
    throw usage_error("trace-ray needs an address; set --address or the config "
                      "\"address\"");
  ExternalAddress addr = parse_address(*cfg.address);
  LogTransform L = make_log_transform(make_map(cfg.map));
  double tol = cfg.tolerance.value_or(1e-9);

  std::vector<double> fallback;
  double t0 = min_trace_parameter(L, addr);
  for (int i = 0; i <= 24; ++i) fallback.push_back(t0 + 0.75 * double(i));
  std::vector<double> grid = t_grid_or(cfg, fallback);

  RayTail tail = trace_ray_tail(L, addr, grid, tol, threads);
  std::string out = cfg.out.value_or("ray.txt");
  std::vector<NamedRay> named{{format_address(addr), tail}};
  write_rays(out, named);

  std::cout << "trace-ray " << named[0].address << ": " << tail.samples.size()
            << " samples, depth_used=" << tail.depth_used
            << (tail.converged ? "" : ", NOT converged") << " -> " << out << "\n";
  if (!tail.samples.empty()) {
    const RaySample& s = tail.samples.front();
    std::cout << "  innermost t=" << g6(s.t) << "  w=" << c6(s.w) << "  z=" << c6(s.z)
              << "\n";
  }
  std::optional<std::string> overlay;
  if (cfg.viewport) {
    Viewport vp = viewport_or_usage(cfg, "trace-ray");
    overlay = out + ".overlay.ppm";
    write_overlay(L, vp, cfg.render.value_or(RenderSpec{}), named, threads, *overlay);
    std::cout << "  overlay -> " << *overlay << "\n";
  }

  nlohmann::ordered_json j{{"command", "trace-ray"},
                           {"address", named[0].address},
                           {"samples", tail.samples.size()},
                           {"depth_used", tail.depth_used},
                           {"converged", tail.converged},
                           {"rays_file", out}};
  if (overlay) j["overlay"] = *overlay;
  trailer(j);
  return tail.converged ? exit_ok : exit_failure;
}

int cmd_periodic(const RunConfig& cfg) {
  if (!cfg.period) throw usage_error("periodic needs --period");
  int period = *cfg.period;
  PuncturedPolyMap f = make_map(cfg.map);
  double tol = cfg.tolerance.value_or(1e-12);

  std::optional<PeriodicOrbit> best;
  double best_dev = std::numeric_limits<double>::infinity();
  if (cfg.on_circle.value_or(false)) {
    // Newton from a fan of unit-circle seeds; keep the orbit that stays
    // closest to the circle and has the exact requested period.
    int n_seeds = std::max(64, 48 * period);
    for (int k = 0; k < n_seeds; ++k) {
      double th = 2.0 * std::numbers::pi * double(k) / double(n_seeds);
      auto orb = find_periodic_orbit(f, period, std::polar(1.0, th), tol);
      if (!orb || orb->period != period) continue;
      double dev = 0.0;
      for (cplx z : orb->points) dev = std::max(dev, std::abs(std::abs(z) - 1.0));
      if (dev < best_dev) {
        best_dev = dev;
        best = orb;
      }
    }
  } else {
    best = find_periodic_orbit(f, period, cfg.seed.value_or(cplx(2.0, 0.0)), tol);
    if (best) {
      best_dev = 0.0;
      for (cplx z : best->points)
        best_dev = std::max(best_dev, std::abs(std::abs(z) - 1.0));
    }
  }

  if (!best) {
    std::cout << "periodic: no orbit of period " << period << " found\n";
    trailer({{"command", "periodic"}, {"found", false}, {"period", period}});
    return exit_failure;
  }

  std::cout << "periodic orbit, exact period " << best->period << ":\n";
  for (std::size_t k = 0; k < best->points.size(); ++k)
    std::cout << "  z_" << k << " = " << c6(best->points[k])
              << "  |z| = " << g6(std::abs(best->points[k])) << "\n";
  std::cout << "multiplier = " << c6(best->multiplier)
            << "  |multiplier| = " << g6(std::abs(best->multiplier)) << "  "
            << stability_name(best->stability) << "  residual=" << g6(best->residual)
            << "\n";
  if (cfg.on_circle.value_or(false))
    std::cout << "max ||z|-1| = " << g6(best_dev) << "\n";

  if (cfg.out) {
    std::string data = std::string("# ") + version_string +
                       " orbit records: k re_z im_z\n";
    char line[120];
    for (std::size_t k = 0; k < best->points.size(); ++k) {
      std::snprintf(line, sizeof line, "%zu %.17g %.17g\n", k,
                    best->points[k].real(), best->points[k].imag());
      data += line;
    }
    write_binary_file(*cfg.out, data);
    std::cout << "orbit -> " << *cfg.out << "\n";
  }

  nlohmann::ordered_json j{
      {"command", "periodic"},
      {"found", true},
      {"period", best->period},
      {"multiplier", {best->multiplier.real(), best->multiplier.imag()}},
      {"abs_multiplier", std::abs(best->multiplier)},
      {"stability", stability_name(best->stability)},
      {"residual", best->residual},
      {"max_circle_dev", best_dev}};
  if (cfg.out) j["out"] = *cfg.out;
  trailer(j);
  return exit_ok;
}

/// Boundary polyline of one tract: the level curve |Re F| = r_norm, traversed
/// along the upper side curve inward, across the cap, and out along the lower
/// side curve. Bisection against the level function keeps every vertex on the
/// curve to near machine precision.
std::vector<cplx> tract_boundary(const LogTransform& L, const TractInfo& t) {
  double sign = t.id.side == Side::inf ? 1.0 : -1.0;
  double hw = 0.5 * t.band_width;
  auto level = [&](double s, double y) {
    cplx w(sign * s, y);
    if (!F_safe(L, w)) return std::numeric_limits<double>::infinity();
    return std::abs(F_eval(L, w).real());
  };
  double s_max =
      std::max(4.0, (std::log(L.r_norm) + 12.0 - std::log(std::abs(t.lead))) /
                            double(t.deg) +
                        4.0);

  // innermost |Re w| on the curve at height y
  auto cap_s = [&](double y) -> std::optional<double> {
    double lo = 0.01;
    if (level(lo, y) >= L.r_norm) return lo;
    double hi = lo;
    bool found = false;
    for (double s = lo + 0.05; s <= s_max; s += 0.05) {
      if (level(s, y) >= L.r_norm) {
        hi = s;
        found = true;
        break;
      }
      lo = s;
    }
    if (!found) return std::nullopt;
    for (int i = 0; i < 60; ++i) {
      double m = 0.5 * (lo + hi);
      (level(m, y) >= L.r_norm ? hi : lo) = m;
    }
    return 0.5 * (lo + hi);
  };
  // boundary height at |Re w| = s, walking from the center toward one edge
  auto edge_y = [&](double s, double dir) {
    double y_in = t.center_im;
    double y_out = t.center_im + dir * hw * 0.9995;
    if (level(s, y_out) >= L.r_norm) return y_out;
    for (int i = 0; i < 60; ++i) {
      double m = 0.5 * (y_in + y_out);
      (level(s, m) >= L.r_norm ? y_in : y_out) = m;
    }
    return 0.5 * (y_in + y_out);
  };

  auto s_center = cap_s(t.center_im);
  if (!s_center) return {};
  double s_far = *s_center + 4.0;

  std::vector<cplx> pts;
  const int nx = 25, ny = 65;
  for (int i = 0; i < nx; ++i) {
    double s = s_far - (s_far - *s_center) * double(i) / double(nx - 1);
    if (level(s, t.center_im) < L.r_norm) continue;
    pts.push_back(cplx(sign * s, edge_y(s, +1.0)));
  }
  for (int i = 0; i < ny; ++i) {
    double y = t.center_im + hw * 0.9995 * (1.0 - 2.0 * double(i) / double(ny - 1));
    if (auto s = cap_s(y)) pts.push_back(cplx(sign * *s, y));
  }
  for (int i = 0; i < nx; ++i) {
    double s = *s_center + (s_far - *s_center) * double(i) / double(nx - 1);
    if (level(s, t.center_im) < L.r_norm) continue;
    pts.push_back(cplx(sign * s, edge_y(s, -1.0)));
  }
  return pts;
}

int cmd_tracts(const RunConfig& cfg, int strip_min, int strip_max) {
  if (strip_min > strip_max) throw usage_error("--strip-min must be <= --strip-max");
  LogTransform L = make_log_transform(make_map(cfg.map));
  auto tracts = tract_catalog(L, strip_min, strip_max);
  std::string out = cfg.out.value_or("tracts.txt");

  std::string data = std::string("# ") + version_string +
                     " tract boundaries: re_w im_w per vertex\n";
  char line[100];
  std::size_t emitted = 0;
  for (const TractInfo& t : tracts) {
    std::vector<cplx> pts = tract_boundary(L, t);
    data += "tract " + format_tract(t.id) + " target " + side_name(t.target) +
            " vertices " + std::to_string(pts.size()) + "\n";
    for (cplx w : pts) {
      std::snprintf(line, sizeof line, "%.17g %.17g\n", w.real(), w.imag());
      data += line;
    }
    std::cout << "tract " << format_tract(t.id) << ": " << pts.size()
              << " boundary vertices\n";
    if (!pts.empty()) ++emitted;
  }
  write_binary_file(out, data);
  std::cout << "boundaries -> " << out << "\n";

  trailer({{"command", "tracts"},
           {"tracts", tracts.size()},
           {"with_boundary", emitted},
           {"out", out}});
  return exit_ok;
}

int cmd_check(const RunConfig& cfg) {
  SampleSpec ss = cfg.samples.value_or(SampleSpec{});
  LogTransform L = make_log_transform(make_map(cfg.map));

  ExpansivityReport er = expansivity_report(L, ss.points, ss.pairs);
  std::cout << "expansivity: points=" << er.point_samples
            << " violations=" << er.point_violations
            << " min|F'|=" << g6(er.min_abs_deriv) << "; pairs=" << er.pair_samples
            << " violations=" << er.pair_violations
            << " min_slack=" << g6(er.min_pair_slack) << "  "
            << (er.pass ? "PASS" : "FAIL") << "\n";

  auto tracts = tract_catalog(L, 0, 0);
  int pair_count = 0, fail_count = 0;
  double worst_K = 0.0, worst_off = 0.0;
  for (const TractInfo& t : tracts)
    for (const TractInfo& tp : tracts) {
      if (tp.id.side != t.target) continue;
      ++pair_count;
      std::cout << "head-start " << format_tract(t.id) << " -> "
                << format_tract(tp.id) << ": ";
      try {
        HeadStartReport hr =
            head_start_check(L, t.id, tp.id, HeadStartProfile(), ss.points);
        bool searched = false;
        if (!hr.pass && hr.minimal_workable) {
          // same seed, same sampled points: the rerun reports the stats of the
          // profile that actually certifies the pair
          hr = head_start_check(L, t.id, tp.id, *hr.minimal_workable, ss.points);
          searched = true;
        }
        if (hr.pass) {
          worst_K = std::max(worst_K, hr.profile.slope_K);
          worst_off = std::max(worst_off, hr.profile.offset);
          std::cout << "pairs=" << hr.pairs_tested
                    << " antecedents=" << hr.antecedent_count
                    << " K=" << hr.profile.slope_K << " offset=" << hr.profile.offset
                    << (searched ? " (grid-searched)" : "") << "  PASS\n";
        } else {
          ++fail_count;
          std::cout << "violations=" << hr.violations
                    << " antecedents=" << hr.antecedent_count
                    << " and no workable profile  FAIL\n";
        }
      } catch (const std::exception& e) {
        ++fail_count;
        std::cout << "FAIL (" << e.what() << ")\n";
      }
    }

  bool pass = er.pass && fail_count == 0;
  std::cout << "check: " << (pass ? "PASS" : "FAIL") << "\n";
  trailer({{"command", "check"},
           {"expansivity_pass", er.pass},
           {"min_abs_deriv", er.min_abs_deriv},
           {"point_violations", er.point_violations},
           {"pair_violations", er.pair_violations},
           {"head_start_pairs", pair_count},
           {"head_start_failures", fail_count},
           {"head_start_K", worst_K},
           {"head_start_offset", worst_off},
           {"pass", pass}});
  return pass ? exit_ok : exit_failure;
}

int cmd_bouquet(const RunConfig& cfg, int threads) {
  LogTransform L = make_log_transform(make_map(cfg.map));
  EssentialItinerary e = parse_itinerary(cfg.itinerary.value_or("[]([inf])"));

  std::vector<TractId> symbols;
  if (cfg.symbols) {
    for (const std::string& s : *cfg.symbols) symbols.push_back(parse_tract(s));
  } else {
    for (const TractInfo& t : tract_catalog(L, 0, 0)) symbols.push_back(t.id);
  }
  int max_period = cfg.max_period.value_or(3);
  double tol = cfg.tolerance.value_or(1e-9);

  // Bouquets trace against the singular-annulus floor, so the default grid
  // sits as low as that floor allows: sibling rays separate best below
  // r_norm, but the first tower level must still clear the floor.
  double floor = std::max(L.singular_log_bound * 1.02, 1e-6);
  Side s0 = e.period.empty() ? Side::inf : e.period.front();
  double t_min = 0.02;
  while (t_min < 50.0 && detail::level_growth(L, s0, t_min) <= floor * 1.1)
    t_min += 0.02;
  double span = std::max(0.3, 0.12 * L.r_norm);
  std::vector<double> fallback;
  for (int i = 0; i < 12; ++i)
    fallback.push_back(t_min + span * double(i) / 11.0);
  std::vector<double> grid = t_grid_or(cfg, fallback);

  BouquetResult br = sample_bouquet(L, e, symbols, max_period, grid, tol, threads);

  std::string out = cfg.out.value_or("bouquet.txt");
  std::vector<NamedRay> named;
  for (std::size_t i = 0; i < br.rays.size(); ++i)
    named.push_back({format_address(br.addresses[i]), br.rays[i]});
  write_rays(out, named);

  std::cout << "bouquet: " << br.rays.size() << " rays traced, "
            << br.failures.size() << " failures -> " << out << "\n";
  for (const NamedRay& r : named)
    std::cout << "  " << r.address << ": " << r.tail.samples.size() << " samples\n";
  for (const auto& [addr, why] : br.failures)
    std::cout << "  FAILED " << format_address(addr) << ": " << why << "\n";

  std::optional<std::string> overlay;
  if (cfg.viewport && !named.empty()) {
    Viewport vp = viewport_or_usage(cfg, "bouquet");
    overlay = out + ".overlay.ppm";
    write_overlay(L, vp, cfg.render.value_or(RenderSpec{}), named, threads, *overlay);
    std::cout << "  overlay -> " << *overlay << "\n";
  }

  bool ok = !br.rays.empty() && br.failures.empty();
  nlohmann::ordered_json j{{"command", "bouquet"},
                           {"rays", br.rays.size()},
                           {"failures", br.failures.size()},
                           {"out", out},
                           {"pass", ok}};
  if (overlay) j["overlay"] = *overlay;
  trailer(j);
  return ok ? exit_ok : exit_failure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string(version_string) +
               ": dynamics of finite-order maps of the punctured plane"};
  app.require_subcommand(1);
  Flags fl;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", fl.config_path, "JSON config file");
    sub->add_option("--out", fl.out, "output path");
    sub->add_option("--threads", fl.threads,
                    "worker threads (0 = hardware); CSTARDYN_THREADS sets the "
                    "fallback");
    sub->add_option("--preset", fl.preset, "map preset: arnold or exp_affine");
    sub->add_option("--params", fl.params, "preset parameters");
    sub->add_option("--map-json", fl.map_json,
                    "inline JSON map object, e.g. "
                    "'{\"n\":0,\"P\":[[0,0],[1,0]],\"Q\":[[1,0]]}'");
    sub->add_option("--tol", fl.tol, "numerical tolerance");
  };
  auto add_viewport = [&](CLI::App* sub) {
    sub->add_option("--center", fl.center, "viewport center: re im")->expected(2);
    sub->add_option("--half-width", fl.half_width, "viewport half width");
    sub->add_option("--px-w", fl.px_w, "pixel columns");
    sub->add_option("--px-h", fl.px_h, "pixel rows (0 = square pixels)");
  };
  auto add_render = [&](CLI::App* sub) {
    sub->add_option("--style", fl.style, "itinerary or phase");
    sub->add_option("--max-iter", fl.max_iter, "iteration budget per pixel");
    sub->add_option("--escape-log-radius", fl.escape_log_radius,
                    "escape threshold for |log|z|| (-1 = default)");
    sub->add_option("--prefix-len", fl.prefix_len, "itinerary prefix length (1..32)");
  };
  auto add_t_grid = [&](CLI::App* sub) {
    sub->add_option("--t-start", fl.t_start, "first potential parameter");
    sub->add_option("--t-stop", fl.t_stop, "last potential parameter");
    sub->add_option("--t-count", fl.t_count, "grid size");
  };

  CLI::App* c_info =
      app.add_subcommand("info", "map invariants, critical data, tract catalog");
  add_common(c_info);

  CLI::App* c_render =
      app.add_subcommand("render", "classify a pixel grid, write image and dump");
  add_common(c_render);
  add_viewport(c_render);
  add_render(c_render);

  CLI::App* c_trace = app.add_subcommand("trace-ray", "trace one dynamic ray tail");
  add_common(c_trace);
  add_viewport(c_trace);
  add_render(c_trace);
  add_t_grid(c_trace);
  c_trace->add_option("--address", fl.address, "external address text");

  CLI::App* c_periodic =
      app.add_subcommand("periodic", "Newton search for a periodic orbit");
  add_common(c_periodic);
  c_periodic->add_option("--period", fl.period, "orbit period");
  c_periodic->add_option("--seed", fl.seed, "Newton seed: re im")->expected(2);
  c_periodic->add_flag("--on-circle", fl.on_circle,
                       "scan unit-circle seeds, keep the orbit nearest the circle");

  CLI::App* c_tracts =
      app.add_subcommand("tracts", "boundary polylines of the normalized tracts");
  add_common(c_tracts);
  c_tracts->add_option("--strip-min", fl.strip_min, "lowest strip index");
  c_tracts->add_option("--strip-max", fl.strip_max, "highest strip index");

  CLI::App* c_check = app.add_subcommand(
      "check", "expansivity and head-start property report with JSON trailer");
  add_common(c_check);
  c_check->add_option("--points", fl.points, "tract point samples");
  c_check->add_option("--pairs", fl.pairs, "same-tract pair samples");

  CLI::App* c_bouquet = app.add_subcommand(
      "bouquet", "trace every admissible periodic ray over a symbol set");
  add_common(c_bouquet);
  add_viewport(c_bouquet);
  add_render(c_bouquet);
  add_t_grid(c_bouquet);
  c_bouquet->add_option("--itinerary", fl.itinerary, "essential itinerary text");
  c_bouquet->add_option("--symbols", fl.symbols, "tract symbols, e.g. \"(inf,0,0)\"");
  c_bouquet->add_option("--max-period", fl.max_period, "primitive period bound");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_usage;
  }

  try {
    RunConfig cfg = build_config(fl);
    int threads = resolve_thread_count(cfg);
    if (*c_info) return cmd_info(cfg);
    if (*c_render) return cmd_render(cfg, threads);
    if (*c_trace) return cmd_trace_ray(cfg, threads);
    if (*c_periodic) return cmd_periodic(cfg);
    if (*c_tracts) return cmd_tracts(cfg, fl.strip_min, fl.strip_max);
    if (*c_check) return cmd_check(cfg);
    if (*c_bouquet) return cmd_bouquet(cfg, threads);
    throw usage_error("no command given");
  } catch (const usage_error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return exit_usage;
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return exit_usage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return exit_usage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_failure;
  }
}
