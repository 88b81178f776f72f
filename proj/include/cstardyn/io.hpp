#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cstardyn/escape.hpp"
#include "cstardyn/map.hpp"
#include "cstardyn/rays.hpp"
#include "cstardyn/symbolic.hpp"
#include "cstardyn/version.hpp"

/// Config parsing, map presets, palettes, and the bit-exact artifact formats
/// shared by the command-line tools.
///
/// Config files are JSON. Schema (top-level keys, all optional except "map";
/// unknown keys are rejected at every level):
///
///   "map"       {"preset": "arnold"|"exp_affine", "params": [a, b]}, or
///               explicit {"n": int, "P": [[re,im], ...], "Q": [[re,im], ...]}
///               with P listed from degree 0 and Q from degree 1 (the constant
///               term of Q is identically zero and is not written).
///               arnold(a, b):     f(z) = z exp(2 pi i a) exp(pi b (z - 1/z))
///               exp_affine(a, b): f(z) = exp(a z + b / z)
///   "viewport"  {"center": [re,im], "half_width": > 0, "px_w": >= 1,
///                "px_h": >= 0}  (px_h = 0 derives square pixels from px_w)
///   "render"    {"max_iter": >= 1, "escape_log_radius": > 0 or -1 for the
///                default, "prefix_len": 1..32, "style": "itinerary"|"phase",
///                "bounded_color": [r, g, b]}
///   "address"   external address text, e.g. "[]([(inf,0,0)])"
///   "itinerary" essential itinerary text, e.g. "[]([inf])"
///   "symbols"   list of tract symbols, e.g. ["(inf,0,0)", "(inf,1,0)"]
///   "t_grid"    {"start": > 0, "stop": >= start, "count": >= 1}
///   "tolerance" > 0
///   "samples"   {"points": >= 1, "pairs": >= 1}
///   "period"    >= 1        "max_period" >= 1       "on_circle" bool
///   "seed"      [re, im]
///   "out"       output path  "threads" >= 0 (0 = hardware default)

namespace cstar {

/// Config syntax or schema problem. line/column are 1-based positions in the
/// original text and 0 for semantic errors, which carry the field path instead.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line_ = 0, int column_ = 0,
              std::string field_ = {})
      : std::runtime_error(compose(what, line_, column_, field_)),
        line(line_),
        column(column_),
        field(std::move(field_)) {}

  int line = 0;
  int column = 0;
  std::string field;

 private:
  static std::string compose(const std::string& what, int line, int column,
                             const std::string& field) {
    std::string msg = "config error";
    if (line > 0) msg += " at line " + std::to_string(line) + ", column " +
                         std::to_string(column);
    if (!field.empty()) msg += " in \"" + field + "\"";
    return msg + ": " + what;
  }
};

/// A map description as written in config files: a named preset with real
/// parameters, or explicit coefficients. Presets expand deterministically.
struct MapSpec {
  std::string preset;          // empty for explicit specs
  std::vector<double> params;  // preset parameters

  int n = 0;            // explicit form below
  std::vector<cplx> P;  // ascending from degree 0
  std::vector<cplx> Q;  // ascending from degree 1; degree 0 is fixed at zero

  bool is_preset() const { return !preset.empty(); }
  friend bool operator==(const MapSpec&, const MapSpec&) = default;
};

/// Expands a preset into the equivalent explicit MapSpec; explicit specs pass
/// through unchanged. The arnold parameters are angles in full turns, so the
/// rotation number parameter a enters as 2 pi a.
inline MapSpec expand_preset(const MapSpec& spec) {
  if (!spec.is_preset()) return spec;
  if (spec.preset == "arnold") {
    if (spec.params.size() != 2)
      throw ConfigError("preset arnold takes params [a, b]", 0, 0, "map.params");
    double alpha = 2.0 * std::numbers::pi * spec.params[0];
    double beta = 2.0 * std::numbers::pi * spec.params[1];
    MapSpec out;
    out.n = 1;
    out.P = {cplx(0.0, alpha), cplx(beta / 2.0, 0.0)};
    out.Q = {cplx(-beta / 2.0, 0.0)};
    return out;
  }
  if (spec.preset == "exp_affine") {
    if (spec.params.size() != 2)
      throw ConfigError("preset exp_affine takes params [a, b]", 0, 0,
                        "map.params");
    MapSpec out;
    out.n = 0;
    out.P = {cplx(0.0), cplx(spec.params[0], 0.0)};
    out.Q = {cplx(spec.params[1], 0.0)};
    return out;
  }
  throw ConfigError("unknown preset \"" + spec.preset + "\"", 0, 0, "map.preset");
}

/// Builds the validated map. Invariant violations (degree, leading
/// coefficient) surface as ConfigError on the "map" field.
inline PuncturedPolyMap make_map(const MapSpec& spec) {
  MapSpec e = expand_preset(spec);
  std::vector<cplx> q_full;
  q_full.reserve(e.Q.size() + 1);
  q_full.push_back(cplx(0.0));
  q_full.insert(q_full.end(), e.Q.begin(), e.Q.end());
  try {
    return PuncturedPolyMap(e.n, e.P, q_full);
  } catch (const std::invalid_argument& err) {
    throw ConfigError(err.what(), 0, 0, "map");
  }
}

struct ViewportSpec {
  cplx center;
  double half_width = 0.0;
  int px_w = 0;
  int px_h = 0;  // 0 derives square pixels from px_w

  friend bool operator==(const ViewportSpec&, const ViewportSpec&) = default;
};

inline Viewport make_viewport(const ViewportSpec& vs) {
  int ph = vs.px_h > 0 ? vs.px_h : vs.px_w;
  return square_viewport(vs.center, vs.half_width, vs.px_w, ph);
}

struct RenderSpec {
  int max_iter = 256;
  double escape_log_radius = -1.0;  // -1 selects default_escape_log_radius
  int prefix_len = 4;
  std::string style = "itinerary";  // or "phase"
  std::array<int, 3> bounded_color{255, 165, 0};

  friend bool operator==(const RenderSpec&, const RenderSpec&) = default;
};

struct TGridSpec {
  double start = 0.0;
  double stop = 0.0;
  int count = 0;

  friend bool operator==(const TGridSpec&, const TGridSpec&) = default;
};

inline std::vector<double> make_t_grid(const TGridSpec& g) {
  std::vector<double> out;
  out.reserve(std::size_t(g.count));
  for (int i = 0; i < g.count; ++i)
    out.push_back(g.count == 1 ? g.start
                               : g.start + (g.stop - g.start) * double(i) /
                                               double(g.count - 1));
  return out;
}

struct SampleSpec {
  int points = 10000;
  int pairs = 1000;

  friend bool operator==(const SampleSpec&, const SampleSpec&) = default;
};

/// One parsed config file. Every command reads "map" plus the subset of
/// fields it understands; commands reject configs missing their inputs at run
/// time, not at parse time, so one file can drive several commands.
struct RunConfig {
  MapSpec map;
  std::optional<ViewportSpec> viewport;
  std::optional<RenderSpec> render;
  std::optional<std::string> address;
  std::optional<std::string> itinerary;
  std::optional<std::vector<std::string>> symbols;
  std::optional<TGridSpec> t_grid;
  std::optional<double> tolerance;
  std::optional<SampleSpec> samples;
  std::optional<int> period;
  std::optional<int> max_period;
  std::optional<bool> on_circle;
  std::optional<cplx> seed;
  std::optional<std::string> out;
  std::optional<int> threads;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

namespace detail {

inline std::pair<int, int> line_col(const std::string& text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

inline void check_keys(const nlohmann::json& obj, const std::string& where,
                       std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (item.key() == k) known = true;
    if (!known)
      throw ConfigError("unknown key \"" + item.key() + "\"", 0, 0,
                        where.empty() ? item.key() : where + "." + item.key());
  }
}

inline const nlohmann::json& object_field(const nlohmann::json& j,
                                          const std::string& field) {
  if (!j.is_object()) throw ConfigError("expected an object", 0, 0, field);
  return j;
}

inline double num_field(const nlohmann::json& j, const std::string& field) {
  if (!j.is_number()) throw ConfigError("expected a number", 0, 0, field);
  return j.get<double>();
}

inline int int_field(const nlohmann::json& j, const std::string& field) {
  if (!j.is_number_integer()) throw ConfigError("expected an integer", 0, 0, field);
  return j.get<int>();
}

inline bool bool_field(const nlohmann::json& j, const std::string& field) {
  if (!j.is_boolean()) throw ConfigError("expected a boolean", 0, 0, field);
  return j.get<bool>();
}

inline std::string string_field(const nlohmann::json& j, const std::string& field) {
  if (!j.is_string()) throw ConfigError("expected a string", 0, 0, field);
  return j.get<std::string>();
}

inline cplx pair_field(const nlohmann::json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ConfigError("expected [re, im]", 0, 0, field);
  return {j[0].get<double>(), j[1].get<double>()};
}

inline std::vector<cplx> pair_list_field(const nlohmann::json& j,
                                         const std::string& field) {
  if (!j.is_array()) throw ConfigError("expected a list of [re, im] pairs", 0, 0, field);
  std::vector<cplx> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(pair_field(j[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

inline MapSpec parse_map_spec(const nlohmann::json& j) {
  object_field(j, "map");
  MapSpec spec;
  if (j.contains("preset")) {
    check_keys(j, "map", {"preset", "params"});
    spec.preset = string_field(j["preset"], "map.preset");
    if (j.contains("params")) {
      if (!j["params"].is_array())
        throw ConfigError("expected a list of numbers", 0, 0, "map.params");
      for (std::size_t i = 0; i < j["params"].size(); ++i)
        spec.params.push_back(num_field(j["params"][i],
                                        "map.params[" + std::to_string(i) + "]"));
    }
  } else {
    check_keys(j, "map", {"n", "P", "Q"});
    if (!j.contains("n") || !j.contains("P") || !j.contains("Q"))
      throw ConfigError("explicit map needs \"n\", \"P\" and \"Q\"", 0, 0, "map");
    spec.n = int_field(j["n"], "map.n");
    spec.P = pair_list_field(j["P"], "map.P");
    spec.Q = pair_list_field(j["Q"], "map.Q");
  }
  make_map(spec);  // validates; throws ConfigError on bad specs
  return spec;
}

}  // namespace detail

/// Parses and validates a config. Syntax errors carry line/column, schema and
/// invariant violations carry the offending field path. Unknown keys are
/// rejected so typos cannot silently fall back to defaults.
inline RunConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    auto [line, col] = detail::line_col(text, e.byte);
    throw ConfigError(e.what(), line, col);
  }
  if (!j.is_object()) throw ConfigError("top level must be an object", 1, 1);
  detail::check_keys(j, "",
                     {"map", "viewport", "render", "address", "itinerary",
                      "symbols", "t_grid", "tolerance", "samples", "period",
                      "max_period", "on_circle", "seed", "out", "threads"});
  if (!j.contains("map")) throw ConfigError("missing required key", 0, 0, "map");

  RunConfig cfg;
  cfg.map = detail::parse_map_spec(j["map"]);

  if (j.contains("viewport")) {
    const auto& v = detail::object_field(j["viewport"], "viewport");
    detail::check_keys(v, "viewport", {"center", "half_width", "px_w", "px_h"});
    ViewportSpec vs;
    if (!v.contains("center") || !v.contains("half_width") || !v.contains("px_w"))
      throw ConfigError("viewport needs \"center\", \"half_width\" and \"px_w\"",
                        0, 0, "viewport");
    vs.center = detail::pair_field(v["center"], "viewport.center");
    vs.half_width = detail::num_field(v["half_width"], "viewport.half_width");
    if (!(vs.half_width > 0.0))
      throw ConfigError("must be > 0", 0, 0, "viewport.half_width");
    vs.px_w = detail::int_field(v["px_w"], "viewport.px_w");
    if (vs.px_w < 1) throw ConfigError("must be >= 1", 0, 0, "viewport.px_w");
    if (v.contains("px_h")) {
      vs.px_h = detail::int_field(v["px_h"], "viewport.px_h");
      if (vs.px_h < 0) throw ConfigError("must be >= 0", 0, 0, "viewport.px_h");
    }
    cfg.viewport = vs;
  }

  if (j.contains("render")) {
    const auto& r = detail::object_field(j["render"], "render");
    detail::check_keys(r, "render",
                       {"max_iter", "escape_log_radius", "prefix_len", "style",
                        "bounded_color"});
    RenderSpec rs;
    if (r.contains("max_iter")) {
      rs.max_iter = detail::int_field(r["max_iter"], "render.max_iter");
      if (rs.max_iter < 1) throw ConfigError("must be >= 1", 0, 0, "render.max_iter");
    }
    if (r.contains("escape_log_radius")) {
      rs.escape_log_radius =
          detail::num_field(r["escape_log_radius"], "render.escape_log_radius");
      if (!(rs.escape_log_radius > 0.0) && rs.escape_log_radius != -1.0)
        throw ConfigError("must be > 0, or -1 for the default", 0, 0,
                          "render.escape_log_radius");
    }
    if (r.contains("prefix_len")) {
      rs.prefix_len = detail::int_field(r["prefix_len"], "render.prefix_len");
      if (rs.prefix_len < 1 || rs.prefix_len > 32)
        throw ConfigError("must be in 1..32", 0, 0, "render.prefix_len");
    }
    if (r.contains("style")) {
      rs.style = detail::string_field(r["style"], "render.style");
      if (rs.style != "itinerary" && rs.style != "phase")
        throw ConfigError("must be \"itinerary\" or \"phase\"", 0, 0, "render.style");
    }
    if (r.contains("bounded_color")) {
      const auto& c = r["bounded_color"];
      if (!c.is_array() || c.size() != 3)
        throw ConfigError("expected [r, g, b]", 0, 0, "render.bounded_color");
      for (int i = 0; i < 3; ++i) {
        rs.bounded_color[std::size_t(i)] =
            detail::int_field(c[std::size_t(i)], "render.bounded_color");
        if (rs.bounded_color[std::size_t(i)] < 0 || rs.bounded_color[std::size_t(i)] > 255)
          throw ConfigError("components must be in 0..255", 0, 0,
                            "render.bounded_color");
      }
    }
    cfg.render = rs;
  }

  if (j.contains("address")) {
    cfg.address = detail::string_field(j["address"], "address");
    try {
      parse_address(*cfg.address);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what(), 0, 0, "address");
    }
  }

  if (j.contains("itinerary")) {
    cfg.itinerary = detail::string_field(j["itinerary"], "itinerary");
    try {
      parse_itinerary(*cfg.itinerary);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what(), 0, 0, "itinerary");
    }
  }

  if (j.contains("symbols")) {
    if (!j["symbols"].is_array())
      throw ConfigError("expected a list of tract symbols", 0, 0, "symbols");
    std::vector<std::string> syms;
    for (std::size_t i = 0; i < j["symbols"].size(); ++i) {
      std::string field = "symbols[" + std::to_string(i) + "]";
      syms.push_back(detail::string_field(j["symbols"][i], field));
      try {
        parse_tract(syms.back());
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what(), 0, 0, field);
      }
    }
    cfg.symbols = std::move(syms);
  }

  if (j.contains("t_grid")) {
    const auto& g = detail::object_field(j["t_grid"], "t_grid");
    detail::check_keys(g, "t_grid", {"start", "stop", "count"});
    if (!g.contains("start") || !g.contains("stop") || !g.contains("count"))
      throw ConfigError("t_grid needs \"start\", \"stop\" and \"count\"", 0, 0,
                        "t_grid");
    TGridSpec ts;
    ts.start = detail::num_field(g["start"], "t_grid.start");
    ts.stop = detail::num_field(g["stop"], "t_grid.stop");
    ts.count = detail::int_field(g["count"], "t_grid.count");
    if (!(ts.start > 0.0)) throw ConfigError("must be > 0", 0, 0, "t_grid.start");
    if (!(ts.stop >= ts.start))
      throw ConfigError("must be >= start", 0, 0, "t_grid.stop");
    if (ts.count < 1) throw ConfigError("must be >= 1", 0, 0, "t_grid.count");
    if (ts.count > 1 && !(ts.stop > ts.start))
      throw ConfigError("must be > start when count > 1", 0, 0, "t_grid.stop");
    cfg.t_grid = ts;
  }

  if (j.contains("tolerance")) {
    cfg.tolerance = detail::num_field(j["tolerance"], "tolerance");
    if (!(*cfg.tolerance > 0.0)) throw ConfigError("must be > 0", 0, 0, "tolerance");
  }

  if (j.contains("samples")) {
    const auto& s = detail::object_field(j["samples"], "samples");
    detail::check_keys(s, "samples", {"points", "pairs"});
    SampleSpec ss;
    if (s.contains("points")) {
      ss.points = detail::int_field(s["points"], "samples.points");
      if (ss.points < 1) throw ConfigError("must be >= 1", 0, 0, "samples.points");
    }
    if (s.contains("pairs")) {
      ss.pairs = detail::int_field(s["pairs"], "samples.pairs");
      if (ss.pairs < 1) throw ConfigError("must be >= 1", 0, 0, "samples.pairs");
    }
    cfg.samples = ss;
  }

  if (j.contains("period")) {
    cfg.period = detail::int_field(j["period"], "period");
    if (*cfg.period < 1) throw ConfigError("must be >= 1", 0, 0, "period");
  }
  if (j.contains("max_period")) {
    cfg.max_period = detail::int_field(j["max_period"], "max_period");
    if (*cfg.max_period < 1) throw ConfigError("must be >= 1", 0, 0, "max_period");
  }
  if (j.contains("on_circle"))
    cfg.on_circle = detail::bool_field(j["on_circle"], "on_circle");
  if (j.contains("seed")) cfg.seed = detail::pair_field(j["seed"], "seed");
  if (j.contains("out")) cfg.out = detail::string_field(j["out"], "out");
  if (j.contains("threads")) {
    cfg.threads = detail::int_field(j["threads"], "threads");
    if (*cfg.threads < 0) throw ConfigError("must be >= 0", 0, 0, "threads");
  }
  return cfg;
}

/// Canonical serialization; parse_config(serialize_config(cfg)) == cfg for
/// every valid config. Doubles use the shortest round-tripping decimal form.
inline std::string serialize_config(const RunConfig& cfg) {
  using json = nlohmann::ordered_json;
  auto pair = [](cplx z) { return json::array({z.real(), z.imag()}); };
  json j;

  json m;
  if (cfg.map.is_preset()) {
    m["preset"] = cfg.map.preset;
    m["params"] = cfg.map.params;
  } else {
    m["n"] = cfg.map.n;
    json p = json::array(), q = json::array();
    for (cplx c : cfg.map.P) p.push_back(pair(c));
    for (cplx c : cfg.map.Q) q.push_back(pair(c));
    m["P"] = p;
    m["Q"] = q;
  }
  j["map"] = m;

  if (cfg.viewport) {
    j["viewport"] = {{"center", pair(cfg.viewport->center)},
                     {"half_width", cfg.viewport->half_width},
                     {"px_w", cfg.viewport->px_w},
                     {"px_h", cfg.viewport->px_h}};
  }
  if (cfg.render) {
    j["render"] = {{"max_iter", cfg.render->max_iter},
                   {"escape_log_radius", cfg.render->escape_log_radius},
                   {"prefix_len", cfg.render->prefix_len},
                   {"style", cfg.render->style},
                   {"bounded_color", cfg.render->bounded_color}};
  }
  if (cfg.address) j["address"] = *cfg.address;
  if (cfg.itinerary) j["itinerary"] = *cfg.itinerary;
  if (cfg.symbols) j["symbols"] = *cfg.symbols;
  if (cfg.t_grid)
    j["t_grid"] = {{"start", cfg.t_grid->start},
                   {"stop", cfg.t_grid->stop},
                   {"count", cfg.t_grid->count}};
  if (cfg.tolerance) j["tolerance"] = *cfg.tolerance;
  if (cfg.samples)
    j["samples"] = {{"points", cfg.samples->points}, {"pairs", cfg.samples->pairs}};
  if (cfg.period) j["period"] = *cfg.period;
  if (cfg.max_period) j["max_period"] = *cfg.max_period;
  if (cfg.on_circle) j["on_circle"] = *cfg.on_circle;
  if (cfg.seed) j["seed"] = pair(*cfg.seed);
  if (cfg.out) j["out"] = *cfg.out;
  if (cfg.threads) j["threads"] = *cfg.threads;
  return j.dump(2) + "\n";
}

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

namespace detail {

inline std::uint8_t channel(double x) {
  return std::uint8_t(std::lround(std::clamp(x, 0.0, 1.0) * 255.0));
}

}  // namespace detail

/// h is taken mod 1; s and v clamp to [0, 1].
inline Rgb hsv_to_rgb(double h, double s, double v) {
  h -= std::floor(h);
  s = std::clamp(s, 0.0, 1.0);
  v = std::clamp(v, 0.0, 1.0);
  int i = std::min(int(h * 6.0), 5);
  double f = h * 6.0 - double(i);
  double p = v * (1.0 - s);
  double q = v * (1.0 - f * s);
  double t = v * (1.0 - (1.0 - f) * s);
  double r = 0, g = 0, b = 0;
  switch (i) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
  return {detail::channel(r), detail::channel(g), detail::channel(b)};
}

/// Escape-class palette: the itinerary prefix picks the hue (each prefix
/// bucket gets its own), the first escape iteration sets the luminance (later
/// escape is darker). Bounded pixels use the solid color, undecided pixels a
/// dark gray that matches neither.
inline Rgb itinerary_color(const PixelClass& px,
                           std::array<int, 3> bounded_color = {255, 165, 0}) {
  switch (px.status) {
    case PixelStatus::bounded:
      return {std::uint8_t(bounded_color[0]), std::uint8_t(bounded_color[1]),
              std::uint8_t(bounded_color[2])};
    case PixelStatus::undecided:
      return {32, 32, 32};
    case PixelStatus::escaped:
      break;
  }
  int len = std::max(px.itinerary_prefix.len, 1);
  double hue = (double(px.itinerary_prefix.bits) + 0.5) / std::pow(2.0, len);
  int iter = px.first_escape_iter.value_or(0);
  double v = 0.4 + 0.6 * std::pow(0.97, double(iter));
  return hsv_to_rgb(hue, 0.85, v);
}

inline std::vector<std::uint8_t> render_itinerary(
    const Raster& raster, std::array<int, 3> bounded_color = {255, 165, 0}) {
  std::vector<std::uint8_t> rgb;
  rgb.reserve(raster.pixels.size() * 3);
  for (const PixelClass& px : raster.pixels) {
    Rgb c = itinerary_color(px, bounded_color);
    rgb.push_back(c.r);
    rgb.push_back(c.g);
    rgb.push_back(c.b);
  }
  return rgb;
}

/// Phase-portrait palette for the map itself: hue follows arg f(z), luminosity
/// follows |f(z)| through log |f(z)| = Re F(log z). The puncture is black,
/// values past double range are white.
inline Rgb phase_color(const LogTransform& L, cplx z) {
  if (z == cplx(0.0) || !std::isfinite(z.real()) || !std::isfinite(z.imag()))
    return {0, 0, 0};
  cplx w = std::log(z);
  if (!F_safe(L, w)) return {255, 255, 255};
  cplx F = F_eval(L, w);
  double hue = F.imag() / (2.0 * std::numbers::pi);
  double v = 0.2 + 0.75 / (1.0 + std::exp(-F.real() / 4.0));
  return hsv_to_rgb(hue, 0.9, v);
}

inline std::vector<std::uint8_t> render_phase(const LogTransform& L,
                                              const Viewport& vp) {
  std::vector<std::uint8_t> rgb;
  rgb.reserve(std::size_t(vp.px_w) * std::size_t(vp.px_h) * 3);
  for (int row = 0; row < vp.px_h; ++row)
    for (int col = 0; col < vp.px_w; ++col) {
      Rgb c = phase_color(L, vp.at(row, col));
      rgb.push_back(c.r);
      rgb.push_back(c.g);
      rgb.push_back(c.b);
    }
  return rgb;
}

/// Binary portable pixmap bytes: "P6\n<w> <h>\n255\n" then RGB rows top to
/// bottom. Bit-exact for identical inputs.
inline std::string encode_p6(int width, int height,
                             const std::vector<std::uint8_t>& rgb) {
  if (width < 1 || height < 1)
    throw std::invalid_argument("encode_p6: dimensions must be positive");
  if (rgb.size() != std::size_t(width) * std::size_t(height) * 3)
    throw std::invalid_argument("encode_p6: need 3 bytes per pixel");
  std::string out = "P6\n" + std::to_string(width) + " " +
                    std::to_string(height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(rgb.data()), rgb.size());
  return out;
}

inline void write_binary_file(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open \"" + path + "\" for writing");
  f.write(bytes.data(), std::streamsize(bytes.size()));
  f.flush();
  if (!f) throw std::runtime_error("write failed for \"" + path + "\"");
}

inline void write_p6(const std::string& path, int width, int height,
                     const std::vector<std::uint8_t>& rgb) {
  write_binary_file(path, encode_p6(width, height, rgb));
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open \"" + path + "\" for reading");
  std::ostringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

/// A traced ray tail together with its address in wire format.
struct NamedRay {
  std::string address;
  RayTail tail;
};

namespace detail {

inline std::string real17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace detail

/// Line-oriented ray records. First line is a header carrying the version
/// string; each record line is "address t re_w im_w re_z im_z" with decimals
/// at 17 significant digits, one line per converged sample. An empty ray list
/// produces the header alone.
inline std::string encode_rays(const std::vector<NamedRay>& rays) {
  std::string out = std::string("# ") + version_string +
                    " ray records: address t re_w im_w re_z im_z\n";
  for (const NamedRay& r : rays)
    for (const RaySample& s : r.tail.samples) {
      out += r.address;
      out += ' ';
      out += detail::real17(s.t);
      out += ' ';
      out += detail::real17(s.w.real());
      out += ' ';
      out += detail::real17(s.w.imag());
      out += ' ';
      out += detail::real17(s.z.real());
      out += ' ';
      out += detail::real17(s.z.imag());
      out += '\n';
    }
  return out;
}

inline void write_rays(const std::string& path, const std::vector<NamedRay>& rays) {
  write_binary_file(path, encode_rays(rays));
}

}  // namespace cstar
