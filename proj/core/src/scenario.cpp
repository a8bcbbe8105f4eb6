#include "dinigrad/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace dinigrad {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) throw ConfigError("unknown key '" + where + (where.empty() ? "" : ".") + it.key() + "'");
  }
}

std::string path_of(const std::string& where, const std::string& key) { return where.empty() ? key : where + "." + key; }

template <class T>
void read(const json& obj, const std::string& where, const std::string& key, T& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  try {
    if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw ConfigError("");
      out = v.get<double>();
      if (!std::isfinite(out)) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, int>) {
      if (!v.is_number_integer()) throw ConfigError("");
      out = v.get<int>();
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) throw ConfigError("");
      out = v.get<std::uint64_t>();
    } else {
      if (!v.is_string()) throw ConfigError("");
      out = v.get<std::string>();
    }
  } catch (const ConfigError&) {
    throw ConfigError("key '" + path_of(where, key) + "' has the wrong type");
  } catch (const json::exception&) {
    throw ConfigError("key '" + path_of(where, key) + "' has the wrong type");
  }
}

void require(bool ok, const std::string& key, const std::string& range) {
  if (!ok) throw ConfigError("key '" + key + "' out of range: expected " + range);
}

void validate(const ScenarioConfig& c) {
  require(c.dimension == 2 || c.dimension == 3, "dimension", "2 or 3");
  const FieldConfig& f = c.field;
  require(f.family == "identity" || f.family == "gilbarg-serrin", "field.family", "identity or gilbarg-serrin");
  require(f.margin > 0.0 && f.margin < 1.0, "field.margin", "(0, 1)");
  require(f.amplitude > -1.0 + f.margin && f.amplitude < 1.0, "field.amplitude", "(-1 + margin, 1)");
  require(f.exponent > 0.0 && f.exponent <= 4.0, "field.exponent", "(0, 4]");
  require(f.delta > 0.0 && f.delta < 1.0, "field.delta", "(0, 1)");
  const PipelineOptions& p = c.pipeline;
  require(p.harmonic_degree >= 1 && p.harmonic_degree <= 16, "harmonic_degree", "1..16");
  require(p.per_octave >= 4 && p.per_octave <= 256, "grid.per_octave", "4..256");
  require(p.hi_octave >= 2 && p.hi_octave <= 8, "grid.hi_octave", "2..8");
  require(p.lo_octave == 0 || (p.lo_octave <= -(c.j_max + 2) && p.lo_octave >= -200), "grid.lo_octave",
          "0 (automatic) or -200..-(j_max + 2)");
  require(p.block_tol > 0.0 && p.block_tol < 1e-3, "solver.block_tol", "(0, 1e-3)");
  require(p.block_max_iter >= 1 && p.block_max_iter <= 10000, "solver.block_max_iter", "1..10000");
  require(p.fixed_point_tol > 0.0 && p.fixed_point_tol < 1e-2, "solver.fixed_point_tol", "(0, 1e-2)");
  require(p.fixed_point_max_iter >= 1 && p.fixed_point_max_iter <= 1000, "solver.fixed_point_max_iter", "1..1000");
  require(p.omega_floor > 0.0 && p.omega_floor < 1.0, "solver.omega_floor", "(0, 1)");
  require(!c.boundary.empty(), "boundary", "at least one mode");
  for (const BoundaryMode& m : c.boundary) {
    require(m.degree >= 0 && m.degree <= p.harmonic_degree, "boundary.degree", "0..harmonic_degree");
    require(m.index >= 0 && m.index < HarmonicBasis::count(c.dimension, m.degree), "boundary.index",
            "0..(number of harmonics of the degree) - 1");
  }
  require(c.j_min >= 1 && c.j_max > c.j_min && c.j_max <= 60, "levels", "1 <= j_min < j_max <= 60");
  require(c.ratio_bound > 1.0, "tolerances.ratio_bound", "> 1");
  require(c.sharpness_tolerance > 0.0, "tolerances.sharpness_drift", "> 0");
  require(c.regularity_lambda > 0.0 && c.regularity_lambda < 1.0, "regularity_lambda", "(0, 1)");
  require(c.square_dini_r0 > 0.0 && c.square_dini_r0 < 1.0, "square_dini_r0", "(0, 1)");
  require(c.props_tolerance_scale > 0.0, "props.tolerance_scale", "> 0");
  require(c.props_random_systems >= 1 && c.props_random_systems <= 10000, "props.random_systems", "1..10000");
  require(c.threads >= 1 && c.threads <= 256, "threads", "1..256");
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& json_text) {
  ScenarioConfig c;
  bool blank = true;
  for (char ch : json_text) blank = blank && std::isspace(static_cast<unsigned char>(ch));
  if (blank) return c;

  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  reject_unknown(doc, "",
                 {"name", "dimension", "field", "grid", "harmonic_degree", "solver", "boundary", "levels",
                  "tolerances", "regularity_lambda", "square_dini_r0", "props", "seed", "threads"});
  read(doc, "", "name", c.name);
  read(doc, "", "dimension", c.dimension);
  read(doc, "", "harmonic_degree", c.pipeline.harmonic_degree);
  read(doc, "", "regularity_lambda", c.regularity_lambda);
  read(doc, "", "square_dini_r0", c.square_dini_r0);
  read(doc, "", "seed", c.seed);
  read(doc, "", "threads", c.threads);

  if (doc.contains("field")) {
    const json& f = doc.at("field");
    reject_unknown(f, "field", {"family", "amplitude", "exponent", "margin", "delta"});
    read(f, "field", "family", c.field.family);
    read(f, "field", "amplitude", c.field.amplitude);
    read(f, "field", "exponent", c.field.exponent);
    read(f, "field", "margin", c.field.margin);
    read(f, "field", "delta", c.field.delta);
  }
  if (doc.contains("grid")) {
    const json& g = doc.at("grid");
    reject_unknown(g, "grid", {"per_octave", "lo_octave", "hi_octave"});
    read(g, "grid", "per_octave", c.pipeline.per_octave);
    read(g, "grid", "lo_octave", c.pipeline.lo_octave);
    read(g, "grid", "hi_octave", c.pipeline.hi_octave);
  }
  if (doc.contains("solver")) {
    const json& s = doc.at("solver");
    reject_unknown(s, "solver",
                   {"block_tol", "block_max_iter", "fixed_point_tol", "fixed_point_max_iter", "omega_floor"});
    read(s, "solver", "block_tol", c.pipeline.block_tol);
    read(s, "solver", "block_max_iter", c.pipeline.block_max_iter);
    read(s, "solver", "fixed_point_tol", c.pipeline.fixed_point_tol);
    read(s, "solver", "fixed_point_max_iter", c.pipeline.fixed_point_max_iter);
    read(s, "solver", "omega_floor", c.pipeline.omega_floor);
  }
  if (doc.contains("boundary")) {
    const json& b = doc.at("boundary");
    if (!b.is_array()) throw ConfigError("key 'boundary' must be an array of modes");
    c.boundary.clear();
    for (const json& m : b) {
      reject_unknown(m, "boundary[]", {"degree", "index", "weight"});
      BoundaryMode mode;
      read(m, "boundary[]", "degree", mode.degree);
      read(m, "boundary[]", "index", mode.index);
      read(m, "boundary[]", "weight", mode.weight);
      c.boundary.push_back(mode);
    }
  }
  if (doc.contains("levels")) {
    const json& l = doc.at("levels");
    reject_unknown(l, "levels", {"j_min", "j_max"});
    read(l, "levels", "j_min", c.j_min);
    read(l, "levels", "j_max", c.j_max);
  }
  if (doc.contains("tolerances")) {
    const json& t = doc.at("tolerances");
    reject_unknown(t, "tolerances", {"ratio_bound", "sharpness_drift"});
    read(t, "tolerances", "ratio_bound", c.ratio_bound);
    read(t, "tolerances", "sharpness_drift", c.sharpness_tolerance);
  }
  if (doc.contains("props")) {
    const json& p = doc.at("props");
    reject_unknown(p, "props", {"tolerance_scale", "random_systems"});
    read(p, "props", "tolerance_scale", c.props_tolerance_scale);
    read(p, "props", "random_systems", c.props_random_systems);
  }
  validate(c);
  return c;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::string scenario_to_json(const ScenarioConfig& c) {
  json doc;
  doc["name"] = c.name;
  doc["dimension"] = c.dimension;
  doc["field"] = {{"family", c.field.family},
                  {"amplitude", c.field.amplitude},
                  {"exponent", c.field.exponent},
                  {"margin", c.field.margin},
                  {"delta", c.field.delta}};
  doc["grid"] = {{"per_octave", c.pipeline.per_octave},
                 {"lo_octave", c.pipeline.lo_octave},
                 {"hi_octave", c.pipeline.hi_octave}};
  doc["harmonic_degree"] = c.pipeline.harmonic_degree;
  doc["solver"] = {{"block_tol", c.pipeline.block_tol},
                   {"block_max_iter", c.pipeline.block_max_iter},
                   {"fixed_point_tol", c.pipeline.fixed_point_tol},
                   {"fixed_point_max_iter", c.pipeline.fixed_point_max_iter},
                   {"omega_floor", c.pipeline.omega_floor}};
  json modes = json::array();
  for (const BoundaryMode& m : c.boundary) modes.push_back({{"degree", m.degree}, {"index", m.index}, {"weight", m.weight}});
  doc["boundary"] = modes;
  doc["levels"] = {{"j_min", c.j_min}, {"j_max", c.j_max}};
  doc["tolerances"] = {{"ratio_bound", c.ratio_bound}, {"sharpness_drift", c.sharpness_tolerance}};
  doc["regularity_lambda"] = c.regularity_lambda;
  doc["square_dini_r0"] = c.square_dini_r0;
  doc["props"] = {{"tolerance_scale", c.props_tolerance_scale}, {"random_systems", c.props_random_systems}};
  doc["seed"] = c.seed;
  doc["threads"] = c.threads;
  return doc.dump(2);
}

GSProfile scenario_profile(const ScenarioConfig& cfg) {
  GSProfile p;
  p.amplitude = cfg.field.amplitude;
  p.exponent = cfg.field.exponent;
  p.ellipticity_margin = cfg.field.margin;
  return p;
}

CoefficientFieldPtr build_field(const ScenarioConfig& cfg) {
  if (cfg.field.family == "identity") return make_identity_field(cfg.dimension, cfg.field.delta);
  if (cfg.field.family == "gilbarg-serrin") return make_gs_field(cfg.dimension, scenario_profile(cfg), cfg.field.delta);
  throw ConfigError("unknown field family '" + cfg.field.family + "'");
}

}  // namespace dinigrad
