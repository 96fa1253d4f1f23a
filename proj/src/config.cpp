#include "pdmp/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "json.hpp"
#include "pdmp/errors.hpp"

namespace pdmp {

namespace {

using Keys = std::set<std::string>;

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

void check_keys(const YAML::Node& node, const std::string& path, const Keys& allowed) {
  if (!node.IsMap()) throw ConfigError("'" + path + "' must be a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw ConfigError("unknown field '" + join(path, key) + "'");
  }
}

template <class T>
T scalar(const YAML::Node& node, const std::string& path) {
  if (!node.IsScalar()) throw ConfigError("field '" + path + "' must be a scalar");
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("field '" + path + "' has an invalid value '" + node.Scalar() + "'");
  }
}

template <class T>
T required(const YAML::Node& parent, const std::string& path, const std::string& key) {
  const auto n = parent[key];
  if (!n) throw ConfigError("missing required field '" + join(path, key) + "'");
  return scalar<T>(n, join(path, key));
}

template <class T>
T optional_or(const YAML::Node& parent, const std::string& path, const std::string& key, T fallback) {
  const auto n = parent[key];
  return n ? scalar<T>(n, join(path, key)) : fallback;
}

std::vector<double> number_list(const YAML::Node& parent, const std::string& path, const std::string& key) {
  const auto n = parent[key];
  if (!n) return {};
  const auto p = join(path, key);
  if (!n.IsSequence()) throw ConfigError("field '" + p + "' must be a list of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < n.size(); ++i) out.push_back(scalar<double>(n[i], p + "[" + std::to_string(i) + "]"));
  return out;
}

std::map<std::string, double> number_map(const YAML::Node& n, const std::string& path) {
  std::map<std::string, double> out;
  if (!n) return out;
  if (!n.IsMap()) throw ConfigError("field '" + path + "' must be a mapping of numbers");
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    out[key] = scalar<double>(kv.second, join(path, key));
  }
  return out;
}

double parse_extended(const YAML::Node& n, const std::string& path) {
  const auto s = scalar<std::string>(n, path);
  if (s == "inf" || s == "+inf" || s == ".inf") return INFINITY;
  if (s == "-inf" || s == "-.inf") return -INFINITY;
  return scalar<double>(n, path);
}

Limit limit(const YAML::Node& parent, const std::string& path, const std::string& key) {
  const auto n = parent[key];
  if (!n) return {};
  return Limit::from_double(parse_extended(n, join(path, key)));
}

JumpLaw jump_law(const YAML::Node& n, const std::string& path) {
  if (!n) throw ConfigError("missing required field '" + path + "'");
  check_keys(n, path, {"family", "rate", "shift", "scale", "shape", "p_up", "rate_up", "rate_down"});
  const auto family = required<std::string>(n, path, "family");
  const double scale = optional_or<double>(n, path, "scale", 1.0);
  if (!(scale > 0)) throw ConfigError("field '" + path + ".scale' must be positive");
  if (family == "exp_positive" || family == "exp_negative") {
    const double rate = required<double>(n, path, "rate");
    const double shift = optional_or<double>(n, path, "shift", 0.0);
    return JumpLaw::exponential(family == "exp_positive" ? 1 : -1, rate / scale, shift * scale);
  }
  if (family == "pareto") return JumpLaw::pareto(required<double>(n, path, "shape"), scale);
  if (family == "two_sided")
    return JumpLaw::two_sided(required<double>(n, path, "p_up"), required<double>(n, path, "rate_up") / scale,
                              required<double>(n, path, "rate_down") / scale);
  throw ConfigError("field '" + path + ".family' has unknown jump family '" + family + "'");
}

ModelPtr expression_block(const YAML::Node& n, const std::string& path) {
  check_keys(n, path,
             {"name", "drift", "rate", "params", "jumps", "zeros", "drift_discontinuities", "rate_discontinuities",
              "working_interval", "drift_at_plus", "drift_at_minus", "rate_at_plus", "rate_at_minus", "default_u0",
              "zero_tolerance"});
  ExpressionModelInput in;
  in.name = optional_or<std::string>(n, path, "name", "expression");
  in.drift = required<std::string>(n, path, "drift");
  in.rate = required<std::string>(n, path, "rate");
  in.params = number_map(n["params"], join(path, "params"));
  in.jumps = jump_law(n["jumps"], join(path, "jumps"));
  in.zeros = number_list(n, path, "zeros");
  in.drift_discontinuities = number_list(n, path, "drift_discontinuities");
  in.rate_discontinuities = number_list(n, path, "rate_discontinuities");
  if (n["working_interval"]) {
    const auto w = number_list(n, path, "working_interval");
    if (w.size() != 2 || !(w[0] < w[1])) throw ConfigError("field '" + path + ".working_interval' must be [lo, hi]");
    in.working_interval = {w[0], w[1]};
  }
  in.drift_at_plus = limit(n, path, "drift_at_plus");
  in.drift_at_minus = limit(n, path, "drift_at_minus");
  in.rate_at_plus = limit(n, path, "rate_at_plus");
  in.rate_at_minus = limit(n, path, "rate_at_minus");
  in.default_u0 = optional_or<double>(n, path, "default_u0", 0.0);
  in.zero_tolerance = optional_or<double>(n, path, "zero_tolerance", 1e-12);
  try {
    return expression_model(in);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

StopRule stop_block(const YAML::Node& n, const std::string& path) {
  if (!n) throw ConfigError("missing required field '" + path + "'");
  check_keys(n, path, {"n_events", "horizon", "n_cycles", "level", "time_limit"});
  const int kinds = (n["n_events"] ? 1 : 0) + (n["horizon"] ? 1 : 0) + (n["n_cycles"] ? 1 : 0);
  if (kinds != 1) throw ConfigError("field '" + path + "' needs exactly one of n_events, horizon, n_cycles");
  StopRule s;
  if (n["n_events"]) s = StopRule::after_events(required<std::uint64_t>(n, path, "n_events"));
  if (n["horizon"]) s = StopRule::at_horizon(required<double>(n, path, "horizon"));
  if (n["n_cycles"]) s = StopRule::after_cycles(required<std::uint64_t>(n, path, "n_cycles"), required<double>(n, path, "level"));
  s.time_limit = optional_or<double>(n, path, "time_limit", s.time_limit);
  return s;
}

nlohmann::json to_json(const YAML::Node& n) {
  if (n.IsMap()) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& kv : n) j[kv.first.as<std::string>()] = to_json(kv.second);
    return j;
  }
  if (n.IsSequence()) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& v : n) j.push_back(to_json(v));
    return j;
  }
  if (n.IsScalar()) return n.Scalar();
  return nullptr;
}

}  // namespace

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunConfig parse_config(const std::string& text, std::optional<std::uint64_t> seed_override) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  if (!root || !root.IsMap()) throw ConfigError("config must be a mapping with model and run blocks");
  check_keys(root, "", {"version", "model", "run", "analysis", "output"});

  RunConfig cfg;
  cfg.version = optional_or<int>(root, "", "version", kConfigSchemaVersion);
  if (cfg.version != kConfigSchemaVersion)
    throw ConfigError("field 'version' is " + std::to_string(cfg.version) + "; supported schema version is " +
                      std::to_string(kConfigSchemaVersion));

  const auto model = root["model"];
  if (!model) throw ConfigError("missing required field 'model'");
  check_keys(model, "model", {"catalog", "params", "expression"});
  if (model["catalog"] && model["expression"]) throw ConfigError("field 'model' takes either catalog or expression, not both");
  if (model["catalog"]) {
    cfg.model_source = required<std::string>(model, "model", "catalog");
    try {
      cfg.model = catalog(cfg.model_source, number_map(model["params"], "model.params"));
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("model.params: ") + e.what());
    }
  } else if (model["expression"]) {
    cfg.model_source = "expression";
    cfg.model = expression_block(model["expression"], "model.expression");
  } else {
    throw ConfigError("missing required field 'model.catalog' or 'model.expression'");
  }

  const auto run = root["run"];
  if (!run) throw ConfigError("missing required field 'run'");
  check_keys(run, "run", {"x0", "stop", "seed", "stream", "replications", "workers"});
  if (seed_override) root["run"]["seed"] = *seed_override;
  cfg.run.x0 = required<double>(run, "run", "x0");
  cfg.run.stop = stop_block(run["stop"], "run.stop");
  cfg.run.seed = optional_or<std::uint64_t>(run, "run", "seed", 1);
  cfg.run.stream = optional_or<std::uint64_t>(run, "run", "stream", 0);
  cfg.run.replications = optional_or<std::uint64_t>(run, "run", "replications", 1);
  cfg.run.workers = optional_or<int>(run, "run", "workers", 0);
  if (cfg.run.replications == 0) throw ConfigError("field 'run.replications' must be at least 1");
  if (!cfg.model->working_interval.contains(cfg.run.x0))
    throw ConfigError("field 'run.x0' lies outside the model working interval");

  if (const auto a = root["analysis"]) {
    const std::string p = "analysis";
    check_keys(a, p,
               {"base_level", "levels", "targets", "density_grid", "bandwidth", "batch_time", "sample_rate", "window", "gap_resolution",
                "laplace_z", "replications", "small_sets", "cpp"});
    auto& an = cfg.analysis;
    if (a["base_level"]) an.base_level = required<double>(a, p, "base_level");
    an.levels = number_list(a, p, "levels");
    an.targets = number_list(a, p, "targets");
    an.density_grid = number_list(a, p, "density_grid");
    if (a["bandwidth"]) an.bandwidth = required<double>(a, p, "bandwidth");
    an.batch_time = optional_or<double>(a, p, "batch_time", an.batch_time);
    an.sample_rate = optional_or<double>(a, p, "sample_rate", an.sample_rate);
    an.window = optional_or<double>(a, p, "window", an.window);
    an.gap_resolution = optional_or<double>(a, p, "gap_resolution", an.gap_resolution);
    if (a["laplace_z"]) an.laplace_z = number_list(a, p, "laplace_z");
    an.replications = optional_or<std::uint64_t>(a, p, "replications", 0);
    an.small_sets = optional_or<std::string>(a, p, "small_sets", an.small_sets);
    if (const auto c = a["cpp"]) {
      check_keys(c, "analysis.cpp", {"rho", "horizon", "window", "windows"});
      if (c["rho"]) an.cpp.rho = required<double>(c, "analysis.cpp", "rho");
      an.cpp.horizon = optional_or<double>(c, "analysis.cpp", "horizon", an.cpp.horizon);
      an.cpp.window = optional_or<double>(c, "analysis.cpp", "window", an.cpp.window);
      an.cpp.windows = optional_or<std::uint64_t>(c, "analysis.cpp", "windows", 0);
    }
    if (an.bandwidth && !(*an.bandwidth > 0)) throw ConfigError("field 'analysis.bandwidth' must be positive");
    if (!(an.window > 0)) throw ConfigError("field 'analysis.window' must be positive");
    if (!(an.gap_resolution >= 0)) throw ConfigError("field 'analysis.gap_resolution' must be non-negative");
  }

  if (const auto o = root["output"]) {
    check_keys(o, "output", {"dir", "formats"});
    cfg.output.dir = optional_or<std::string>(o, "output", "dir", cfg.output.dir);
    if (o["formats"]) {
      if (!o["formats"].IsSequence()) throw ConfigError("field 'output.formats' must be a list");
      cfg.output.csv = cfg.output.json = false;
      for (const auto& f : o["formats"]) {
        const auto s = f.as<std::string>();
        if (s == "csv") cfg.output.csv = true;
        else if (s == "json") cfg.output.json = true;
        else throw ConfigError("field 'output.formats' has unknown format '" + s + "'");
      }
    }
  }

  // Worker count and output location do not change any number, so they stay out of the hash.
  auto j = to_json(root);
  if (j.contains("run")) j["run"].erase("workers");
  j.erase("output");
  cfg.canonical = j.dump();
  cfg.hash = fnv1a_hex(cfg.canonical);
  return cfg;
}

RunConfig load_config(const std::string& path, std::optional<std::uint64_t> seed_override) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), seed_override);
}

}  // namespace pdmp
