#include "pdmp/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "pdmp/config.hpp"
#include "pdmp/ergodicity.hpp"
#include "pdmp/errors.hpp"
#include "pdmp/estimate.hpp"
#include "pdmp/limits.hpp"
#include "pdmp/parallel.hpp"

namespace pdmp {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out;
};

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json jnum(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

class Output {
 public:
  Output(const RunConfig& cfg, const Options& opt) : cfg_(cfg), dir_(opt.out ? *opt.out : cfg.output.dir) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir_.string() + "': " + ec.message());
  }

  std::string stamp() const { return "# config_hash=" + cfg_.hash + " seed=" + std::to_string(cfg_.run.seed); }

  /// CSV with the stamp line, then the header, then rows.
  void csv(const std::string& name, const std::string& header, const std::vector<std::string>& rows) {
    if (!cfg_.output.csv) return;
    std::ofstream f(dir_ / name, std::ios::binary);
    f << stamp() << '\n' << header << '\n';
    for (const auto& r : rows) f << r << '\n';
    check(f, name);
  }

  void json_file(const std::string& name, json body) {
    if (!cfg_.output.json) return;
    body["config_hash"] = cfg_.hash;
    body["seed"] = cfg_.run.seed;
    body["schema_version"] = kConfigSchemaVersion;
    std::ofstream f(dir_ / name, std::ios::binary);
    f << body.dump(2) << '\n';
    check(f, name);
  }

  void text(const std::string& name, const std::string& body) {
    std::ofstream f(dir_ / name, std::ios::binary);
    f << stamp() << '\n' << body;
    check(f, name);
  }

 private:
  void check(std::ofstream& f, const std::string& name) {
    if (!f) throw SimulationError("failed writing '" + (dir_ / name).string() + "'");
  }

  const RunConfig& cfg_;
  fs::path dir_;
};

json model_json(const RunConfig& cfg) {
  json m;
  m["name"] = cfg.model->name;
  m["source"] = cfg.model_source;
  m["params"] = cfg.model->params;
  return m;
}

int workers(const RunConfig& cfg, const Options& opt) { return opt.workers ? *opt.workers : cfg.run.workers; }

double base_level(const RunConfig& cfg) {
  return cfg.analysis.base_level ? *cfg.analysis.base_level : cfg.model->default_u0;
}

void reject_zero_points(const ModelSpec& spec, const std::vector<double>& points, const std::string& field) {
  for (double u : points)
    if (spec.in_zero_set(u))
      throw ConfigError("field '" + field + "' contains " + num(u) + ", a zero of the drift (D_mu)");
}

std::vector<double> required_list(const std::vector<double>& v, const std::string& field) {
  if (v.empty()) throw ConfigError("missing required field '" + field + "'");
  return v;
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const RunConfig& cfg, const Options& opt, std::ostream& out) {
  const Simulator sim(cfg.model);
  const auto trajs = trajectories_parallel(sim, cfg.run.x0, cfg.run.stop, cfg.run.replications, cfg.run.seed,
                                           cfg.run.stream, workers(cfg, opt));
  Output o(cfg, opt);
  json reps = json::array();
  std::uint64_t total = 0;
  for (std::size_t r = 0; r < trajs.size(); ++r) {
    const auto& t = trajs[r];
    const std::string file = trajs.size() == 1 ? "events.csv" : "events_" + std::to_string(r) + ".csv";
    std::vector<std::string> rows;
    rows.reserve(t.jumps.size());
    for (std::size_t n = 0; n < t.jumps.size(); ++n) {
      const auto& j = t.jumps[n];
      rows.push_back(std::to_string(n + 1) + "," + num(j.time) + "," + num(j.x_pre) + "," + num(j.size) + "," +
                     num(j.x_post()));
    }
    o.csv(file, "n,T_n,X_pre,Z_n,X_post", rows);
    reps.push_back({{"stream", t.rng.stream}, {"jumps", t.jumps.size()}, {"horizon", t.horizon},
                    {"x_final", t.x_final}, {"file", file}});
    total += t.jumps.size();
  }
  json m;
  m["command"] = "simulate";
  m["model"] = model_json(cfg);
  m["x0"] = cfg.run.x0;
  m["stop"] = cfg.run.stop.describe();
  m["replications"] = reps;
  m["counts"] = {{"jumps", total}, {"trajectories", trajs.size()}};
  m["config"] = json::parse(cfg.canonical);
  o.json_file("manifest.json", m);
  out << "simulated " << trajs.size() << " trajectories, " << total << " jumps; config_hash=" << cfg.hash
      << " seed=" << cfg.run.seed << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- rice

int cmd_rice(const RunConfig& cfg, const Options& opt, std::ostream& out) {
  const auto& spec = *cfg.model;
  const auto grid = required_list(cfg.analysis.density_grid, "analysis.density_grid");
  reject_zero_points(spec, grid, "analysis.density_grid");
  const double base = base_level(cfg);
  reject_zero_points(spec, {base}, "analysis.base_level");
  const Simulator sim(cfg.model);

  double h = 0.0;
  if (cfg.analysis.bandwidth) {
    h = *cfg.analysis.bandwidth;
  } else {
    FoldConfig pilot;
    pilot.base_level = base;
    pilot.sample_rate = cfg.analysis.sample_rate > 0 ? cfg.analysis.sample_rate : 1.0;
    const auto pd = fold_run(sim, cfg.run.x0, StopRule::after_cycles(2000, base), {cfg.run.seed, cfg.run.stream + 1}, pilot);
    h = default_bandwidth(pd.states);
  }

  std::vector<FoldConfig> cfgs(3);
  const double hs[3] = {h, h / 2, 2 * h};
  for (int i = 0; i < 3; ++i) {
    cfgs[i].base_level = base;
    cfgs[i].density_grid = grid;
    cfgs[i].bandwidth = hs[i];
  }
  cfgs[0].levels = grid;
  const RngConfig rng{cfg.run.seed, cfg.run.stream};
  PathFold f0(sim.flow(), cfgs[0], rng), f1(sim.flow(), cfgs[1], rng), f2(sim.flow(), cfgs[2], rng);
  sim.run(cfg.run.x0, cfg.run.stop, rng, [&](const Segment& s) {
    f0(s);
    f1(s);
    f2(s);
    return true;
  });
  const auto d0 = f0.data();
  std::vector<Intensities> in;
  for (double u : grid) in.push_back(estimate_intensities(d0, u, spec));
  const auto rows = rice_residual(estimate_density(d0, spec), in, spec);

  std::vector<std::string> lines;
  json table = json::array();
  double worst = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const double mu_p = std::abs(r.mu) * r.p;
    lines.push_back(num(r.u) + "," + num(r.nu) + "," + num(r.nu_se) + "," + num(r.p) + "," + num(r.p_se) + "," +
                    num(mu_p) + "," + num(r.residual) + "," + num(r.relative_error) + "," + num(in[i].nu.count));
    table.push_back({{"u", r.u}, {"nu", jnum(r.nu)}, {"p", jnum(r.p)}, {"mu_p", jnum(mu_p)},
                     {"residual", jnum(r.residual)}, {"relative_error", jnum(r.relative_error)}});
    worst = std::max(worst, std::abs(r.residual));
  }
  Output o(cfg, opt);
  o.csv("rice.csv", "u,nu,nu_se,p,p_se,mu_p,residual,relative_error,n", lines);
  json sens = json::object();
  for (int i = 1; i < 3; ++i) {
    const auto d = (i == 1 ? f1 : f2).data();
    double w = 0.0;
    for (const auto& r : rice_residual(estimate_density(d, spec), in, spec)) w = std::max(w, std::abs(r.residual));
    sens[i == 1 ? "half_h" : "double_h"] = jnum(w);
  }
  json m;
  m["command"] = "rice";
  m["model"] = model_json(cfg);
  m["bandwidth"] = h;
  m["base_level"] = base;
  m["cycles"] = d0.batches();
  m["rows"] = table;
  m["max_abs_residual"] = jnum(worst);
  m["sensitivity_max_abs_residual"] = sens;
  o.json_file("rice.json", m);
  out << "u,nu,p,mu_p,residual\n";
  for (const auto& r : rows)
    out << num(r.u) << ',' << num(r.nu) << ',' << num(r.p) << ',' << num(std::abs(r.mu) * r.p) << ',' << num(r.residual)
        << '\n';
  out << "cycles=" << d0.batches() << " h=" << num(h) << " config_hash=" << cfg.hash << " seed=" << cfg.run.seed << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- crossings

int cmd_crossings(const RunConfig& cfg, const Options& opt, std::ostream& out) {
  const auto& spec = *cfg.model;
  const auto levels = required_list(cfg.analysis.levels, "analysis.levels");
  reject_zero_points(spec, levels, "analysis.levels");
  const Simulator sim(cfg.model);
  FoldConfig fc;
  fc.base_level = cfg.analysis.base_level;
  fc.batch_time = cfg.analysis.batch_time;
  fc.levels = levels;
  fc.sample_rate = cfg.analysis.sample_rate;
  const auto d = fold_run(sim, cfg.run.x0, cfg.run.stop, {cfg.run.seed, cfg.run.stream}, fc);

  std::vector<std::string> rows;
  json table = json::array();
  bool balanced = true;
  for (std::size_t li = 0; li < levels.size(); ++li) {
    const double u = levels[li];
    const auto e = estimate_intensities(d, u, spec);
    for (const auto* k : {&e.nu, &e.plus_d, &e.minus_d, &e.plus})
      rows.push_back(num(u) + "," + to_string(k->kind) + "," + num(k->estimate) + "," + num(k->se) + "," + num(k->count));
    json row{{"u", u}};
    for (const auto* k : {&e.nu, &e.plus_d, &e.minus_d, &e.plus})
      row[to_string(k->kind)] = {{"estimate", jnum(k->estimate)}, {"se", jnum(k->se)}, {"n", k->count}};
    if (!d.states.empty()) {
      const auto integral = intensity_by_integral(spec, d.states, u, {cfg.run.seed, cfg.run.stream + 1});
      for (const auto* k : {&integral.plus_d, &integral.minus_d})
        rows.push_back(num(u) + "," + to_string(k->kind) + "_integral," + num(k->estimate) + "," + num(k->se) + "," +
                       num(k->count));
      row["integral"] = {{"nu_plus_d", jnum(integral.plus_d.estimate)}, {"nu_minus_d", jnum(integral.minus_d.estimate)}};
    }
    CrossingBalance b;
    b.level = u;
    const double mu = spec.mu(u);
    b.drift_sign = mu > 0 ? 1 : (mu < 0 ? -1 : 0);
    auto add = [&](const LevelCounts& c) {
      b.continuous += c.continuous();
      b.continuous_up += c.cont_up;
      b.disc_up += c.disc_up;
      b.disc_down += c.disc_down;
    };
    for (std::size_t i = 0; i < d.batches(); ++i) add(d.at(i, li));
    if (li < d.burn_in_counts.size()) add(d.burn_in_counts[li]);
    if (li < d.trailing_counts.size()) add(d.trailing_counts[li]);
    row["balance"] = {{"continuous", b.continuous}, {"disc_up", b.disc_up}, {"disc_down", b.disc_down},
                      {"imbalance", b.imbalance()}, {"holds", b.holds()}};
    balanced = balanced && b.holds();
    table.push_back(row);
  }
  Output o(cfg, opt);
  o.csv("crossings.csv", "u,kind,estimate,stderr,n", rows);
  o.json_file("crossings.json", {{"command", "crossings"}, {"model", model_json(cfg)}, {"batches", d.batches()},
                                 {"levels", table}, {"balance_holds", balanced}});
  out << "u,kind,estimate,stderr,n\n";
  for (const auto& r : rows) out << r << '\n';
  out << "balance " << (balanced ? "holds" : "VIOLATED") << " config_hash=" << cfg.hash << " seed=" << cfg.run.seed
      << '\n';
  if (!balanced) throw SimulationError("pathwise crossing balance violated");
  return kExitOk;
}

// ---------------------------------------------------------------- cycles

struct CycleRow {
  double b = 0.0;
  CycleCountStats stats;
  std::optional<GammaEstimate> gamma;
  std::optional<stats::ChiSquareResult> chi;
  std::optional<ZeroFractionCheck> zero;
  double ratio = NAN, ratio_se = NAN;
  std::string note;
};

std::vector<CycleRow> cycle_table(const RunConfig& cfg, const Simulator& sim, const std::vector<double>& targets,
                                  double base) {
  FoldConfig fc;
  fc.base_level = base;
  fc.levels = targets;
  fc.levels.insert(fc.levels.begin(), base);
  const auto a = fold_run(sim, cfg.run.x0, cfg.run.stop, {cfg.run.seed, cfg.run.stream}, fc);
  // The ratio nu(b)/nu(u) comes from an independent run; on the same run the
  // zero-fraction identity would hold by construction.
  const auto ind = fold_run(sim, cfg.run.x0, cfg.run.stop, {cfg.run.seed, cfg.run.stream + 1}, fc);
  const auto nu_u = estimate_intensities(ind, base, sim.spec()).nu;
  std::vector<CycleRow> rows;
  for (double b : targets) {
    CycleRow r;
    r.b = b;
    r.stats = cycle_count_stats(a, b);
    const auto nu_b = estimate_intensities(ind, b, sim.spec()).nu;
    r.ratio = nu_b.estimate / nu_u.estimate;
    r.ratio_se = r.ratio * std::hypot(nu_b.se / nu_b.estimate, nu_u.se / nu_u.estimate);
    try {
      r.gamma = gamma_hat(r.stats, base);
      r.zero = zero_fraction_check(r.stats, *r.gamma, r.ratio, r.ratio_se);
      r.chi = test_geometric_cycles(r.stats, *r.gamma);
    } catch (const InsufficientData& e) {
      r.note = e.what();
    }
    rows.push_back(r);
  }
  return rows;
}

int cmd_cycles(const RunConfig& cfg, const Options& opt, std::ostream& out) {
  const auto targets = required_list(cfg.analysis.targets, "analysis.targets");
  const double base = base_level(cfg);
  reject_zero_points(*cfg.model, targets, "analysis.targets");
  reject_zero_points(*cfg.model, {base}, "analysis.base_level");
  const Simulator sim(cfg.model);
  const auto rows = cycle_table(cfg, sim, targets, base);

  std::vector<std::string> hist, summary;
  json table = json::array();
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < r.stats.histogram.size(); ++k)
      hist.push_back(num(r.b) + "," + std::to_string(k) + "," + std::to_string(r.stats.histogram[k]));
    const double g = r.gamma ? r.gamma->gamma : NAN, gse = r.gamma ? r.gamma->se : NAN;
    const double pos = r.gamma ? static_cast<double>(r.gamma->positive_cycles) : 0.0;
    summary.push_back(num(r.b) + "," + std::to_string(r.stats.cycles) + "," + num(pos) + "," + num(g) + "," +
                      num(gse) + "," + num(r.stats.mean) + "," + num(r.stats.mean_se) + "," + num(r.ratio) + "," +
                      num(r.ratio_se) + "," + num(r.zero ? r.zero->observed : NAN) + "," +
                      num(r.zero ? r.zero->predicted : NAN) + "," + num(r.zero ? r.zero->standardized_gap : NAN) +
                      "," + num(r.chi ? r.chi->statistic : NAN) + "," + num(r.chi ? r.chi->df : NAN) + "," +
                      num(r.chi ? r.chi->p_value : NAN));
    table.push_back({{"b", r.b}, {"cycles", r.stats.cycles}, {"positive_cycles", pos}, {"gamma", jnum(g)},
                     {"gamma_se", jnum(gse)}, {"mean_crossings", jnum(r.stats.mean)},
                     {"ratio", jnum(r.ratio)}, {"chi2_p", r.chi ? jnum(r.chi->p_value) : json(nullptr)},
                     {"zero_fraction_gap", r.zero ? jnum(r.zero->standardized_gap) : json(nullptr)},
                     {"note", r.note}});
  }
  Output o(cfg, opt);
  o.csv("cycle_histogram.csv", "b,k,cycles", hist);
  const std::string header =
      "b,cycles,positive_cycles,gamma,gamma_se,mean_crossings,mean_se,ratio,ratio_se,zero_observed,zero_predicted,"
      "zero_gap,chi2,df,p_value";
  o.csv("cycles.csv", header, summary);
  o.json_file("cycles.json", {{"command", "cycles"}, {"model", model_json(cfg)}, {"base_level", base}, {"targets", table}});
  out << header << '\n';
  for (const auto& s : summary) out << s << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- rho / limit

json rho_json(const CompoundPoissonParams& p) {
  json j{{"rho", p.rho}, {"scenario", to_string(p.scenario)}, {"margin", jnum(p.margin)}};
  j["w"] = p.w ? json(*p.w) : json(nullptr);
  if (p.w) j["w_residual"] = p.w_residual;
  return j;
}

std::string rho_line(const CompoundPoissonParams& p) {
  return "scenario=" + to_string(p.scenario) + " rho=" + num(p.rho) + " w=" + (p.w ? num(*p.w) : "absent");
}

int cmd_rho(const RunConfig& cfg, const Options& opt, std::ostream& out) {
  const auto p = compute_rho(*cfg.model);
  Output o(cfg, opt);
  auto j = rho_json(p);
  j["command"] = "rho";
  j["model"] = model_json(cfg);
  o.json_file("rho.json", j);
  out << rho_line(p) << '\n';
  return kExitOk;
}

int cmd_limit(const RunConfig& cfg, const Options& opt, std::ostream& out) {
  const auto& spec = *cfg.model;
  const auto p = compute_rho(spec);
  out << rho_line(p) << '\n';
  json report = rho_json(p);
  report["command"] = "limit";
  report["model"] = model_json(cfg);
  std::vector<std::string> rows;
  auto row = [&](double b, const std::string& stat, double value, double p_value) {
    rows.push_back(num(b) + "," + stat + "," + num(value) + "," + num(p_value));
  };

  const auto& targets = cfg.analysis.targets;
  if (!targets.empty()) {
    const double base = base_level(cfg);
    reject_zero_points(spec, targets, "analysis.targets");
    reject_zero_points(spec, {base}, "analysis.base_level");
    const Simulator sim(cfg.model);
    FoldConfig fc;
    fc.base_level = base;
    fc.levels = targets;
    fc.levels.insert(fc.levels.begin(), base);
    fc.record_up_times = targets;
    const auto d = fold_run(sim, cfg.run.x0, cfg.run.stop, {cfg.run.seed, cfg.run.stream}, fc);
    json per = json::array();
    for (std::size_t i = 0; i < targets.size(); ++i) {
      const double b = targets[i];
      json t{{"b", b}};
      const auto nu = estimate_intensities(d, b, spec);
      t["nu"] = jnum(nu.nu.estimate);
      t["nu_plus"] = jnum(nu.plus.estimate);
      row(b, "nu_plus", nu.plus.estimate, NAN);
      try {
        const auto g = gamma_hat(cycle_count_stats(d, b), base);
        t["gamma"] = g.gamma;
        t["gamma_se"] = g.se;
        t["positive_cycles"] = g.positive_cycles;
        row(b, "gamma", g.gamma, NAN);
      } catch (const InsufficientData& e) {
        t["gamma_note"] = e.what();
      }
      // Scaled upcrossings after burn-in, on the scaled clock.
      std::vector<double> ups;
      for (double s : d.up_times[i])
        if (s >= d.burn_in_time) ups.push_back(s);
      const double end = d.burn_in_time + d.observed_time();
      try {
        const auto scaled = scale_upcrossings(ups, end, nu.plus);
        if (scaled.times.size() >= 3) {
          const auto ks = test_scaled_gaps(scaled, p.rho, p.rho > 0 ? cfg.analysis.gap_resolution : 0.0);
          t["gap_ks"] = {{"statistic", ks.statistic}, {"p_value", ks.p_value}, {"n", ks.n}};
          row(b, "gap_ks", ks.statistic, ks.p_value);
          const auto chi = test_window_counts(scaled, cfg.analysis.window, p.rho);
          t["window_chi2"] = {{"statistic", chi.statistic}, {"df", chi.df}, {"p_value", chi.p_value}};
          row(b, "window_chi2", chi.statistic, chi.p_value);
          const double s0 = nu.plus.estimate * d.burn_in_time;
          const double len = cfg.analysis.window;
          std::vector<std::vector<double>> batches;
          while (s0 + (batches.size() + 1) * len <= scaled.horizon) batches.emplace_back();
          for (double s : scaled.times) {
            const auto k = static_cast<std::size_t>((s - s0) / len);
            if (s >= s0 && k < batches.size()) batches[k].push_back(s - s0 - k * len);
          }
          std::vector<LaplaceProbe> grid;
          for (double z : cfg.analysis.laplace_z) grid.push_back({z, 0.0, std::min(1.0, len)});
          json lg = json::array();
          for (const auto& gp : laplace_functional_distance(batches, p.rho, grid)) {
            lg.push_back({{"z", gp.probe.z}, {"empirical", gp.empirical}, {"theoretical", gp.theoretical},
                          {"gap", jnum(gp.gap)}, {"batches", gp.batches}});
            row(b, "laplace_gap_z" + num(gp.probe.z), gp.gap, NAN);
          }
          t["laplace"] = lg;
        }
      } catch (const InsufficientData& e) {
        t["limit_note"] = e.what();
      }
      if (cfg.analysis.replications > 0) {
        const auto times = first_passages_parallel(sim, cfg.run.x0, b, cfg.analysis.replications, cfg.run.seed,
                                                   cfg.run.stream + 1000 + i * cfg.analysis.replications,
                                                   workers(cfg, opt));
        try {
          const auto ks = test_exponential_first_passage(times, p.rho, nu.nu.estimate);
          t["first_passage_ks"] = {{"statistic", ks.statistic}, {"p_value", ks.p_value}, {"n", ks.n}};
          row(b, "first_passage_ks", ks.statistic, ks.p_value);
        } catch (const InsufficientData& e) {
          t["first_passage_note"] = e.what();
        }
      }
      per.push_back(t);
    }
    report["targets"] = per;
    report["base_level"] = base;
  }
  Output o(cfg, opt);
  o.csv("limit.csv", "b,statistic,value,p_value", rows);
  o.json_file("limit.json", report);
  for (const auto& r : rows) out << r << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- cpp-sim

int cmd_cpp_sim(const RunConfig& cfg, const Options& opt, std::ostream& out) {
  const auto& c = cfg.analysis.cpp;
  const double rho = c.rho ? *c.rho : compute_rho(*cfg.model).rho;
  if (!(rho >= 0.0 && rho < 1.0)) throw ConfigError("field 'analysis.cpp.rho' must lie in [0, 1)");
  Rng rng({cfg.run.seed, cfg.run.stream}, SubStream::auxiliary);
  const auto path = simulate_geom_cpp(rho, c.horizon, rng);
  std::vector<std::string> rows;
  for (std::size_t i = 0; i < path.times.size(); ++i)
    rows.push_back(num(path.times[i]) + "," + std::to_string(path.multiplicity[i]));
  Output o(cfg, opt);
  o.csv("cpp_path.csv", "time,multiplicity", rows);
  json j{{"command", "cpp-sim"}, {"rho", rho}, {"horizon", c.horizon}, {"atoms", path.times.size()},
         {"total", path.total()}};
  out << "rho=" << num(rho) << " atoms=" << path.times.size() << " total=" << path.total() << '\n';
  if (c.windows > 0) {
    const auto ws = geom_cpp_windows_parallel(rho, c.window, c.windows, cfg.run.seed, cfg.run.stream + 1,
                                              workers(cfg, opt));
    std::vector<std::string> lap;
    json lj = json::array();
    for (double z : cfg.analysis.laplace_z) {
      std::vector<double> v(ws.counts.size());
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::exp(-z * ws.counts[i]);
      const auto ms = stats::mean_se(v);
      const double th = laplace_count(rho, c.window, z);
      const double gap = ms.se > 0 ? (ms.mean - th) / ms.se : NAN;
      lap.push_back(num(z) + "," + num(ms.mean) + "," + num(ms.se) + "," + num(th) + "," + num(gap));
      lj.push_back({{"z", z}, {"empirical", ms.mean}, {"se", ms.se}, {"theoretical", th}, {"gap", jnum(gap)}});
      out << "z=" << num(z) << " empirical=" << num(ms.mean) << " theoretical=" << num(th) << " gap=" << num(gap) << '\n';
    }
    o.csv("cpp_laplace.csv", "z,empirical,se,theoretical,gap", lap);
    std::uint32_t kmax = 0;
    for (auto k : ws.counts) kmax = std::max(kmax, k);
    const auto pmf = window_count_pmf(rho, c.window, kmax);
    std::vector<double> freq(kmax + 1, 0.0);
    for (auto k : ws.counts) freq[k] += 1.0;
    std::vector<std::string> pm;
    for (std::size_t k = 0; k <= kmax; ++k)
      pm.push_back(std::to_string(k) + "," + num(freq[k] / ws.counts.size()) + "," + num(k < pmf.size() ? pmf[k] : 0.0));
    o.csv("cpp_window_pmf.csv", "k,empirical,theoretical", pm);
    j["windows"] = c.windows;
    j["window"] = c.window;
    j["laplace"] = lj;
  }
  o.json_file("cpp.json", j);
  return kExitOk;
}

// ---------------------------------------------------------------- ergodicity

int cmd_ergodicity(const RunConfig& cfg, const Options& opt, std::ostream& out) {
  const auto report = audit_assumptions(*cfg.model, cfg.analysis.small_sets);
  Output o(cfg, opt);
  auto j = json::parse(report.to_json());
  j["command"] = "ergodicity";
  o.json_file("ergodicity.json", j);
  // The text report is written regardless of the output formats.
  o.text("ergodicity.txt", report.table());
  out << report.table();
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"pdmp: simulation and verification of one-dimensional PDMPs"};
  app.require_subcommand(1);
  Options opt;
  struct Command {
    const char* name;
    const char* help;
    int (*fn)(const RunConfig&, const Options&, std::ostream&);
  };
  const std::vector<Command> commands{
      {"simulate", "simulate trajectories; write the event log and manifest", cmd_simulate},
      {"rice", "Rice formula table on the density grid", cmd_rice},
      {"crossings", "crossing intensities and pathwise balance", cmd_crossings},
      {"cycles", "per-cycle crossing counts and the geometric law", cmd_cycles},
      {"limit", "rho, w and compound Poisson limit statistics", cmd_limit},
      {"rho", "rho and w of the model", cmd_rho},
      {"cpp-sim", "simulate the geometric compound Poisson process", cmd_cpp_sim},
      {"ergodicity", "assumption audit report", cmd_ergodicity},
  };
  std::uint64_t seed = 0;
  int nworkers = 0;
  std::string outdir;
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", opt.config, "run config (YAML)")->required();
    sub->add_option("--seed", seed, "override run.seed");
    sub->add_option("--workers", nworkers, "worker threads");
    sub->add_option("--out", outdir, "output directory (overrides output.dir)");
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  for (const auto* sub : app.get_subcommands()) {
    if (sub->get_option("--seed")->count()) opt.seed = seed;
    if (sub->get_option("--workers")->count()) opt.workers = nworkers;
    if (sub->get_option("--out")->count()) opt.out = outdir;
    const auto it = std::find_if(commands.begin(), commands.end(),
                                 [&](const Command& c) { return sub->get_name() == c.name; });
    try {
      const auto cfg = load_config(opt.config, opt.seed);
      return it->fn(cfg, opt, out);
    } catch (const ConfigError& e) {
      err << "config error: " << e.what() << '\n';
      return kExitConfig;
    } catch (const ModelValidationError& e) {
      err << "model validation error: " << e.what() << '\n';
      return kExitModel;
    } catch (const std::exception& e) {
      err << "runtime error: " << e.what() << '\n';
      return kExitRuntime;
    }
  }
  return kExitUsage;
}

}  // namespace pdmp
