#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "pdmp/cli.hpp"

using namespace pdmp;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("pdmp_cli_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }

  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(path / name) << text;
    return (path / name).string();
  }
  std::string dir(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

const char* kShot = R"(
model:
  catalog: linear_shot_noise
  params: {c: 1, lambda0: 1, alpha: 2}
run:
  x0: 0.5
  stop: {n_events: 2000}
  seed: 5
analysis:
  base_level: 0.5
  levels: [0.5, 1.0]
  targets: [2]
  density_grid: [0.5, 1.0]
)";

std::string config(const TempDir& t, std::string text, const std::string& from = "", const std::string& to = "") {
  if (!from.empty()) text.replace(text.find(from), from.size(), to);
  return t.write("cfg.yaml", text);
}

}  // namespace

TEST_CASE("simulate writes a stamped event log and manifest") {
  TempDir t;
  const auto cfg = config(t, kShot, "{n_events: 2000}", "{n_events: 100000}");
  const auto r = run({"simulate", "--config", cfg, "--out", t.dir("a")});
  REQUIRE(r.code == 0);
  const auto m = nlohmann::json::parse(slurp(t.path / "a" / "manifest.json"));
  CHECK(m["counts"]["jumps"] == 100000);
  CHECK(m["replications"][0]["jumps"] == 100000);
  CHECK(m["seed"] == 5);
  const auto lines = lines_of(slurp(t.path / "a" / "events.csv"));
  REQUIRE(lines.size() == 100002);
  CHECK(lines[0] == "# config_hash=" + m["config_hash"].get<std::string>() + " seed=5");
  CHECK(lines[1] == "n,T_n,X_pre,Z_n,X_post");
  CHECK(lines[2].rfind("1,", 0) == 0);
}

TEST_CASE("same config gives byte-identical outputs") {
  TempDir t;
  const auto cfg = config(t, kShot, "seed: 5", "seed: 5\n  replications: 3");
  REQUIRE(run({"simulate", "--config", cfg, "--out", t.dir("a"), "--workers", "1"}).code == 0);
  REQUIRE(run({"simulate", "--config", cfg, "--out", t.dir("b"), "--workers", "3"}).code == 0);
  for (const char* f : {"events_0.csv", "events_2.csv", "manifest.json"})
    CHECK(slurp(t.path / "a" / f) == slurp(t.path / "b" / f));
  REQUIRE(run({"simulate", "--config", cfg, "--out", t.dir("c"), "--seed", "6"}).code == 0);
  CHECK(slurp(t.path / "a" / "events_0.csv") != slurp(t.path / "c" / "events_0.csv"));
}

TEST_CASE("exit codes") {
  TempDir t;
  const auto missing = run({"simulate", "--config", config(t, kShot, ", alpha: 2", ""), "--out", t.dir("m")});
  CHECK(missing.code == kExitConfig);
  CHECK(missing.err.find("alpha") != std::string::npos);

  CHECK(run({"simulate", "--config", t.dir("nope.yaml")}).code == kExitConfig);

  const char* invalid = R"(
model:
  expression: {drift: "-x", rate: "1", jumps: {family: exp_positive, rate: 1}, zeros: [0.5]}
run: {x0: 0, stop: {n_events: 10}}
)";
  CHECK(run({"simulate", "--config", t.write("bad.yaml", invalid), "--out", t.dir("v")}).code == kExitModel);

  const char* stuck = R"(
model:
  expression: {drift: "1", rate: "0", jumps: {family: exp_positive, rate: 1}, working_interval: [-10, 10]}
run: {x0: 0, stop: {n_events: 10}}
)";
  const auto rt = run({"simulate", "--config", t.write("stuck.yaml", stuck), "--out", t.dir("s")});
  CHECK(rt.code == kExitRuntime);

  CHECK(run({"nonsense"}).code == kExitUsage);
  CHECK(run({"simulate"}).code == kExitUsage);
}

TEST_CASE("rice table is CSV with the declared header and rejects zeros of the drift") {
  TempDir t;
  const auto cfg = config(t, kShot, "{n_events: 2000}", "{n_cycles: 2000, level: 0.5}");
  REQUIRE(run({"rice", "--config", cfg, "--out", t.dir("r")}).code == 0);
  const auto lines = lines_of(slurp(t.path / "r" / "rice.csv"));
  REQUIRE(lines.size() == 4);
  CHECK(lines[0].rfind("# config_hash=", 0) == 0);
  CHECK(lines[1] == "u,nu,nu_se,p,p_se,mu_p,residual,relative_error,n");
  for (std::size_t i = 2; i < lines.size(); ++i) {
    std::istringstream is(lines[i]);
    std::vector<double> cells;
    for (std::string c; std::getline(is, c, ',');) cells.push_back(std::stod(c));
    REQUIRE(cells.size() == 9);
    CHECK(std::abs(cells[6]) < 6.0);
  }
  const auto zero = run({"rice", "--config", config(t, kShot, "density_grid: [0.5, 1.0]", "density_grid: [0.0, 1.0]"),
                         "--out", t.dir("z")});
  CHECK(zero.code == kExitConfig);
  CHECK(zero.err.find("D_mu") != std::string::npos);
  CHECK(zero.err.find("analysis.density_grid") != std::string::npos);
}

TEST_CASE("rho and limit print rho and w") {
  TempDir t;
  const char* up = R"(
model: {catalog: updrift_negjumps, params: {lambda0: 2, alpha: 1}}
run: {x0: 0, stop: {n_events: 10}}
)";
  const auto r = run({"limit", "--config", t.write("up.yaml", up), "--out", t.dir("u")});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("rho=0.5") != std::string::npos);
  CHECK(r.out.find("w=1") != std::string::npos);
  const auto j = nlohmann::json::parse(slurp(t.path / "u" / "limit.json"));
  CHECK(j["w"].get<double>() == doctest::Approx(1.0).epsilon(1e-10));

  const char* th = R"(
model: {catalog: tanh_drift, params: {lambda0: 1, alpha: 2}}
run: {x0: 2, stop: {n_cycles: 3000, level: 2}}
analysis: {base_level: 2, targets: [4], window: 2}
)";
  const auto tr = run({"limit", "--config", t.write("th.yaml", th), "--out", t.dir("t")});
  REQUIRE(tr.code == 0);
  CHECK(tr.out.find("rho=0.5 w=absent") != std::string::npos);
  CHECK(tr.out.find("4,gamma,") != std::string::npos);
  const auto rr = run({"rho", "--config", t.write("th.yaml", th), "--out", t.dir("t2")});
  CHECK(rr.out == "scenario=S3 rho=0.5 w=absent\n");
}

TEST_CASE("crossings, cycles and ergodicity write their files") {
  TempDir t;
  const auto cfg = config(t, kShot, "{n_events: 2000}", "{n_cycles: 3000, level: 0.5}");
  const auto c = run({"crossings", "--config", cfg, "--out", t.dir("o")});
  REQUIRE(c.code == 0);
  CHECK(c.out.find("balance holds") != std::string::npos);
  CHECK(lines_of(slurp(t.path / "o" / "crossings.csv"))[1] == "u,kind,estimate,stderr,n");
  REQUIRE(run({"cycles", "--config", cfg, "--out", t.dir("o")}).code == 0);
  CHECK(fs::exists(t.path / "o" / "cycles.csv"));
  CHECK(fs::exists(t.path / "o" / "cycle_histogram.csv"));
  const auto e = run({"ergodicity", "--config", cfg, "--out", t.dir("o")});
  REQUIRE(e.code == 0);
  CHECK(fs::exists(t.path / "o" / "ergodicity.txt"));
  const auto j = nlohmann::json::parse(slurp(t.path / "o" / "ergodicity.json"));
  CHECK(j.contains("checks"));
  CHECK(j["config_hash"].get<std::string>().size() == 16);
}

TEST_CASE("cpp-sim writes the path and the Laplace table") {
  TempDir t;
  const char* text = R"(
model: {catalog: tanh_drift, params: {lambda0: 1, alpha: 2}}
run: {x0: 0, stop: {n_events: 10}, seed: 9}
analysis:
  cpp: {horizon: 50, window: 1, windows: 20000}
)";
  const auto r = run({"cpp-sim", "--config", t.write("c.yaml", text), "--out", t.dir("c")});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("rho=0.5 ", 0) == 0);
  CHECK(lines_of(slurp(t.path / "c" / "cpp_path.csv"))[1] == "time,multiplicity");
  const auto lap = lines_of(slurp(t.path / "c" / "cpp_laplace.csv"));
  CHECK(lap.size() == 5);
  CHECK(fs::exists(t.path / "c" / "cpp_window_pmf.csv"));
}
