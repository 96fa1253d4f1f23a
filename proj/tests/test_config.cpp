#include "doctest.h"
#include "pdmp/config.hpp"
#include "pdmp/errors.hpp"

using namespace pdmp;

namespace {

const char* kBase = R"(
version: 1
model:
  catalog: linear_shot_noise
  params: {c: 1, lambda0: 1, alpha: 2}
run:
  x0: 0.5
  stop: {n_events: 1000}
  seed: 3
  workers: 2
output:
  dir: somewhere
)";

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("fnv1a reference values") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
  CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
}

TEST_CASE("catalog config parses") {
  const auto c = parse_config(kBase);
  CHECK(c.model->name == "linear_shot_noise");
  CHECK(c.run.x0 == 0.5);
  CHECK(c.run.stop.kind == StopRule::Kind::n_events);
  CHECK(c.run.stop.count == 1000);
  CHECK(c.run.seed == 3);
  CHECK(c.run.workers == 2);
  CHECK(c.output.dir == "somewhere");
  CHECK(c.hash.size() == 16);
}

TEST_CASE("hash tracks numbers but not workers or output") {
  const auto a = parse_config(kBase);
  std::string other = kBase;
  other.replace(other.find("workers: 2"), 10, "workers: 7");
  other.replace(other.find("dir: somewhere"), 14, "dir: elsewhere");
  CHECK(parse_config(other).hash == a.hash);
  const auto s = parse_config(kBase, 4);
  CHECK(s.run.seed == 4);
  CHECK(s.hash != a.hash);
  std::string moved = kBase;
  moved.replace(moved.find("x0: 0.5"), 7, "x0: 0.6");
  CHECK(parse_config(moved).hash != a.hash);
}

TEST_CASE("config errors name the field") {
  std::string missing = kBase;
  missing.replace(missing.find(", alpha: 2"), 10, "");
  CHECK(error_of(missing).find("alpha") != std::string::npos);

  std::string no_x0 = kBase;
  no_x0.replace(no_x0.find("  x0: 0.5\n"), 10, "");
  CHECK(error_of(no_x0).find("run.x0") != std::string::npos);

  std::string typo = kBase;
  typo.replace(typo.find("seed: 3"), 7, "sed: 3");
  CHECK(error_of(typo).find("run.sed") != std::string::npos);

  std::string bad = kBase;
  bad.replace(bad.find("x0: 0.5"), 7, "x0: abc");
  CHECK(error_of(bad).find("run.x0") != std::string::npos);

  std::string two_stops = kBase;
  two_stops.replace(two_stops.find("{n_events: 1000}"), 16, "{n_events: 1000, horizon: 5}");
  CHECK(error_of(two_stops).find("run.stop") != std::string::npos);

  CHECK(error_of("version: 2\n").find("version") != std::string::npos);
  CHECK(error_of("model: [").find("YAML") != std::string::npos);
}

TEST_CASE("expression models with jump families") {
  const char* text = R"(
model:
  expression:
    drift: "-k * x"
    rate: "1"
    params: {k: 2}
    jumps: {family: exp_negative, rate: 4, scale: 2}
    zeros: [0]
    drift_at_plus: -inf
    rate_at_plus: 1
run:
  x0: 0
  stop: {horizon: 10}
)";
  const auto c = parse_config(text);
  CHECK(c.model_source == "expression");
  CHECK(c.model->mu(1.0) == doctest::Approx(-2.0));
  CHECK(c.model->mean_negative(0.0) == doctest::Approx(0.5));
  CHECK(c.model->mean_positive(0.0) == 0.0);

  std::string bad = text;
  bad.replace(bad.find("exp_negative"), 12, "gaussian");
  CHECK(error_of(bad).find("model.expression.jumps.family") != std::string::npos);

  std::string wrong_zero = text;
  wrong_zero.replace(wrong_zero.find("zeros: [0]"), 10, "zeros: [0.5]");
  CHECK_THROWS_AS(parse_config(wrong_zero), ModelValidationError);
}
