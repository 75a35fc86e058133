#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "orrw/error.hpp"
#include "orrw/experiment.hpp"

using namespace orrw;
using nlohmann::json;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("orrw_exp_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("config normalization") {
  const auto cfg = normalize_config({{"command", "variance"}, {"d", 6}, {"a", 0.1}});
  CHECK(cfg.at("n") == 1000);
  CHECK(cfg.at("t") == json({1, 10, 100}));
  CHECK(cfg.at("epsilon").get<double>() == doctest::Approx(1.0 / 6e4));
  CHECK_THROWS_AS(normalize_config({{"command", "variance"}, {"bogus", 1}}), ConfigError);
  CHECK_THROWS_AS(normalize_config({{"command", "nope"}}), ConfigError);
  CHECK_THROWS_AS(normalize_config({{"d", 2}}), ConfigError);
  CHECK_THROWS_AS(normalize_config({{"command", "simulate"}, {"steps", -3}}), ConfigError);
  CHECK_THROWS_AS(normalize_config({{"command", "simulate"}, {"steps", "ten"}}), ConfigError);
  CHECK_THROWS_AS(normalize_config({{"command", "simulate"}, {"a", -1.0}}), ConfigError);
  CHECK_THROWS_AS(normalize_config({{"command", "simulate"}, {"d", 0}}), ConfigError);
  CHECK_THROWS_AS(normalize_config({{"command", "demon"}, {"strategy", "oracle"}}), ConfigError);
  CHECK_THROWS_AS(normalize_config(json::array()), ConfigError);
}

TEST_CASE("presets fill in and explicit keys win") {
  const auto cfg = normalize_config({{"command", "capacity"}, {"preset", "tiny-exact"}});
  CHECK(cfg.at("a").get<double>() == 1.0);
  CHECK(cfg.at("exact") == true);
  CHECK(cfg.at("n") == 100000);
  const auto over = normalize_config({{"command", "capacity"}, {"preset", "tiny-exact"}, {"n", 10}});
  CHECK(over.at("n") == 10);
  CHECK_THROWS_AS(normalize_config({{"command", "capacity"}, {"preset", "huge"}}), ConfigError);
}

TEST_CASE("config hash ignores threads and output directory only") {
  const auto a = normalize_config({{"command", "simulate"}, {"threads", 1}, {"out_dir", "x"}});
  const auto b = normalize_config({{"command", "simulate"}, {"threads", 8}, {"out_dir", "y"}});
  const auto c = normalize_config({{"command", "simulate"}, {"seed", 1}});
  const auto d = normalize_config({{"command", "simulate"}, {"a", 0}});
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a) != config_hash(c));
  CHECK(config_hash(a) == config_hash(d));
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("a run writes its artifacts and manifest") {
  const auto dir = scratch("sim");
  const auto out = run_experiment({{"command", "simulate"}, {"d", 2}, {"a", 1}, {"steps", 100}, {"seed", 7}},
                                  dir.string());
  CHECK(out.exit_code == 0);
  for (const char* f : {"results.ndjson", "summary.csv", "manifest.json", "trajectory.bin", "trajectory.json"}) {
    CHECK(std::filesystem::exists(dir / f));
  }
  const auto manifest = json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest.at("tool_version") == kToolVersion);
  CHECK(manifest.at("config_hash") == out.summary.at("config_hash"));
  for (const auto& [name, sum] : manifest.at("outputs").items()) CHECK(sha256_hex(slurp(dir / name)) == sum);
  const auto rec = json::parse(slurp(dir / "results.ndjson"));
  for (const char* k : {"op", "params", "value", "witness", "config_hash", "master_seed", "n", "wall_time"}) {
    CHECK(rec.contains(k));
  }
  const auto first = slurp(dir / "trajectory.bin");
  run_experiment({{"command", "simulate"}, {"d", 2}, {"a", 1}, {"steps", 100}, {"seed", 7}}, dir.string());
  CHECK(slurp(dir / "trajectory.bin") == first);
  std::filesystem::remove_all(dir);
}

TEST_CASE("assertion gates set exit code 3") {
  const auto dir = scratch("gate");
  const auto out = run_experiment(
      {{"command", "clt"}, {"d", 2}, {"T", 100}, {"n", 200}, {"ks_max", 0.0}, {"assert", true}}, dir.string());
  CHECK(out.exit_code == 3);
  CHECK_FALSE(out.summary.at("gate_failures").empty());
  const auto quiet = run_experiment({{"command", "clt"}, {"d", 2}, {"T", 100}, {"n", 200}, {"ks_max", 0.0}},
                                    dir.string());
  CHECK(quiet.exit_code == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("budget guard") {
  CHECK_THROWS_AS(run_experiment({{"command", "variance"}, {"t", {1000000}}, {"n", 1000000}}, scratch("b").string()),
                  BudgetExceeded);
  CHECK_THROWS_AS(run_experiment({{"command", "oracle"}, {"oracle", "enumerate"}, {"T", 40}}, scratch("b").string()),
                  BudgetExceeded);
}

TEST_CASE("every command runs at small size") {
  const std::vector<json> configs{
      {{"command", "simulate"}, {"steps", 50}, {"source", "envelopes"}},
      {{"command", "variance"}, {"t", {1, 5}}, {"n", 50}},
      {{"command", "capacity"}, {"preset", "tiny-exact"}, {"n", 2000}},
      {{"command", "capacity"}, {"a", 1}, {"avoid", {{0, 0}, {1, 0}}}, {"capvol", true}, {"n", 100}},
      {{"command", "relaxed"}, {"a", 1}, {"steps", 300}, {"R", 4}, {"t", {0, 100, 300}}},
      {{"command", "heavy"}, {"a", 1}, {"steps", 300}, {"R", 4}},
      {{"command", "demon"}, {"a", 1}, {"inside_steps", 50}, {"epsilon", 2.0}},
      {{"command", "demon"}, {"a", 1}, {"strategy", "replay"}, {"n", 20}},
      {{"command", "demon"}, {"a", 1}, {"inside_steps", 100}, {"ratio_times", {0, 50}}, {"ratio_n", 50}},
      {{"command", "concat"}, {"t1", 20}, {"t2", 20}, {"n", 20}},
      {{"command", "tails"}, {"T", 50}, {"n", 20}},
      {{"command", "h1"}, {"T", 4}, {"n", 2000}},
      {{"command", "clt"}, {"T", 50}, {"n", 50}},
      {{"command", "phase-scan"}, {"a_grid", {0, 1}}, {"t", {10, 100}}, {"n", 10}},
      {{"command", "return"}, {"d", 3}, {"t", {0, 5}}, {"horizon", 50}, {"n", 20}},
      {{"command", "oracle"}, {"oracle", "moments"}, {"d", 1}, {"a", 1}, {"T", 2}},
      {{"command", "oracle"}, {"oracle", "exit-edge"}, {"d", 1}, {"L", 2}},
      {{"command", "oracle"}, {"oracle", "green"}, {"d", 3}, {"radius", 5}},
      {{"command", "oracle"}, {"oracle", "escape"}, {"a", 1}, {"avoid", {{0, 0}}}},
      {{"command", "oracle"}, {"oracle", "enumerate"}, {"T", 3}},
      {{"command", "selftest"}},
  };
  const auto dir = scratch("all");
  for (const auto& c : configs) {
    CAPTURE(c.dump());
    const auto out = run_experiment(c, dir.string());
    CHECK(out.exit_code == 0);
    CHECK(out.summary.at("records").get<int>() > 0);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("oracle command reports exact values") {
  const auto dir = scratch("oracle");
  run_experiment({{"command", "oracle"}, {"oracle", "moments"}, {"d", 1}, {"a", 1}, {"T", 2}}, dir.string());
  const auto rec = json::parse(slurp(dir / "results.ndjson"));
  CHECK(rec.at("value").at("value").get<double>() == doctest::Approx(4.0 / 3));
  run_experiment({{"command", "oracle"}, {"oracle", "exit-edge"}, {"d", 1}, {"L", 2}}, dir.string());
  const auto edge = json::parse(slurp(dir / "results.ndjson"));
  CHECK(edge.at("value").at("value").at("p").get<double>() == doctest::Approx(1.0 / 6));
  std::filesystem::remove_all(dir);
}
