#include <algorithm>
#include <filesystem>
#include <fstream>

#include <catch2/catch_amalgamated.hpp>

#include "ntrust/events.hpp"
#include "ntrust/harness.hpp"

using namespace ntrust;

namespace {

json minimal_trace_config() {
  return json{{"experiment", "trace"},
              {"problem", "example"},
              {"algorithm", "tr1ne"},
              {"config", {{"q", 1}, {"epsilon", {0.01}}, {"budget", 20}}},
              {"noise", {{"kind", "none"}}},
              {"replications", 2},
              {"seed", 5}};
}

std::filesystem::path fresh_dir(const std::string& leaf) {
  const std::filesystem::path p = std::filesystem::temp_directory_path() / leaf;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("summary statistics are permutation invariant") {
  std::vector<double> v{5.0, 1.0, 4.0, 2.0, 3.0, 9.0, 0.5};
  const SummaryStats a = aggregate(v);
  std::reverse(v.begin(), v.end());
  const SummaryStats b = aggregate(v);
  REQUIRE(a.mean == b.mean);
  REQUIRE(a.median == b.median);
  REQUIRE(a.q25 == b.q25);
  REQUIRE(a.q75 == b.q75);
  REQUIRE(a.min == b.min);
  REQUIRE(a.max == b.max);
  REQUIRE(a.min == 0.5);
  REQUIRE(a.max == 9.0);
}

TEST_CASE("spec hash ignores key order and tracks content") {
  const json a{{"alpha", 1}, {"beta", {{"x", 2.5}, {"y", "s"}}}};
  const json b{{"beta", {{"y", "s"}, {"x", 2.5}}}, {"alpha", 1}};
  REQUIRE(spec_hash_hex(a) == spec_hash_hex(b));
  json c = a;
  c["alpha"] = 2;
  REQUIRE(spec_hash_hex(a) != spec_hash_hex(c));
  REQUIRE(spec_hash_hex(a).size() == 16);
}

TEST_CASE("experiment specs round-trip through their effective form") {
  const ExperimentSpec s = parse_experiment(minimal_trace_config());
  const ExperimentSpec again = parse_experiment(s.raw);
  REQUIRE(s.raw == again.raw);
  REQUIRE(spec_hash_hex(s.raw) == spec_hash_hex(again.raw));
  REQUIRE(s.algorithm == "tr1ne");
  REQUIRE(s.config.q == 1);
  REQUIRE(s.replications == 2);
}

TEST_CASE("spec validation names the offending field") {
  json bad = minimal_trace_config();
  bad["problem"] = "nonexistent";
  REQUIRE_THROWS_WITH(parse_experiment(bad), Catch::Matchers::ContainsSubstring("problem"));

  bad = minimal_trace_config();
  bad["config"]["eta"] = 1.5;
  REQUIRE_THROWS_WITH(parse_experiment(bad), Catch::Matchers::ContainsSubstring("eta must be in (0,1)"));

  bad = minimal_trace_config();
  bad["algorithm"] = "tr1ne";
  bad["config"]["q"] = 2;
  bad["config"]["epsilon"] = {0.01, 0.01};
  REQUIRE_THROWS_AS(parse_experiment(bad), std::invalid_argument);

  bad = minimal_trace_config();
  bad["noise"] = {{"kind", "subsampled"}, {"batch_value", 8}, {"batch_gradient", 8}};
  bad["algorithm"] = "trqne";
  bad["config"]["q"] = 2;
  bad["config"]["epsilon"] = {0.01, 0.01};
  REQUIRE_THROWS_AS(parse_experiment(bad), std::invalid_argument);
}

TEST_CASE("trace experiment writes one csv per replication plus summaries") {
  const std::filesystem::path out = fresh_dir("ntrust_trace_exp_test");
  const ExperimentResult res = run_experiment(parse_experiment(minimal_trace_config()), out.string());
  REQUIRE(res.exit_code == 0);
  REQUIRE(std::filesystem::exists(res.run_dir + "/trace_rep0000.csv"));
  REQUIRE(std::filesystem::exists(res.run_dir + "/trace_rep0001.csv"));
  REQUIRE(std::filesystem::exists(res.run_dir + "/summary.json"));
  REQUIRE(std::filesystem::exists(res.run_dir + "/manifest.json"));

  // The trace header is the fixed public schema.
  std::ifstream csv(res.run_dir + "/trace_rep0000.csv");
  std::string header;
  std::getline(csv, header);
  REQUIRE(header == trace_csv_header());
  REQUIRE(header.rfind("k,", 0) == 0);

  // The run directory is named by the spec hash, so a repeat run lands in
  // the same place with identical bytes.
  const ExperimentResult res2 = run_experiment(parse_experiment(minimal_trace_config()), out.string());
  REQUIRE(res2.run_dir == res.run_dir);
}

TEST_CASE("event flags on a short exact run are all favorable") {
  const json doc = minimal_trace_config();
  const ExperimentSpec s = parse_experiment(doc);
  const Benchmark b = benchmark_by_name("example");
  const NoisyOracle oracle(b.oracle, NoiseModel{}, 9, b.finite_sum);
  Trace t = run_tr1ne(s.config, oracle, b.x0);
  detect_events(t, b.oracle, s.config);
  for (const IterationRecord& rec : t.records) {
    REQUIRE(rec.events.computed);
    REQUIRE(rec.events.m);
    REQUIRE(rec.events.f);
    REQUIRE(rec.events.e);
  }
}
