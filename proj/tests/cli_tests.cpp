#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <catch2/catch_amalgamated.hpp>

#include "ntrust/harness.hpp"

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
  const char* p = std::getenv("NTRUST_CLI_PATH");
  REQUIRE(p != nullptr);
  return p;
}

struct CommandResult {
  int code = -1;
  std::string output;
};

CommandResult run_cli(const std::string& args, const fs::path& dir) {
  const fs::path log = dir / "out.log";
  const std::string cmd = "\"" + cli_path() + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  CommandResult res;
  if (status != -1 && WIFEXITED(status)) res.code = WEXITSTATUS(status);
  std::ifstream in(log);
  std::ostringstream ss;
  ss << in.rdbuf();
  res.output = ss.str();
  return res;
}

fs::path fresh_dir(const std::string& leaf) {
  const fs::path p = fs::temp_directory_path() / leaf;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string write_config(const fs::path& dir, const ntrust::json& doc) {
  const fs::path p = dir / "config.json";
  std::ofstream out(p);
  out << doc.dump(2) << "\n";
  return p.string();
}

ntrust::json base_config() {
  return ntrust::json{{"experiment", "trace"},
                      {"problem", "example"},
                      {"algorithm", "tr1ne"},
                      {"config", {{"q", 1}, {"epsilon", {0.01}}, {"budget", 15}}},
                      {"noise", {{"kind", "none"}}},
                      {"replications", 1},
                      {"seed", 3}};
}

}  // namespace

TEST_CASE("valid minimal config runs and writes a trace") {
  const fs::path dir = fresh_dir("ntrust_cli_ok");
  const std::string cfg = write_config(dir, base_config());
  const CommandResult res = run_cli("run --config \"" + cfg + "\" --out \"" + (dir / "runs").string() + "\"", dir);
  INFO(res.output);
  REQUIRE(res.code == 0);
  bool found_trace = false;
  for (const auto& run_dir : fs::directory_iterator(dir / "runs"))
    found_trace = found_trace || fs::exists(run_dir.path() / "trace_rep0000.csv");
  REQUIRE(found_trace);
}

TEST_CASE("out-of-range eta is rejected with a named message") {
  const fs::path dir = fresh_dir("ntrust_cli_eta");
  const std::string cfg = write_config(dir, base_config());
  const CommandResult res =
      run_cli("run --config \"" + cfg + "\" --override config.eta=1.5 --out \"" + (dir / "runs").string() + "\"", dir);
  REQUIRE(res.code == 2);
  REQUIRE(res.output.find("eta must be in (0,1)") != std::string::npos);
}

TEST_CASE("initial radius at or below the tolerance is rejected") {
  const fs::path dir = fresh_dir("ntrust_cli_r0");
  const std::string cfg = write_config(dir, base_config());
  const CommandResult res = run_cli(
      "run --config \"" + cfg + "\" --override config.r0=1e-9 --out \"" + (dir / "runs").string() + "\"", dir);
  REQUIRE(res.code == 2);
  REQUIRE(res.output.find("r0") != std::string::npos);
}

TEST_CASE("unknown problem id is rejected with a named message") {
  const fs::path dir = fresh_dir("ntrust_cli_problem");
  ntrust::json doc = base_config();
  doc["problem"] = "does_not_exist";
  const std::string cfg = write_config(dir, doc);
  const CommandResult res = run_cli("run --config \"" + cfg + "\" --out \"" + (dir / "runs").string() + "\"", dir);
  REQUIRE(res.code == 2);
  REQUIRE(res.output.find("problem") != std::string::npos);
}

TEST_CASE("missing config file is a validation failure") {
  const fs::path dir = fresh_dir("ntrust_cli_missing");
  const CommandResult res = run_cli("run --config \"" + (dir / "nope.json").string() + "\"", dir);
  REQUIRE(res.code == 2);
}

TEST_CASE("unknown verify suite exits with the validation code") {
  const fs::path dir = fresh_dir("ntrust_cli_suite");
  const CommandResult res = run_cli("verify not-a-suite --out \"" + (dir / "runs").string() + "\"", dir);
  REQUIRE(res.code == 2);
  REQUIRE(res.output.find("unknown suite") != std::string::npos);
}

TEST_CASE("seed and replication flags override the config") {
  const fs::path dir = fresh_dir("ntrust_cli_flags");
  const std::string cfg = write_config(dir, base_config());
  const CommandResult res = run_cli(
      "run --config \"" + cfg + "\" --seed 99 --replications 2 --out \"" + (dir / "runs").string() + "\"", dir);
  INFO(res.output);
  REQUIRE(res.code == 0);
  bool found_second = false;
  for (const auto& run_dir : fs::directory_iterator(dir / "runs")) {
    found_second = found_second || fs::exists(run_dir.path() / "trace_rep0001.csv");
    if (fs::exists(run_dir.path() / "manifest.json")) {
      std::ifstream in(run_dir.path() / "manifest.json");
      const ntrust::json manifest = ntrust::json::parse(in);
      REQUIRE(manifest.at("seed").get<std::int64_t>() == 99);
    }
  }
  REQUIRE(found_second);
}
