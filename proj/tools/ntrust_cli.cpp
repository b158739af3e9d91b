#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ntrust/harness.hpp"
#include "ntrust/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 2;
constexpr int kExitUnhealthy = 3;

// "config.eta" -> "/config/eta"; array positions are plain numbers
// ("config.epsilon.0").
std::string pointer_from_dotted(const std::string& dotted) {
  std::string out;
  out.reserve(dotted.size() + 1);
  out.push_back('/');
  for (char c : dotted) {
    if (c == '.') {
      out.push_back('/');
    } else if (c == '~') {
      out += "~0";
    } else if (c == '/') {
      out += "~1";
    } else {
      out.push_back(c);
    }
  }
  return out;
}

int apply_overrides(ntrust::json& doc, const std::vector<std::string>& overrides) {
  for (const std::string& item : overrides) {
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::fprintf(stderr, "error: override \"%s\" is not of the form key=value\n", item.c_str());
      return kExitInvalid;
    }
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    ntrust::json parsed;
    try {
      parsed = ntrust::json::parse(value);
    } catch (const std::exception&) {
      parsed = value;  // bare words stay strings
    }
    try {
      doc[ntrust::json::json_pointer(pointer_from_dotted(key))] = parsed;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: cannot apply override \"%s\": %s\n", key.c_str(), e.what());
      return kExitInvalid;
    }
  }
  return kExitOk;
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides, const long long* seed,
            const long long* replications, const std::string& out_root) {
  std::ifstream in(config_path);
  if (!in) {
    std::fprintf(stderr, "error: cannot open config file \"%s\"\n", config_path.c_str());
    return kExitInvalid;
  }
  ntrust::json doc;
  try {
    doc = ntrust::json::parse(in);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: config is not valid JSON: %s\n", e.what());
    return kExitInvalid;
  }
  const int rc = apply_overrides(doc, overrides);
  if (rc != kExitOk) return rc;
  if (seed) doc["seed"] = *seed;
  if (replications) doc["replications"] = *replications;

  ntrust::ExperimentSpec spec;
  try {
    spec = ntrust::parse_experiment(doc);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInvalid;
  }
  std::error_code ec;
  std::filesystem::create_directories(out_root, ec);
  ntrust::ExperimentResult result;
  try {
    result = ntrust::run_experiment(spec, out_root);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInvalid;
  }
  std::printf("run directory: %s\n", result.run_dir.c_str());
  for (const std::string& f : result.outputs) std::printf("  %s\n", f.c_str());
  if (result.exit_code == kExitUnhealthy)
    std::fprintf(stderr, "warning: more than half of the replications were censored\n");
  return result.exit_code;
}

int cmd_verify(const std::string& suite, const ntrust::VerifyOptions& opts) {
  std::vector<ntrust::CheckResult> results;
  try {
    results = ntrust::verify_suite(suite, opts);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInvalid;
  }
  bool all_pass = true;
  std::printf("%-28s %-6s %9s  %s\n", "check", "result", "seconds", "detail");
  for (const ntrust::CheckResult& r : results) {
    all_pass = all_pass && r.pass;
    std::printf("%-28s %-6s %9.2f  %s\n", r.name.c_str(), r.pass ? "PASS" : "FAIL", r.seconds, r.detail.c_str());
  }
  return all_pass ? kExitOk : kExitUnhealthy;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Noise-tolerant trust-region experiment runner"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_root = "runs";
  long long seed = 0;
  long long replications = 0;
  std::vector<std::string> overrides;

  CLI::App* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("--config", config_path, "Path to a JSON experiment config")->required();
  CLI::Option* seed_opt = run->add_option("--seed", seed, "Root seed (overrides the config)");
  CLI::Option* reps_opt = run->add_option("--replications", replications, "Replication count (overrides the config)");
  run->add_option("--out", out_root, "Directory that receives the run directory");
  run->add_option("--override", overrides, "Config override key=value, dotted keys reach nested fields");

  std::string suite;
  std::string verify_out = "runs";
  long long verify_seed = 20260817;
  CLI::App* verify = app.add_subcommand("verify", "Run a named acceptance suite");
  verify->add_option("suite", suite, "One of: lemmas, concentration, regions, scaling-q1, scaling-q2, degraded")
      ->required();
  verify->add_option("--out", verify_out, "Directory that receives suite run directories");
  verify->add_option("--seed", verify_seed, "Root seed for randomized checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInvalid;
  }

  if (run->parsed()) {
    const long long* seed_ptr = seed_opt->count() > 0 ? &seed : nullptr;
    const long long* reps_ptr = reps_opt->count() > 0 ? &replications : nullptr;
    return cmd_run(config_path, overrides, seed_ptr, reps_ptr, out_root);
  }
  ntrust::VerifyOptions opts;
  opts.out_root = verify_out;
  opts.seed = static_cast<std::uint64_t>(verify_seed);
  std::error_code ec;
  opts.cli_path = std::filesystem::absolute(std::filesystem::path(argv[0]), ec).string();
  return cmd_verify(suite, opts);
}
