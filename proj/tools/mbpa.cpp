#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mbpa/driver.hpp"
#include "mbpa/run_config.hpp"
#include "mbpa/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitRuntimeError = 2;
constexpr int kExitVerifyFailure = 3;

// Splits "--section.key=value" overrides out of argv before CLI11 sees it.
// Everything else passes through untouched.
std::vector<std::string> extract_overrides(int argc, char** argv,
                                           mbpa::ConfigOverrides& overrides) {
  std::vector<std::string> rest;
  for (int i = 0; i < argc; ++i) {
    std::string arg = argv[i];
    if (arg.rfind("--", 0) == 0) {
      std::size_t eq = arg.find('=');
      std::string key = arg.substr(2, eq == std::string::npos ? std::string::npos : eq - 2);
      if (key.find('.') != std::string::npos) {
        if (eq == std::string::npos) {
          throw mbpa::ConfigError("override " + arg + " needs the form --" + key + "=VALUE");
        }
        overrides.emplace_back(key, arg.substr(eq + 1));
        continue;
      }
    }
    rest.push_back(std::move(arg));
  }
  return rest;
}

int run_verify(std::uint64_t seed, int threads, bool full) {
  auto checks = full ? mbpa::run_all_checks(seed, threads) : mbpa::run_fast_checks(seed, threads);
  bool all_pass = true;
  for (const auto& c : checks) {
    std::cout << mbpa::format_check(c) << "\n";
    all_pass = all_pass && c.pass;
  }
  std::cout << (all_pass ? "verification passed" : "verification FAILED") << "\n";
  return all_pass ? kExitOk : kExitVerifyFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Episodic-memory parameter adaptation experiments"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::uint64_t seed = 0;
  int threads = -1;
  std::string out_dir;
  int repeats = 0;
  bool verify_full = false;

  app.add_option("--config", config_path, "JSON config file");
  auto* seed_opt = app.add_option("--seed", seed, "Master seed");
  auto* threads_opt = app.add_option("--threads", threads, "Worker threads (0 = all cores)");
  auto* out_opt = app.add_option("--out", out_dir, "Output directory");
  auto* repeats_opt = app.add_option("--repeats", repeats, "Rerun with derived seeds");

  auto* cmd_run = app.add_subcommand("run", "Run the regime named in the config");
  auto* cmd_sweep = app.add_subcommand("sweep", "Run a hyperparameter sweep");
  auto* cmd_demo = app.add_subcommand("demo", "Run the 1-D regression demo");
  auto* cmd_verify = app.add_subcommand("verify", "Run the built-in verification suite");
  cmd_verify->add_flag("--full", verify_full, "Include the full regime checks");

  mbpa::ConfigOverrides overrides;
  try {
    auto rest = extract_overrides(argc, argv, overrides);
    std::vector<char*> raw;
    raw.reserve(rest.size());
    for (auto& s : rest) raw.push_back(s.data());
    app.parse(static_cast<int>(raw.size()), raw.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfigError;
  } catch (const mbpa::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }

  if (seed_opt->count()) overrides.emplace_back("seed", std::to_string(seed));
  if (threads_opt->count()) overrides.emplace_back("threads", std::to_string(threads));
  if (out_opt->count()) overrides.emplace_back("out_dir", out_dir);
  if (repeats_opt->count()) overrides.emplace_back("repeats", std::to_string(repeats));

  try {
    mbpa::RunConfig cfg = config_path.empty()
                              ? mbpa::parse_config("", overrides)
                              : mbpa::parse_config_file(config_path, overrides);
    if (cmd_verify->parsed()) return run_verify(cfg.seed, cfg.threads, verify_full);
    if (cmd_sweep->parsed()) cfg.regime = "sweep";
    if (cmd_demo->parsed()) cfg.regime = "regression-demo";
    (void)cmd_run;

    mbpa::RunOutcome outcome = mbpa::execute_run(cfg);
    for (const auto& note : outcome.notes) std::cout << note << "\n";
    std::cout << outcome.headline << "\n";
    return kExitOk;
  } catch (const mbpa::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
}
