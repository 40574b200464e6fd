#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mbpa/driver.hpp"
#include "mbpa/run_config.hpp"

using namespace mbpa;

namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("mbpa-cli-" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(MBPA_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

RunConfig tiny_continual(const fs::path& out) {
  RunConfig cfg = parse_config("{}");
  cfg.out_dir = out.string();
  cfg.eval_subset = 80;
  cfg.dataset.synthetic.dim = 12;
  cfg.dataset.synthetic.classes = 4;
  cfg.dataset.synthetic.samples_per_class = 120;
  cfg.model.hidden = {24};
  cfg.model.epochs = 2.0;
  cfg.continual.num_tasks = 2;
  cfg.continual.train_per_task = 250;
  cfg.continual.test_per_task = 80;
  cfg.adaptation.steps = 3;
  cfg.adaptation.k = 5;
  return cfg;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("execute_run writes metrics, resolved config, and a headline") {
  auto out = temp_dir("run");
  RunConfig cfg = tiny_continual(out);
  RunOutcome outcome = execute_run(cfg);
  CHECK(outcome.headline.find("continual") != std::string::npos);
  CHECK(fs::exists(out / "records.jsonl"));
  CHECK(fs::exists(out / "metrics.csv"));
  CHECK(fs::exists(out / "config.resolved.json"));

  // The echoed config reproduces the run configuration exactly.
  RunConfig echoed = parse_config(slurp(out / "config.resolved.json"));
  CHECK(to_json_string(echoed) == to_json_string(cfg));
  fs::remove_all(out);
}

TEST_CASE("two invocations of the same config produce byte-identical metrics") {
  auto out1 = temp_dir("det1");
  auto out2 = temp_dir("det2");
  RunConfig cfg1 = tiny_continual(out1);
  RunConfig cfg2 = tiny_continual(out2);
  cfg1.threads = 1;
  cfg2.threads = 4;
  execute_run(cfg1);
  execute_run(cfg2);
  CHECK(slurp(out1 / "records.jsonl") == slurp(out2 / "records.jsonl"));
  CHECK(slurp(out1 / "metrics.csv") == slurp(out2 / "metrics.csv"));
  fs::remove_all(out1);
  fs::remove_all(out2);
}

TEST_CASE("repeats write per-run directories and a summary") {
  auto out = temp_dir("repeats");
  RunConfig cfg = tiny_continual(out);
  cfg.repeats = 2;
  RunOutcome outcome = execute_run(cfg);
  CHECK(outcome.notes.size() == 2);
  CHECK(fs::exists(out / "run_0" / "metrics.csv"));
  CHECK(fs::exists(out / "run_1" / "metrics.csv"));
  CHECK(fs::exists(out / "repeats_summary.json"));
  CHECK(outcome.headline.find("stddev") != std::string::npos);
  fs::remove_all(out);
}

TEST_CASE("demo regime writes the five-column curve with grid-length rows") {
  auto out = temp_dir("demo");
  RunConfig cfg = parse_config(R"({"regime": "regression-demo",
                                   "regression": {"n_points": 32, "grid_points": 41,
                                                  "epochs": 50}})");
  cfg.out_dir = out.string();
  execute_run(cfg);
  std::string csv = slurp(out / "regression_demo.csv");
  CHECK(csv.rfind("x,y_true,y_parametric,y_attention,y_mbpa\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 42);  // header + grid rows
  fs::remove_all(out);
}

TEST_CASE("sweep regime writes one row per axis value") {
  auto out = temp_dir("sweep");
  RunConfig cfg = parse_config(R"({
    "regime": "sweep",
    "eval_subset": 60,
    "dataset": {"synthetic": {"dim": 12, "classes": 6, "samples_per_class": 60, "sigma": 0.25}},
    "model": {"hidden": [16], "pretrain_epochs": 2},
    "incremental": {"checkpoints": [0.5, 1.0]},
    "sweep": {"axis": "k", "values": [1, 5], "regime": "incremental"}
  })");
  cfg.out_dir = out.string();
  execute_run(cfg);
  std::string csv = slurp(out / "sweep.csv");
  CHECK(csv.rfind("axis_value,top1\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  fs::remove_all(out);
}

TEST_CASE("binary exit codes: success, config error, runtime error") {
  auto out = temp_dir("exit");
  CHECK(run_cli("demo --out " + (out / "ok").string() +
                " --regression.n_points=24 --regression.grid_points=21 "
                "--regression.epochs=30") == 0);
  CHECK(run_cli("run --config /does/not/exist.json") == 1);
  CHECK(run_cli("run --out " + (out / "bad").string() + " --adaptation.alpha_m=-1") == 1);
  // Valid config, missing dataset files at runtime.
  CHECK(run_cli("run --out " + (out / "mnist").string() +
                " --dataset.kind=mnist --dataset.mnist_dir=" + (out / "empty").string()) == 2);
  fs::remove_all(out);
}

TEST_CASE("verify subcommand exits zero and prints one line per check") {
  auto out = temp_dir("verify");
  std::string cmd = std::string(MBPA_CLI_PATH) + " verify --seed 1 > " +
                    (out / "log.txt").string() + " 2>&1";
  fs::create_directories(out);
  int status = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(status) == 0);
  std::string log = slurp(out / "log.txt");
  CHECK(log.find("gradient-oracle") != std::string::npos);
  CHECK(log.find("attention-equivalence") != std::string::npos);
  CHECK(log.find("knn-exactness") != std::string::npos);
  CHECK(log.find("self-regulation") != std::string::npos);
  CHECK(log.find("verification passed") != std::string::npos);
  fs::remove_all(out);
}

}  // TEST_SUITE
