#include "mbpa/driver.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>

#include <json.hpp>

#include "mbpa/rng.hpp"

namespace mbpa {

namespace {

namespace fs = std::filesystem;

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open output file: " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

std::string format_value(double v) { return nlohmann::json(v).dump(); }

fs::path mnist_root(const RunConfig& cfg) {
  if (!cfg.dataset.mnist_dir.empty()) return cfg.dataset.mnist_dir;
  if (const char* env = std::getenv("MBPA_DATA_DIR")) return env;
  throw ConfigError("dataset.mnist_dir: not set and MBPA_DATA_DIR is undefined");
}

std::pair<LabeledDataset, LabeledDataset> load_pools(const RunConfig& cfg, std::uint64_t seed) {
  if (cfg.dataset.kind == "mnist") {
    fs::path root = mnist_root(cfg);
    LabeledDataset train =
        load_idx(root / "train-images-idx3-ubyte", root / "train-labels-idx1-ubyte");
    LabeledDataset test = load_idx(root / "t10k-images-idx3-ubyte", root / "t10k-labels-idx1-ubyte");
    return {std::move(train), std::move(test)};
  }
  SyntheticSpec spec = cfg.dataset.synthetic;
  if (spec.seed == 0) spec.seed = derive_seed(seed, stream_id("data"));
  LabeledDataset pool = gen_synthetic(spec);
  // A quarter of the pool becomes the held-out test set.
  std::size_t n_test = std::max<std::size_t>(1, pool.size() / 4);
  auto [test, train] = split_dataset(pool, n_test, derive_seed(seed, stream_id("test-split")));
  return {std::move(train), std::move(test)};
}

TaskStream build_stream(const RunConfig& cfg, const std::string& regime, std::uint64_t seed) {
  auto [train_pool, test_pool] = load_pools(cfg, seed);
  if (regime == "continual") {
    return make_permuted_stream(train_pool, test_pool,
                                static_cast<std::size_t>(cfg.continual.num_tasks),
                                cfg.continual.train_per_task, cfg.continual.test_per_task, seed);
  }
  if (regime == "incremental")
    return make_incremental_stream(train_pool, test_pool, cfg.incremental.pretrain_fraction, seed);
  if (regime == "unbalanced")
    return make_unbalanced_stream(train_pool, test_pool, cfg.incremental.pretrain_fraction,
                                  cfg.unbalanced.starved_fraction, seed);
  throw ConfigError("regime: cannot build a task stream for '" + regime + "'");
}

std::string summary_predictor(const RunConfig& cfg) {
  for (const auto& p : cfg.predictors)
    if (p == "mbpa") return p;
  return cfg.predictors.front();
}

struct SingleRun {
  std::string headline;
  double value = 0.0;
};

SingleRun run_once(const RunConfig& cfg, std::uint64_t seed, const fs::path& out) {
  RunConfig run_cfg = cfg;
  run_cfg.seed = seed;
  RegimeConfig rc = regime_config(run_cfg);

  SingleRun res;
  if (cfg.regime == "regression-demo") {
    RegressionCurve curve = run_regression_demo(regression_demo_config(run_cfg));
    write_text(out / "regression_demo.csv", curve_to_csv(curve));
    double mse = 0.0;
    for (std::size_t i = 0; i < curve.x.size(); ++i) {
      double d = curve.y_mbpa[i] - curve.y_true[i];
      mse += d * d;
    }
    mse /= static_cast<double>(curve.x.size());
    res.value = mse;
    res.headline = "regression-demo: grid mse[mbpa]=" + format_value(mse);
    return res;
  }

  if (cfg.regime == "sweep") {
    TaskStream stream = build_stream(run_cfg, cfg.sweep.regime, seed);
    std::vector<SweepPoint> points = run_sweep(sweep_spec(run_cfg), stream, rc);
    std::string csv = "axis_value,top1\n";
    std::string jsonl;
    for (const auto& p : points) {
      csv += format_value(p.value) + "," + format_value(p.summary) + "\n";
      jsonl += nlohmann::json{{"axis", cfg.sweep.axis},
                              {"value", p.value},
                              {"top1", p.summary}}
                   .dump() +
               "\n";
    }
    write_text(out / "sweep.csv", csv);
    write_text(out / "sweep.jsonl", jsonl);
    res.value = points.back().summary;
    res.headline = "sweep over " + cfg.sweep.axis + ": final top1=" + format_value(res.value);
    return res;
  }

  TaskStream stream = build_stream(run_cfg, cfg.regime, seed);
  std::vector<EvalRecord> records;
  std::string split;
  if (cfg.regime == "continual") {
    records = run_continual(stream, rc);
    split = "all";
  } else if (cfg.regime == "incremental") {
    records = run_incremental(stream, rc);
    split = "novel";
  } else {
    records = run_unbalanced(stream, rc);
    split = "starved";
  }
  write_text(out / "records.jsonl", records_to_jsonl(records));
  write_text(out / "metrics.csv", records_to_csv(records));
  std::string pred = summary_predictor(cfg);
  res.value = final_top1(records, pred, split);
  res.headline =
      cfg.regime + ": final top1[" + pred + ", " + split + "]=" + format_value(res.value);
  return res;
}

}  // namespace

RunOutcome execute_run(const RunConfig& cfg) {
  fs::path out_root(cfg.out_dir);
  fs::create_directories(out_root);
  write_text(out_root / "config.resolved.json", to_json_string(cfg));

  RunOutcome outcome;
  if (cfg.repeats <= 1) {
    SingleRun r = run_once(cfg, cfg.seed, out_root);
    outcome.headline = r.headline;
    outcome.headline_value = r.value;
    return outcome;
  }

  std::vector<double> values;
  for (int r = 0; r < cfg.repeats; ++r) {
    std::uint64_t seed = r == 0 ? cfg.seed : derive_seed(cfg.seed, stream_id("repeat"), r);
    SingleRun run = run_once(cfg, seed, out_root / ("run_" + std::to_string(r)));
    values.push_back(run.value);
    outcome.notes.push_back("repeat " + std::to_string(r) + ": " + run.headline);
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  double stddev = std::sqrt(var);

  nlohmann::json summary{{"repeats", cfg.repeats},
                         {"values", values},
                         {"mean", mean},
                         {"stddev", stddev}};
  write_text(out_root / "repeats_summary.json", summary.dump(2) + "\n");
  outcome.headline_value = mean;
  outcome.headline = cfg.regime + ": mean=" + format_value(mean) +
                     " stddev=" + format_value(stddev) + " over " +
                     std::to_string(cfg.repeats) + " repeats";
  return outcome;
}

}  // namespace mbpa
