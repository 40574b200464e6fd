#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mbpa/data.hpp"
#include "mbpa/engine.hpp"
#include "mbpa/harness.hpp"

namespace mbpa {

// Full run description. Parsed from a JSON file with flat dotted-key flag
// overrides; unknown keys and out-of-range values are rejected with the key
// path in the message. The resolved config is echoed alongside the outputs.
struct RunConfig {
  std::string regime = "continual";  // continual | incremental | unbalanced |
                                     // regression-demo | sweep
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = hardware concurrency
  std::string out_dir = "out";
  int repeats = 1;
  std::size_t eval_subset = 1000;
  std::vector<std::string> predictors{"parametric", "mbpa", "attention", "mixture",
                                      "mbpa_random"};

  struct Dataset {
    std::string kind = "synthetic";  // synthetic | mnist
    std::string mnist_dir;           // falls back to MBPA_DATA_DIR
    SyntheticSpec synthetic;
  } dataset;

  struct Model {
    std::vector<std::size_t> hidden{100};
    std::string activation = "relu";  // relu | tanh
    std::string optimizer = "adam";   // sgd | adam | rmsprop
    double learning_rate = 1e-3;
    std::size_t batch_size = 32;
    double epochs = 3.0;
    std::size_t pretrain_epochs = 5;
  } model;

  struct Adaptation {
    double alpha_m = 0.1;
    double beta = 0.0;
    int steps = 10;
    int k = 10;
    double epsilon = 1e-3;
    std::string mask = "all";  // all | last_layer
    std::string local_optimizer = "sgd";
    bool fallback = true;
  } adaptation;

  struct Memory {
    std::size_t capacity = 20000;
  } memory;

  struct Mixture {
    double lambda = 0.5;
  } mixture;

  struct Continual {
    int num_tasks = 2;
    std::size_t train_per_task = 2000;
    std::size_t test_per_task = 500;
  } continual;

  struct Incremental {
    std::vector<double> checkpoints{0.1, 0.3, 1.0, 2.0, 3.0};
    double pretrain_fraction = 0.5;
  } incremental;

  struct Unbalanced {
    double starved_fraction = 0.1;
  } unbalanced;

  struct Regression {
    std::size_t n_points = 64;
    double noise_sigma = 0.05;
    std::size_t grid_points = 201;
    bool gap_enabled = true;
    double gap_lo = -0.6;
    double gap_hi = 0.6;
    std::size_t epochs = 400;
    double learning_rate = 0.01;
    // Local-adaptation rate and steps live here because their stable scale
    // is tied to the squared-error loss, unlike the classification regimes.
    double alpha_m = 0.01;
    int steps = 20;
    std::string local_optimizer = "sgd";
  } regression;

  struct Sweep {
    std::string axis = "k";  // memory_capacity | k | alpha_m | steps | lambda
    std::vector<double> values{1, 5, 10, 25, 50};
    std::string regime = "incremental";
  } sweep;
};

using ConfigOverrides = std::vector<std::pair<std::string, std::string>>;

// Parses defaults <- JSON text <- overrides, then validates.
RunConfig parse_config(const std::string& json_text, const ConfigOverrides& overrides = {});
RunConfig parse_config_file(const std::filesystem::path& path,
                            const ConfigOverrides& overrides = {});

// Complete resolved config; parse_config(to_json_string(cfg)) == cfg.
std::string to_json_string(const RunConfig& cfg);

// Converters into the harness parameter objects.
RegimeConfig regime_config(const RunConfig& cfg);
AdaptationConfig adaptation_config(const RunConfig& cfg);
RegressionDemoConfig regression_demo_config(const RunConfig& cfg);
SweepSpec sweep_spec(const RunConfig& cfg);

}  // namespace mbpa
