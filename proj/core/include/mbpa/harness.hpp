#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mbpa/data.hpp"
#include "mbpa/engine.hpp"
#include "mbpa/optimizer.hpp"

namespace mbpa {

// A sequence of supervised tasks encoding distributional shift.
struct TaskStream {
  enum class Kind { permuted_tasks, incremental_classes, unbalanced_classes };

  struct Task {
    LabeledDataset train;
    LabeledDataset test;
  };

  Kind kind = Kind::permuted_tasks;
  std::vector<Task> tasks;

  // Class splits for the incremental regimes.
  std::vector<std::int64_t> pretrain_classes;
  std::vector<std::int64_t> novel_classes;
  std::vector<std::int64_t> starved_classes;
};

// Every task is the same train/test subset under a task-specific pixel
// permutation (task 0 keeps the original order).
TaskStream make_permuted_stream(const LabeledDataset& train_pool, const LabeledDataset& test_pool,
                                std::size_t num_tasks, std::size_t train_per_task,
                                std::size_t test_per_task, std::uint64_t seed);

// Task 0: pretraining on a seeded half of the classes. Task 1: training on
// all classes. Both tasks carry the full test set; splits are label-based.
TaskStream make_incremental_stream(const LabeledDataset& train, const LabeledDataset& test,
                                   double pretrain_fraction, std::uint64_t seed);

// As incremental, but a seeded half of the novel classes keeps only
// `starved_fraction` of its training data. Test stays balanced.
TaskStream make_unbalanced_stream(const LabeledDataset& train, const LabeledDataset& test,
                                  double pretrain_fraction, double starved_fraction,
                                  std::uint64_t seed);

struct ModelConfig {
  std::vector<std::size_t> hidden{100};
  Activation activation = Activation::relu;
  Optimizer::Kind optimizer = Optimizer::Kind::adam;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  double epochs = 3.0;  // continual: per task
  std::size_t pretrain_epochs = 5;
  std::uint64_t seed = 1;
};

struct EvalSchedule {
  std::vector<double> checkpoints{0.1, 0.3, 1.0, 2.0, 3.0};  // incremental epoch fractions
  std::size_t eval_subset = 1000;                            // 0 = evaluate everything
  int threads = 0;                                           // 0 = hardware concurrency
  std::vector<std::string> predictors{"parametric", "mbpa", "attention", "mixture",
                                      "mbpa_random"};
};

struct RegimeConfig {
  ModelConfig model;
  AdaptationConfig adapt;
  std::size_t memory_capacity = 10000;
  double mixture_lambda = 0.5;
  EvalSchedule eval;
};

struct EvalRecord {
  int task = 0;
  double epoch = 0.0;
  std::string predictor;
  std::string split;
  double top1 = 0.0;
  double auc_so_far = 0.0;
};

// Trains sequentially on each task; after each task every predictor is
// scored on every seen task's test set. Earlier tasks' training data is
// never revisited.
std::vector<EvalRecord> run_continual(const TaskStream& stream, const RegimeConfig& rc);

// Pretrains on half the classes, then trains the head on all classes with
// evaluations at sub-epoch checkpoints. Works for both incremental and
// unbalanced streams; the latter adds starved/full splits and per-class
// records.
std::vector<EvalRecord> run_incremental(const TaskStream& stream, const RegimeConfig& rc);
std::vector<EvalRecord> run_unbalanced(const TaskStream& stream, const RegimeConfig& rc);

struct RegressionDemoConfig {
  std::size_t n_points = 64;
  double noise_sigma = 0.05;
  bool gap_enabled = true;
  double gap_lo = -0.6;
  double gap_hi = 0.6;
  std::size_t grid_points = 201;
  std::vector<std::size_t> hidden{32, 32};
  double learning_rate = 0.01;
  std::size_t epochs = 400;
  std::size_t batch_size = 16;
  std::uint64_t seed = 1;
  AdaptationConfig adapt{.alpha_m = 0.01, .beta = 0.0, .steps = 20, .k_neighbours = 10};
};

struct RegressionCurve {
  std::vector<double> x, y_true, y_parametric, y_attention, y_mbpa;
};

// Trains a small regression net on the points outside the gap, stores every
// point in memory, and reports all three predictions on a dense grid.
RegressionCurve run_regression_demo(const RegressionDemoConfig& cfg);

struct SweepSpec {
  enum class Axis { memory_capacity, k_neighbours, alpha_m, steps, lambda };
  Axis axis = Axis::k_neighbours;
  std::vector<double> values;
};

struct SweepPoint {
  double value = 0.0;
  double summary = 0.0;  // final headline Top-1 for the regime
};

// One full regime run per axis value, seeds held fixed.
std::vector<SweepPoint> run_sweep(const SweepSpec& sweep, const TaskStream& stream,
                                  const RegimeConfig& base);

// Time-normalized trapezoidal mean of top1 over strictly increasing
// checkpoint times. Throws on unsorted input or fewer than two points.
double compute_auc(std::span<const std::pair<double, double>> points);

// Deterministic text renderings of a record stream.
std::string records_to_csv(std::span<const EvalRecord> records);
std::string records_to_jsonl(std::span<const EvalRecord> records);
std::string curve_to_csv(const RegressionCurve& curve);

// Static-free parallel loop; fn(i) must be independent across indices.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

// Headline metric for a finished record stream (used by the CLI summary and
// the sweep): the final record matching (predictor, split).
double final_top1(std::span<const EvalRecord> records, const std::string& predictor,
                  const std::string& split);

}  // namespace mbpa
