#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "mbpa/harness.hpp"
#include "mbpa/rng.hpp"

using namespace mbpa;

namespace {

LabeledDataset small_clusters(std::size_t dim, std::int64_t classes, std::size_t per_class,
                              double sigma, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.dim = dim;
  spec.classes = classes;
  spec.samples_per_class = per_class;
  spec.sigma = sigma;
  spec.seed = seed;
  return gen_synthetic(spec);
}

RegimeConfig small_config(std::uint64_t seed) {
  RegimeConfig rc;
  rc.model.hidden = {32};
  rc.model.epochs = 2.0;
  rc.model.seed = seed;
  rc.adapt.alpha_m = 0.5;
  rc.adapt.steps = 5;
  rc.adapt.k_neighbours = 5;
  rc.memory_capacity = 5000;
  rc.eval.eval_subset = 150;
  rc.eval.threads = 2;
  return rc;
}

const EvalRecord& find_record(const std::vector<EvalRecord>& records, int task,
                              const std::string& pred, const std::string& split) {
  for (const auto& r : records)
    if (r.task == task && r.predictor == pred && r.split == split) return r;
  throw Error("record not found");
}

const EvalRecord& find_record_at(const std::vector<EvalRecord>& records, int task, double epoch,
                                 const std::string& pred, const std::string& split) {
  for (const auto& r : records)
    if (r.task == task && r.epoch == epoch && r.predictor == pred && r.split == split) return r;
  throw Error("record not found");
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("compute_auc: constants, ramps, and the hand-computed piecewise curve") {
  std::vector<std::pair<double, double>> constant{{0.0, 0.7}, {2.0, 0.7}, {5.0, 0.7}};
  CHECK(compute_auc(constant) == doctest::Approx(0.7).epsilon(1e-15));

  std::vector<std::pair<double, double>> ramp{{0.0, 0.0}, {1.0, 1.0}};
  CHECK(compute_auc(ramp) == doctest::Approx(0.5).epsilon(1e-15));

  std::vector<std::pair<double, double>> curve{{0.0, 0.2}, {1.0, 0.6}, {3.0, 0.6}};
  CHECK(compute_auc(curve) == doctest::Approx(1.6 / 3.0).epsilon(1e-14));

  std::vector<std::pair<double, double>> unsorted{{1.0, 0.2}, {0.5, 0.6}};
  CHECK_THROWS_AS(compute_auc(unsorted), Error);
  std::vector<std::pair<double, double>> single{{1.0, 0.2}};
  CHECK_THROWS_AS(compute_auc(single), Error);
}

TEST_CASE("permuted stream shares the underlying examples across tasks") {
  LabeledDataset pool = small_clusters(8, 3, 60, 0.2, 5);
  auto [test_pool, train_pool] = split_dataset(pool, 60, 77);
  TaskStream stream = make_permuted_stream(train_pool, test_pool, 3, 80, 40, 7);
  REQUIRE(stream.tasks.size() == 3);
  for (const auto& task : stream.tasks) {
    CHECK(task.train.size() == 80);
    CHECK(task.test.size() == 40);
  }
  // Same underlying rows: targets identical, per-row value multisets identical.
  for (std::size_t t = 1; t < 3; ++t) {
    CHECK(stream.tasks[t].train.targets == stream.tasks[0].train.targets);
    for (std::size_t i = 0; i < 5; ++i) {
      std::vector<double> a(stream.tasks[0].train.input(i).begin(),
                            stream.tasks[0].train.input(i).end());
      std::vector<double> b(stream.tasks[t].train.input(i).begin(),
                            stream.tasks[t].train.input(i).end());
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      CHECK(a == b);
    }
  }
}

TEST_CASE("one-task continual run emits parametric and mbpa records") {
  LabeledDataset pool = small_clusters(16, 4, 100, 0.2, 9);
  auto [test_pool, train_pool] = split_dataset(pool, 100, 11);
  TaskStream stream = make_permuted_stream(train_pool, test_pool, 1, 250, 80, 13);
  RegimeConfig rc = small_config(1);
  auto records = run_continual(stream, rc);
  double param = find_record(records, 0, "parametric", "task:0").top1;
  double mbpa = find_record(records, 0, "mbpa", "task:0").top1;
  CHECK(mbpa >= param - 0.02);
}

TEST_CASE("capacity zero degrades every memory predictor to the parametric records") {
  LabeledDataset pool = small_clusters(16, 4, 100, 0.2, 15);
  auto [test_pool, train_pool] = split_dataset(pool, 100, 17);
  TaskStream stream = make_permuted_stream(train_pool, test_pool, 2, 200, 80, 19);
  RegimeConfig rc = small_config(2);
  rc.memory_capacity = 0;
  auto records = run_continual(stream, rc);
  for (const auto& r : records) {
    if (r.predictor == "parametric") continue;
    const auto& base = find_record(records, r.task, "parametric", r.split);
    CHECK(r.top1 == base.top1);
  }
}

TEST_CASE("two permuted tasks: forgetting appears and adaptation recovers some of it") {
  LabeledDataset pool = small_clusters(16, 6, 120, 0.3, 23);
  auto [test_pool, train_pool] = split_dataset(pool, 150, 29);
  TaskStream stream = make_permuted_stream(train_pool, test_pool, 2, 500, 150, 31);
  RegimeConfig rc = small_config(3);
  rc.model.epochs = 3.0;
  rc.adapt.steps = 10;
  auto records = run_continual(stream, rc);
  double before = find_record(records, 0, "parametric", "task:0").top1;
  double after = find_record(records, 1, "parametric", "task:0").top1;
  double adapted = find_record(records, 1, "mbpa", "task:0").top1;
  CHECK(before > after);   // forgetting
  CHECK(adapted > after);  // recovery
}

TEST_CASE("incremental run with three checkpoints and four predictors emits 24 records") {
  LabeledDataset pool = small_clusters(16, 8, 80, 0.25, 37);
  auto [test, train] = split_dataset(pool, 160, 41);
  TaskStream stream = make_incremental_stream(train, test, 0.5, 43);
  RegimeConfig rc = small_config(4);
  rc.eval.checkpoints = {0.1, 1.0, 3.0};
  rc.eval.predictors = {"parametric", "mbpa", "attention", "mixture"};
  auto records = run_incremental(stream, rc);
  CHECK(records.size() == 24);  // 2 splits x 4 predictors x 3 checkpoints
  for (const auto& r : records) {
    CHECK((r.split == "novel" || r.split == "pretrained"));
    CHECK(r.top1 >= 0.0);
    CHECK(r.top1 <= 1.0);
    CHECK(r.auc_so_far >= 0.0);
    CHECK(r.auc_so_far <= 1.0);
  }
}

TEST_CASE("auc_so_far is recomputable from the emitted records") {
  LabeledDataset pool = small_clusters(16, 6, 80, 0.25, 47);
  auto [test, train] = split_dataset(pool, 120, 53);
  TaskStream stream = make_incremental_stream(train, test, 0.5, 59);
  RegimeConfig rc = small_config(5);
  rc.eval.checkpoints = {0.5, 1.0, 2.0};
  rc.eval.predictors = {"parametric", "mbpa"};
  auto records = run_incremental(stream, rc);
  std::map<std::string, std::vector<std::pair<double, double>>> curves;
  for (const auto& r : records) {
    auto& pts = curves[r.predictor + "/" + r.split];
    pts.emplace_back(r.epoch, r.top1);
    double expect = pts.size() < 2 ? r.top1 : compute_auc(pts);
    CHECK(r.auc_so_far == doctest::Approx(expect).epsilon(1e-14));
  }
}

TEST_CASE("mixture endpoints reproduce parametric and attention records") {
  LabeledDataset pool = small_clusters(16, 6, 80, 0.25, 61);
  auto [test, train] = split_dataset(pool, 120, 67);
  TaskStream stream = make_incremental_stream(train, test, 0.5, 71);
  RegimeConfig rc = small_config(6);
  rc.eval.checkpoints = {0.5, 1.0};
  rc.eval.predictors = {"parametric", "attention", "mixture"};

  rc.mixture_lambda = 1.0;
  auto at_one = run_incremental(stream, rc);
  for (const auto& r : at_one)
    if (r.predictor == "mixture")
      CHECK(r.top1 == find_record_at(at_one, r.task, r.epoch, "parametric", r.split).top1);

  rc.mixture_lambda = 0.0;
  auto at_zero = run_incremental(stream, rc);
  for (const auto& r : at_zero)
    if (r.predictor == "mixture")
      CHECK(r.top1 == find_record_at(at_zero, r.task, r.epoch, "attention", r.split).top1);
}

TEST_CASE("unbalanced stream with fraction one reproduces the incremental records") {
  LabeledDataset pool = small_clusters(16, 6, 80, 0.25, 73);
  auto [test, train] = split_dataset(pool, 120, 79);
  RegimeConfig rc = small_config(7);
  rc.eval.checkpoints = {0.5, 1.0};
  rc.eval.predictors = {"parametric", "mbpa"};

  TaskStream inc = make_incremental_stream(train, test, 0.5, 83);
  TaskStream unb = make_unbalanced_stream(train, test, 0.5, 1.0, 83);
  auto a = run_incremental(inc, rc);
  auto b = run_unbalanced(unb, rc);
  for (const auto& r : a) {
    const auto& match = find_record_at(b, r.task, r.epoch, r.predictor, r.split);
    CHECK(match.top1 == r.top1);
  }
}

TEST_CASE("unbalanced runs emit starved, full_novel, and per-class splits") {
  LabeledDataset pool = small_clusters(16, 6, 80, 0.25, 89);
  auto [test, train] = split_dataset(pool, 120, 97);
  TaskStream stream = make_unbalanced_stream(train, test, 0.5, 0.2, 101);
  CHECK(!stream.starved_classes.empty());
  RegimeConfig rc = small_config(8);
  rc.eval.checkpoints = {1.0};
  rc.eval.predictors = {"parametric"};
  auto records = run_unbalanced(stream, rc);
  std::set<std::string> splits;
  for (const auto& r : records) splits.insert(r.split);
  CHECK(splits.count("starved") == 1);
  CHECK(splits.count("full_novel") == 1);
  CHECK(splits.count("class:0") == 1);
}

TEST_CASE("identical configs and seeds give identical record streams") {
  LabeledDataset pool = small_clusters(16, 4, 100, 0.25, 103);
  auto [test_pool, train_pool] = split_dataset(pool, 100, 107);
  TaskStream stream = make_permuted_stream(train_pool, test_pool, 2, 200, 80, 109);
  RegimeConfig rc = small_config(9);
  auto a = run_continual(stream, rc);
  auto b = run_continual(stream, rc);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].predictor == b[i].predictor);
    CHECK(a[i].split == b[i].split);
    CHECK(a[i].top1 == b[i].top1);
    CHECK(a[i].auc_so_far == b[i].auc_so_far);
  }
}

TEST_CASE("thread count does not change the records") {
  LabeledDataset pool = small_clusters(16, 4, 100, 0.25, 113);
  auto [test_pool, train_pool] = split_dataset(pool, 100, 127);
  TaskStream stream = make_permuted_stream(train_pool, test_pool, 2, 200, 80, 131);
  RegimeConfig rc = small_config(10);
  rc.eval.threads = 1;
  auto a = run_continual(stream, rc);
  rc.eval.threads = 4;
  auto b = run_continual(stream, rc);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].top1 == b[i].top1);
}

TEST_CASE("regression demo: attention stays inside the value envelope, adaptation helps") {
  RegressionDemoConfig cfg;
  cfg.n_points = 64;
  cfg.seed = 3;
  RegressionCurve curve = run_regression_demo(cfg);
  REQUIRE(curve.x.size() == cfg.grid_points);

  double v_lo = 1e300, v_hi = -1e300;
  // The memory holds sin(3x) + noise over [-2, 2]; its value range bounds
  // every attention output.
  for (double y : curve.y_attention) {
    v_lo = std::min(v_lo, y);
    v_hi = std::max(v_hi, y);
  }
  CHECK(v_lo >= -1.0 - 4 * cfg.noise_sigma);
  CHECK(v_hi <= 1.0 + 4 * cfg.noise_sigma);

  double mse_param = 0.0, mse_mbpa = 0.0;
  for (std::size_t i = 0; i < curve.x.size(); ++i) {
    mse_param += std::pow(curve.y_parametric[i] - curve.y_true[i], 2);
    mse_mbpa += std::pow(curve.y_mbpa[i] - curve.y_true[i], 2);
  }
  // The gap region is covered by memory but unseen by the trained net.
  CHECK(mse_mbpa <= mse_param);
}

TEST_CASE("single-value sweep equals the plain regime run") {
  LabeledDataset pool = small_clusters(16, 6, 80, 0.25, 137);
  auto [test, train] = split_dataset(pool, 120, 139);
  TaskStream stream = make_incremental_stream(train, test, 0.5, 149);
  RegimeConfig rc = small_config(11);
  rc.eval.checkpoints = {0.5, 1.0};
  rc.eval.predictors = {"parametric", "mbpa"};

  SweepSpec sweep;
  sweep.axis = SweepSpec::Axis::k_neighbours;
  sweep.values = {5.0};
  auto points = run_sweep(sweep, stream, rc);
  REQUIRE(points.size() == 1);

  rc.adapt.k_neighbours = 5;
  auto records = run_incremental(stream, rc);
  CHECK(points[0].summary == final_top1(records, "mbpa", "novel"));
}

TEST_CASE("more neighbours help and then saturate") {
  SyntheticSpec spec;
  spec.dim = 32;
  spec.classes = 20;
  spec.samples_per_class = 150;
  spec.sigma = 0.25;
  spec.seed = 5;
  LabeledDataset pool = gen_synthetic(spec);
  auto [test, train] = split_dataset(pool, 750, 11);
  TaskStream stream = make_incremental_stream(train, test, 0.5, 13);

  RegimeConfig rc;
  rc.model.hidden = {64};
  rc.model.pretrain_epochs = 4;
  rc.model.seed = 5;
  rc.adapt.alpha_m = 0.05;
  rc.adapt.local_optimizer = LocalOpt::rmsprop;
  rc.adapt.steps = 10;
  rc.memory_capacity = 20000;
  rc.eval.checkpoints = {0.5, 1.0, 2.0};
  rc.eval.eval_subset = 300;
  rc.eval.threads = 2;
  rc.eval.predictors = {"parametric", "mbpa"};

  SweepSpec sweep;
  sweep.axis = SweepSpec::Axis::k_neighbours;
  sweep.values = {1, 5, 10, 25, 50};
  auto pts = run_sweep(sweep, stream, rc);
  REQUIRE(pts.size() == 5);
  for (std::size_t i = 1; i < pts.size(); ++i)
    CHECK(pts[i].summary >= pts[i - 1].summary - 0.02);  // non-decreasing up to noise
  CHECK(std::abs(pts[4].summary - pts[3].summary) <= 0.02);  // saturated
}

TEST_CASE("larger memory capacity never hurts the continual result") {
  SyntheticSpec spec;
  spec.dim = 16;
  spec.classes = 6;
  spec.samples_per_class = 200;
  spec.sigma = 0.3;
  spec.seed = 7;
  LabeledDataset pool = gen_synthetic(spec);
  auto [test_pool, train_pool] = split_dataset(pool, 300, 17);
  TaskStream stream = make_permuted_stream(train_pool, test_pool, 2, 600, 200, 19);

  RegimeConfig rc;
  rc.model.hidden = {32};
  rc.model.epochs = 3.0;
  rc.model.seed = 7;
  rc.adapt.alpha_m = 0.5;
  rc.adapt.steps = 10;
  rc.adapt.k_neighbours = 10;
  rc.eval.eval_subset = 200;
  rc.eval.threads = 2;
  rc.eval.predictors = {"parametric", "mbpa"};

  SweepSpec sweep;
  sweep.axis = SweepSpec::Axis::memory_capacity;
  sweep.values = {300, 1200, 2400, 4800};
  auto pts = run_sweep(sweep, stream, rc);
  for (std::size_t i = 1; i < pts.size(); ++i)
    CHECK(pts[i].summary >= pts[i - 1].summary - 0.02);
}

TEST_CASE("record CSV and JSONL renderings are stable and parse-friendly") {
  std::vector<EvalRecord> records{{0, 1.0, "parametric", "task:0", 0.75, 0.75},
                                  {1, 1.0, "mbpa", "all", 0.5, 0.625}};
  std::string csv = records_to_csv(records);
  CHECK(csv == "task,epoch,predictor,split,top1,auc_so_far\n"
               "0,1.0,parametric,task:0,0.75,0.75\n"
               "1,1.0,mbpa,all,0.5,0.625\n");
  std::string jsonl = records_to_jsonl(records);
  CHECK(jsonl.find("\"predictor\":\"mbpa\"") != std::string::npos);
  CHECK(std::count(jsonl.begin(), jsonl.end(), '\n') == 2);
}

}  // TEST_SUITE
