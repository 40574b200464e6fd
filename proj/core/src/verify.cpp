#include "mbpa/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <deque>
#include <fstream>
#include <sstream>

#include "mbpa/driver.hpp"
#include "mbpa/harness.hpp"
#include "mbpa/rng.hpp"

namespace mbpa {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

// Random classification context with normalized kernel-style weights.
Context random_context(std::mt19937_64& rng, std::size_t dim, std::size_t num_classes,
                       std::size_t k) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uw(0.05, 1.0);
  std::uniform_int_distribution<std::size_t> ucls(0, num_classes - 1);
  Context ctx;
  ctx.kind = TaskKind::classification;
  ctx.items.resize(k);
  double total = 0.0;
  for (auto& item : ctx.items) {
    item.key.resize(dim);
    for (double& x : item.key) x = normal(rng);
    item.value = static_cast<double>(ucls(rng));
    item.weight = uw(rng);
    total += item.weight;
  }
  for (auto& item : ctx.items) item.weight /= total;
  return ctx;
}

}  // namespace

CheckResult check_gradient_oracle(std::uint64_t seed, FaultInjection faults) {
  auto start = Clock::now();
  CheckResult res{.name = "gradient-oracle", .threshold = 1e-4, .comparator = "<"};

  auto rng = make_rng(derive_seed(seed, stream_id("grad-oracle")));
  std::uniform_int_distribution<std::size_t> ud(4, 12), uh(8, 48), uc(2, 5), uk(1, 8);
  double worst = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    std::size_t d = ud(rng), h = uh(rng), c = uc(rng), k = uk(rng);
    OutputNet net = OutputNet::make_mlp(d, {h}, c, HeadKind::softmax,
                                        inst % 2 ? Activation::tanh : Activation::relu, rng());
    Context ctx = random_context(rng, d, c, k);
    Mask mask = inst % 3 == 0 ? net.last_layer_mask() : net.full_mask();
    auto batch = context_batch(ctx);

    LossGrad lg = loss_and_grad(net, batch, {LossKind::nll}, mask);
    if (faults.flip_adaptation_gradient_sign)
      for (double& g : lg.grad) g = -g;
    std::vector<double> fd = finite_diff_grad(net, batch, {LossKind::nll}, mask, 1e-5);

    std::vector<double> diff(fd.size());
    for (std::size_t i = 0; i < fd.size(); ++i) diff[i] = lg.grad[i] - fd[i];
    double rel = inf_norm(diff) / (inf_norm(fd) + 1e-12);
    worst = std::max(worst, rel);
  }
  res.measured = worst;
  res.pass = worst < res.threshold;
  res.detail = "max relative error over 100 instances";
  res.seconds = seconds_since(start);
  return res;
}

CheckResult check_attention_equivalence(std::uint64_t seed) {
  auto start = Clock::now();
  CheckResult res{.name = "attention-equivalence", .threshold = 1e-4, .comparator = "<"};

  auto rng = make_rng(derive_seed(seed, stream_id("attn-eq")));
  std::uniform_int_distribution<std::size_t> uc(2, 5), uk(1, 8);
  double worst = 0.0;
  for (int inst = 0; inst < 200; ++inst) {
    std::size_t c = uc(rng), k = uk(rng);
    Context ctx = random_context(rng, 2, c, k);
    std::vector<double> analytic = predict_attention(ctx, c);
    std::vector<double> fitted = fit_logits(ctx, c, 100000, 1.0);
    for (std::size_t j = 0; j < c; ++j)
      worst = std::max(worst, std::abs(analytic[j] - fitted[j]));
  }
  res.measured = worst;
  res.pass = worst < res.threshold;
  res.detail = "max Linf distance over 200 contexts";
  res.seconds = seconds_since(start);
  return res;
}

CheckResult check_knn_exactness(std::uint64_t seed, FaultInjection faults) {
  auto start = Clock::now();
  CheckResult res{.name = "knn-exactness", .threshold = 1e-12, .comparator = "<="};

  auto rng = make_rng(derive_seed(seed, stream_id("knn")));
  std::uniform_int_distribution<std::size_t> udim(1, 16), uk(1, 16);
  std::uniform_real_distribution<double> ucap(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  double worst_weight_diff = 0.0;
  std::size_t set_mismatches = 0;
  for (int inst = 0; inst < 1000; ++inst) {
    std::size_t dim = udim(rng);
    // Log-uniform capacity in [1, 4096]; appends sometimes wrap around.
    auto capacity = static_cast<std::size_t>(std::pow(2.0, 12.0 * ucap(rng)));
    std::size_t appends = 1 + static_cast<std::size_t>(
        static_cast<double>(capacity) * (0.5 + ucap(rng)));
    EpisodicMemory mem(capacity, dim, 1e-3);

    std::vector<double> key(dim);
    std::vector<std::vector<double>> seen;
    for (std::size_t a = 0; a < appends; ++a) {
      if (!seen.empty() && ucap(rng) < 0.2) {
        key = seen[static_cast<std::size_t>(ucap(rng) * static_cast<double>(seen.size()))];
      } else {
        for (double& x : key) x = normal(rng);
        seen.push_back(key);
      }
      mem.append(key, static_cast<double>(a % 7));
    }

    std::vector<double> query(dim);
    if (ucap(rng) < 0.25) {
      query = seen[static_cast<std::size_t>(ucap(rng) * static_cast<double>(seen.size()))];
    } else {
      for (double& x : query) x = normal(rng);
    }
    std::size_t k = uk(rng);

    Context got = faults.knn_off_by_one && mem.size() > k
                      ? [&] {
                          // Off-by-one fault: drop the nearest neighbour.
                          Context c0 = mem.lookup(query, k + 1);
                          c0.items.erase(c0.items.begin());
                          return c0;
                        }()
                      : mem.lookup(query, k);
    Context oracle = brute_force_knn(mem, query, k);

    if (got.size() != oracle.size()) {
      ++set_mismatches;
      continue;
    }
    for (std::size_t i = 0; i < got.size(); ++i) {
      if (got.items[i].insert_index != oracle.items[i].insert_index) {
        ++set_mismatches;
        break;
      }
      worst_weight_diff =
          std::max(worst_weight_diff, std::abs(got.items[i].weight - oracle.items[i].weight));
    }
  }
  res.measured = worst_weight_diff;
  res.pass = set_mismatches == 0 && worst_weight_diff <= res.threshold;
  res.detail = "neighbour-set mismatches: " + std::to_string(set_mismatches) +
               ", max weight diff over 1000 instances";
  res.seconds = seconds_since(start);
  return res;
}

CheckResult check_fifo_eviction() {
  auto start = Clock::now();
  CheckResult res{.name = "fifo-eviction", .threshold = 0.0, .comparator = "=="};

  std::size_t mismatches = 0;
  for (std::size_t capacity = 1; capacity <= 8; ++capacity) {
    for (std::size_t appends = 0; appends <= 3 * capacity; ++appends) {
      EpisodicMemory mem(capacity, 1, 1e-3);
      std::deque<std::uint64_t> sim;
      for (std::size_t a = 0; a < appends; ++a) {
        double key = static_cast<double>(a);
        mem.append(std::span<const double>(&key, 1), 0.0);
        sim.push_back(a);
        if (sim.size() > capacity) sim.pop_front();
      }
      if (mem.size() != sim.size()) {
        ++mismatches;
        continue;
      }
      for (std::size_t i = 0; i < sim.size(); ++i)
        if (mem.entry(i).insert_index != sim[i]) ++mismatches;
    }
  }
  res.measured = static_cast<double>(mismatches);
  res.pass = mismatches == 0;
  res.detail = "capacities 1..8 vs index-list simulation";
  res.seconds = seconds_since(start);
  return res;
}

CheckResult check_identity_isolation(std::uint64_t seed) {
  auto start = Clock::now();
  CheckResult res{.name = "identity-isolation", .threshold = 0.0, .comparator = "=="};

  auto rng = make_rng(derive_seed(seed, stream_id("identity")));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> ucls(0, 3);

  std::size_t d = 16;
  OutputNet net = OutputNet::make_mlp(d, {32}, 4, HeadKind::softmax, Activation::relu, rng());
  EmbeddingNet embed = EmbeddingNet::identity();
  EpisodicMemory mem(400, d, 1e-3);
  std::vector<double> key(d);
  for (int i = 0; i < 200; ++i) {
    for (double& x : key) x = normal(rng);
    mem.append(key, static_cast<double>(ucls(rng)));
  }

  AdaptationConfig zero_steps{.alpha_m = 0.5, .steps = 0, .k_neighbours = 10};
  AdaptationConfig zero_alpha{.alpha_m = 0.0, .steps = 5, .k_neighbours = 10};
  AdaptationConfig live{.alpha_m = 0.5, .steps = 5, .k_neighbours = 10};

  std::size_t mismatches = 0;
  std::vector<double> theta_before = net.params().values;
  std::vector<double> x(d);
  for (int i = 0; i < 1000; ++i) {
    for (double& v : x) v = normal(rng);
    std::vector<double> p_ref = predict_parametric(embed, net, x);
    std::vector<double> p0 = predict_mbpa(embed, net, mem, x, zero_steps);
    std::vector<double> pa = predict_mbpa(embed, net, mem, x, zero_alpha);
    if (std::memcmp(p_ref.data(), p0.data(), p_ref.size() * sizeof(double)) != 0) ++mismatches;
    if (std::memcmp(p_ref.data(), pa.data(), p_ref.size() * sizeof(double)) != 0) ++mismatches;
    predict_mbpa(embed, net, mem, x, live);  // must leave theta untouched
  }
  if (std::memcmp(theta_before.data(), net.params().values.data(),
                  theta_before.size() * sizeof(double)) != 0)
    mismatches += 1000000;  // parameter corruption dwarfs everything else

  res.measured = static_cast<double>(mismatches);
  res.pass = mismatches == 0;
  res.detail = "bitwise mismatches over 1000 inputs and 1000 adapted calls";
  res.seconds = seconds_since(start);
  return res;
}

CheckResult check_self_regulation(std::uint64_t seed) {
  auto start = Clock::now();
  CheckResult res{.name = "self-regulation", .threshold = 0.10, .comparator = "<"};

  SyntheticSpec spec;
  spec.dim = 16;
  spec.classes = 4;
  spec.samples_per_class = 125;  // 500 examples total
  spec.sigma = 0.15;
  spec.seed = derive_seed(seed, stream_id("selfreg-data"));
  LabeledDataset ds = gen_synthetic(spec);

  OutputNet net = OutputNet::make_mlp(ds.dim, {32}, 4, HeadKind::softmax, Activation::relu,
                                      derive_seed(seed, stream_id("selfreg-init")));
  Optimizer opt = Optimizer::adam(1e-3);
  EmbeddingNet embed = EmbeddingNet::identity();
  EpisodicMemory mem(ds.size(), ds.dim, 1e-3);
  for (std::size_t i = 0; i < ds.size(); ++i) mem.append(ds.input(i), ds.targets[i]);

  AdaptationConfig cfg{.alpha_m = 0.1, .steps = 5, .k_neighbours = 10};
  auto mean_delta = [&] {
    double total = 0.0;
    std::size_t probes = 64;
    for (std::size_t i = 0; i < probes; ++i) {
      Context ctx = mem.lookup(ds.input(i), 10);
      total += run_adaptation(net, ctx, cfg).delta_norm();
    }
    return total / static_cast<double>(probes);
  };

  std::vector<Sample> batch;
  double first = 0.0, last = 0.0;
  std::string series;
  for (std::size_t epoch = 1; epoch <= 80; ++epoch) {
    auto order_seed = derive_seed(seed, stream_id("selfreg-shuffle"), epoch);
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), 0);
    auto rng = make_rng(order_seed);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t s = 0; s < order.size(); s += 32) {
      std::size_t stop = std::min(order.size(), s + 32);
      batch.clear();
      for (std::size_t i = s; i < stop; ++i)
        batch.push_back({ds.input(order[i]), ds.targets[order[i]]});
      // Memory is already populated; train on the same data without appending.
      Mask mask = net.full_mask();
      std::vector<TrainExample> ex(batch.size());
      double w = 1.0 / static_cast<double>(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) ex[i] = {batch[i].x, batch[i].target, w};
      LossGrad lg = loss_and_grad(net, ex, {LossKind::nll}, mask);
      opt.step(net.params().values, lg.grad);
    }
    if (epoch == 1) {
      first = mean_delta();
      series += "e1=" + fmt(first);
    } else if (epoch % 20 == 0) {
      double v = mean_delta();
      series += " e" + std::to_string(epoch) + "=" + fmt(v);
      if (epoch == 80) last = v;
    }
  }

  res.measured = first > 0.0 ? last / first : 1.0;
  res.pass = res.measured < res.threshold;
  res.detail = "|delta| ratio final/first; " + series;
  res.seconds = seconds_since(start);
  return res;
}

CheckResult check_beta_contraction(std::uint64_t seed) {
  auto start = Clock::now();
  CheckResult res{.name = "beta-contraction", .threshold = 1.10, .comparator = "<="};

  auto rng = make_rng(derive_seed(seed, stream_id("beta")));
  std::uniform_int_distribution<std::size_t> uk(2, 6);
  double worst_ratio = 0.0;
  for (double beta : {1.0, 10.0, 100.0}) {
    for (int inst = 0; inst < 20; ++inst) {
      std::size_t d = 8, c = 4, k = uk(rng);
      // Single linear layer: the weighted NLL is convex in the parameters.
      OutputNet net = OutputNet::make_mlp(d, {}, c, HeadKind::softmax, Activation::relu, rng());
      Context ctx = random_context(rng, d, c, k);
      Mask mask = net.full_mask();

      auto batch = context_batch(ctx);
      LossGrad at_theta = loss_and_grad(net, batch, {LossKind::nll}, mask);
      double g0 = l2_norm(at_theta.grad);
      if (g0 == 0.0) continue;

      double max_h2 = 0.0;
      for (const auto& item : ctx.items) {
        double h2 = 0.0;
        for (double v : item.key) h2 += v * v;
        max_h2 = std::max(max_h2, h2);
      }
      double lipschitz = 0.5 * max_h2 + 1.0;

      AdaptationConfig cfg{.alpha_m = 1.0 / (lipschitz + beta),
                           .beta = beta,
                           .steps = 1,
                           .k_neighbours = static_cast<int>(k)};
      AdaptedOverlay ov = make_overlay(net, cfg);
      OutputNet net_x = net;
      double step_inf = 1.0;
      for (int t = 0; t < 200000 && step_inf > 1e-13; ++t) {
        std::vector<double> before = ov.delta.values;
        mbpa_step(net_x, ov, net, ctx, cfg);
        step_inf = 0.0;
        for (std::size_t i = 0; i < before.size(); ++i)
          step_inf = std::max(step_inf, std::abs(ov.delta.values[i] - before[i]));
      }
      double ratio = ov.delta_norm() * beta / g0;
      worst_ratio = std::max(worst_ratio, ratio);
    }
  }
  res.measured = worst_ratio;
  res.pass = worst_ratio <= res.threshold;
  res.detail = "max beta*|delta*|/|grad at theta| over beta in {1,10,100}";
  res.seconds = seconds_since(start);
  return res;
}

CheckResult check_auc_arithmetic() {
  auto start = Clock::now();
  CheckResult res{.name = "auc-arithmetic", .threshold = 1e-12, .comparator = "<="};

  std::vector<std::pair<double, double>> pts{{0.0, 0.2}, {1.0, 0.6}, {3.0, 0.6}};
  double got = compute_auc(pts);
  double expected = (0.5 * (0.2 + 0.6) * 1.0 + 0.6 * 2.0) / 3.0;
  res.measured = std::abs(got - expected);
  res.pass = res.measured <= res.threshold;
  res.detail = "piecewise curve {(0,0.2),(1,0.6),(3,0.6)}";
  res.seconds = seconds_since(start);
  return res;
}

namespace {

RegimeConfig continual_check_config(std::uint64_t seed, int threads) {
  RegimeConfig rc;
  rc.model.hidden = {100};
  rc.model.learning_rate = 1e-3;
  rc.model.batch_size = 32;
  rc.model.epochs = 3.0;
  rc.model.seed = seed;
  rc.adapt.alpha_m = 0.5;
  rc.adapt.beta = 0.0;
  rc.adapt.steps = 20;
  rc.adapt.k_neighbours = 10;
  // Large enough to retain every append of the run; a smaller buffer would
  // evict the first task's entries before they are ever retrieved.
  rc.memory_capacity = 20000;
  rc.eval.eval_subset = 500;
  rc.eval.threads = threads;
  rc.eval.predictors = {"parametric", "mbpa", "mbpa_random"};
  return rc;
}

TaskStream continual_check_stream(std::uint64_t seed) {
  // Low dimension and wide clusters make the permuted tasks interfere in the
  // hidden layer, which is what produces measurable forgetting at this scale.
  SyntheticSpec spec;
  spec.dim = 16;
  spec.classes = 10;
  spec.samples_per_class = 300;
  spec.sigma = 0.30;
  spec.seed = derive_seed(seed, stream_id("cont-data"));
  LabeledDataset pool = gen_synthetic(spec);
  auto [test_pool, train_pool] =
      split_dataset(pool, 600, derive_seed(seed, stream_id("cont-split")));
  return make_permuted_stream(train_pool, test_pool, 2, 2000, 500, seed);
}

double phase_top1(std::span<const EvalRecord> records, int task, const std::string& pred,
                  const std::string& split) {
  for (const auto& r : records)
    if (r.task == task && r.predictor == pred && r.split == split) return r.top1;
  throw Error("missing record: task " + std::to_string(task) + " " + pred + " " + split);
}

}  // namespace

CheckResult check_continual_recovery(std::uint64_t seed, int threads) {
  auto start = Clock::now();
  CheckResult res{.name = "continual-recovery", .threshold = 0.5, .comparator = ">="};

  TaskStream stream = continual_check_stream(seed);
  double acc_before = 0.0, acc_after = 0.0;
  double best_mbpa = 0.0, best_random = 0.0;
  for (double alpha : {0.1, 0.5, 1.0}) {
    RegimeConfig rc = continual_check_config(seed, threads);
    rc.adapt.alpha_m = alpha;
    rc.adapt.steps = 10;
    auto records = run_continual(stream, rc);
    acc_before = phase_top1(records, 0, "parametric", "task:0");
    acc_after = phase_top1(records, 1, "parametric", "task:0");
    best_mbpa = std::max(best_mbpa, phase_top1(records, 1, "mbpa", "task:0"));
    best_random = std::max(best_random, phase_top1(records, 1, "mbpa_random", "task:0"));
  }

  double drop = acc_before - acc_after;
  double recovery = drop > 0.0 ? (best_mbpa - acc_after) / drop : 0.0;
  bool drop_ok = drop >= 0.20;
  bool random_ok = best_mbpa > best_random;
  res.measured = recovery;
  res.pass = drop_ok && recovery >= res.threshold && random_ok;
  res.detail = "task1 acc " + fmt(acc_before) + " -> " + fmt(acc_after) + " (drop " + fmt(drop) +
               "), mbpa " + fmt(best_mbpa) + ", random-replay " + fmt(best_random) +
               (drop_ok ? "" : " [drop < 0.20]") + (random_ok ? "" : " [random >= mbpa]");
  res.seconds = seconds_since(start);
  return res;
}

namespace {

struct ClassStreamOutcome {
  double parametric = 0.0, mixture = 0.0, mbpa = 0.0, attention = 0.0;
};

RegimeConfig class_check_config(std::uint64_t seed, int threads) {
  RegimeConfig rc;
  rc.model.hidden = {100};
  rc.model.learning_rate = 1e-3;
  rc.model.batch_size = 32;
  rc.model.pretrain_epochs = 5;
  rc.model.seed = seed;
  rc.adapt.alpha_m = 0.05;
  rc.adapt.local_optimizer = LocalOpt::rmsprop;
  rc.adapt.steps = 10;
  rc.adapt.k_neighbours = 10;
  rc.memory_capacity = 20000;
  rc.mixture_lambda = 0.5;
  rc.eval.checkpoints = {0.1, 1.0, 3.0};
  rc.eval.eval_subset = 500;
  rc.eval.threads = threads;
  rc.eval.predictors = {"parametric", "mbpa", "attention", "mixture"};
  return rc;
}

std::pair<LabeledDataset, LabeledDataset> class_check_data(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.dim = 32;
  spec.classes = 20;
  spec.samples_per_class = 250;
  spec.sigma = 0.25;
  spec.seed = derive_seed(seed, stream_id("class-data"));
  LabeledDataset pool = gen_synthetic(spec);
  auto [test, train] = split_dataset(pool, 1250, derive_seed(seed, stream_id("class-split")));
  return {std::move(train), std::move(test)};
}

ClassStreamOutcome class_regime_outcome(std::uint64_t seed, int threads, bool unbalanced,
                                        double at_epoch, const std::string& split) {
  auto [train, test] = class_check_data(seed);
  RegimeConfig rc = class_check_config(seed, threads);
  std::vector<EvalRecord> records;
  if (unbalanced) {
    TaskStream stream = make_unbalanced_stream(train, test, 0.5, 0.1, seed);
    records = run_unbalanced(stream, rc);
  } else {
    TaskStream stream = make_incremental_stream(train, test, 0.5, seed);
    records = run_incremental(stream, rc);
  }
  ClassStreamOutcome out;
  for (const auto& r : records) {
    if (r.epoch != at_epoch || r.split != split) continue;
    if (r.predictor == "parametric") out.parametric = r.top1;
    if (r.predictor == "mixture") out.mixture = r.top1;
    if (r.predictor == "mbpa") out.mbpa = r.top1;
    if (r.predictor == "attention") out.attention = r.top1;
  }
  return out;
}

}  // namespace

namespace {

// lambda = 1 must reproduce the parametric probabilities bit-exactly and
// lambda = 0 the attention probabilities.
bool mixture_endpoints_exact(std::uint64_t seed) {
  auto rng = make_rng(derive_seed(seed, stream_id("mix-endpoints")));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::size_t d = 8, c = 5;
  OutputNet net = OutputNet::make_mlp(d, {16}, c, HeadKind::softmax, Activation::relu, rng());
  EmbeddingNet embed = EmbeddingNet::identity();
  EpisodicMemory mem(64, d, 1e-3);
  std::vector<double> key(d);
  for (int i = 0; i < 40; ++i) {
    for (double& x : key) x = normal(rng);
    mem.append(key, static_cast<double>(i % c));
  }
  std::vector<double> x(d);
  for (int i = 0; i < 50; ++i) {
    for (double& v : x) v = normal(rng);
    std::vector<double> p_param = predict_parametric(embed, net, x);
    Context ctx = mem.lookup(x, 10);
    std::vector<double> p_attn = predict_attention(ctx, c);
    std::vector<double> at_one = predict_mixture(embed, net, mem, x, {1.0}, 10);
    std::vector<double> at_zero = predict_mixture(embed, net, mem, x, {0.0}, 10);
    if (std::memcmp(p_param.data(), at_one.data(), c * sizeof(double)) != 0) return false;
    if (std::memcmp(p_attn.data(), at_zero.data(), c * sizeof(double)) != 0) return false;
  }
  return true;
}

}  // namespace

CheckResult check_incremental_ordering(std::uint64_t seed, int threads) {
  auto start = Clock::now();
  CheckResult res{.name = "incremental-ordering", .threshold = 2.0, .comparator = ">="};

  int votes = 0;
  std::string detail;
  for (int s = 0; s < 3; ++s) {
    std::uint64_t run_seed = derive_seed(seed, stream_id("inc-seed"), s);
    ClassStreamOutcome o = class_regime_outcome(run_seed, threads, false, 0.1, "novel");
    bool ok = o.mbpa > o.mixture && o.mixture > o.parametric;
    votes += ok ? 1 : 0;
    detail += (s ? "; " : "") + std::string("seed") + std::to_string(s) + ": mbpa=" + fmt(o.mbpa) +
              " mix=" + fmt(o.mixture) + " param=" + fmt(o.parametric) + (ok ? " ok" : " FAIL");
  }
  bool endpoints_ok = mixture_endpoints_exact(seed);
  res.measured = votes;
  res.pass = votes >= 2 && endpoints_ok;
  res.detail = "novel split at earliest checkpoint; " + detail +
               (endpoints_ok ? "; mixture endpoints exact" : "; mixture endpoints DIFFER");
  res.seconds = seconds_since(start);
  return res;
}

CheckResult check_unbalanced_ordering(std::uint64_t seed, int threads) {
  auto start = Clock::now();
  CheckResult res{.name = "unbalanced-ordering", .threshold = 2.0, .comparator = ">="};

  int votes = 0;
  std::string detail;
  for (int s = 0; s < 3; ++s) {
    std::uint64_t run_seed = derive_seed(seed, stream_id("unb-seed"), s);
    ClassStreamOutcome o = class_regime_outcome(run_seed, threads, true, 3.0, "starved");
    bool ok = o.mbpa >= o.parametric + 0.05 && o.mbpa > o.mixture;
    votes += ok ? 1 : 0;
    detail += (s ? "; " : "") + std::string("seed") + std::to_string(s) + ": mbpa=" + fmt(o.mbpa) +
              " mix=" + fmt(o.mixture) + " param=" + fmt(o.parametric) + (ok ? " ok" : " FAIL");
  }
  res.measured = votes;
  res.pass = votes >= 2;
  res.detail = "starved split at final checkpoint; " + detail;
  res.seconds = seconds_since(start);
  return res;
}

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

CheckResult check_determinism(std::uint64_t seed) {
  auto start = Clock::now();
  CheckResult res{.name = "determinism", .threshold = 0.0, .comparator = "=="};

  RunConfig cfg;
  cfg.regime = "continual";
  cfg.seed = seed;
  cfg.eval_subset = 100;
  cfg.dataset.synthetic.dim = 16;
  cfg.dataset.synthetic.classes = 4;
  cfg.dataset.synthetic.samples_per_class = 150;
  cfg.dataset.synthetic.sigma = 0.2;
  cfg.dataset.synthetic.seed = derive_seed(seed, stream_id("det-data"));
  cfg.model.hidden = {32};
  cfg.model.epochs = 2.0;
  cfg.continual.num_tasks = 2;
  cfg.continual.train_per_task = 300;
  cfg.continual.test_per_task = 100;
  cfg.adaptation.steps = 3;
  cfg.adaptation.k = 5;

  auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
  auto base = std::filesystem::temp_directory_path() /
              ("mbpa-determinism-" + std::to_string(stamp));
  std::vector<std::string> jsonl, csv;
  int thread_counts[] = {1, 4, 4};
  for (int i = 0; i < 3; ++i) {
    RunConfig run = cfg;
    run.threads = thread_counts[i];
    run.out_dir = (base / ("run" + std::to_string(i))).string();
    execute_run(run);
    jsonl.push_back(slurp(std::filesystem::path(run.out_dir) / "records.jsonl"));
    csv.push_back(slurp(std::filesystem::path(run.out_dir) / "metrics.csv"));
  }
  std::size_t diffs = 0;
  for (int i = 1; i < 3; ++i) {
    if (jsonl[i] != jsonl[0]) ++diffs;
    if (csv[i] != csv[0]) ++diffs;
  }
  std::filesystem::remove_all(base);

  res.measured = static_cast<double>(diffs);
  res.pass = diffs == 0;
  res.detail = "metrics files across two invocations and thread counts {1,4}";
  res.seconds = seconds_since(start);
  return res;
}

std::vector<CheckResult> run_fast_checks(std::uint64_t seed, int threads) {
  (void)threads;
  std::vector<CheckResult> out;
  out.push_back(check_gradient_oracle(seed));
  out.push_back(check_attention_equivalence(seed));
  out.push_back(check_knn_exactness(seed));
  out.push_back(check_fifo_eviction());
  out.push_back(check_identity_isolation(seed));
  out.push_back(check_self_regulation(seed));
  out.push_back(check_beta_contraction(seed));
  out.push_back(check_auc_arithmetic());
  return out;
}

std::vector<CheckResult> run_all_checks(std::uint64_t seed, int threads) {
  std::vector<CheckResult> out = run_fast_checks(seed, threads);
  out.push_back(check_continual_recovery(seed, threads));
  out.push_back(check_incremental_ordering(seed, threads));
  out.push_back(check_unbalanced_ordering(seed, threads));
  out.push_back(check_determinism(seed));
  return out;
}

std::string format_check(const CheckResult& r) {
  std::ostringstream os;
  os << (r.pass ? "PASS" : "FAIL") << " " << r.name << ": measured " << r.measured << " "
     << r.comparator << " " << r.threshold << " (" << r.detail << ") [" << fmt(r.seconds) << "s]";
  return os.str();
}

}  // namespace mbpa
