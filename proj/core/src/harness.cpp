#include "mbpa/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <thread>

#include <json.hpp>

#include "mbpa/rng.hpp"

namespace mbpa {

namespace {

enum class Pred { parametric, mbpa, attention, mixture, mbpa_random };

Pred parse_predictor(const std::string& name) {
  if (name == "parametric") return Pred::parametric;
  if (name == "mbpa") return Pred::mbpa;
  if (name == "attention") return Pred::attention;
  if (name == "mixture") return Pred::mixture;
  if (name == "mbpa_random") return Pred::mbpa_random;
  throw ConfigError("unknown predictor: " + name);
}

std::int64_t argmax_label(const std::vector<double>& p) {
  return static_cast<std::int64_t>(
      std::distance(p.begin(), std::max_element(p.begin(), p.end())));
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto rng = make_rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

// Seeded evaluation subset, sorted by example index. Fixed per test set.
std::vector<std::size_t> subset_indices(std::size_t n, std::size_t subset, std::uint64_t seed) {
  if (subset == 0 || subset >= n) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    return all;
  }
  auto order = shuffled_indices(n, seed);
  order.resize(subset);
  std::sort(order.begin(), order.end());
  return order;
}

void train_batches(const EmbeddingNet& embed, OutputNet& net, Optimizer& opt, EpisodicMemory& mem,
                   const LabeledDataset& ds, std::span<const std::size_t> order,
                   std::size_t batch_size) {
  std::vector<Sample> batch;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    std::size_t stop = std::min(order.size(), start + batch_size);
    batch.clear();
    for (std::size_t i = start; i < stop; ++i)
      batch.push_back({ds.input(order[i]), ds.targets[order[i]]});
    train_step(embed, net, opt, mem, batch);
  }
}

Optimizer make_optimizer(const ModelConfig& mc) {
  switch (mc.optimizer) {
    case Optimizer::Kind::sgd: return Optimizer::sgd(mc.learning_rate);
    case Optimizer::Kind::rmsprop: return Optimizer::rmsprop(mc.learning_rate);
    case Optimizer::Kind::adam: break;
  }
  return Optimizer::adam(mc.learning_rate);
}

struct PhaseModel {
  const EmbeddingNet* embed = nullptr;
  const OutputNet* net = nullptr;
  const EpisodicMemory* mem = nullptr;
  const AdaptationConfig* adapt = nullptr;
  double lambda = 0.5;
};

// Predicted label per predictor per subset position. The context is
// computed once per example and shared across predictors, so every
// predictor scores the identical frozen state.
std::vector<std::vector<std::int64_t>> predict_subset(const PhaseModel& pm,
                                                      const LabeledDataset& ds,
                                                      std::span<const std::size_t> subset,
                                                      std::span<const Pred> preds, int threads,
                                                      std::uint64_t replay_seed) {
  std::vector<std::vector<std::int64_t>> out(preds.size(),
                                             std::vector<std::int64_t>(subset.size(), -1));
  bool memory_live = pm.mem != nullptr && pm.mem->size() > 0;
  bool wants_knn = false;
  for (Pred p : preds)
    wants_knn = wants_knn || p == Pred::mbpa || p == Pred::attention || p == Pred::mixture;

  std::size_t num_classes = pm.net->output_dim();
  auto k = static_cast<std::size_t>(pm.adapt->k_neighbours);

  parallel_for(subset.size(), threads, [&](std::size_t j) {
    std::vector<double> q;
    pm.embed->embed_into(ds.input(subset[j]), q);
    std::vector<double> p_param = forward(*pm.net, q);

    Context ctx;
    if (memory_live && wants_knn) ctx = pm.mem->lookup(q, k);

    std::vector<double> p_attn;
    if (memory_live && !ctx.empty()) {
      for (Pred p : preds) {
        if (p == Pred::attention || p == Pred::mixture) {
          p_attn = predict_attention(ctx, num_classes);
          break;
        }
      }
    }

    for (std::size_t pi = 0; pi < preds.size(); ++pi) {
      const std::vector<double>* probs = &p_param;
      std::vector<double> scratch;
      if (memory_live) {
        switch (preds[pi]) {
          case Pred::parametric:
            break;
          case Pred::attention:
            probs = &p_attn;
            break;
          case Pred::mixture:
            scratch = mixture_blend(p_param, p_attn, pm.lambda);
            probs = &scratch;
            break;
          case Pred::mbpa:
            scratch = predict_mbpa_on_context(*pm.net, q, ctx, *pm.adapt);
            probs = &scratch;
            break;
          case Pred::mbpa_random: {
            auto rng = make_rng(derive_seed(replay_seed, j));
            Context rctx = uniform_random_context(*pm.mem, k, rng);
            scratch = predict_mbpa_on_context(*pm.net, q, rctx, *pm.adapt);
            probs = &scratch;
            break;
          }
        }
      }
      out[pi][j] = argmax_label(*probs);
    }
  });
  return out;
}

double subset_accuracy(const LabeledDataset& ds, std::span<const std::size_t> subset,
                       std::span<const std::int64_t> predicted,
                       const std::function<bool(std::int64_t)>& label_in_split,
                       std::size_t* count_out) {
  std::size_t n = 0, correct = 0;
  for (std::size_t j = 0; j < subset.size(); ++j) {
    std::int64_t truth = ds.label(subset[j]);
    if (!label_in_split(truth)) continue;
    ++n;
    if (predicted[j] == truth) ++correct;
  }
  if (count_out) *count_out = n;
  return n == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(n);
}

class AucTracker {
 public:
  double add(const std::string& pred, const std::string& split, double time, double top1) {
    auto& pts = history_[pred + "\x1f" + split];
    pts.emplace_back(time, top1);
    if (pts.size() < 2) return top1;
    return compute_auc(pts);
  }

 private:
  std::map<std::string, std::vector<std::pair<double, double>>> history_;
};

}  // namespace

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 0) {
    unsigned hw = std::thread::hardware_concurrency();
    threads = hw == 0 ? 1 : static_cast<int>(hw);
  }
  std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

double compute_auc(std::span<const std::pair<double, double>> points) {
  if (points.size() < 2) throw Error("compute_auc: need at least two checkpoints");
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    double dt = points[i].first - points[i - 1].first;
    if (dt <= 0.0) throw Error("compute_auc: checkpoints must be strictly increasing");
    area += 0.5 * (points[i].second + points[i - 1].second) * dt;
  }
  return area / (points.back().first - points.front().first);
}

TaskStream make_permuted_stream(const LabeledDataset& train_pool, const LabeledDataset& test_pool,
                                std::size_t num_tasks, std::size_t train_per_task,
                                std::size_t test_per_task, std::uint64_t seed) {
  if (num_tasks == 0) throw Error("make_permuted_stream: need at least one task");
  if (train_pool.size() < train_per_task || test_pool.size() < test_per_task)
    throw Error("make_permuted_stream: pool smaller than requested task size");

  auto [train_base, train_rest] =
      split_dataset(train_pool, train_per_task, derive_seed(seed, stream_id("train-base")));
  auto [test_base, test_rest] =
      split_dataset(test_pool, test_per_task, derive_seed(seed, stream_id("test-base")));
  (void)train_rest;
  (void)test_rest;

  TaskStream stream;
  stream.kind = TaskStream::Kind::permuted_tasks;
  for (std::size_t t = 0; t < num_tasks; ++t) {
    if (t == 0) {
      stream.tasks.push_back({train_base, test_base});
      continue;
    }
    auto perm = make_permutation(train_base.dim, derive_seed(seed, stream_id("perm"), t));
    stream.tasks.push_back({apply_permutation(train_base, perm),
                            apply_permutation(test_base, perm)});
  }
  return stream;
}

namespace {

TaskStream make_class_stream(const LabeledDataset& train, const LabeledDataset& test,
                             double pretrain_fraction, double starved_fraction, bool unbalanced,
                             std::uint64_t seed) {
  if (train.kind != TaskKind::classification)
    throw Error("class stream: classification dataset required");
  if (!(pretrain_fraction > 0.0 && pretrain_fraction < 1.0))
    throw Error("class stream: pretrain fraction must lie in (0, 1)");

  std::int64_t c = train.num_classes;
  std::vector<std::int64_t> classes(static_cast<std::size_t>(c));
  std::iota(classes.begin(), classes.end(), 0);
  auto rng = make_rng(derive_seed(seed, stream_id("class-split")));
  std::shuffle(classes.begin(), classes.end(), rng);
  auto n_pre = static_cast<std::size_t>(
      std::llround(pretrain_fraction * static_cast<double>(c)));
  n_pre = std::min(std::max<std::size_t>(n_pre, 1), classes.size() - 1);

  TaskStream stream;
  stream.kind =
      unbalanced ? TaskStream::Kind::unbalanced_classes : TaskStream::Kind::incremental_classes;
  stream.pretrain_classes.assign(classes.begin(),
                                 classes.begin() + static_cast<std::ptrdiff_t>(n_pre));
  stream.novel_classes.assign(classes.begin() + static_cast<std::ptrdiff_t>(n_pre),
                              classes.end());
  std::sort(stream.pretrain_classes.begin(), stream.pretrain_classes.end());
  std::sort(stream.novel_classes.begin(), stream.novel_classes.end());

  LabeledDataset incremental_train = train;
  if (unbalanced) {
    if (!(starved_fraction > 0.0 && starved_fraction <= 1.0))
      throw Error("class stream: starved fraction must lie in (0, 1]");
    // A seeded half of the novel classes is starved.
    auto novel = stream.novel_classes;
    auto rng2 = make_rng(derive_seed(seed, stream_id("starve-split")));
    std::shuffle(novel.begin(), novel.end(), rng2);
    stream.starved_classes.assign(novel.begin(),
                                  novel.begin() + static_cast<std::ptrdiff_t>(novel.size() / 2));
    std::sort(stream.starved_classes.begin(), stream.starved_classes.end());
    std::vector<double> fractions(static_cast<std::size_t>(c), 1.0);
    for (std::int64_t cls : stream.starved_classes)
      fractions[static_cast<std::size_t>(cls)] = starved_fraction;
    incremental_train =
        subsample_classes(train, fractions, derive_seed(seed, stream_id("starve-sample")));
  }

  stream.tasks.push_back({filter_classes(train, stream.pretrain_classes), test});
  stream.tasks.push_back({std::move(incremental_train), test});
  return stream;
}

}  // namespace

TaskStream make_incremental_stream(const LabeledDataset& train, const LabeledDataset& test,
                                   double pretrain_fraction, std::uint64_t seed) {
  return make_class_stream(train, test, pretrain_fraction, 1.0, false, seed);
}

TaskStream make_unbalanced_stream(const LabeledDataset& train, const LabeledDataset& test,
                                  double pretrain_fraction, double starved_fraction,
                                  std::uint64_t seed) {
  return make_class_stream(train, test, pretrain_fraction, starved_fraction, true, seed);
}

std::vector<EvalRecord> run_continual(const TaskStream& stream, const RegimeConfig& rc) {
  if (stream.kind != TaskStream::Kind::permuted_tasks)
    throw Error("run_continual: permuted-tasks stream required");
  if (stream.tasks.empty()) throw Error("run_continual: empty stream");

  const auto& first = stream.tasks.front().train;
  std::size_t d = first.dim;
  auto c = static_cast<std::size_t>(first.num_classes);
  std::uint64_t seed = rc.model.seed;

  OutputNet net = OutputNet::make_mlp(d, rc.model.hidden, c, HeadKind::softmax,
                                      rc.model.activation, derive_seed(seed, stream_id("init")));
  Optimizer opt = make_optimizer(rc.model);
  EmbeddingNet embed = EmbeddingNet::identity();
  EpisodicMemory mem(rc.memory_capacity, d, rc.adapt.epsilon, TaskKind::classification);

  std::vector<Pred> preds;
  for (const auto& name : rc.eval.predictors) preds.push_back(parse_predictor(name));

  std::vector<std::vector<std::size_t>> subsets;
  for (std::size_t t = 0; t < stream.tasks.size(); ++t)
    subsets.push_back(subset_indices(stream.tasks[t].test.size(), rc.eval.eval_subset,
                                     derive_seed(seed, stream_id("eval-subset"), t)));

  auto epochs = static_cast<std::size_t>(std::max<std::int64_t>(
      1, std::llround(rc.model.epochs)));

  std::vector<EvalRecord> records;
  AucTracker tracker;
  PhaseModel pm{&embed, &net, &mem, &rc.adapt, rc.mixture_lambda};

  for (std::size_t t = 0; t < stream.tasks.size(); ++t) {
    const auto& task = stream.tasks[t];
    for (std::size_t e = 0; e < epochs; ++e) {
      auto order = shuffled_indices(task.train.size(),
                                    derive_seed(seed, stream_id("shuffle"), t, e));
      train_batches(embed, net, opt, mem, task.train, order, rc.model.batch_size);
    }

    // Score every predictor on every seen task's test set.
    double time = static_cast<double>(t + 1);
    std::vector<std::vector<std::vector<std::int64_t>>> results;  // [task][pred][j]
    for (std::size_t i = 0; i <= t; ++i)
      results.push_back(predict_subset(pm, stream.tasks[i].test, subsets[i], preds,
                                       rc.eval.threads,
                                       derive_seed(seed, stream_id("replay"), t, i)));

    for (std::size_t pi = 0; pi < preds.size(); ++pi) {
      const std::string& pname = rc.eval.predictors[pi];
      std::size_t pooled_n = 0, pooled_correct = 0;
      for (std::size_t i = 0; i <= t; ++i) {
        const auto& subset = subsets[i];
        for (std::size_t j = 0; j < subset.size(); ++j) {
          ++pooled_n;
          if (results[i][pi][j] == stream.tasks[i].test.label(subset[j])) ++pooled_correct;
        }
      }
      double all_top1 =
          pooled_n == 0 ? 0.0 : static_cast<double>(pooled_correct) / static_cast<double>(pooled_n);
      records.push_back({static_cast<int>(t), rc.model.epochs, pname, "all", all_top1,
                         tracker.add(pname, "all", time, all_top1)});
      for (std::size_t i = 0; i <= t; ++i) {
        const auto& subset = subsets[i];
        std::size_t n = subset.size(), correct = 0;
        for (std::size_t j = 0; j < n; ++j)
          if (results[i][pi][j] == stream.tasks[i].test.label(subset[j])) ++correct;
        double top1 = n == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(n);
        std::string split = "task:" + std::to_string(i);
        records.push_back({static_cast<int>(t), rc.model.epochs, pname, split, top1,
                           tracker.add(pname, split, time, top1)});
      }
    }
  }
  return records;
}

namespace {

std::vector<EvalRecord> run_class_regime(const TaskStream& stream, const RegimeConfig& rc,
                                         bool unbalanced) {
  if (stream.tasks.size() != 2) throw Error("incremental regime: expected two tasks");

  const auto& pretrain_set = stream.tasks[0].train;
  const auto& train_set = stream.tasks[1].train;
  const auto& test_set = stream.tasks[1].test;
  std::size_t d = train_set.dim;
  auto c = static_cast<std::size_t>(train_set.num_classes);
  std::uint64_t seed = rc.model.seed;

  // Pretrain the full network on the pretrain classes; the head covers all
  // classes from the start. Memory is not written during pretraining.
  OutputNet full_net =
      OutputNet::make_mlp(d, rc.model.hidden, c, HeadKind::softmax, rc.model.activation,
                          derive_seed(seed, stream_id("init")));
  {
    Optimizer opt = make_optimizer(rc.model);
    EmbeddingNet id = EmbeddingNet::identity();
    EpisodicMemory off(0, d, rc.adapt.epsilon, TaskKind::classification);
    for (std::size_t e = 0; e < rc.model.pretrain_epochs; ++e) {
      auto order = shuffled_indices(pretrain_set.size(),
                                    derive_seed(seed, stream_id("pre-shuffle"), e));
      train_batches(id, full_net, opt, off, pretrain_set, order, rc.model.batch_size);
    }
  }

  // The hidden stack becomes the frozen embedding; the last layer is the
  // adaptable output network.
  auto [embed, head] = split_last_layer(full_net);
  EpisodicMemory mem(rc.memory_capacity, embed.output_dim(d), rc.adapt.epsilon,
                     TaskKind::classification);
  Optimizer opt = make_optimizer(rc.model);

  std::vector<Pred> preds;
  for (const auto& name : rc.eval.predictors) preds.push_back(parse_predictor(name));

  auto subset = subset_indices(test_set.size(), rc.eval.eval_subset,
                               derive_seed(seed, stream_id("eval-subset")));

  std::set<std::int64_t> novel(stream.novel_classes.begin(), stream.novel_classes.end());
  std::set<std::int64_t> pretrained(stream.pretrain_classes.begin(),
                                    stream.pretrain_classes.end());
  std::set<std::int64_t> starved(stream.starved_classes.begin(), stream.starved_classes.end());

  auto checkpoints = rc.eval.checkpoints;
  if (checkpoints.empty()) throw Error("incremental regime: no checkpoints configured");
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    if (checkpoints[i] <= 0.0 || (i > 0 && checkpoints[i] <= checkpoints[i - 1]))
      throw Error("incremental regime: checkpoints must be positive and strictly increasing");
  }

  std::size_t batches_per_epoch =
      (train_set.size() + rc.model.batch_size - 1) / rc.model.batch_size;
  std::vector<std::size_t> thresholds;
  for (double cp : checkpoints)
    thresholds.push_back(std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(cp * static_cast<double>(batches_per_epoch)))));
  auto epochs_needed = static_cast<std::size_t>(std::ceil(checkpoints.back()));

  std::vector<EvalRecord> records;
  AucTracker tracker;
  PhaseModel pm{&embed, &head, &mem, &rc.adapt, rc.mixture_lambda};

  auto evaluate_phase = [&](double epoch_fraction, std::size_t phase_id) {
    auto results = predict_subset(pm, test_set, subset, preds, rc.eval.threads,
                                  derive_seed(seed, stream_id("replay"), phase_id));
    auto in_novel = [&](std::int64_t l) { return novel.count(l) > 0; };
    auto in_pretrained = [&](std::int64_t l) { return pretrained.count(l) > 0; };
    for (std::size_t pi = 0; pi < preds.size(); ++pi) {
      const std::string& pname = rc.eval.predictors[pi];
      auto emit = [&](const std::string& split, const std::function<bool(std::int64_t)>& filt) {
        double top1 = subset_accuracy(test_set, subset, results[pi], filt, nullptr);
        records.push_back({1, epoch_fraction, pname, split, top1,
                           tracker.add(pname, split, epoch_fraction, top1)});
      };
      emit("novel", in_novel);
      emit("pretrained", in_pretrained);
      if (unbalanced) {
        emit("starved", [&](std::int64_t l) { return starved.count(l) > 0; });
        emit("full_novel", [&](std::int64_t l) { return novel.count(l) > 0 && !starved.count(l); });
        for (std::int64_t cls = 0; cls < static_cast<std::int64_t>(c); ++cls)
          emit("class:" + std::to_string(cls), [cls](std::int64_t l) { return l == cls; });
      }
    }
  };

  std::size_t global_batch = 0;
  std::size_t next_cp = 0;
  std::vector<Sample> batch;
  for (std::size_t e = 0; e < epochs_needed && next_cp < thresholds.size(); ++e) {
    auto order = shuffled_indices(train_set.size(), derive_seed(seed, stream_id("shuffle"), e));
    for (std::size_t start = 0;
         start < order.size() && next_cp < thresholds.size(); start += rc.model.batch_size) {
      std::size_t stop = std::min(order.size(), start + rc.model.batch_size);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i)
        batch.push_back({train_set.input(order[i]), train_set.targets[order[i]]});
      train_step(embed, head, opt, mem, batch);
      ++global_batch;
      while (next_cp < thresholds.size() && global_batch == thresholds[next_cp]) {
        evaluate_phase(checkpoints[next_cp], next_cp);
        ++next_cp;
      }
    }
  }
  // Thresholds past the end of training (rounding) are scored at the final state.
  while (next_cp < thresholds.size()) {
    evaluate_phase(checkpoints[next_cp], next_cp);
    ++next_cp;
  }
  return records;
}

}  // namespace

std::vector<EvalRecord> run_incremental(const TaskStream& stream, const RegimeConfig& rc) {
  if (stream.kind == TaskStream::Kind::permuted_tasks)
    throw Error("run_incremental: class stream required");
  return run_class_regime(stream, rc, stream.kind == TaskStream::Kind::unbalanced_classes);
}

std::vector<EvalRecord> run_unbalanced(const TaskStream& stream, const RegimeConfig& rc) {
  if (stream.kind != TaskStream::Kind::unbalanced_classes)
    throw Error("run_unbalanced: unbalanced stream required");
  return run_class_regime(stream, rc, true);
}

RegressionCurve run_regression_demo(const RegressionDemoConfig& cfg) {
  SyntheticSpec spec;
  spec.kind = SyntheticSpec::Kind::regression_1d;
  spec.dim = 1;
  spec.samples_per_class = cfg.n_points;
  spec.sigma = cfg.noise_sigma;
  spec.seed = derive_seed(cfg.seed, stream_id("reg-data"));
  LabeledDataset all_points = gen_synthetic(spec);

  // Train on the points outside the gap; the memory sees everything.
  LabeledDataset train;
  train.kind = TaskKind::regression;
  train.dim = 1;
  for (std::size_t i = 0; i < all_points.size(); ++i) {
    double x = all_points.input(i)[0];
    if (cfg.gap_enabled && x >= cfg.gap_lo && x <= cfg.gap_hi) continue;
    train.push(all_points.input(i), all_points.targets[i]);
  }
  if (train.size() == 0) throw Error("regression demo: gap swallowed every training point");

  OutputNet net = OutputNet::make_mlp(1, cfg.hidden, 1, HeadKind::regression, Activation::tanh,
                                      derive_seed(cfg.seed, stream_id("init")));
  Optimizer opt = Optimizer::adam(cfg.learning_rate);
  EmbeddingNet embed = EmbeddingNet::identity();
  EpisodicMemory off(0, 1, cfg.adapt.epsilon, TaskKind::regression);
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    auto order = shuffled_indices(train.size(), derive_seed(cfg.seed, stream_id("shuffle"), e));
    train_batches(embed, net, opt, off, train, order, cfg.batch_size);
  }

  EpisodicMemory mem(std::max<std::size_t>(all_points.size(), 1), 1, cfg.adapt.epsilon,
                     TaskKind::regression);
  for (std::size_t i = 0; i < all_points.size(); ++i)
    mem.append(all_points.input(i), all_points.targets[i]);

  RegressionCurve curve;
  std::size_t g = std::max<std::size_t>(cfg.grid_points, 2);
  auto k = static_cast<std::size_t>(cfg.adapt.k_neighbours);
  for (std::size_t i = 0; i < g; ++i) {
    double x = -2.0 + 4.0 * static_cast<double>(i) / static_cast<double>(g - 1);
    std::span<const double> q(&x, 1);
    Context ctx = mem.lookup(q, k);
    curve.x.push_back(x);
    curve.y_true.push_back(std::sin(3.0 * x));
    curve.y_parametric.push_back(forward(net, q)[0]);
    curve.y_attention.push_back(predict_attention_regression(ctx));
    curve.y_mbpa.push_back(predict_mbpa_on_context(net, q, ctx, cfg.adapt)[0]);
  }
  return curve;
}

std::vector<SweepPoint> run_sweep(const SweepSpec& sweep, const TaskStream& stream,
                                  const RegimeConfig& base) {
  if (sweep.values.empty()) throw Error("run_sweep: no axis values");
  std::set<double> distinct(sweep.values.begin(), sweep.values.end());
  if (distinct.size() != sweep.values.size()) throw Error("run_sweep: axis values must be distinct");

  std::vector<SweepPoint> out;
  for (double v : sweep.values) {
    RegimeConfig rc = base;
    switch (sweep.axis) {
      case SweepSpec::Axis::memory_capacity:
        rc.memory_capacity = static_cast<std::size_t>(v);
        break;
      case SweepSpec::Axis::k_neighbours:
        rc.adapt.k_neighbours = static_cast<int>(v);
        break;
      case SweepSpec::Axis::alpha_m:
        rc.adapt.alpha_m = v;
        break;
      case SweepSpec::Axis::steps:
        rc.adapt.steps = static_cast<int>(v);
        break;
      case SweepSpec::Axis::lambda:
        rc.mixture_lambda = v;
        break;
    }
    std::vector<EvalRecord> records;
    std::string split;
    if (stream.kind == TaskStream::Kind::permuted_tasks) {
      records = run_continual(stream, rc);
      split = "all";
    } else if (stream.kind == TaskStream::Kind::incremental_classes) {
      records = run_incremental(stream, rc);
      split = "novel";
    } else {
      records = run_unbalanced(stream, rc);
      split = "starved";
    }
    std::string pred = sweep.axis == SweepSpec::Axis::lambda ? "mixture" : "mbpa";
    out.push_back({v, final_top1(records, pred, split)});
  }
  return out;
}

namespace {

std::string num(double v) { return nlohmann::json(v).dump(); }

}  // namespace

std::string records_to_csv(std::span<const EvalRecord> records) {
  std::string out = "task,epoch,predictor,split,top1,auc_so_far\n";
  for (const auto& r : records) {
    out += std::to_string(r.task);
    out += ',';
    out += num(r.epoch);
    out += ',';
    out += r.predictor;
    out += ',';
    out += r.split;
    out += ',';
    out += num(r.top1);
    out += ',';
    out += num(r.auc_so_far);
    out += '\n';
  }
  return out;
}

std::string records_to_jsonl(std::span<const EvalRecord> records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::json j{{"task", r.task},         {"epoch", r.epoch}, {"predictor", r.predictor},
                     {"split", r.split},       {"top1", r.top1},   {"auc_so_far", r.auc_so_far}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string curve_to_csv(const RegressionCurve& curve) {
  std::string out = "x,y_true,y_parametric,y_attention,y_mbpa\n";
  for (std::size_t i = 0; i < curve.x.size(); ++i) {
    out += num(curve.x[i]) + ',' + num(curve.y_true[i]) + ',' + num(curve.y_parametric[i]) + ',' +
           num(curve.y_attention[i]) + ',' + num(curve.y_mbpa[i]) + '\n';
  }
  return out;
}

double final_top1(std::span<const EvalRecord> records, const std::string& predictor,
                  const std::string& split) {
  for (auto it = records.rbegin(); it != records.rend(); ++it)
    if (it->predictor == predictor && it->split == split) return it->top1;
  throw Error("no record for predictor '" + predictor + "' and split '" + split + "'");
}

}  // namespace mbpa
