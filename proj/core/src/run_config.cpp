#include "mbpa/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace mbpa {

namespace {

using json = nlohmann::json;

[[noreturn]] void bad_key(const std::string& path, const std::string& why) {
  throw ConfigError(path + ": " + why);
}

std::string join_path(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

// Reads known keys out of one JSON object and rejects the rest by path.
class Section {
 public:
  Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) bad_key(path_.empty() ? "config" : path_, "expected a JSON object");
  }

  template <typename T>
  void field(const char* key, T& out) {
    claimed_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      bad_key(join_path(path_, key), "invalid value type");
    }
  }

  const json* child(const char* key) {
    claimed_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  // Rejects any key this section did not claim.
  void done() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!claimed_.count(it.key()))
        throw ConfigError("unknown config key: " + join_path(path_, it.key()));
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> claimed_;
};

void apply_synthetic(SyntheticSpec& s, const json& j, const std::string& path) {
  Section sec(j, path);
  std::string kind = s.kind == SyntheticSpec::Kind::regression_1d ? "regression-1d"
                                                                  : "gaussian-clusters";
  sec.field("kind", kind);
  if (kind == "gaussian-clusters")
    s.kind = SyntheticSpec::Kind::gaussian_clusters;
  else if (kind == "regression-1d")
    s.kind = SyntheticSpec::Kind::regression_1d;
  else
    bad_key(path + ".kind", "expected 'gaussian-clusters' or 'regression-1d'");
  sec.field("dim", s.dim);
  sec.field("classes", s.classes);
  sec.field("samples_per_class", s.samples_per_class);
  sec.field("sigma", s.sigma);
  sec.field("seed", s.seed);
  sec.done();
}

void apply_config(RunConfig& cfg, const json& j) {
  Section sec(j, "");
  sec.field("regime", cfg.regime);
  sec.field("seed", cfg.seed);
  sec.field("threads", cfg.threads);
  sec.field("out_dir", cfg.out_dir);
  sec.field("repeats", cfg.repeats);
  sec.field("eval_subset", cfg.eval_subset);
  sec.field("predictors", cfg.predictors);

  if (const json* d = sec.child("dataset")) {
    Section ds(*d, "dataset");
    ds.field("kind", cfg.dataset.kind);
    ds.field("mnist_dir", cfg.dataset.mnist_dir);
    if (const json* syn = ds.child("synthetic"))
      apply_synthetic(cfg.dataset.synthetic, *syn, "dataset.synthetic");
    ds.done();
  }
  if (const json* m = sec.child("model")) {
    Section ms(*m, "model");
    ms.field("hidden", cfg.model.hidden);
    ms.field("activation", cfg.model.activation);
    ms.field("optimizer", cfg.model.optimizer);
    ms.field("learning_rate", cfg.model.learning_rate);
    ms.field("batch_size", cfg.model.batch_size);
    ms.field("epochs", cfg.model.epochs);
    ms.field("pretrain_epochs", cfg.model.pretrain_epochs);
    ms.done();
  }
  if (const json* a = sec.child("adaptation")) {
    Section as(*a, "adaptation");
    as.field("alpha_m", cfg.adaptation.alpha_m);
    as.field("beta", cfg.adaptation.beta);
    as.field("steps", cfg.adaptation.steps);
    as.field("k", cfg.adaptation.k);
    as.field("epsilon", cfg.adaptation.epsilon);
    as.field("mask", cfg.adaptation.mask);
    as.field("local_optimizer", cfg.adaptation.local_optimizer);
    as.field("fallback", cfg.adaptation.fallback);
    as.done();
  }
  if (const json* m = sec.child("memory")) {
    Section ms(*m, "memory");
    ms.field("capacity", cfg.memory.capacity);
    ms.done();
  }
  if (const json* m = sec.child("mixture")) {
    Section ms(*m, "mixture");
    ms.field("lambda", cfg.mixture.lambda);
    ms.done();
  }
  if (const json* c = sec.child("continual")) {
    Section cs(*c, "continual");
    cs.field("num_tasks", cfg.continual.num_tasks);
    cs.field("train_per_task", cfg.continual.train_per_task);
    cs.field("test_per_task", cfg.continual.test_per_task);
    cs.done();
  }
  if (const json* i = sec.child("incremental")) {
    Section is(*i, "incremental");
    is.field("checkpoints", cfg.incremental.checkpoints);
    is.field("pretrain_fraction", cfg.incremental.pretrain_fraction);
    is.done();
  }
  if (const json* u = sec.child("unbalanced")) {
    Section us(*u, "unbalanced");
    us.field("starved_fraction", cfg.unbalanced.starved_fraction);
    us.done();
  }
  if (const json* r = sec.child("regression")) {
    Section rs(*r, "regression");
    rs.field("n_points", cfg.regression.n_points);
    rs.field("noise_sigma", cfg.regression.noise_sigma);
    rs.field("grid_points", cfg.regression.grid_points);
    rs.field("gap_enabled", cfg.regression.gap_enabled);
    rs.field("gap_lo", cfg.regression.gap_lo);
    rs.field("gap_hi", cfg.regression.gap_hi);
    rs.field("epochs", cfg.regression.epochs);
    rs.field("learning_rate", cfg.regression.learning_rate);
    rs.field("alpha_m", cfg.regression.alpha_m);
    rs.field("steps", cfg.regression.steps);
    rs.field("local_optimizer", cfg.regression.local_optimizer);
    rs.done();
  }
  if (const json* s = sec.child("sweep")) {
    Section ss(*s, "sweep");
    ss.field("axis", cfg.sweep.axis);
    ss.field("values", cfg.sweep.values);
    ss.field("regime", cfg.sweep.regime);
    ss.done();
  }
  sec.done();
}

void require(bool ok, const std::string& path, const std::string& why) {
  if (!ok) bad_key(path, why);
}

void validate(const RunConfig& cfg) {
  static const std::set<std::string> regimes{"continual", "incremental", "unbalanced",
                                             "regression-demo", "sweep"};
  require(regimes.count(cfg.regime) > 0, "regime",
          "expected one of continual|incremental|unbalanced|regression-demo|sweep");
  require(cfg.threads >= 0, "threads", "must be >= 0");
  require(cfg.repeats >= 1, "repeats", "must be >= 1");
  require(!cfg.predictors.empty(), "predictors", "must not be empty");
  static const std::set<std::string> preds{"parametric", "mbpa", "attention", "mixture",
                                           "mbpa_random"};
  for (const auto& p : cfg.predictors)
    require(preds.count(p) > 0, "predictors", "unknown predictor '" + p + "'");

  require(cfg.dataset.kind == "synthetic" || cfg.dataset.kind == "mnist", "dataset.kind",
          "expected 'synthetic' or 'mnist'");
  require(cfg.dataset.synthetic.dim >= 1, "dataset.synthetic.dim", "must be >= 1");
  require(cfg.dataset.synthetic.classes >= 1, "dataset.synthetic.classes", "must be >= 1");
  require(cfg.dataset.synthetic.samples_per_class >= 1, "dataset.synthetic.samples_per_class",
          "must be >= 1");
  require(cfg.dataset.synthetic.sigma >= 0.0, "dataset.synthetic.sigma", "must be >= 0");

  require(cfg.model.activation == "relu" || cfg.model.activation == "tanh", "model.activation",
          "expected 'relu' or 'tanh'");
  require(cfg.model.optimizer == "sgd" || cfg.model.optimizer == "adam" ||
              cfg.model.optimizer == "rmsprop",
          "model.optimizer", "expected sgd|adam|rmsprop");
  require(cfg.model.learning_rate >= 0.0, "model.learning_rate", "must be >= 0");
  require(cfg.model.batch_size >= 1, "model.batch_size", "must be >= 1");
  require(cfg.model.epochs > 0.0, "model.epochs", "must be > 0");

  require(cfg.adaptation.alpha_m >= 0.0, "adaptation.alpha_m", "must be >= 0");
  require(cfg.adaptation.beta >= 0.0, "adaptation.beta", "must be >= 0");
  require(cfg.adaptation.steps >= 0, "adaptation.steps", "must be >= 0");
  require(cfg.adaptation.k >= 1, "adaptation.k", "must be >= 1");
  require(cfg.adaptation.epsilon >= 0.0, "adaptation.epsilon", "must be >= 0");
  require(cfg.adaptation.mask == "all" || cfg.adaptation.mask == "last_layer", "adaptation.mask",
          "expected 'all' or 'last_layer'");
  require(cfg.adaptation.local_optimizer == "sgd" || cfg.adaptation.local_optimizer == "rmsprop",
          "adaptation.local_optimizer", "expected 'sgd' or 'rmsprop'");

  require(cfg.mixture.lambda >= 0.0 && cfg.mixture.lambda <= 1.0, "mixture.lambda",
          "must lie in [0, 1]");

  require(cfg.continual.num_tasks >= 1, "continual.num_tasks", "must be >= 1");
  require(cfg.continual.train_per_task >= 1, "continual.train_per_task", "must be >= 1");
  require(cfg.continual.test_per_task >= 1, "continual.test_per_task", "must be >= 1");

  require(!cfg.incremental.checkpoints.empty(), "incremental.checkpoints", "must not be empty");
  for (std::size_t i = 0; i < cfg.incremental.checkpoints.size(); ++i) {
    double c = cfg.incremental.checkpoints[i];
    require(c > 0.0, "incremental.checkpoints", "entries must be > 0");
    if (i > 0)
      require(c > cfg.incremental.checkpoints[i - 1], "incremental.checkpoints",
              "must be strictly increasing");
  }
  require(cfg.incremental.pretrain_fraction > 0.0 && cfg.incremental.pretrain_fraction < 1.0,
          "incremental.pretrain_fraction", "must lie in (0, 1)");
  require(cfg.unbalanced.starved_fraction > 0.0 && cfg.unbalanced.starved_fraction <= 1.0,
          "unbalanced.starved_fraction", "must lie in (0, 1]");

  require(cfg.regression.n_points >= 2, "regression.n_points", "must be >= 2");
  require(cfg.regression.noise_sigma >= 0.0, "regression.noise_sigma", "must be >= 0");
  require(cfg.regression.grid_points >= 2, "regression.grid_points", "must be >= 2");
  require(cfg.regression.gap_lo < cfg.regression.gap_hi, "regression.gap_lo",
          "must be < regression.gap_hi");
  require(cfg.regression.epochs >= 1, "regression.epochs", "must be >= 1");
  require(cfg.regression.learning_rate > 0.0, "regression.learning_rate", "must be > 0");
  require(cfg.regression.alpha_m >= 0.0, "regression.alpha_m", "must be >= 0");
  require(cfg.regression.steps >= 0, "regression.steps", "must be >= 0");
  require(cfg.regression.local_optimizer == "sgd" || cfg.regression.local_optimizer == "rmsprop",
          "regression.local_optimizer", "expected 'sgd' or 'rmsprop'");

  static const std::set<std::string> axes{"memory_capacity", "k", "alpha_m", "steps", "lambda"};
  require(axes.count(cfg.sweep.axis) > 0, "sweep.axis",
          "expected memory_capacity|k|alpha_m|steps|lambda");
  require(!cfg.sweep.values.empty(), "sweep.values", "must not be empty");
  std::set<double> distinct(cfg.sweep.values.begin(), cfg.sweep.values.end());
  require(distinct.size() == cfg.sweep.values.size(), "sweep.values", "must be distinct");
  require(cfg.sweep.regime == "continual" || cfg.sweep.regime == "incremental" ||
              cfg.sweep.regime == "unbalanced",
          "sweep.regime", "expected continual|incremental|unbalanced");
}

json parse_override_value(const std::string& text) {
  json v = json::parse(text, nullptr, false);
  if (v.is_discarded()) return json(text);  // bare strings stay strings
  return v;
}

void merge_override(json& root, const std::string& dotted, const std::string& value) {
  json* node = &root;
  std::size_t start = 0;
  for (;;) {
    std::size_t dot = dotted.find('.', start);
    std::string key = dotted.substr(start, dot == std::string::npos ? dot : dot - start);
    if (key.empty()) throw ConfigError("override has an empty key segment: " + dotted);
    if (dot == std::string::npos) {
      (*node)[key] = parse_override_value(value);
      return;
    }
    if (!node->contains(key) || !(*node)[key].is_object()) (*node)[key] = json::object();
    node = &(*node)[key];
    start = dot + 1;
  }
}

}  // namespace

RunConfig parse_config(const std::string& json_text, const ConfigOverrides& overrides) {
  json j;
  if (json_text.empty()) {
    j = json::object();
  } else {
    j = json::parse(json_text, nullptr, false);
    if (j.is_discarded()) throw ConfigError("malformed JSON config");
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  for (const auto& [key, value] : overrides) merge_override(j, key, value);

  RunConfig cfg;
  apply_config(cfg, j);
  validate(cfg);
  return cfg;
}

RunConfig parse_config_file(const std::filesystem::path& path, const ConfigOverrides& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), overrides);
}

std::string to_json_string(const RunConfig& cfg) {
  json j{
      {"regime", cfg.regime},
      {"seed", cfg.seed},
      {"threads", cfg.threads},
      {"out_dir", cfg.out_dir},
      {"repeats", cfg.repeats},
      {"eval_subset", cfg.eval_subset},
      {"predictors", cfg.predictors},
      {"dataset",
       {{"kind", cfg.dataset.kind},
        {"mnist_dir", cfg.dataset.mnist_dir},
        {"synthetic",
         {{"kind", cfg.dataset.synthetic.kind == SyntheticSpec::Kind::regression_1d
                       ? "regression-1d"
                       : "gaussian-clusters"},
          {"dim", cfg.dataset.synthetic.dim},
          {"classes", cfg.dataset.synthetic.classes},
          {"samples_per_class", cfg.dataset.synthetic.samples_per_class},
          {"sigma", cfg.dataset.synthetic.sigma},
          {"seed", cfg.dataset.synthetic.seed}}}}},
      {"model",
       {{"hidden", cfg.model.hidden},
        {"activation", cfg.model.activation},
        {"optimizer", cfg.model.optimizer},
        {"learning_rate", cfg.model.learning_rate},
        {"batch_size", cfg.model.batch_size},
        {"epochs", cfg.model.epochs},
        {"pretrain_epochs", cfg.model.pretrain_epochs}}},
      {"adaptation",
       {{"alpha_m", cfg.adaptation.alpha_m},
        {"beta", cfg.adaptation.beta},
        {"steps", cfg.adaptation.steps},
        {"k", cfg.adaptation.k},
        {"epsilon", cfg.adaptation.epsilon},
        {"mask", cfg.adaptation.mask},
        {"local_optimizer", cfg.adaptation.local_optimizer},
        {"fallback", cfg.adaptation.fallback}}},
      {"memory", {{"capacity", cfg.memory.capacity}}},
      {"mixture", {{"lambda", cfg.mixture.lambda}}},
      {"continual",
       {{"num_tasks", cfg.continual.num_tasks},
        {"train_per_task", cfg.continual.train_per_task},
        {"test_per_task", cfg.continual.test_per_task}}},
      {"incremental",
       {{"checkpoints", cfg.incremental.checkpoints},
        {"pretrain_fraction", cfg.incremental.pretrain_fraction}}},
      {"unbalanced", {{"starved_fraction", cfg.unbalanced.starved_fraction}}},
      {"regression",
       {{"n_points", cfg.regression.n_points},
        {"noise_sigma", cfg.regression.noise_sigma},
        {"grid_points", cfg.regression.grid_points},
        {"gap_enabled", cfg.regression.gap_enabled},
        {"gap_lo", cfg.regression.gap_lo},
        {"gap_hi", cfg.regression.gap_hi},
        {"epochs", cfg.regression.epochs},
        {"learning_rate", cfg.regression.learning_rate},
        {"alpha_m", cfg.regression.alpha_m},
        {"steps", cfg.regression.steps},
        {"local_optimizer", cfg.regression.local_optimizer}}},
      {"sweep",
       {{"axis", cfg.sweep.axis},
        {"values", cfg.sweep.values},
        {"regime", cfg.sweep.regime}}},
  };
  return j.dump(2) + "\n";
}

AdaptationConfig adaptation_config(const RunConfig& cfg) {
  AdaptationConfig a;
  a.alpha_m = cfg.adaptation.alpha_m;
  a.beta = cfg.adaptation.beta;
  a.steps = cfg.adaptation.steps;
  a.k_neighbours = cfg.adaptation.k;
  a.epsilon = cfg.adaptation.epsilon;
  a.mask = cfg.adaptation.mask == "last_layer" ? MaskSpec::last_layer : MaskSpec::all;
  a.local_optimizer =
      cfg.adaptation.local_optimizer == "rmsprop" ? LocalOpt::rmsprop : LocalOpt::sgd;
  a.fallback_parametric = cfg.adaptation.fallback;
  return a;
}

RegimeConfig regime_config(const RunConfig& cfg) {
  RegimeConfig rc;
  rc.model.hidden = cfg.model.hidden;
  rc.model.activation = cfg.model.activation == "tanh" ? Activation::tanh : Activation::relu;
  rc.model.optimizer = cfg.model.optimizer == "sgd"       ? Optimizer::Kind::sgd
                       : cfg.model.optimizer == "rmsprop" ? Optimizer::Kind::rmsprop
                                                          : Optimizer::Kind::adam;
  rc.model.learning_rate = cfg.model.learning_rate;
  rc.model.batch_size = cfg.model.batch_size;
  rc.model.epochs = cfg.model.epochs;
  rc.model.pretrain_epochs = cfg.model.pretrain_epochs;
  rc.model.seed = cfg.seed;
  rc.adapt = adaptation_config(cfg);
  rc.memory_capacity = cfg.memory.capacity;
  rc.mixture_lambda = cfg.mixture.lambda;
  rc.eval.checkpoints = cfg.incremental.checkpoints;
  rc.eval.eval_subset = cfg.eval_subset;
  rc.eval.threads = cfg.threads;
  rc.eval.predictors = cfg.predictors;
  return rc;
}

RegressionDemoConfig regression_demo_config(const RunConfig& cfg) {
  RegressionDemoConfig rd;
  rd.n_points = cfg.regression.n_points;
  rd.noise_sigma = cfg.regression.noise_sigma;
  rd.gap_enabled = cfg.regression.gap_enabled;
  rd.gap_lo = cfg.regression.gap_lo;
  rd.gap_hi = cfg.regression.gap_hi;
  rd.grid_points = cfg.regression.grid_points;
  rd.learning_rate = cfg.regression.learning_rate;
  rd.epochs = cfg.regression.epochs;
  rd.seed = cfg.seed;
  rd.adapt = adaptation_config(cfg);
  rd.adapt.alpha_m = cfg.regression.alpha_m;
  rd.adapt.steps = cfg.regression.steps;
  rd.adapt.local_optimizer =
      cfg.regression.local_optimizer == "rmsprop" ? LocalOpt::rmsprop : LocalOpt::sgd;
  return rd;
}

SweepSpec sweep_spec(const RunConfig& cfg) {
  SweepSpec s;
  if (cfg.sweep.axis == "memory_capacity")
    s.axis = SweepSpec::Axis::memory_capacity;
  else if (cfg.sweep.axis == "k")
    s.axis = SweepSpec::Axis::k_neighbours;
  else if (cfg.sweep.axis == "alpha_m")
    s.axis = SweepSpec::Axis::alpha_m;
  else if (cfg.sweep.axis == "steps")
    s.axis = SweepSpec::Axis::steps;
  else
    s.axis = SweepSpec::Axis::lambda;
  s.values = cfg.sweep.values;
  return s;
}

}  // namespace mbpa
