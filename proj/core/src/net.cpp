#include "mbpa/net.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mbpa/rng.hpp"

namespace mbpa {

namespace {

double activate(Activation act, double a) {
  return act == Activation::relu ? (a > 0.0 ? a : 0.0) : std::tanh(a);
}

// Derivative expressed through the post-activation value.
double activate_grad(Activation act, double post) {
  return act == Activation::relu ? (post > 0.0 ? 1.0 : 0.0) : 1.0 - post * post;
}

void check_finite(std::span<const double> v, std::size_t layer) {
  for (double x : v) {
    if (!std::isfinite(x))
      throw Error("non-finite activation in layer " + std::to_string(layer));
  }
}

std::shared_ptr<const ParamLayout> mlp_layout(std::size_t input_dim,
                                              const std::vector<std::size_t>& dims) {
  std::vector<LayoutEntry> entries;
  std::size_t in = input_dim;
  for (std::size_t l = 0; l < dims.size(); ++l) {
    entries.push_back({static_cast<std::uint32_t>(l), TensorKind::weight, dims[l], in, 0});
    entries.push_back({static_cast<std::uint32_t>(l), TensorKind::bias, dims[l], 1, 0});
    in = dims[l];
  }
  return std::make_shared<const ParamLayout>(std::move(entries));
}

}  // namespace

double log_sum_exp(std::span<const double> logits) {
  double m = logits[0];
  for (double z : logits) m = std::max(m, z);
  double s = 0.0;
  for (double z : logits) s += std::exp(z - m);
  return m + std::log(s);
}

void softmax_into(std::span<const double> logits, std::vector<double>& out) {
  out.resize(logits.size());
  double m = logits[0];
  for (double z : logits) m = std::max(m, z);
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    s += out[i];
  }
  for (double& p : out) p /= s;
}

OutputNet OutputNet::make_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                              std::size_t output_dim, HeadKind head, Activation act,
                              std::uint64_t seed) {
  if (input_dim == 0 || output_dim == 0) throw ShapeError("make_mlp: zero width");
  if (head == HeadKind::regression && output_dim != 1)
    throw ShapeError("make_mlp: regression head requires output_dim == 1");
  for (std::size_t h : hidden)
    if (h == 0) throw ShapeError("make_mlp: zero hidden width");

  OutputNet net;
  net.input_dim_ = input_dim;
  net.dims_ = hidden;
  net.dims_.push_back(output_dim);
  net.activation_ = act;
  net.head_ = head;
  net.params_.layout = mlp_layout(input_dim, net.dims_);
  net.params_.values.assign(net.params_.layout->total_size(), 0.0);

  auto rng = make_rng(seed);
  std::size_t in = input_dim;
  for (std::size_t l = 0; l < net.dims_.size(); ++l) {
    double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    auto w = net.weight(l);
    for (double& x : w) x = dist(rng);
    in = net.dims_[l];
  }
  return net;
}

OutputNet OutputNet::from_structure(std::size_t input_dim, std::vector<std::size_t> dims,
                                    HeadKind head, Activation act, std::vector<double> values) {
  OutputNet net;
  net.input_dim_ = input_dim;
  net.dims_ = std::move(dims);
  net.activation_ = act;
  net.head_ = head;
  net.params_.layout = mlp_layout(input_dim, net.dims_);
  if (values.size() != net.params_.layout->total_size())
    throw ShapeError("from_structure: value count does not match layout");
  net.params_.values = std::move(values);
  return net;
}

std::span<const double> OutputNet::weight(std::size_t layer) const {
  const auto& e = params_.layout->entries()[2 * layer];
  return {params_.values.data() + e.offset, e.size()};
}

std::span<const double> OutputNet::bias(std::size_t layer) const {
  const auto& e = params_.layout->entries()[2 * layer + 1];
  return {params_.values.data() + e.offset, e.size()};
}

std::span<double> OutputNet::weight(std::size_t layer) {
  const auto& e = params_.layout->entries()[2 * layer];
  return {params_.values.data() + e.offset, e.size()};
}

std::span<double> OutputNet::bias(std::size_t layer) {
  const auto& e = params_.layout->entries()[2 * layer + 1];
  return {params_.values.data() + e.offset, e.size()};
}

OutputNet OutputNet::with_params(std::vector<double> values) const {
  if (values.size() != params_.values.size())
    throw ShapeError("with_params: value count mismatch");
  OutputNet net = *this;
  net.params_.values = std::move(values);
  return net;
}

Mask OutputNet::full_mask() const { return Mask(params_.size(), 1); }

Mask OutputNet::last_layer_mask() const {
  Mask m(params_.size(), 0);
  auto [begin, end] = layer_range(dims_.size() - 1);
  std::fill(m.begin() + static_cast<std::ptrdiff_t>(begin),
            m.begin() + static_cast<std::ptrdiff_t>(end), 1);
  return m;
}

std::pair<std::size_t, std::size_t> OutputNet::layer_range(std::size_t layer) const {
  const auto& w = params_.layout->entries()[2 * layer];
  const auto& b = params_.layout->entries()[2 * layer + 1];
  return {w.offset, b.offset + b.size()};
}

EmbeddingNet EmbeddingNet::identity() { return EmbeddingNet{}; }

EmbeddingNet EmbeddingNet::dense_stack(std::size_t input_dim, std::vector<std::size_t> dims,
                                       Activation act, std::vector<double> values) {
  EmbeddingNet e;
  e.identity_ = false;
  e.input_dim_ = input_dim;
  e.dims_ = std::move(dims);
  e.activation_ = act;
  e.params_.layout = mlp_layout(input_dim, e.dims_);
  if (values.size() != e.params_.layout->total_size())
    throw ShapeError("dense_stack: value count does not match layout");
  e.params_.values = std::move(values);
  return e;
}

std::size_t EmbeddingNet::output_dim(std::size_t input_dim) const {
  return identity_ ? input_dim : dims_.back();
}

std::vector<double> EmbeddingNet::embed(std::span<const double> x) const {
  std::vector<double> out;
  embed_into(x, out);
  return out;
}

void EmbeddingNet::embed_into(std::span<const double> x, std::vector<double>& out) const {
  if (identity_) {
    out.assign(x.begin(), x.end());
    return;
  }
  if (x.size() != input_dim_) throw ShapeError("embed: input width mismatch");
  std::vector<double> cur(x.begin(), x.end());
  std::vector<double> next;
  std::size_t in = input_dim_;
  for (std::size_t l = 0; l < dims_.size(); ++l) {
    const auto& we = params_.layout->entries()[2 * l];
    const auto& be = params_.layout->entries()[2 * l + 1];
    const double* W = params_.values.data() + we.offset;
    const double* b = params_.values.data() + be.offset;
    next.assign(dims_[l], 0.0);
    for (std::size_t i = 0; i < dims_[l]; ++i) {
      double a = b[i];
      const double* wrow = W + i * in;
      for (std::size_t j = 0; j < in; ++j) a += wrow[j] * cur[j];
      next[i] = a;
    }
    check_finite(next, l);
    for (double& v : next) v = activate(activation_, v);
    cur.swap(next);
    in = dims_[l];
  }
  out = std::move(cur);
}

namespace {

// Linear pass of one layer into `out` (no activation).
void dense_forward(const OutputNet& net, std::size_t layer, std::span<const double> in,
                   std::vector<double>& out) {
  std::size_t in_dim = net.layer_input_dim(layer);
  std::size_t out_dim = net.layer_output_dim(layer);
  auto W = net.weight(layer);
  auto b = net.bias(layer);
  out.resize(out_dim);
  for (std::size_t i = 0; i < out_dim; ++i) {
    double a = b[i];
    const double* wrow = W.data() + i * in_dim;
    for (std::size_t j = 0; j < in_dim; ++j) a += wrow[j] * in[j];
    out[i] = a;
  }
}

// Runs the stack up to the logits; post-activation values land in ws.acts.
// ws.acts[l] holds the output of layer l (activation applied except for the
// final layer, whose raw logits are stored).
void run_stack(const OutputNet& net, std::span<const double> input, NetWorkspace& ws) {
  if (input.size() != net.input_dim()) throw ShapeError("forward: input width mismatch");
  std::size_t L = net.num_layers();
  ws.acts.resize(L);
  std::span<const double> cur = input;
  for (std::size_t l = 0; l < L; ++l) {
    dense_forward(net, l, cur, ws.acts[l]);
    // Checked before the nonlinearity: relu would silently flush a
    // non-finite pre-activation to zero.
    check_finite(ws.acts[l], l);
    if (l + 1 < L) {
      for (double& v : ws.acts[l]) v = activate(net.activation(), v);
    }
    cur = ws.acts[l];
  }
}

double example_loss(const OutputNet& net, const std::vector<double>& logits, double target,
                    LossKind kind) {
  if (kind == LossKind::nll) {
    auto cls = static_cast<std::size_t>(std::llround(target));
    if (cls >= logits.size()) throw ShapeError("loss: class id out of range");
    return log_sum_exp(logits) - logits[cls];
  }
  (void)net;
  double diff = logits[0] - target;
  return diff * diff;
}

}  // namespace

std::vector<double> forward(const OutputNet& net, std::span<const double> input) {
  NetWorkspace ws;
  std::vector<double> out;
  forward_into(net, input, out, ws);
  return out;
}

void forward_into(const OutputNet& net, std::span<const double> input, std::vector<double>& out,
                  NetWorkspace& ws) {
  run_stack(net, input, ws);
  const auto& logits = ws.acts.back();
  if (net.head() == HeadKind::softmax) {
    softmax_into(logits, out);
  } else {
    out.assign(1, logits[0]);
  }
}

LossGrad loss_and_grad(const OutputNet& net, std::span<const TrainExample> batch, LossSpec loss,
                       const Mask& mask) {
  NetWorkspace ws;
  return loss_and_grad(net, batch, loss, mask, ws);
}

LossGrad loss_and_grad(const OutputNet& net, std::span<const TrainExample> batch, LossSpec loss,
                       const Mask& mask, NetWorkspace& ws) {
  if (batch.empty()) throw Error("loss_and_grad: empty batch");
  if (mask.size() != net.params().size()) throw ShapeError("loss_and_grad: mask length mismatch");

  std::size_t L = net.num_layers();

  // Lowest layer with any masked parameter; backprop stops below it.
  std::size_t lowest = L;
  for (std::size_t l = 0; l < L; ++l) {
    auto [begin, end] = net.layer_range(l);
    if (std::any_of(mask.begin() + static_cast<std::ptrdiff_t>(begin),
                    mask.begin() + static_cast<std::ptrdiff_t>(end),
                    [](std::uint8_t m) { return m != 0; })) {
      lowest = l;
      break;
    }
  }

  LossGrad result;
  result.grad.assign(net.params().size(), 0.0);
  ws.deltas.resize(L);

  for (const auto& ex : batch) {
    if (ex.weight < 0.0) throw Error("loss_and_grad: negative example weight");
    run_stack(net, ex.input, ws);
    const auto& logits = ws.acts.back();
    result.loss += ex.weight * example_loss(net, logits, ex.target, loss.kind);
    if (ex.weight == 0.0 || lowest == L) continue;

    // Gradient w.r.t. logits.
    auto& dlogits = ws.deltas[L - 1];
    if (loss.kind == LossKind::nll) {
      softmax_into(logits, ws.probs);
      auto cls = static_cast<std::size_t>(std::llround(ex.target));
      dlogits.resize(logits.size());
      for (std::size_t i = 0; i < logits.size(); ++i)
        dlogits[i] = ex.weight * (ws.probs[i] - (i == cls ? 1.0 : 0.0));
    } else {
      dlogits.assign(1, ex.weight * 2.0 * (logits[0] - ex.target));
    }

    for (std::size_t li = L; li-- > lowest;) {
      std::size_t in_dim = net.layer_input_dim(li);
      std::size_t out_dim = net.layer_output_dim(li);
      std::span<const double> in_act = li == 0 ? ex.input : std::span<const double>(ws.acts[li - 1]);
      const auto& delta = ws.deltas[li];
      auto [w_begin, b_begin_unused] = net.layer_range(li);
      (void)b_begin_unused;
      double* gW = result.grad.data() + w_begin;
      double* gb = gW + in_dim * out_dim;
      for (std::size_t i = 0; i < out_dim; ++i) {
        double d = delta[i];
        if (d == 0.0) continue;
        double* grow = gW + i * in_dim;
        for (std::size_t j = 0; j < in_dim; ++j) grow[j] += d * in_act[j];
        gb[i] += d;
      }
      if (li > lowest && li > 0) {
        auto W = net.weight(li);
        auto& dprev = ws.deltas[li - 1];
        dprev.assign(in_dim, 0.0);
        for (std::size_t i = 0; i < out_dim; ++i) {
          double d = delta[i];
          if (d == 0.0) continue;
          const double* wrow = W.data() + i * in_dim;
          for (std::size_t j = 0; j < in_dim; ++j) dprev[j] += d * wrow[j];
        }
        for (std::size_t j = 0; j < in_dim; ++j)
          dprev[j] *= activate_grad(net.activation(), ws.acts[li - 1][j]);
      }
    }
  }

  for (std::size_t i = 0; i < mask.size(); ++i)
    if (!mask[i]) result.grad[i] = 0.0;
  return result;
}

double loss_only(const OutputNet& net, std::span<const TrainExample> batch, LossSpec loss) {
  if (batch.empty()) throw Error("loss_only: empty batch");
  NetWorkspace ws;
  double total = 0.0;
  for (const auto& ex : batch) {
    if (ex.weight < 0.0) throw Error("loss_only: negative example weight");
    run_stack(net, ex.input, ws);
    total += ex.weight * example_loss(net, ws.acts.back(), ex.target, loss.kind);
  }
  return total;
}

std::vector<double> finite_diff_grad(const OutputNet& net, std::span<const TrainExample> batch,
                                     LossSpec loss, const Mask& mask, double step) {
  if (step <= 0.0) throw Error("finite_diff_grad: step must be positive");
  if (mask.size() != net.params().size())
    throw ShapeError("finite_diff_grad: mask length mismatch");
  OutputNet probe = net;
  auto& v = probe.params().values;
  std::vector<double> grad(v.size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!mask[i]) continue;
    double orig = v[i];
    v[i] = orig + step;
    double up = loss_only(probe, batch, loss);
    v[i] = orig - step;
    double down = loss_only(probe, batch, loss);
    v[i] = orig;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

std::pair<EmbeddingNet, OutputNet> split_last_layer(const OutputNet& net) {
  if (net.num_layers() < 2) throw ShapeError("split_last_layer: need at least two layers");
  std::size_t L = net.num_layers();

  std::vector<std::size_t> embed_dims;
  std::vector<double> embed_values;
  for (std::size_t l = 0; l + 1 < L; ++l) {
    embed_dims.push_back(net.layer_output_dim(l));
    auto W = net.weight(l);
    auto b = net.bias(l);
    embed_values.insert(embed_values.end(), W.begin(), W.end());
    embed_values.insert(embed_values.end(), b.begin(), b.end());
  }
  EmbeddingNet embed = EmbeddingNet::dense_stack(net.input_dim(), std::move(embed_dims),
                                                 net.activation(), std::move(embed_values));

  std::vector<double> head_values;
  auto W = net.weight(L - 1);
  auto b = net.bias(L - 1);
  head_values.insert(head_values.end(), W.begin(), W.end());
  head_values.insert(head_values.end(), b.begin(), b.end());
  OutputNet head = OutputNet::from_structure(net.layer_input_dim(L - 1),
                                             {net.layer_output_dim(L - 1)}, net.head(),
                                             net.activation(), std::move(head_values));
  return {std::move(embed), std::move(head)};
}

}  // namespace mbpa
