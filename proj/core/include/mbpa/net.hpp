#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mbpa/param_vector.hpp"

namespace mbpa {

enum class Activation { relu, tanh };
enum class HeadKind { softmax, regression };
enum class LossKind { nll, mse };

struct LossSpec {
  LossKind kind = LossKind::nll;
};

// One weighted training example. `target` is a class id (softmax head) or a
// regression target (regression head).
struct TrainExample {
  std::span<const double> input;
  double target = 0.0;
  double weight = 1.0;
};

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

// Dense feed-forward network with either a softmax-classification or a
// scalar linear-regression head. Parameters live in one flat vector; the
// layout maps flat ranges back to (W, b) per layer.
class OutputNet {
 public:
  OutputNet() = default;

  // Seeded uniform fan-in init: W ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), b = 0.
  static OutputNet make_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                            std::size_t output_dim, HeadKind head, Activation act,
                            std::uint64_t seed);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t output_dim() const { return dims_.empty() ? 0 : dims_.back(); }
  std::size_t num_layers() const { return dims_.size(); }
  std::size_t layer_input_dim(std::size_t l) const { return l == 0 ? input_dim_ : dims_[l - 1]; }
  std::size_t layer_output_dim(std::size_t l) const { return dims_[l]; }
  HeadKind head() const { return head_; }
  Activation activation() const { return activation_; }

  const ParamVector& params() const { return params_; }
  ParamVector& params() { return params_; }

  std::span<const double> weight(std::size_t layer) const;
  std::span<const double> bias(std::size_t layer) const;
  std::span<double> weight(std::size_t layer);
  std::span<double> bias(std::size_t layer);

  // Same structure, different parameter values.
  OutputNet with_params(std::vector<double> values) const;

  Mask full_mask() const;
  Mask last_layer_mask() const;

  // Flat range [begin, end) of one layer's weights+bias.
  std::pair<std::size_t, std::size_t> layer_range(std::size_t layer) const;

  // Used when reconstructing a net from a serialized layout.
  static OutputNet from_structure(std::size_t input_dim, std::vector<std::size_t> dims,
                                  HeadKind head, Activation act, std::vector<double> values);

 private:
  std::size_t input_dim_ = 0;
  std::vector<std::size_t> dims_;  // output width per layer
  Activation activation_ = Activation::relu;
  HeadKind head_ = HeadKind::softmax;
  ParamVector params_;
};

// Embedding network f: identity, or a frozen dense stack (activation after
// every layer). It never receives gradient updates.
class EmbeddingNet {
 public:
  static EmbeddingNet identity();
  static EmbeddingNet dense_stack(std::size_t input_dim, std::vector<std::size_t> dims,
                                  Activation act, std::vector<double> values);

  bool is_identity() const { return identity_; }
  std::size_t output_dim(std::size_t input_dim) const;
  std::vector<double> embed(std::span<const double> x) const;
  void embed_into(std::span<const double> x, std::vector<double>& out) const;

  const ParamVector& params() const { return params_; }

 private:
  bool identity_ = true;
  std::size_t input_dim_ = 0;
  std::vector<std::size_t> dims_;
  Activation activation_ = Activation::relu;
  ParamVector params_;
};

// Scratch buffers reused across forward/backward calls on one thread.
struct NetWorkspace {
  std::vector<std::vector<double>> acts;    // post-activation per layer
  std::vector<std::vector<double>> deltas;  // backprop buffers
  std::vector<double> probs;
};

// Forward pass. Softmax head returns normalized probabilities; regression
// head returns a single-element vector. Throws ShapeError on a width
// mismatch and Error on non-finite activations (message names the layer).
std::vector<double> forward(const OutputNet& net, std::span<const double> input);
void forward_into(const OutputNet& net, std::span<const double> input, std::vector<double>& out,
                  NetWorkspace& ws);

// Weighted total loss and its gradient restricted to `mask` (entries outside
// the mask are exactly zero). Loss is the weighted SUM of per-example losses.
LossGrad loss_and_grad(const OutputNet& net, std::span<const TrainExample> batch, LossSpec loss,
                       const Mask& mask);
LossGrad loss_and_grad(const OutputNet& net, std::span<const TrainExample> batch, LossSpec loss,
                       const Mask& mask, NetWorkspace& ws);

// Forward-only evaluation of the same weighted total loss.
double loss_only(const OutputNet& net, std::span<const TrainExample> batch, LossSpec loss);

// Central-difference gradient oracle over masked coordinates.
std::vector<double> finite_diff_grad(const OutputNet& net, std::span<const TrainExample> batch,
                                     LossSpec loss, const Mask& mask, double step);

// Splits an L-layer MLP into a frozen embedding (layers 0..L-2, activation
// applied) and a single-layer head that keeps the original head kind.
std::pair<EmbeddingNet, OutputNet> split_last_layer(const OutputNet& net);

// Numerically stable helpers shared by the engine.
double log_sum_exp(std::span<const double> logits);
void softmax_into(std::span<const double> logits, std::vector<double>& out);

}  // namespace mbpa
