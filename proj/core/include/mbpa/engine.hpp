#pragma once

#include <random>
#include <span>
#include <vector>

#include "mbpa/memory.hpp"
#include "mbpa/net.hpp"
#include "mbpa/optimizer.hpp"

namespace mbpa {

enum class MaskSpec { all, last_layer };
enum class LocalOpt { sgd, rmsprop };

// Hyperparameters of the local adaptation performed at prediction time.
struct AdaptationConfig {
  double alpha_m = 0.1;       // local learning rate
  double beta = 0.0;          // elastic pull toward the trained parameters
  int steps = 10;             // number of local gradient steps T
  int k_neighbours = 10;      // context size K
  double epsilon = 1e-3;      // kernel constant of the backing memory
  MaskSpec mask = MaskSpec::all;
  LocalOpt local_optimizer = LocalOpt::sgd;
  bool fallback_parametric = true;  // empty memory -> parametric prediction
};

// Ephemeral correction on top of the trained parameters. Built per
// prediction, discarded after the output is produced; never writes through
// to the base network.
struct AdaptedOverlay {
  ParamVector delta;              // zero outside the mask
  Mask mask;
  std::vector<double> rms_state;  // second-moment accumulator (rmsprop only)

  double delta_norm() const;
};

struct Sample {
  std::span<const double> x;
  double target = 0.0;
};

Mask make_mask(const OutputNet& net, MaskSpec spec);
AdaptedOverlay make_overlay(const OutputNet& net, const AdaptationConfig& cfg);

LossSpec loss_for_head(HeadKind head);

// One training step: an optimizer update of the net on the batch mean loss,
// then every embedded example is appended to memory. No local adaptation.
// Returns the mean batch loss.
double train_step(const EmbeddingNet& embed, OutputNet& net, Optimizer& opt, EpisodicMemory& mem,
                  std::span<const Sample> batch);

// The objective minimized by local adaptation at `params`:
//   sum_k w_k * loss(g_params(h_k), v_k)  +  (beta/2) * |params - theta_ref|^2
// with the quadratic term restricted to the mask.
double adaptation_objective(const OutputNet& net, std::span<const double> params,
                            const Context& ctx, double beta, std::span<const double> theta_ref,
                            const Mask& mask);

// One local step: delta <- delta + d where d is one optimizer step on the
// adaptation objective evaluated at theta + delta. `net_x` must hold
// theta + delta on entry and is updated in place alongside the overlay.
void mbpa_step(OutputNet& net_x, AdaptedOverlay& overlay, const OutputNet& base,
               const Context& ctx, const AdaptationConfig& cfg);

// Runs cfg.steps local steps from delta = 0 and returns the overlay.
AdaptedOverlay run_adaptation(const OutputNet& net, const Context& ctx,
                              const AdaptationConfig& cfg);

// Prediction with temporarily adapted parameters g_{theta+delta}(f(x)).
// The base net is bit-identical before and after the call.
std::vector<double> predict_mbpa(const EmbeddingNet& embed, const OutputNet& net,
                                 const EpisodicMemory& mem, std::span<const double> x,
                                 const AdaptationConfig& cfg);

// Same adaptation loop on a uniformly random context instead of the kNN one.
std::vector<double> predict_mbpa_random(const EmbeddingNet& embed, const OutputNet& net,
                                        const EpisodicMemory& mem, std::span<const double> x,
                                        const AdaptationConfig& cfg, std::mt19937_64& rng);

// Plain parametric prediction g_theta(f(x)).
std::vector<double> predict_parametric(const EmbeddingNet& embed, const OutputNet& net,
                                       std::span<const double> x);

// Kernel-weighted class histogram of the context.
std::vector<double> predict_attention(const Context& ctx, std::size_t num_classes);

// Kernel-weighted mean of the neighbour values.
double predict_attention_regression(const Context& ctx);

// Gradient-descends a free logit vector on the weighted context NLL from
// z = 0 and returns softmax(z). Converges to predict_attention's output.
std::vector<double> fit_logits(const Context& ctx, std::size_t num_classes, int steps = 500,
                               double lr = 1.0);

struct MixtureConfig {
  double lambda = 0.5;  // weight of the parametric component, in [0, 1]
};

// Decision-level blend lambda * p_param + (1 - lambda) * p_mem. Endpoints
// return the underlying prediction bit-exactly.
std::vector<double> predict_mixture(const EmbeddingNet& embed, const OutputNet& net,
                                    const EpisodicMemory& mem, std::span<const double> x,
                                    MixtureConfig mix, std::size_t k_neighbours);
std::vector<double> mixture_blend(const std::vector<double>& p_param,
                                  const std::vector<double>& p_mem, double lambda);

// Lower-level entry points used by the evaluation loop, which computes the
// context once and shares it across predictors.
std::vector<double> predict_mbpa_on_context(const OutputNet& net, std::span<const double> query,
                                            const Context& ctx, const AdaptationConfig& cfg);

std::vector<TrainExample> context_batch(const Context& ctx);

}  // namespace mbpa
