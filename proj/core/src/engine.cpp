#include "mbpa/engine.hpp"

#include <algorithm>
#include <cmath>

namespace mbpa {

double AdaptedOverlay::delta_norm() const {
  double s = 0.0;
  for (double d : delta.values) s += d * d;
  return std::sqrt(s);
}

Mask make_mask(const OutputNet& net, MaskSpec spec) {
  return spec == MaskSpec::all ? net.full_mask() : net.last_layer_mask();
}

AdaptedOverlay make_overlay(const OutputNet& net, const AdaptationConfig& cfg) {
  AdaptedOverlay ov;
  ov.delta.values.assign(net.params().size(), 0.0);
  ov.delta.layout = net.params().layout;
  ov.mask = make_mask(net, cfg.mask);
  if (cfg.local_optimizer == LocalOpt::rmsprop)
    ov.rms_state.assign(net.params().size(), 0.0);
  return ov;
}

LossSpec loss_for_head(HeadKind head) {
  return {head == HeadKind::softmax ? LossKind::nll : LossKind::mse};
}

std::vector<TrainExample> context_batch(const Context& ctx) {
  std::vector<TrainExample> batch(ctx.size());
  for (std::size_t i = 0; i < ctx.size(); ++i)
    batch[i] = {ctx.items[i].key, ctx.items[i].value, ctx.items[i].weight};
  return batch;
}

double train_step(const EmbeddingNet& embed, OutputNet& net, Optimizer& opt, EpisodicMemory& mem,
                  std::span<const Sample> batch) {
  if (batch.empty()) throw Error("train_step: empty batch");

  std::vector<std::vector<double>> keys(batch.size());
  std::vector<TrainExample> examples(batch.size());
  double w = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    embed.embed_into(batch[i].x, keys[i]);
    examples[i] = {keys[i], batch[i].target, w};
  }

  Mask mask = net.full_mask();
  LossGrad lg = loss_and_grad(net, examples, loss_for_head(net.head()), mask);
  opt.step(net.params().values, lg.grad);

  for (std::size_t i = 0; i < batch.size(); ++i) mem.append(keys[i], batch[i].target);
  return lg.loss;
}

double adaptation_objective(const OutputNet& net, std::span<const double> params,
                            const Context& ctx, double beta, std::span<const double> theta_ref,
                            const Mask& mask) {
  if (ctx.empty()) throw EmptyMemoryError("adaptation_objective: empty context");
  if (params.size() != net.params().size() || theta_ref.size() != params.size())
    throw ShapeError("adaptation_objective: parameter length mismatch");
  OutputNet probe = net.with_params(std::vector<double>(params.begin(), params.end()));
  auto batch = context_batch(ctx);
  double nll = loss_only(probe, batch, loss_for_head(net.head()));
  double quad = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!mask[i]) continue;
    double d = params[i] - theta_ref[i];
    quad += d * d;
  }
  return nll + 0.5 * beta * quad;
}

void mbpa_step(OutputNet& net_x, AdaptedOverlay& overlay, const OutputNet& base,
               const Context& ctx, const AdaptationConfig& cfg) {
  if (ctx.empty()) throw EmptyMemoryError("mbpa_step: empty context");

  auto batch = context_batch(ctx);
  LossGrad lg = loss_and_grad(net_x, batch, loss_for_head(net_x.head()), overlay.mask);

  // Elastic term: gradient of (beta/2)|theta_x - theta|^2 is beta * delta.
  auto& g = lg.grad;
  if (cfg.beta != 0.0) {
    for (std::size_t i = 0; i < g.size(); ++i)
      if (overlay.mask[i]) g[i] += cfg.beta * overlay.delta.values[i];
  }

  auto& delta = overlay.delta.values;
  auto& theta_x = net_x.params().values;
  if (cfg.local_optimizer == LocalOpt::sgd) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!overlay.mask[i] || g[i] == 0.0) continue;
      double d = -cfg.alpha_m * g[i];
      delta[i] += d;
      theta_x[i] += d;
    }
  } else {
    constexpr double kDecay = 0.9;
    constexpr double kEps = 1e-8;
    auto& v = overlay.rms_state;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!overlay.mask[i]) continue;
      v[i] = kDecay * v[i] + (1.0 - kDecay) * g[i] * g[i];
      if (g[i] == 0.0) continue;
      double d = -cfg.alpha_m * g[i] / (std::sqrt(v[i]) + kEps);
      delta[i] += d;
      theta_x[i] += d;
    }
  }
  (void)base;
}

AdaptedOverlay run_adaptation(const OutputNet& net, const Context& ctx,
                              const AdaptationConfig& cfg) {
  AdaptedOverlay ov = make_overlay(net, cfg);
  if (cfg.steps <= 0 || cfg.alpha_m == 0.0) return ov;
  OutputNet net_x = net;
  for (int t = 0; t < cfg.steps; ++t) mbpa_step(net_x, ov, net, ctx, cfg);
  return ov;
}

std::vector<double> predict_parametric(const EmbeddingNet& embed, const OutputNet& net,
                                       std::span<const double> x) {
  std::vector<double> h;
  embed.embed_into(x, h);
  return forward(net, h);
}

std::vector<double> predict_mbpa_on_context(const OutputNet& net, std::span<const double> query,
                                            const Context& ctx, const AdaptationConfig& cfg) {
  if (cfg.steps <= 0 || cfg.alpha_m == 0.0) return forward(net, query);
  OutputNet net_x = net;
  AdaptedOverlay ov = make_overlay(net, cfg);
  for (int t = 0; t < cfg.steps; ++t) mbpa_step(net_x, ov, net, ctx, cfg);
  return forward(net_x, query);
}

std::vector<double> predict_mbpa(const EmbeddingNet& embed, const OutputNet& net,
                                 const EpisodicMemory& mem, std::span<const double> x,
                                 const AdaptationConfig& cfg) {
  std::vector<double> q;
  embed.embed_into(x, q);
  if (mem.size() == 0) {
    if (cfg.fallback_parametric) return forward(net, q);
    throw EmptyMemoryError("predict_mbpa: memory is empty");
  }
  if (cfg.steps <= 0 || cfg.alpha_m == 0.0) return forward(net, q);
  Context ctx = mem.lookup(q, static_cast<std::size_t>(cfg.k_neighbours));
  return predict_mbpa_on_context(net, q, ctx, cfg);
}

std::vector<double> predict_mbpa_random(const EmbeddingNet& embed, const OutputNet& net,
                                        const EpisodicMemory& mem, std::span<const double> x,
                                        const AdaptationConfig& cfg, std::mt19937_64& rng) {
  std::vector<double> q;
  embed.embed_into(x, q);
  if (mem.size() == 0) {
    if (cfg.fallback_parametric) return forward(net, q);
    throw EmptyMemoryError("predict_mbpa_random: memory is empty");
  }
  if (cfg.steps <= 0 || cfg.alpha_m == 0.0) return forward(net, q);
  Context ctx = uniform_random_context(mem, static_cast<std::size_t>(cfg.k_neighbours), rng);
  return predict_mbpa_on_context(net, q, ctx, cfg);
}

std::vector<double> predict_attention(const Context& ctx, std::size_t num_classes) {
  if (ctx.empty()) throw EmptyMemoryError("predict_attention: empty context");
  if (ctx.kind != TaskKind::classification)
    throw Error("predict_attention: context holds regression values");
  std::vector<double> p(num_classes, 0.0);
  double total = 0.0;
  for (const auto& item : ctx.items) {
    auto cls = static_cast<std::size_t>(std::llround(item.value));
    if (cls >= num_classes) throw ShapeError("predict_attention: class id out of range");
    p[cls] += item.weight;
    total += item.weight;
  }
  for (double& v : p) v /= total;
  return p;
}

double predict_attention_regression(const Context& ctx) {
  if (ctx.empty()) throw EmptyMemoryError("predict_attention_regression: empty context");
  double num = 0.0, den = 0.0;
  for (const auto& item : ctx.items) {
    num += item.weight * item.value;
    den += item.weight;
  }
  return num / den;
}

std::vector<double> fit_logits(const Context& ctx, std::size_t num_classes, int steps, double lr) {
  if (ctx.empty()) throw EmptyMemoryError("fit_logits: empty context");
  if (ctx.kind != TaskKind::classification)
    throw Error("fit_logits: context holds regression values");

  // Weighted class mass; the gradient of the objective at z is
  // softmax(z) * W - mass, with W the total context weight.
  std::vector<double> mass(num_classes, 0.0);
  double total_w = 0.0;
  for (const auto& item : ctx.items) {
    auto cls = static_cast<std::size_t>(std::llround(item.value));
    if (cls >= num_classes) throw ShapeError("fit_logits: class id out of range");
    mass[cls] += item.weight;
    total_w += item.weight;
  }

  std::vector<double> z(num_classes, 0.0);
  std::vector<double> p;
  for (int t = 0; t < steps; ++t) {
    softmax_into(z, p);
    double gnorm = 0.0;
    for (std::size_t j = 0; j < num_classes; ++j) {
      double gj = total_w * p[j] - mass[j];
      z[j] -= lr * gj;
      gnorm = std::max(gnorm, std::abs(gj));
    }
    if (gnorm < 1e-12) break;
  }
  softmax_into(z, p);
  return p;
}

std::vector<double> mixture_blend(const std::vector<double>& p_param,
                                  const std::vector<double>& p_mem, double lambda) {
  if (lambda < 0.0 || lambda > 1.0) throw Error("mixture: lambda must lie in [0, 1]");
  if (lambda == 1.0) return p_param;
  if (lambda == 0.0) return p_mem;
  if (p_param.size() != p_mem.size()) throw ShapeError("mixture: component size mismatch");
  std::vector<double> p(p_param.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    p[i] = lambda * p_param[i] + (1.0 - lambda) * p_mem[i];
  return p;
}

std::vector<double> predict_mixture(const EmbeddingNet& embed, const OutputNet& net,
                                    const EpisodicMemory& mem, std::span<const double> x,
                                    MixtureConfig mix, std::size_t k_neighbours) {
  if (mix.lambda < 0.0 || mix.lambda > 1.0) throw Error("mixture: lambda must lie in [0, 1]");
  std::vector<double> q;
  embed.embed_into(x, q);
  std::vector<double> p_param = forward(net, q);
  if (mix.lambda == 1.0) return p_param;
  Context ctx = mem.lookup(q, k_neighbours);
  std::vector<double> p_mem = predict_attention(ctx, net.output_dim());
  return mixture_blend(p_param, p_mem, mix.lambda);
}

}  // namespace mbpa
