#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "mbpa/net.hpp"
#include "mbpa/rng.hpp"

using namespace mbpa;

namespace {

// Scalar reference forward pass: plain nested loops, no shared code with the
// library's layer kernels beyond reading the same weights.
std::vector<double> reference_forward(const OutputNet& net, std::span<const double> x) {
  std::vector<double> cur(x.begin(), x.end());
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    std::size_t in = net.layer_input_dim(l);
    std::size_t out = net.layer_output_dim(l);
    auto W = net.weight(l);
    auto b = net.bias(l);
    std::vector<double> next(out);
    for (std::size_t i = 0; i < out; ++i) {
      double a = b[i];
      for (std::size_t j = 0; j < in; ++j) a += W[i * in + j] * cur[j];
      if (l + 1 < net.num_layers())
        a = net.activation() == Activation::relu ? std::max(0.0, a) : std::tanh(a);
      next[i] = a;
    }
    cur = next;
  }
  if (net.head() == HeadKind::softmax) {
    double m = *std::max_element(cur.begin(), cur.end());
    double s = 0.0;
    for (double& v : cur) {
      v = std::exp(v - m);
      s += v;
    }
    for (double& v : cur) v /= s;
  }
  return cur;
}

// Owns the input rows so that the spans inside the examples stay valid.
struct OwnedBatch {
  std::vector<std::vector<double>> xs;
  std::vector<TrainExample> examples;
  operator std::span<const TrainExample>() const { return examples; }
};

OwnedBatch make_batch(std::vector<std::vector<double>> xs, std::vector<double> ys,
                      std::vector<double> ws) {
  OwnedBatch batch;
  batch.xs = std::move(xs);
  for (std::size_t i = 0; i < batch.xs.size(); ++i)
    batch.examples.push_back({batch.xs[i], ys[i], ws[i]});
  return batch;
}

}  // namespace

TEST_SUITE("net") {

TEST_CASE("zero-parameter softmax net is uniform") {
  OutputNet net = OutputNet::make_mlp(3, {}, 4, HeadKind::softmax, Activation::relu, 1);
  std::fill(net.params().values.begin(), net.params().values.end(), 0.0);
  std::vector<double> x{0.3, -1.2, 2.5};
  auto p = forward(net, x);
  REQUIRE(p.size() == 4);
  for (double v : p) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("identity linear regression net returns its input") {
  OutputNet net = OutputNet::make_mlp(1, {}, 1, HeadKind::regression, Activation::relu, 1);
  net.weight(0)[0] = 1.0;
  net.bias(0)[0] = 0.0;
  std::vector<double> x{3.0};
  CHECK(forward(net, x)[0] == doctest::Approx(3.0));
}

TEST_CASE("forward matches a scalar reference on random two-layer nets") {
  auto rng = make_rng(42);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int inst = 0; inst < 20; ++inst) {
    OutputNet net = OutputNet::make_mlp(5, {7}, 3, HeadKind::softmax,
                                        inst % 2 ? Activation::tanh : Activation::relu, rng());
    std::vector<double> x(5);
    for (double& v : x) v = normal(rng);
    auto got = forward(net, x);
    auto want = reference_forward(net, x);
    for (std::size_t i = 0; i < got.size(); ++i)
      CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-13));
  }
}

TEST_CASE("softmax output sums to one within 1e-12, including extreme logits") {
  OutputNet net = OutputNet::make_mlp(2, {}, 3, HeadKind::softmax, Activation::relu, 1);
  auto w = net.weight(0);
  w[0] = 500.0;
  w[2] = -500.0;
  std::vector<double> x{1.0, 1.0};
  auto p = forward(net, x);
  double s = 0.0;
  for (double v : p) {
    CHECK(v >= 0.0);
    s += v;
  }
  CHECK(std::abs(s - 1.0) < 1e-12);
}

TEST_CASE("forward rejects width mismatch") {
  OutputNet net = OutputNet::make_mlp(4, {8}, 2, HeadKind::softmax, Activation::relu, 1);
  std::vector<double> x{1.0, 2.0};
  CHECK_THROWS_AS(forward(net, x), ShapeError);
}

TEST_CASE("non-finite activations are reported with the layer") {
  OutputNet net = OutputNet::make_mlp(2, {4}, 2, HeadKind::softmax, Activation::relu, 1);
  std::vector<double> x{std::numeric_limits<double>::infinity(), 0.0};
  try {
    forward(net, x);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("layer 0") != std::string::npos);
  }
}

TEST_CASE("loss_and_grad: all-zero weights annihilate the objective") {
  OutputNet net = OutputNet::make_mlp(3, {5}, 2, HeadKind::softmax, Activation::relu, 7);
  auto batch = make_batch({{1.0, 2.0, 3.0}, {0.5, -1.0, 0.0}}, {0.0, 1.0}, {0.0, 0.0});
  auto lg = loss_and_grad(net, batch, {LossKind::nll}, net.full_mask());
  CHECK(lg.loss == 0.0);
  for (double g : lg.grad) CHECK(g == 0.0);
}

TEST_CASE("loss_and_grad rejects an empty batch") {
  OutputNet net = OutputNet::make_mlp(2, {}, 2, HeadKind::softmax, Activation::relu, 1);
  std::vector<TrainExample> batch;
  CHECK_THROWS_AS(loss_and_grad(net, batch, {LossKind::nll}, net.full_mask()), Error);
}

TEST_CASE("loss is the weighted sum of per-example losses") {
  OutputNet net = OutputNet::make_mlp(3, {4}, 3, HeadKind::softmax, Activation::tanh, 9);
  auto rng = make_rng(3);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> xs(3, std::vector<double>(3));
  for (auto& x : xs)
    for (double& v : x) v = normal(rng);
  std::vector<double> ys{0.0, 2.0, 1.0}, ws{0.2, 1.3, 0.5};

  double total = loss_and_grad(net, make_batch(xs, ys, ws), {LossKind::nll}, net.full_mask()).loss;
  double by_parts = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    by_parts +=
        loss_and_grad(net, make_batch({xs[i]}, {ys[i]}, {ws[i]}), {LossKind::nll}, net.full_mask())
            .loss;
  CHECK(total == doctest::Approx(by_parts).epsilon(1e-13));
}

TEST_CASE("gradient is linear in example weights") {
  OutputNet net = OutputNet::make_mlp(4, {6}, 3, HeadKind::softmax, Activation::relu, 11);
  std::vector<double> x{0.4, -0.2, 1.1, 0.7};
  double scale = 3.5;
  auto g1 = loss_and_grad(net, make_batch({x}, {2.0}, {1.0}), {LossKind::nll}, net.full_mask());
  auto gs = loss_and_grad(net, make_batch({x}, {2.0}, {scale}), {LossKind::nll}, net.full_mask());
  for (std::size_t i = 0; i < g1.grad.size(); ++i)
    CHECK(gs.grad[i] == doctest::Approx(scale * g1.grad[i]).epsilon(1e-12));
}

TEST_CASE("mask restricts gradient support to the final layer") {
  OutputNet net = OutputNet::make_mlp(4, {6}, 3, HeadKind::softmax, Activation::relu, 13);
  std::vector<double> x{0.4, -0.2, 1.1, 0.7};
  Mask mask = net.last_layer_mask();
  auto lg = loss_and_grad(net, make_batch({x}, {1.0}, {1.0}), {LossKind::nll}, mask);
  auto [begin, end] = net.layer_range(1);
  bool any_inside = false;
  for (std::size_t i = 0; i < lg.grad.size(); ++i) {
    if (i >= begin && i < end) {
      any_inside = any_inside || lg.grad[i] != 0.0;
    } else {
      CHECK(lg.grad[i] == 0.0);
    }
  }
  CHECK(any_inside);
}

TEST_CASE("analytic gradient matches central finite differences") {
  auto rng = make_rng(99);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int inst = 0; inst < 10; ++inst) {
    bool regression = inst % 3 == 0;
    OutputNet net = OutputNet::make_mlp(4, {8}, regression ? 1 : 3,
                                        regression ? HeadKind::regression : HeadKind::softmax,
                                        inst % 2 ? Activation::tanh : Activation::relu, rng());
    std::vector<std::vector<double>> xs(4, std::vector<double>(4));
    std::vector<double> ys, ws;
    for (auto& x : xs) {
      for (double& v : x) v = normal(rng);
      ys.push_back(regression ? normal(rng) : static_cast<double>(rng() % 3));
      ws.push_back(0.1 + 0.9 * std::abs(normal(rng)));
    }
    auto batch = make_batch(xs, ys, ws);
    LossSpec loss{regression ? LossKind::mse : LossKind::nll};
    Mask mask = net.full_mask();
    auto lg = loss_and_grad(net, batch, loss, mask);
    auto fd = finite_diff_grad(net, batch, loss, mask, 1e-5);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < fd.size(); ++i) {
      num = std::max(num, std::abs(lg.grad[i] - fd[i]));
      den = std::max(den, std::abs(fd[i]));
    }
    CHECK(num / (den + 1e-12) < 1e-4);
  }
}

TEST_CASE("finite differences recover the derivative of w^2") {
  // Single weight w into a regression head, input 1, target 0: loss = w^2.
  OutputNet net = OutputNet::make_mlp(1, {}, 1, HeadKind::regression, Activation::relu, 1);
  net.weight(0)[0] = 3.0;
  net.bias(0)[0] = 0.0;
  Mask mask(net.params().size(), 0);
  mask[0] = 1;  // weight only, bias held out
  std::vector<double> x{1.0};
  auto batch = make_batch({x}, {0.0}, {1.0});
  auto fd = finite_diff_grad(net, batch, {LossKind::mse}, mask, 1e-5);
  CHECK(fd[0] == doctest::Approx(6.0).epsilon(1e-6));
  CHECK(fd[1] == 0.0);
}

TEST_CASE("finite differences on a zero-weight batch give the zero vector") {
  OutputNet net = OutputNet::make_mlp(2, {3}, 2, HeadKind::softmax, Activation::relu, 5);
  auto batch = make_batch({{1.0, -1.0}}, {0.0}, {0.0});
  auto fd = finite_diff_grad(net, batch, {LossKind::nll}, net.full_mask(), 1e-5);
  for (double g : fd) CHECK(g == 0.0);
}

TEST_CASE("finite_diff_grad rejects a nonpositive step") {
  OutputNet net = OutputNet::make_mlp(2, {}, 2, HeadKind::softmax, Activation::relu, 5);
  auto batch = make_batch({{1.0, -1.0}}, {0.0}, {1.0});
  CHECK_THROWS_AS(finite_diff_grad(net, batch, {LossKind::nll}, net.full_mask(), 0.0), Error);
}

TEST_CASE("identical seeds give bit-identical parameters after training") {
  auto run = [] {
    OutputNet net = OutputNet::make_mlp(6, {10}, 4, HeadKind::softmax, Activation::relu, 77);
    auto rng = make_rng(123);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int step = 0; step < 50; ++step) {
      std::vector<std::vector<double>> xs(4, std::vector<double>(6));
      std::vector<double> ys, ws;
      for (auto& x : xs) {
        for (double& v : x) v = normal(rng);
        ys.push_back(static_cast<double>(rng() % 4));
        ws.push_back(0.25);
      }
      auto lg = loss_and_grad(net, make_batch(xs, ys, ws), {LossKind::nll}, net.full_mask());
      for (std::size_t i = 0; i < lg.grad.size(); ++i)
        net.params().values[i] -= 0.05 * lg.grad[i];
    }
    return net.params().values;
  };
  auto a = run();
  auto b = run();
  REQUIRE(a.size() == b.size());
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

TEST_CASE("split_last_layer composes back to the full forward pass") {
  OutputNet net = OutputNet::make_mlp(5, {9, 7}, 3, HeadKind::softmax, Activation::tanh, 31);
  auto [embed, head] = split_last_layer(net);
  CHECK(embed.output_dim(5) == 7);
  auto rng = make_rng(4);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(5);
  for (int i = 0; i < 10; ++i) {
    for (double& v : x) v = normal(rng);
    auto whole = forward(net, x);
    auto composed = forward(head, embed.embed(x));
    for (std::size_t j = 0; j < whole.size(); ++j)
      CHECK(whole[j] == doctest::Approx(composed[j]).epsilon(1e-14));
  }
}

TEST_CASE("embedding identity mode returns its input unchanged") {
  EmbeddingNet id = EmbeddingNet::identity();
  std::vector<double> x{1.0, -2.0, 0.5};
  auto h = id.embed(x);
  CHECK(h == x);
  CHECK(id.output_dim(3) == 3);
}

}  // TEST_SUITE
