#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace mbpa {

// First-order optimizers over a flat parameter vector. State vectors are
// sized on first use and must match on every later step. A step with
// learning rate 0 leaves the parameters bit-identical.
class Optimizer {
 public:
  enum class Kind { sgd, adam, rmsprop };

  static Optimizer sgd(double lr);
  static Optimizer adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  static Optimizer rmsprop(double lr, double decay = 0.9, double eps = 1e-8);

  void step(std::span<double> params, std::span<const double> grad);

  Kind kind() const { return kind_; }
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr);
  std::uint64_t step_count() const { return t_; }
  void reset();

 private:
  Kind kind_ = Kind::sgd;
  double lr_ = 0.0;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8, decay_ = 0.9;
  std::vector<double> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace mbpa
