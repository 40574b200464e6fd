#include "mbpa/optimizer.hpp"

#include <cmath>

#include "mbpa/error.hpp"

namespace mbpa {

Optimizer Optimizer::sgd(double lr) {
  Optimizer o;
  o.kind_ = Kind::sgd;
  o.lr_ = lr;
  return o;
}

Optimizer Optimizer::adam(double lr, double beta1, double beta2, double eps) {
  Optimizer o;
  o.kind_ = Kind::adam;
  o.lr_ = lr;
  o.beta1_ = beta1;
  o.beta2_ = beta2;
  o.eps_ = eps;
  return o;
}

Optimizer Optimizer::rmsprop(double lr, double decay, double eps) {
  Optimizer o;
  o.kind_ = Kind::rmsprop;
  o.lr_ = lr;
  o.decay_ = decay;
  o.eps_ = eps;
  return o;
}

void Optimizer::set_learning_rate(double lr) {
  if (lr < 0.0) throw Error("optimizer: negative learning rate");
  lr_ = lr;
}

void Optimizer::reset() {
  m_.clear();
  v_.clear();
  t_ = 0;
}

void Optimizer::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != grad.size()) throw ShapeError("optimizer step: length mismatch");

  switch (kind_) {
    case Kind::sgd: {
      ++t_;
      if (lr_ == 0.0) return;
      for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr_ * grad[i];
      return;
    }
    case Kind::adam: {
      if (m_.empty()) {
        m_.assign(params.size(), 0.0);
        v_.assign(params.size(), 0.0);
      }
      if (m_.size() != params.size()) throw ShapeError("optimizer step: state length mismatch");
      ++t_;
      double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
      double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
      for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
        if (lr_ == 0.0) continue;
        double mhat = m_[i] / bc1;
        double vhat = v_[i] / bc2;
        params[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
      return;
    }
    case Kind::rmsprop: {
      if (v_.empty()) v_.assign(params.size(), 0.0);
      if (v_.size() != params.size()) throw ShapeError("optimizer step: state length mismatch");
      ++t_;
      for (std::size_t i = 0; i < params.size(); ++i) {
        v_[i] = decay_ * v_[i] + (1.0 - decay_) * grad[i] * grad[i];
        if (lr_ == 0.0) continue;
        params[i] -= lr_ * grad[i] / (std::sqrt(v_[i]) + eps_);
      }
      return;
    }
  }
}

}  // namespace mbpa
