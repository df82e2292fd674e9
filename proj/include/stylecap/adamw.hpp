#pragma once

#include <Eigen/Core>
#include <cmath>

#include "stylecap/errors.hpp"
#include "stylecap/lm.hpp"

namespace stylecap {

struct AdamWConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;

  friend bool operator==(const AdamWConfig&, const AdamWConfig&) = default;
};

// One AdamW update of a single tensor at 1-based step `step`:
//   param -= lr * wd * param                      (decoupled decay first)
//   m = b1 m + (1 - b1) g,  v = b2 v + (1 - b2) g^2
//   param -= lr * m_hat / (sqrt(v_hat) + eps)     (bias-corrected moments)
template <typename P, typename G, typename M, typename V>
void adamw_update(Eigen::DenseBase<P>& param, const Eigen::DenseBase<G>& grad,
                  Eigen::DenseBase<M>& first_moment, Eigen::DenseBase<V>& second_moment,
                  const AdamWConfig& cfg, long step) {
  if (step < 1) throw InvalidConfig("AdamW step must be >= 1");
  auto same_shape = [&](const auto& x) { return x.rows() == param.rows() && x.cols() == param.cols(); };
  if (!same_shape(grad) || !same_shape(first_moment) || !same_shape(second_moment)) {
    throw ShapeMismatch("AdamW tensors differ in shape");
  }
  using Scalar = typename P::Scalar;
  const auto lr = static_cast<Scalar>(cfg.learning_rate);
  const auto b1 = static_cast<Scalar>(cfg.beta1);
  const auto b2 = static_cast<Scalar>(cfg.beta2);
  const Scalar correction1 = Scalar(1) - std::pow(b1, static_cast<Scalar>(step));
  const Scalar correction2 = Scalar(1) - std::pow(b2, static_cast<Scalar>(step));

  param.derived().array() *= Scalar(1) - lr * static_cast<Scalar>(cfg.weight_decay);
  first_moment.derived().array() = b1 * first_moment.derived().array() + (Scalar(1) - b1) * grad.derived().array();
  second_moment.derived().array() =
      b2 * second_moment.derived().array() + (Scalar(1) - b2) * grad.derived().array().square();
  param.derived().array() -=
      lr * (first_moment.derived().array() / correction1) /
      ((second_moment.derived().array() / correction2).sqrt() + static_cast<Scalar>(cfg.epsilon));
}

template <typename Scalar>
struct AdamWState {
  LmParameters<Scalar> first_moment;
  LmParameters<Scalar> second_moment;
  long step = 0;

  static AdamWState zeros(const LmShape& shape) {
    return {LmParameters<Scalar>::zeros(shape), LmParameters<Scalar>::zeros(shape), 0};
  }
};

// Applies adamw_update to every tensor of the bundle at step `step`.
template <typename Scalar>
void adamw_step(LmParameters<Scalar>& params, const LmParameters<Scalar>& grads,
                AdamWState<Scalar>& state, const AdamWConfig& cfg, long step) {
  zip_tensors(
      [&](std::string_view, auto& p, const auto& g, auto& m, auto& v) { adamw_update(p, g, m, v, cfg, step); },
      params, grads, state.first_moment, state.second_moment);
  state.step = step;
}

}  // namespace stylecap
