#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "sgae/error.hpp"
#include "sgae/tensor.hpp"

namespace sgae {

struct OptimizerConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int plateau_patience = 5;
  double plateau_factor = 0.5;
};

/// Adam with a reduce-on-plateau learning-rate schedule.
///
/// Moment buffers are kept per parameter in registration order. The
/// scheduler halves (by `plateau_factor`) the learning rate once the
/// monitored value has gone `plateau_patience` consecutive checks without
/// a strict improvement over the best seen value; the counter resets on
/// improvement and after each reduction.
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<TensorPtr> params, OptimizerConfig cfg)
      : params_(std::move(params)), cfg_(cfg), lr_(cfg.learning_rate) {
    for (const auto& p : params_) {
      if (!p->requires_grad)
        throw ContractError("AdamOptimizer: non-trainable tensor '" +
                            p->name + "'");
      m_.emplace_back(p->numel(), 0.0);
      v_.emplace_back(p->numel(), 0.0);
    }
  }

  void zero_grad() {
    for (const auto& p : params_) p->zero_grad();
  }

  /// One Adam update over all parameters. Gradients must be populated;
  /// non-finite gradients abort with the offending parameter named.
  void step() {
    ++step_count_;
    const double t = static_cast<double>(step_count_);
    const double bias1 = 1.0 - std::pow(cfg_.beta1, t);
    const double bias2 = 1.0 - std::pow(cfg_.beta2, t);
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Tensor& p = *params_[k];
      if (p.grad.size() != p.values.size())
        throw ContractError("adam_step: missing gradient for '" + p.name +
                            "'");
      std::vector<double>& m = m_[k];
      std::vector<double>& v = v_[k];
      for (std::size_t i = 0; i < p.values.size(); ++i) {
        const double g = p.grad[i];
        if (!std::isfinite(g))
          throw NumericError("adam_step: non-finite gradient in '" + p.name +
                             "'");
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
        const double mhat = m[i] / bias1;
        const double vhat = v[i] / bias2;
        p.values[i] -= lr_ * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

  /// Feeds one monitored value (e.g. held-out loss) to the plateau
  /// schedule. Returns true when the learning rate was reduced.
  bool plateau_step(double monitored) {
    if (!std::isfinite(monitored))
      throw NumericError("plateau_step: non-finite monitored value");
    if (monitored < best_) {
      best_ = monitored;
      no_improve_ = 0;
      return false;
    }
    ++no_improve_;
    if (no_improve_ >= cfg_.plateau_patience) {
      lr_ *= cfg_.plateau_factor;
      no_improve_ = 0;
      return true;
    }
    return false;
  }

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }
  std::uint64_t step_count() const { return step_count_; }
  void set_step_count(std::uint64_t n) { step_count_ = n; }
  double best_monitored() const { return best_; }
  void set_best_monitored(double b) { best_ = b; }
  int stale_checks() const { return no_improve_; }
  void set_stale_checks(int n) { no_improve_ = n; }
  const OptimizerConfig& config() const { return cfg_; }
  const std::vector<TensorPtr>& params() const { return params_; }

  const std::vector<double>& first_moment(std::size_t k) const { return m_[k]; }
  const std::vector<double>& second_moment(std::size_t k) const {
    return v_[k];
  }
  std::vector<double>& first_moment(std::size_t k) { return m_[k]; }
  std::vector<double>& second_moment(std::size_t k) { return v_[k]; }

 private:
  std::vector<TensorPtr> params_;
  std::vector<std::vector<double>> m_, v_;
  OptimizerConfig cfg_;
  double lr_;
  std::uint64_t step_count_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
  int no_improve_ = 0;
};

}  // namespace sgae
