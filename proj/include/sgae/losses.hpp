#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "sgae/error.hpp"
#include "sgae/tensor.hpp"

namespace sgae {

enum class LossKind {
  kL1,
  kCrossEntropy,
  kBinaryCrossEntropy,
  kFocalCrossEntropy,
  kFocalBinaryCrossEntropy,
};

/// Probabilities are clamped to [kProbEps, 1 - kProbEps] inside the
/// probability-space losses so log terms stay finite; gradients are taken
/// through the clamped value.
inline constexpr double kProbEps = 1e-7;

namespace detail {

inline double clamp_prob(double p) {
  return std::min(std::max(p, kProbEps), 1.0 - kProbEps);
}

inline void require_same_shape(const TensorPtr& a, const TensorPtr& b,
                               const char* op) {
  if (!a->same_shape(*b))
    throw ShapeError(std::string(op) + ": prediction/target shape mismatch");
}

inline void require_targets(const TensorPtr& pred,
                            const std::vector<std::size_t>& targets,
                            const char* op) {
  if (targets.size() != pred->rows())
    throw ShapeError(std::string(op) + ": one target class per row required");
  for (std::size_t t : targets)
    if (t >= pred->cols())
      throw ShapeError(std::string(op) + ": target class out of range");
}

}  // namespace detail

/// Mean absolute error over all elements.
inline TensorPtr l1_loss(const TensorPtr& pred, const TensorPtr& target) {
  detail::require_same_shape(pred, target, "l1_loss");
  if (pred->numel() == 0) throw ContractError("l1_loss: empty tensors");
  auto y = detail::node(std::vector<std::size_t>{1}, {pred, target});
  double acc = 0.0;
  for (std::size_t i = 0; i < pred->numel(); ++i)
    acc += std::abs(pred->values[i] - target->values[i]);
  y->values[0] = acc / static_cast<double>(pred->numel());
  check_finite(*y, "l1_loss");
  if (y->requires_grad) {
    Tensor* pp = pred.get();
    Tensor* tp = target.get();
    Tensor* yp = y.get();
    y->backward_fn = [pp, tp, yp] {
      const double g = yp->grad[0] / static_cast<double>(pp->numel());
      if (pp->requires_grad) {
        pp->ensure_grad();
        for (std::size_t i = 0; i < pp->numel(); ++i) {
          const double diff = pp->values[i] - tp->values[i];
          if (diff > 0.0)
            pp->grad[i] += g;
          else if (diff < 0.0)
            pp->grad[i] -= g;
        }
      }
      if (tp->requires_grad) {
        tp->ensure_grad();
        for (std::size_t i = 0; i < tp->numel(); ++i) {
          const double diff = pp->values[i] - tp->values[i];
          if (diff > 0.0)
            tp->grad[i] -= g;
          else if (diff < 0.0)
            tp->grad[i] += g;
        }
      }
    };
  }
  return y;
}

/// Softmax cross entropy on logits [n, C] against one class index per row,
/// averaged over rows. Uses the log-sum-exp form for stability.
inline TensorPtr cross_entropy_logits(const TensorPtr& logits,
                                      const std::vector<std::size_t>& targets) {
  detail::require_targets(logits, targets, "cross_entropy");
  const std::size_t n = logits->rows(), c = logits->cols();
  auto y = detail::node(std::vector<std::size_t>{1}, {logits});
  std::vector<double> softmax(n * c);
  double acc = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const double* zr = logits->values.data() + r * c;
    double m = zr[0];
    for (std::size_t j = 1; j < c; ++j) m = std::max(m, zr[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      softmax[r * c + j] = std::exp(zr[j] - m);
      z += softmax[r * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) softmax[r * c + j] /= z;
    acc += m + std::log(z) - zr[targets[r]];
  }
  y->values[0] = acc / static_cast<double>(n);
  check_finite(*y, "cross_entropy");
  if (y->requires_grad) {
    Tensor* lp = logits.get();
    Tensor* yp = y.get();
    y->backward_fn = [lp, yp, sm = std::move(softmax), targets, n, c] {
      lp->ensure_grad();
      const double g = yp->grad[0] / static_cast<double>(n);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < c; ++j)
          lp->grad[r * c + j] +=
              g * (sm[r * c + j] - (j == targets[r] ? 1.0 : 0.0));
    };
  }
  return y;
}

/// Binary cross entropy on probabilities against 0/1 targets, averaged
/// over all elements.
inline TensorPtr bce_probs(const TensorPtr& probs, const TensorPtr& target) {
  detail::require_same_shape(probs, target, "binary_cross_entropy");
  if (probs->numel() == 0)
    throw ContractError("binary_cross_entropy: empty tensors");
  auto y = detail::node(std::vector<std::size_t>{1}, {probs, target});
  double acc = 0.0;
  for (std::size_t i = 0; i < probs->numel(); ++i) {
    const double p = detail::clamp_prob(probs->values[i]);
    const double t = target->values[i];
    acc += -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
  }
  y->values[0] = acc / static_cast<double>(probs->numel());
  check_finite(*y, "binary_cross_entropy");
  if (y->requires_grad) {
    Tensor* pp = probs.get();
    Tensor* tp = target.get();
    Tensor* yp = y.get();
    y->backward_fn = [pp, tp, yp] {
      pp->ensure_grad();
      const double g = yp->grad[0] / static_cast<double>(pp->numel());
      for (std::size_t i = 0; i < pp->numel(); ++i) {
        const double p = detail::clamp_prob(pp->values[i]);
        const double t = tp->values[i];
        pp->grad[i] += g * (-t / p + (1.0 - t) / (1.0 - p));
      }
    };
  }
  return y;
}

/// Focal cross entropy on per-row probability distributions [n, C]:
/// mean over rows of -alpha * (1 - p_t)^gamma * log(p_t) where p_t is the
/// probability assigned to the target class.
inline TensorPtr focal_ce_probs(const TensorPtr& probs,
                                const std::vector<std::size_t>& targets,
                                double alpha, double gamma) {
  detail::require_targets(probs, targets, "focal_cross_entropy");
  const std::size_t n = probs->rows(), c = probs->cols();
  auto y = detail::node(std::vector<std::size_t>{1}, {probs});
  double acc = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const double pt = detail::clamp_prob(probs->values[r * c + targets[r]]);
    acc += -alpha * std::pow(1.0 - pt, gamma) * std::log(pt);
  }
  y->values[0] = acc / static_cast<double>(n);
  check_finite(*y, "focal_cross_entropy");
  if (y->requires_grad) {
    Tensor* pp = probs.get();
    Tensor* yp = y.get();
    y->backward_fn = [pp, yp, targets, alpha, gamma, n, c] {
      pp->ensure_grad();
      const double g = yp->grad[0] / static_cast<double>(n);
      for (std::size_t r = 0; r < n; ++r) {
        const double pt = detail::clamp_prob(pp->values[r * c + targets[r]]);
        const double one_m = 1.0 - pt;
        const double d =
            -alpha * (std::pow(one_m, gamma) / pt -
                      gamma * std::pow(one_m, gamma - 1.0) * std::log(pt));
        pp->grad[r * c + targets[r]] += g * d;
      }
    };
  }
  return y;
}

/// Focal binary cross entropy on probabilities against 0/1 targets:
/// mean over elements of -alpha_t * (1 - p_t)^gamma * log(p_t) with
/// p_t = p for positives, 1 - p for negatives, and alpha_t = alpha for
/// positives, 1 - alpha for negatives.
inline TensorPtr focal_bce_probs(const TensorPtr& probs,
                                 const TensorPtr& target, double alpha,
                                 double gamma) {
  detail::require_same_shape(probs, target, "focal_binary_cross_entropy");
  if (probs->numel() == 0)
    throw ContractError("focal_binary_cross_entropy: empty tensors");
  auto y = detail::node(std::vector<std::size_t>{1}, {probs, target});
  double acc = 0.0;
  for (std::size_t i = 0; i < probs->numel(); ++i) {
    const bool pos = target->values[i] > 0.5;
    const double pt = detail::clamp_prob(pos ? probs->values[i]
                                             : 1.0 - probs->values[i]);
    const double at = pos ? alpha : 1.0 - alpha;
    acc += -at * std::pow(1.0 - pt, gamma) * std::log(pt);
  }
  y->values[0] = acc / static_cast<double>(probs->numel());
  check_finite(*y, "focal_binary_cross_entropy");
  if (y->requires_grad) {
    Tensor* pp = probs.get();
    Tensor* tp = target.get();
    Tensor* yp = y.get();
    y->backward_fn = [pp, tp, yp, alpha, gamma] {
      pp->ensure_grad();
      const double g = yp->grad[0] / static_cast<double>(pp->numel());
      for (std::size_t i = 0; i < pp->numel(); ++i) {
        const bool pos = tp->values[i] > 0.5;
        const double pt = detail::clamp_prob(pos ? pp->values[i]
                                                 : 1.0 - pp->values[i]);
        const double at = pos ? alpha : 1.0 - alpha;
        const double one_m = 1.0 - pt;
        double d = -at * (std::pow(one_m, gamma) / pt -
                          gamma * std::pow(one_m, gamma - 1.0) * std::log(pt));
        if (!pos) d = -d;
        pp->grad[i] += g * d;
      }
    };
  }
  return y;
}

/// Dispatcher for losses whose target is a dense tensor.
inline TensorPtr loss(LossKind kind, const TensorPtr& pred,
                      const TensorPtr& target, double alpha = 0.25,
                      double gamma = 2.0) {
  switch (kind) {
    case LossKind::kL1:
      return l1_loss(pred, target);
    case LossKind::kBinaryCrossEntropy:
      return bce_probs(pred, target);
    case LossKind::kFocalBinaryCrossEntropy:
      return focal_bce_probs(pred, target, alpha, gamma);
    default:
      throw ContractError("loss: kind requires class-index targets");
  }
}

/// Dispatcher for losses whose target is one class index per row.
inline TensorPtr loss(LossKind kind, const TensorPtr& pred,
                      const std::vector<std::size_t>& targets,
                      double alpha = 0.25, double gamma = 2.0) {
  switch (kind) {
    case LossKind::kCrossEntropy:
      return cross_entropy_logits(pred, targets);
    case LossKind::kFocalCrossEntropy:
      return focal_ce_probs(pred, targets, alpha, gamma);
    default:
      throw ContractError("loss: kind requires a dense target tensor");
  }
}

}  // namespace sgae
