#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sgae/error.hpp"
#include "sgae/rng.hpp"
#include "sgae/tensor.hpp"

namespace sgae {

/// Registry of named model tensors. Parameters (requires_grad) are the
/// trainable set seen by the optimizer; buffers (batch-norm running
/// statistics) are carried along for checkpointing only. Registration
/// order is fixed by construction order, which keeps optimizer updates
/// and serialization deterministic.
class ParameterStore {
 public:
  TensorPtr add(TensorPtr t) {
    if (t->name.empty())
      throw ContractError("ParameterStore: tensor must be named");
    if (by_name_.count(t->name))
      throw ContractError("ParameterStore: duplicate tensor name '" +
                          t->name + "'");
    by_name_.emplace(t->name, entries_.size());
    entries_.push_back(t);
    return t;
  }

  TensorPtr find(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end())
      throw ContractError("ParameterStore: unknown tensor '" + name + "'");
    return entries_[it->second];
  }

  bool contains(const std::string& name) const {
    return by_name_.count(name) != 0;
  }

  const std::vector<TensorPtr>& tensors() const { return entries_; }

  std::vector<TensorPtr> trainable() const {
    std::vector<TensorPtr> out;
    for (const auto& t : entries_)
      if (t->requires_grad) out.push_back(t);
    return out;
  }

  void zero_grad() {
    for (const auto& t : entries_)
      if (t->requires_grad) t->zero_grad();
  }

  /// Copies values from a store with identical names and shapes.
  void copy_values_from(const ParameterStore& other) {
    for (const auto& t : entries_) {
      auto src = other.find(t->name);
      if (!src->same_shape(*t))
        throw ShapeError("copy_values_from: shape mismatch for '" + t->name +
                         "'");
      t->values = src->values;
    }
  }

 private:
  std::vector<TensorPtr> entries_;
  std::unordered_map<std::string, std::size_t> by_name_;
};

namespace detail {

inline TensorPtr make_param(ParameterStore& store, std::string name,
                            std::vector<std::size_t> shape,
                            bool requires_grad = true) {
  auto t = std::make_shared<Tensor>(std::move(shape));
  t->name = std::move(name);
  t->requires_grad = requires_grad;
  return store.add(t);
}

}  // namespace detail

struct LinearLayer {
  TensorPtr weight;  // [out, in]
  TensorPtr bias;    // [out]

  std::size_t in_dim() const { return weight->cols(); }
  std::size_t out_dim() const { return weight->rows(); }
};

/// Weights and biases start uniform in +-sqrt(1/fan_in).
inline LinearLayer make_linear(ParameterStore& store, const std::string& name,
                               std::size_t in, std::size_t out, Rng& rng) {
  if (in == 0 || out == 0)
    throw ShapeError("make_linear: zero-sized layer '" + name + "'");
  LinearLayer l;
  l.weight = detail::make_param(store, name + ".weight", {out, in});
  l.bias = detail::make_param(store, name + ".bias", {out});
  const double bound = std::sqrt(1.0 / static_cast<double>(in));
  for (double& v : l.weight->values) v = rng.uniform(-bound, bound);
  for (double& v : l.bias->values) v = rng.uniform(-bound, bound);
  return l;
}

inline TensorPtr linear_forward(const TensorPtr& x, const LinearLayer& layer) {
  if (x->cols() != layer.in_dim())
    throw ShapeError("linear_forward: input has " + std::to_string(x->cols()) +
                     " columns, layer expects " +
                     std::to_string(layer.in_dim()));
  return affine(x, layer.weight, layer.bias);
}

/// Batch normalization over feature columns.
///
/// Training mode standardizes with biased batch statistics and updates the
/// running buffers in place; evaluation mode (or a single-row batch, where
/// batch statistics are degenerate) standardizes with the running buffers.
struct BatchNorm {
  TensorPtr gamma;         // [d], trainable
  TensorPtr beta;          // [d], trainable
  TensorPtr running_mean;  // [d], buffer
  TensorPtr running_var;   // [d], buffer
  double momentum = 0.1;

  static constexpr double kEps = 1e-5;

  std::size_t dim() const { return gamma->shape[0]; }
};

inline BatchNorm make_batch_norm(ParameterStore& store,
                                 const std::string& name, std::size_t dim) {
  BatchNorm bn;
  bn.gamma = detail::make_param(store, name + ".scale", {dim});
  bn.beta = detail::make_param(store, name + ".shift", {dim});
  bn.running_mean = detail::make_param(store, name + ".running_mean", {dim},
                                       /*requires_grad=*/false);
  bn.running_var = detail::make_param(store, name + ".running_var", {dim},
                                      /*requires_grad=*/false);
  for (double& v : bn.gamma->values) v = 1.0;
  for (double& v : bn.running_var->values) v = 1.0;
  return bn;
}

inline TensorPtr feature_normalize(const TensorPtr& x, const BatchNorm& bn,
                                   bool training) {
  const std::size_t n = x->rows(), d = x->cols();
  if (d != bn.dim())
    throw ShapeError("feature_normalize: feature width mismatch");

  const bool use_batch_stats = training && n > 1;
  auto y = detail::node(x->shape, {x, bn.gamma, bn.beta});

  if (use_batch_stats) {
    std::vector<double> mu(d, 0.0), var(d, 0.0);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < d; ++j) mu[j] += x->values[r * d + j];
    for (std::size_t j = 0; j < d; ++j) mu[j] /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = x->values[r * d + j] - mu[j];
        var[j] += diff * diff;
      }
    for (std::size_t j = 0; j < d; ++j) var[j] /= static_cast<double>(n);

    std::vector<double> inv_std(d);
    for (std::size_t j = 0; j < d; ++j)
      inv_std[j] = 1.0 / std::sqrt(var[j] + BatchNorm::kEps);

    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < d; ++j) {
        const double xhat = (x->values[r * d + j] - mu[j]) * inv_std[j];
        y->values[r * d + j] =
            bn.gamma->values[j] * xhat + bn.beta->values[j];
      }

    const double m = bn.momentum;
    for (std::size_t j = 0; j < d; ++j) {
      bn.running_mean->values[j] =
          (1.0 - m) * bn.running_mean->values[j] + m * mu[j];
      bn.running_var->values[j] =
          (1.0 - m) * bn.running_var->values[j] + m * var[j];
    }

    check_finite(*y, "feature_normalize");
    if (y->requires_grad) {
      Tensor* xp = x.get();
      Tensor* gp = bn.gamma.get();
      Tensor* bp = bn.beta.get();
      Tensor* yp = y.get();
      y->backward_fn = [xp, gp, bp, yp, mu = std::move(mu),
                        inv = std::move(inv_std), n, d] {
        if (gp->requires_grad) gp->ensure_grad();
        if (bp->requires_grad) bp->ensure_grad();
        if (xp->requires_grad) xp->ensure_grad();
        for (std::size_t j = 0; j < d; ++j) {
          double sum_dy = 0.0, sum_dy_xhat = 0.0;
          for (std::size_t r = 0; r < n; ++r) {
            const double dy = yp->grad[r * d + j];
            const double xhat = (xp->values[r * d + j] - mu[j]) * inv[j];
            sum_dy += dy;
            sum_dy_xhat += dy * xhat;
          }
          if (gp->requires_grad) gp->grad[j] += sum_dy_xhat;
          if (bp->requires_grad) bp->grad[j] += sum_dy;
          if (xp->requires_grad) {
            const double g = gp->values[j];
            const double inv_n = 1.0 / static_cast<double>(n);
            for (std::size_t r = 0; r < n; ++r) {
              const double dy = yp->grad[r * d + j];
              const double xhat = (xp->values[r * d + j] - mu[j]) * inv[j];
              xp->grad[r * d + j] +=
                  g * inv[j] *
                  (dy - inv_n * sum_dy - xhat * inv_n * sum_dy_xhat);
            }
          }
        }
      };
    }
    return y;
  }

  // Running-statistics mode: a pure affine map of the input.
  std::vector<double> inv_std(d);
  for (std::size_t j = 0; j < d; ++j)
    inv_std[j] =
        1.0 / std::sqrt(bn.running_var->values[j] + BatchNorm::kEps);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d; ++j) {
      const double xhat =
          (x->values[r * d + j] - bn.running_mean->values[j]) * inv_std[j];
      y->values[r * d + j] = bn.gamma->values[j] * xhat + bn.beta->values[j];
    }
  check_finite(*y, "feature_normalize");
  if (y->requires_grad) {
    Tensor* xp = x.get();
    Tensor* gp = bn.gamma.get();
    Tensor* bp = bn.beta.get();
    Tensor* yp = y.get();
    // Buffers may be updated by later forwards before backward runs, so
    // the statistics used here are captured by value.
    y->backward_fn = [xp, gp, bp, yp, mean = bn.running_mean->values,
                      inv = std::move(inv_std), n, d] {
      if (gp->requires_grad) gp->ensure_grad();
      if (bp->requires_grad) bp->ensure_grad();
      if (xp->requires_grad) xp->ensure_grad();
      for (std::size_t j = 0; j < d; ++j) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
          const double dy = yp->grad[r * d + j];
          const double xhat = (xp->values[r * d + j] - mean[j]) * inv[j];
          sum_dy += dy;
          sum_dy_xhat += dy * xhat;
          if (xp->requires_grad)
            xp->grad[r * d + j] += dy * gp->values[j] * inv[j];
        }
        if (gp->requires_grad) gp->grad[j] += sum_dy_xhat;
        if (bp->requires_grad) bp->grad[j] += sum_dy;
      }
    };
  }
  return y;
}

enum class Activation { kRelu, kSigmoid, kSoftmaxRows };

inline TensorPtr activation(const TensorPtr& x, Activation kind) {
  switch (kind) {
    case Activation::kRelu:
      return relu(x);
    case Activation::kSigmoid:
      return sigmoid(x);
    case Activation::kSoftmaxRows:
      return softmax_rows(x);
  }
  throw ContractError("activation: unknown kind");
}

/// Stack of linear layers with optional batch norm + ReLU between them.
/// The final layer has no normalization or activation.
struct Mlp {
  std::vector<LinearLayer> layers;
  std::vector<BatchNorm> norms;  // one per hidden transition when use_norm
  bool use_norm = false;
};

inline Mlp make_mlp(ParameterStore& store, const std::string& name,
                    const std::vector<std::size_t>& dims, bool use_norm,
                    Rng& rng) {
  if (dims.size() < 2) throw ShapeError("make_mlp: need at least two dims");
  Mlp mlp;
  mlp.use_norm = use_norm;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    mlp.layers.push_back(make_linear(
        store, name + ".l" + std::to_string(i), dims[i], dims[i + 1], rng));
    if (use_norm && i + 2 < dims.size())
      mlp.norms.push_back(make_batch_norm(
          store, name + ".n" + std::to_string(i), dims[i + 1]));
  }
  return mlp;
}

inline TensorPtr mlp_forward(const TensorPtr& x, const Mlp& mlp,
                             bool training) {
  TensorPtr h = x;
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    h = linear_forward(h, mlp.layers[i]);
    if (i + 1 < mlp.layers.size()) {
      if (mlp.use_norm) h = feature_normalize(h, mlp.norms[i], training);
      h = relu(h);
    }
  }
  return h;
}

}  // namespace sgae
