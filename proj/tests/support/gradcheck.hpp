#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "sgae/losses.hpp"
#include "sgae/nn.hpp"
#include "sgae/rng.hpp"
#include "sgae/tensor.hpp"

namespace gradtest {

/// Central finite differences vs reverse-mode gradients.
///
/// `forward` must rebuild the computation graph from the current values of
/// the probe tensors on every call and return a scalar. An element passes
/// when |analytic - numeric| <= tol * max(1, |analytic|, |numeric|).
struct CheckResult {
  bool ok = true;
  std::string detail;
};

inline CheckResult check_gradients(
    const std::function<sgae::TensorPtr()>& forward,
    const std::vector<sgae::TensorPtr>& probes, double h = 1e-5,
    double tol = 1e-4) {
  for (const auto& p : probes) {
    p->ensure_grad();
    p->zero_grad();
  }
  auto loss = forward();
  sgae::backward(loss);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(probes.size());
  for (const auto& p : probes) {
    p->ensure_grad();
    analytic.push_back(p->grad);
  }

  for (std::size_t k = 0; k < probes.size(); ++k) {
    sgae::Tensor& p = *probes[k];
    for (std::size_t i = 0; i < p.numel(); ++i) {
      const double orig = p.values[i];
      p.values[i] = orig + h;
      const double fp = forward()->values[0];
      p.values[i] = orig - h;
      const double fm = forward()->values[0];
      p.values[i] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[k][i];
      const double scale =
          std::max({1.0, std::abs(a), std::abs(numeric)});
      if (std::abs(a - numeric) > tol * scale) {
        std::ostringstream os;
        os << "probe " << k << " (" << (p.name.empty() ? "unnamed" : p.name)
           << ") element " << i << ": analytic " << a << " vs numeric "
           << numeric;
        return {false, os.str()};
      }
    }
  }
  return {true, {}};
}

/// Spot-check variant for large models: verifies `samples_per_tensor`
/// randomly chosen elements of each probe instead of every element.
inline CheckResult check_gradients_sampled(
    const std::function<sgae::TensorPtr()>& forward,
    const std::vector<sgae::TensorPtr>& probes, std::size_t samples_per_tensor,
    sgae::Rng& rng, double h = 1e-5, double tol = 1e-4) {
  for (const auto& p : probes) {
    p->ensure_grad();
    p->zero_grad();
  }
  auto loss = forward();
  sgae::backward(loss);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(probes.size());
  for (const auto& p : probes) {
    p->ensure_grad();
    analytic.push_back(p->grad);
  }

  for (std::size_t k = 0; k < probes.size(); ++k) {
    sgae::Tensor& p = *probes[k];
    for (std::size_t s = 0; s < samples_per_tensor; ++s) {
      const std::size_t i = static_cast<std::size_t>(rng.below(p.numel()));
      const double orig = p.values[i];
      p.values[i] = orig + h;
      const double fp = forward()->values[0];
      p.values[i] = orig - h;
      const double fm = forward()->values[0];
      p.values[i] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[k][i];
      const double scale = std::max({1.0, std::abs(a), std::abs(numeric)});
      if (std::abs(a - numeric) > tol * scale) {
        std::ostringstream os;
        os << "probe " << k << " (" << (p.name.empty() ? "unnamed" : p.name)
           << ") element " << i << ": analytic " << a << " vs numeric "
           << numeric;
        return {false, os.str()};
      }
    }
  }
  return {true, {}};
}

inline sgae::TensorPtr random_matrix(sgae::Rng& rng, std::size_t r,
                                     std::size_t c, double lo = -1.0,
                                     double hi = 1.0,
                                     bool requires_grad = true) {
  auto t = sgae::Tensor::zeros({r, c});
  for (double& v : t->values) v = rng.uniform(lo, hi);
  t->requires_grad = requires_grad;
  return t;
}

inline sgae::TensorPtr random_vector(sgae::Rng& rng, std::size_t n,
                                     double lo = -1.0, double hi = 1.0,
                                     bool requires_grad = true) {
  auto t = sgae::Tensor::zeros({n});
  for (double& v : t->values) v = rng.uniform(lo, hi);
  t->requires_grad = requires_grad;
  return t;
}

/// Pushes values away from zero so ReLU and L1 kinks cannot sit within a
/// finite-difference step of the evaluation point.
inline void clear_kinks(const sgae::TensorPtr& t, double margin = 1e-3) {
  for (double& v : t->values) {
    if (std::abs(v) < margin) v = v < 0.0 ? v - margin : v + margin;
  }
}

inline std::vector<double> random_weights(sgae::Rng& rng, std::size_t n) {
  std::vector<double> w(n);
  for (double& v : w) v = rng.uniform(-1.0, 1.0);
  return w;
}

/// One differentiable-operation scenario for the shared gradient suite.
struct OpCase {
  std::string name;
  std::function<CheckResult(std::uint64_t seed)> run;
};

inline std::vector<OpCase> differentiable_op_cases() {
  using namespace sgae;
  std::vector<OpCase> cases;

  cases.push_back({"affine", [](std::uint64_t seed) {
    Rng rng(seed);
    auto x = random_matrix(rng, 4, 3);
    auto w = random_matrix(rng, 5, 3);
    auto b = random_vector(rng, 5);
    auto pw = random_weights(rng, 20);
    return check_gradients(
        [&] { return sum_weighted(affine(x, w, b), pw); }, {x, w, b});
  }});

  cases.push_back({"relu", [](std::uint64_t seed) {
    Rng rng(seed);
    auto x = random_matrix(rng, 4, 5);
    clear_kinks(x);
    auto pw = random_weights(rng, 20);
    return check_gradients([&] { return sum_weighted(relu(x), pw); }, {x});
  }});

  cases.push_back({"sigmoid", [](std::uint64_t seed) {
    Rng rng(seed);
    auto x = random_matrix(rng, 4, 5, -3.0, 3.0);
    auto pw = random_weights(rng, 20);
    return check_gradients([&] { return sum_weighted(sigmoid(x), pw); }, {x});
  }});

  cases.push_back({"exp", [](std::uint64_t seed) {
    Rng rng(seed);
    auto x = random_matrix(rng, 3, 4, -1.5, 1.5);
    auto pw = random_weights(rng, 12);
    return check_gradients([&] { return sum_weighted(exp_elem(x), pw); },
                           {x});
  }});

  cases.push_back({"softmax_rows", [](std::uint64_t seed) {
    Rng rng(seed);
    auto x = random_matrix(rng, 4, 5, -2.0, 2.0);
    auto pw = random_weights(rng, 20);
    return check_gradients(
        [&] { return sum_weighted(softmax_rows(x), pw); }, {x});
  }});

  cases.push_back({"add_scale", [](std::uint64_t seed) {
    Rng rng(seed);
    auto a = random_matrix(rng, 3, 4);
    auto b = random_matrix(rng, 3, 4);
    auto pw = random_weights(rng, 12);
    return check_gradients(
        [&] { return sum_weighted(add(scale(a, 0.7), b), pw); }, {a, b});
  }});

  cases.push_back({"scale_rows", [](std::uint64_t seed) {
    Rng rng(seed);
    auto x = random_matrix(rng, 4, 3);
    std::vector<double> w{1.0, 0.0, 0.5, 2.0};
    auto pw = random_weights(rng, 12);
    return check_gradients(
        [&] { return sum_weighted(scale_rows(x, w), pw); }, {x});
  }});

  cases.push_back({"concat_slice", [](std::uint64_t seed) {
    Rng rng(seed);
    auto a = random_matrix(rng, 3, 2);
    auto b = random_matrix(rng, 3, 4);
    auto c = random_matrix(rng, 3, 3);
    auto pw = random_weights(rng, 15);
    return check_gradients(
        [&] {
          auto cat = concat_cols({a, b, c});
          return sum_weighted(slice_cols(cat, 1, 5), pw);
        },
        {a, b, c});
  }});

  cases.push_back({"gather_rows", [](std::uint64_t seed) {
    Rng rng(seed);
    auto x = random_matrix(rng, 5, 3);
    std::vector<std::size_t> idx{4, 0, 2, 0, 1, 4};
    auto pw = random_weights(rng, 18);
    return check_gradients(
        [&] { return sum_weighted(gather_rows(x, idx), pw); }, {x});
  }});

  cases.push_back({"max_pool_rows", [](std::uint64_t seed) {
    Rng rng(seed);
    auto x = random_matrix(rng, 6, 4);
    auto pw = random_weights(rng, 4);
    return check_gradients(
        [&] { return sum_weighted(max_pool_rows(x), pw); }, {x});
  }});

  cases.push_back({"segment_max_pool", [](std::uint64_t seed) {
    Rng rng(seed);
    auto x = random_matrix(rng, 6, 3);
    std::vector<std::size_t> offsets{0, 2, 3, 6};
    auto pw = random_weights(rng, 9);
    return check_gradients(
        [&] { return sum_weighted(segment_max_pool(x, offsets), pw); }, {x});
  }});

  cases.push_back({"mean_incident", [](std::uint64_t seed) {
    Rng rng(seed);
    auto subj = random_matrix(rng, 4, 3);
    auto obj = random_matrix(rng, 4, 3);
    std::vector<std::size_t> src{0, 1, 2, 0};
    std::vector<std::size_t> dst{1, 2, 0, 3};
    auto pw = random_weights(rng, 15);
    return check_gradients(
        [&] {
          return sum_weighted(mean_incident(subj, obj, src, dst, 5), pw);
        },
        {subj, obj});
  }});

  cases.push_back({"mean_scalars", [](std::uint64_t seed) {
    Rng rng(seed);
    auto a = Tensor::scalar(rng.uniform(-1.0, 1.0));
    auto b = Tensor::scalar(rng.uniform(-1.0, 1.0));
    auto c = Tensor::scalar(rng.uniform(-1.0, 1.0));
    a->requires_grad = b->requires_grad = c->requires_grad = true;
    return check_gradients([&] { return mean_scalars({a, b, c}); },
                           {a, b, c});
  }});

  cases.push_back({"batch_norm_training", [](std::uint64_t seed) {
    Rng rng(seed);
    ParameterStore store;
    auto bn = make_batch_norm(store, "bn", 3);
    for (double& v : bn.gamma->values) v = rng.uniform(0.5, 1.5);
    for (double& v : bn.beta->values) v = rng.uniform(-0.5, 0.5);
    auto x = random_matrix(rng, 5, 3);
    auto pw = random_weights(rng, 15);
    return check_gradients(
        [&] {
          return sum_weighted(feature_normalize(x, bn, true), pw);
        },
        {x, bn.gamma, bn.beta});
  }});

  cases.push_back({"batch_norm_running", [](std::uint64_t seed) {
    Rng rng(seed);
    ParameterStore store;
    auto bn = make_batch_norm(store, "bn", 3);
    for (double& v : bn.gamma->values) v = rng.uniform(0.5, 1.5);
    for (double& v : bn.beta->values) v = rng.uniform(-0.5, 0.5);
    for (double& v : bn.running_mean->values) v = rng.uniform(-0.3, 0.3);
    for (double& v : bn.running_var->values) v = rng.uniform(0.5, 2.0);
    auto x = random_matrix(rng, 4, 3);
    auto pw = random_weights(rng, 12);
    return check_gradients(
        [&] {
          return sum_weighted(feature_normalize(x, bn, false), pw);
        },
        {x, bn.gamma, bn.beta});
  }});

  cases.push_back({"mlp_with_norm", [](std::uint64_t seed) {
    Rng rng(seed);
    ParameterStore store;
    auto mlp = make_mlp(store, "m", {3, 4, 2}, true, rng);
    auto x = random_matrix(rng, 5, 3);
    auto pw = random_weights(rng, 10);
    std::vector<TensorPtr> probes{x};
    for (const auto& t : store.trainable()) probes.push_back(t);
    return check_gradients(
        [&] { return sum_weighted(mlp_forward(x, mlp, true), pw); }, probes);
  }});

  cases.push_back({"l1_loss", [](std::uint64_t seed) {
    Rng rng(seed);
    auto pred = random_matrix(rng, 3, 4);
    auto tgt = random_matrix(rng, 3, 4, -1.0, 1.0, false);
    return check_gradients([&] { return l1_loss(pred, tgt); }, {pred});
  }});

  cases.push_back({"cross_entropy", [](std::uint64_t seed) {
    Rng rng(seed);
    auto logits = random_matrix(rng, 4, 5, -2.0, 2.0);
    std::vector<std::size_t> targets{1, 0, 4, 2};
    return check_gradients(
        [&] { return cross_entropy_logits(logits, targets); }, {logits});
  }});

  cases.push_back({"bce", [](std::uint64_t seed) {
    Rng rng(seed);
    auto probs = random_matrix(rng, 3, 4, 0.05, 0.95);
    auto tgt = Tensor::zeros({3, 4});
    for (double& v : tgt->values) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
    return check_gradients([&] { return bce_probs(probs, tgt); }, {probs});
  }});

  cases.push_back({"focal_cross_entropy", [](std::uint64_t seed) {
    Rng rng(seed);
    auto probs = random_matrix(rng, 4, 5, 0.05, 0.95);
    std::vector<std::size_t> targets{3, 1, 0, 2};
    return check_gradients(
        [&] { return focal_ce_probs(probs, targets, 0.25, 2.0); }, {probs});
  }});

  cases.push_back({"focal_bce", [](std::uint64_t seed) {
    Rng rng(seed);
    auto probs = random_matrix(rng, 3, 4, 0.05, 0.95);
    auto tgt = Tensor::zeros({3, 4});
    for (double& v : tgt->values) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
    return check_gradients(
        [&] { return focal_bce_probs(probs, tgt, 0.25, 2.0); }, {probs});
  }});

  cases.push_back({"sigmoid_after_affine", [](std::uint64_t seed) {
    Rng rng(seed);
    auto x = random_matrix(rng, 3, 4);
    auto w = random_matrix(rng, 2, 4);
    auto b = random_vector(rng, 2);
    auto pw = random_weights(rng, 6);
    return check_gradients(
        [&] { return sum_weighted(sigmoid(affine(x, w, b)), pw); },
        {x, w, b});
  }});

  return cases;
}

}  // namespace gradtest
