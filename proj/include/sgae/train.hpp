#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "sgae/decoder.hpp"
#include "sgae/encoder.hpp"
#include "sgae/error.hpp"
#include "sgae/losses.hpp"
#include "sgae/optim.hpp"
#include "sgae/preprocess.hpp"

namespace sgae {

/// Training-time switches. The two single-term reconstruction ablations
/// are mutually exclusive; everything else combines freely.
struct AblationFlags {
  bool no_gcn = false;
  bool no_skip = false;
  bool shape_loss_only = false;
  bool box_loss_only = false;
  bool no_pretrain = false;

  void validate() const {
    if (shape_loss_only && box_loss_only)
      throw ConfigError(
          "shape_loss_only and box_loss_only cannot both be set");
  }
};

struct LossWeights {
  // Reconstruction terms: box L1, angle-bin cross entropy, shape-code L1.
  double box = 0.4;
  double angle = 0.2;
  double shape = 0.4;
  // Scene graph terms: node classification, per-predicate edge scores.
  double node = 0.1;
  double edge = 1.0;
  // Focal modulation, applied to both scene graph terms.
  double focal_alpha = 0.25;
  double focal_gamma = 2.0;
};

/// Scalar breakdown of one loss evaluation. `total` always equals the
/// weighted component sum; ablated components report 0 with weight 0.
struct LossReport {
  double total = 0.0;
  std::vector<std::pair<std::string, double>> components;
  std::vector<std::pair<std::string, double>> weights;

  double component(const std::string& name) const {
    for (const auto& [key, value] : components)
      if (key == name) return value;
    throw ContractError("loss report has no component '" + name + "'");
  }

  double weight(const std::string& name) const {
    for (const auto& [key, value] : weights)
      if (key == name) return value;
    throw ContractError("loss report has no weight '" + name + "'");
  }

  double weighted_sum() const {
    double sum = 0.0;
    for (std::size_t i = 0; i < components.size(); ++i)
      sum += weights[i].second * components[i].second;
    return sum;
  }
};

/// Differentiable loss scalar plus its detached report.
struct LossResult {
  TensorPtr value;
  LossReport report;
};

/// Object-level reconstruction loss: weighted sum of box-parameter L1,
/// angle-bin cross entropy, and shape-code L1, each averaged over the
/// scene's objects. Single-term ablations drop the other terms from the
/// graph entirely and report them as 0.
inline LossResult reconstruction_loss(const DecoderOutput& pred,
                                      const SceneInputs& target,
                                      const LossWeights& w,
                                      const AblationFlags& flags) {
  flags.validate();
  if (pred.box_params->rows() != target.box_target->rows())
    throw ContractError("reconstruction_loss: object count mismatch");

  const bool use_box = !flags.shape_loss_only;
  const bool use_shape = !flags.box_loss_only;

  std::vector<TensorPtr> terms;
  LossResult out;
  double box_v = 0.0, angle_v = 0.0, shape_v = 0.0;
  if (use_box) {
    auto box = l1_loss(pred.box_params, target.box_target);
    auto angle = cross_entropy_logits(pred.angle_logits, target.angle_target);
    box_v = box->values[0];
    angle_v = angle->values[0];
    terms.push_back(scale(box, w.box));
    terms.push_back(scale(angle, w.angle));
  }
  if (use_shape) {
    auto shape = l1_loss(pred.shape_codes, target.shape_target);
    shape_v = shape->values[0];
    terms.push_back(scale(shape, w.shape));
  }

  TensorPtr total = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) total = add(total, terms[i]);
  out.value = total;
  out.report.total = total->values[0];
  out.report.components = {{"bbox", box_v}, {"angle", angle_v},
                           {"shape", shape_v}};
  out.report.weights = {{"bbox", use_box ? w.box : 0.0},
                        {"angle", use_box ? w.angle : 0.0},
                        {"shape", use_shape ? w.shape : 0.0}};
  return out;
}

/// Supervised graph loss on the bottleneck: focal cross entropy over node
/// classes plus focal binary cross entropy over per-predicate edge scores.
inline LossResult scene_graph_loss(const BottleneckOutput& pred,
                                   const SceneInputs& target,
                                   const LossWeights& w) {
  if (!target.has_labels)
    throw ContractError("scene_graph_loss: inputs carry no labels");
  if (pred.node_probs->rows() != target.node_class.size())
    throw ContractError("scene_graph_loss: node count mismatch");
  if (!pred.edge_probs->same_shape(*target.edge_target))
    throw ContractError("scene_graph_loss: edge vocabulary mismatch");

  auto node = focal_ce_probs(pred.node_probs, target.node_class,
                             w.focal_alpha, w.focal_gamma);
  auto edge = focal_bce_probs(pred.edge_probs, target.edge_target,
                              w.focal_alpha, w.focal_gamma);
  auto total = add(scale(node, w.node), scale(edge, w.edge));

  LossResult out;
  out.value = total;
  out.report.total = total->values[0];
  out.report.components = {{"obj", node->values[0]},
                           {"pred", edge->values[0]}};
  out.report.weights = {{"obj", w.node}, {"pred", w.edge}};
  return out;
}

/// One row of the loss-curve table (serialized as CSV by the CLI).
struct CurveRow {
  int epoch;
  std::string split;
  std::string component;
  double value;
};

struct TrainLoopConfig {
  int epochs = 35;
  int batch_size = 4;
  OptimizerConfig optimizer;
  LossWeights weights;
  AblationFlags ablation;
  std::uint64_t seed = 1;
};

/// Called after each epoch's held-out evaluation; `epoch` counts from 1.
using EpochCallback = std::function<void(int epoch, const LossReport& train,
                                         const LossReport& heldout)>;

struct TrainResult {
  std::vector<CurveRow> curve;
  double initial_heldout = 0.0;  // before the first update
  double final_heldout = 0.0;
  int epochs_run = 0;
};

namespace detail {

/// Averages reports element-wise; weights must agree across inputs.
inline LossReport average_reports(const std::vector<LossReport>& reports) {
  if (reports.empty()) throw ContractError("no loss reports to average");
  LossReport avg = reports[0];
  for (std::size_t i = 1; i < reports.size(); ++i) {
    avg.total += reports[i].total;
    for (std::size_t c = 0; c < avg.components.size(); ++c)
      avg.components[c].second += reports[i].components[c].second;
  }
  const double inv = 1.0 / static_cast<double>(reports.size());
  avg.total *= inv;
  for (auto& [key, value] : avg.components) value *= inv;
  return avg;
}

inline void append_rows(std::vector<CurveRow>& curve, int epoch,
                        const std::string& split, const LossReport& report) {
  for (const auto& [key, value] : report.components)
    curve.push_back({epoch, split, key, value});
  curve.push_back({epoch, split, "total", report.total});
}

/// Shared epoch loop: shuffles, runs mini-batches through `forward`,
/// evaluates the held-out split, and feeds the plateau scheduler.
inline TrainResult run_training(
    ParameterStore& store, AdamOptimizer& opt,
    const std::vector<const SceneInputs*>& train,
    const std::vector<const SceneInputs*>& heldout,
    const TrainLoopConfig& cfg,
    const std::function<LossResult(const SceneInputs&, bool)>& forward,
    const EpochCallback& on_epoch) {
  if (train.empty()) throw ContractError("training split is empty");
  if (heldout.empty()) throw ContractError("held-out split is empty");
  if (cfg.batch_size < 1) throw ConfigError("batch size must be positive");

  auto evaluate = [&]() {
    std::vector<LossReport> reports;
    reports.reserve(heldout.size());
    for (const auto* scene : heldout)
      reports.push_back(forward(*scene, false).report);
    return average_reports(reports);
  };

  TrainResult result;
  Rng order_rng = Rng(cfg.seed).fork(0x45504f4348ULL);  // batch order stream

  LossReport initial = evaluate();
  result.initial_heldout = initial.total;
  result.final_heldout = initial.total;
  append_rows(result.curve, 0, "val", initial);

  std::vector<std::size_t> indices(train.size());
  std::iota(indices.begin(), indices.end(), std::size_t{0});

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    order_rng.shuffle(indices);
    std::vector<LossReport> train_reports;
    train_reports.reserve(train.size());

    for (std::size_t start = 0; start < indices.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(
          indices.size(), start + static_cast<std::size_t>(cfg.batch_size));
      store.zero_grad();
      std::vector<TensorPtr> losses;
      for (std::size_t b = start; b < stop; ++b) {
        auto res = forward(*train[indices[b]], true);
        losses.push_back(res.value);
        train_reports.push_back(std::move(res.report));
      }
      auto batch_loss = mean_scalars(losses);
      backward(batch_loss);
      opt.step();
    }

    LossReport train_avg = average_reports(train_reports);
    LossReport held_avg = evaluate();
    result.final_heldout = held_avg.total;
    append_rows(result.curve, epoch, "train", train_avg);
    append_rows(result.curve, epoch, "val", held_avg);
    opt.plateau_step(held_avg.total);
    result.epochs_run = epoch;
    if (on_epoch) on_epoch(epoch, train_avg, held_avg);
  }
  return result;
}

}  // namespace detail

/// Label-free pre-training of the full autoencoder on the reconstruction
/// objective. Mini-batch losses are means over the batch's scenes; the
/// plateau scheduler monitors the held-out total after every epoch.
inline TrainResult pretrain(SceneEncoder& encoder, SceneDecoder& decoder,
                            ParameterStore& store, AdamOptimizer& opt,
                            const std::vector<const SceneInputs*>& train,
                            const std::vector<const SceneInputs*>& heldout,
                            const TrainLoopConfig& cfg,
                            const EpochCallback& on_epoch = {}) {
  cfg.ablation.validate();
  auto forward = [&](const SceneInputs& scene, bool training) {
    auto bottleneck = encoder.encode(scene, training);
    auto reconstructed = decoder.decode(bottleneck, scene, training);
    return reconstruction_loss(reconstructed, scene, cfg.weights,
                               cfg.ablation);
  };
  return detail::run_training(store, opt, train, heldout, cfg, forward,
                              on_epoch);
}

/// Supervised fine-tuning of the encoder alone (the decoder has been
/// dropped from the store before this call).
inline TrainResult finetune(SceneEncoder& encoder, ParameterStore& store,
                            AdamOptimizer& opt,
                            const std::vector<const SceneInputs*>& train,
                            const std::vector<const SceneInputs*>& heldout,
                            const TrainLoopConfig& cfg,
                            const EpochCallback& on_epoch = {}) {
  cfg.ablation.validate();
  for (const auto* scene : train)
    if (!scene->has_labels)
      throw ConfigError("fine-tuning requires ground-truth graph labels");
  auto forward = [&](const SceneInputs& scene, bool training) {
    auto bottleneck = encoder.encode(scene, training);
    return scene_graph_loss(bottleneck, scene, cfg.weights);
  };
  return detail::run_training(store, opt, train, heldout, cfg, forward,
                              on_epoch);
}

namespace detail {

/// Parameters reachable from a loss under the active configuration,
/// discovered by one probe backward pass in eval mode (no buffer
/// mutation). Ablations legitimately cut whole pathways out of a phase,
/// e.g. without message passing the encoder's GCN stack is idle, and in
/// pre-training nothing ties the edge pathway to the reconstruction;
/// the optimizer must not own those tensors.
inline std::vector<TensorPtr> probe_parameters(
    ParameterStore& store,
    const std::function<LossResult(const SceneInputs&, bool)>& forward,
    const SceneInputs& probe) {
  for (const auto& t : store.tensors()) t->grad.clear();
  auto res = forward(probe, false);
  backward(res.value);
  std::vector<TensorPtr> out;
  for (const auto& t : store.trainable())
    if (!t->grad.empty()) {
      t->grad.clear();
      out.push_back(t);
    }
  return out;
}

}  // namespace detail

/// Trainable tensors the reconstruction objective can reach.
inline std::vector<TensorPtr> pretrain_parameters(
    SceneEncoder& encoder, SceneDecoder& decoder, ParameterStore& store,
    const SceneInputs& probe, const LossWeights& weights = {},
    const AblationFlags& flags = {}) {
  auto forward = [&](const SceneInputs& scene, bool training) {
    auto bottleneck = encoder.encode(scene, training);
    auto reconstructed = decoder.decode(bottleneck, scene, training);
    return reconstruction_loss(reconstructed, scene, weights, flags);
  };
  return detail::probe_parameters(store, forward, probe);
}

/// Trainable tensors the supervised graph objective can reach.
inline std::vector<TensorPtr> finetune_parameters(
    SceneEncoder& encoder, ParameterStore& store, const SceneInputs& probe,
    const LossWeights& weights = {}) {
  auto forward = [&](const SceneInputs& scene, bool training) {
    auto bottleneck = encoder.encode(scene, training);
    return scene_graph_loss(bottleneck, scene, weights);
  };
  return detail::probe_parameters(store, forward, probe);
}

/// Deterministic label-fraction subset: a seeded shuffle of the indices,
/// truncated to max(1, round(fraction * n)) entries.
inline std::vector<std::size_t> label_fraction_subset(std::size_t n,
                                                      double fraction,
                                                      std::uint64_t seed) {
  if (!(fraction > 0.0) || fraction > 1.0)
    throw ConfigError("label fraction must be in (0, 1]");
  if (n == 0) throw ContractError("cannot subset an empty split");
  std::vector<std::size_t> indices(n);
  std::iota(indices.begin(), indices.end(), std::size_t{0});
  Rng rng = Rng(seed).fork(0x53554253ULL);  // subset stream
  rng.shuffle(indices);
  const auto keep = static_cast<std::size_t>(std::max<long long>(
      1, std::llround(fraction * static_cast<double>(n))));
  indices.resize(std::min(keep, n));
  std::sort(indices.begin(), indices.end());
  return indices;
}

}  // namespace sgae
