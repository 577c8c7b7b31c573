#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "sgae/decoder.hpp"
#include "sgae/encoder.hpp"
#include "sgae/error.hpp"
#include "sgae/relations.hpp"
#include "sgae/scene.hpp"

namespace sgae {

/// Detached per-scene prediction, free of the autodiff tape.
struct GraphPrediction {
  std::vector<std::vector<double>> node_probs;  // [N][C]
  std::vector<std::vector<double>> edge_probs;  // [E][P]
  std::vector<std::size_t> edge_src, edge_dst;  // [E]
};

struct GraphTruth {
  std::vector<std::size_t> node_class;                    // [N]
  std::vector<std::vector<std::size_t>> edge_predicates;  // [E], sorted
};

inline GraphPrediction detach_prediction(const BottleneckOutput& out,
                                         const SceneInputs& in) {
  GraphPrediction g;
  g.edge_src = in.edge_src;
  g.edge_dst = in.edge_dst;
  for (std::size_t i = 0; i < out.node_probs->rows(); ++i) {
    std::vector<double> row(out.node_probs->cols());
    for (std::size_t c = 0; c < row.size(); ++c)
      row[c] = out.node_probs->at(i, c);
    g.node_probs.push_back(std::move(row));
  }
  for (std::size_t e = 0; e < out.edge_probs->rows(); ++e) {
    std::vector<double> row(out.edge_probs->cols());
    for (std::size_t p = 0; p < row.size(); ++p)
      row[p] = out.edge_probs->at(e, p);
    g.edge_probs.push_back(std::move(row));
  }
  return g;
}

inline GraphTruth detach_truth(const SceneInputs& in) {
  if (!in.has_labels)
    throw ContractError("detach_truth: inputs carry no labels");
  GraphTruth t;
  t.node_class = in.node_class;
  for (std::size_t e = 0; e < in.edge_target->rows(); ++e) {
    std::vector<std::size_t> preds;
    for (std::size_t p = 0; p < in.edge_target->cols(); ++p)
      if (in.edge_target->at(e, p) != 0.0) preds.push_back(p);
    t.edge_predicates.push_back(std::move(preds));
  }
  return t;
}

/// Per-class hit bookkeeping behind every recall metric.
struct RecallTally {
  std::vector<std::size_t> hits, totals;
  std::size_t hit_sum = 0, total_sum = 0;

  explicit RecallTally(std::size_t num_classes)
      : hits(num_classes, 0), totals(num_classes, 0) {}

  void add(std::size_t cls, bool hit) {
    if (cls >= totals.size())
      throw ContractError("recall tally: class index out of range");
    ++totals[cls];
    ++total_sum;
    if (hit) {
      ++hits[cls];
      ++hit_sum;
    }
  }

  /// Recall over every ground-truth item, None when nothing was scored.
  std::optional<double> micro() const {
    if (total_sum == 0) return std::nullopt;
    return static_cast<double>(hit_sum) / static_cast<double>(total_sum);
  }

  /// Unweighted mean of per-class recalls over `classes`; classes with
  /// no ground-truth occurrences are excluded, and an empty remainder
  /// yields None rather than zero.
  std::optional<double> mean_over(
      const std::vector<std::size_t>& classes) const {
    double sum = 0.0;
    std::size_t present = 0;
    for (auto c : classes) {
      if (c >= totals.size())
        throw ContractError("recall tally: class index out of range");
      if (totals[c] == 0) continue;
      sum += static_cast<double>(hits[c]) / static_cast<double>(totals[c]);
      ++present;
    }
    if (present == 0) return std::nullopt;
    return sum / static_cast<double>(present);
  }

  std::size_t present_count(const std::vector<std::size_t>& classes) const {
    std::size_t present = 0;
    for (auto c : classes)
      if (c < totals.size() && totals[c] > 0) ++present;
    return present;
  }
};

namespace detail {

/// Rank of entry `target` in `scores`: the number of strictly larger
/// entries plus equal entries at lower indices. Top-k means rank < k.
inline std::size_t rank_of(const std::vector<double>& scores,
                           std::size_t target) {
  std::size_t rank = 0;
  const double t = scores[target];
  for (std::size_t j = 0; j < scores.size(); ++j)
    if (scores[j] > t || (scores[j] == t && j < target)) ++rank;
  return rank;
}

}  // namespace detail

/// Top-k recall of ground-truth node classes; ties rank the lower class
/// index first.
inline RecallTally object_recall_tally(
    const std::vector<GraphPrediction>& preds,
    const std::vector<GraphTruth>& truths, int k, std::size_t num_classes) {
  if (k < 1) throw ContractError("recall requires k >= 1");
  if (preds.size() != truths.size())
    throw ContractError("prediction/truth scene count mismatch");
  RecallTally tally(num_classes);
  for (std::size_t s = 0; s < preds.size(); ++s) {
    if (preds[s].node_probs.size() != truths[s].node_class.size())
      throw ContractError("prediction/truth node count mismatch");
    for (std::size_t i = 0; i < truths[s].node_class.size(); ++i) {
      const auto cls = truths[s].node_class[i];
      const auto rank = detail::rank_of(preds[s].node_probs[i], cls);
      tally.add(cls, rank < static_cast<std::size_t>(k));
    }
  }
  return tally;
}

/// Top-k recall per ground-truth (edge, predicate) pair; edges with an
/// empty predicate set contribute nothing.
inline RecallTally predicate_recall_tally(
    const std::vector<GraphPrediction>& preds,
    const std::vector<GraphTruth>& truths, int k,
    std::size_t num_predicates) {
  if (k < 1) throw ContractError("recall requires k >= 1");
  if (preds.size() != truths.size())
    throw ContractError("prediction/truth scene count mismatch");
  RecallTally tally(num_predicates);
  for (std::size_t s = 0; s < preds.size(); ++s) {
    if (preds[s].edge_probs.size() != truths[s].edge_predicates.size())
      throw ContractError("prediction/truth edge count mismatch");
    for (std::size_t e = 0; e < truths[s].edge_predicates.size(); ++e)
      for (auto p : truths[s].edge_predicates[e]) {
        const auto rank = detail::rank_of(preds[s].edge_probs[e], p);
        tally.add(p, rank < static_cast<std::size_t>(k));
      }
  }
  return tally;
}

/// Triplet recall. Candidates for a pair are every (subject class,
/// predicate, object class) combination, scored as the product
/// node_prob(subject) * edge_prob(predicate) * node_prob(object).
/// A ground-truth triplet is a hit when it ranks within the top k of
/// its own pair's candidates; with `global_ranking` the candidate pool
/// spans all of the scene's pairs instead. Score ties fall back to the
/// lexicographic candidate index, lower first. Tallies group by the
/// ground-truth predicate.
inline RecallTally relationship_recall_tally(
    const std::vector<GraphPrediction>& preds,
    const std::vector<GraphTruth>& truths, int k, std::size_t num_classes,
    std::size_t num_predicates, bool global_ranking = false) {
  if (k < 1) throw ContractError("recall requires k >= 1");
  if (preds.size() != truths.size())
    throw ContractError("prediction/truth scene count mismatch");
  RecallTally tally(num_predicates);

  for (std::size_t s = 0; s < preds.size(); ++s) {
    const auto& pred = preds[s];
    const auto& truth = truths[s];
    if (pred.edge_probs.size() != truth.edge_predicates.size())
      throw ContractError("prediction/truth edge count mismatch");

    // Candidates ranked above (score, index): counted per pair, or
    // accumulated across pairs when ranking globally.
    auto count_above = [&](std::size_t e, double gt_score,
                           std::size_t gt_index) {
      const auto& ps = pred.node_probs[pred.edge_src[e]];
      const auto& po = pred.node_probs[pred.edge_dst[e]];
      const auto& pe = pred.edge_probs[e];
      std::size_t above = 0;
      std::size_t index = global_ranking
                              ? e * num_classes * num_predicates * num_classes
                              : 0;
      for (std::size_t a = 0; a < num_classes; ++a)
        for (std::size_t q = 0; q < num_predicates; ++q)
          for (std::size_t b = 0; b < num_classes; ++b, ++index) {
            const double score = ps[a] * pe[q] * po[b];
            if (score > gt_score || (score == gt_score && index < gt_index))
              ++above;
          }
      return above;
    };

    for (std::size_t e = 0; e < truth.edge_predicates.size(); ++e) {
      const auto cs = truth.node_class[pred.edge_src[e]];
      const auto co = truth.node_class[pred.edge_dst[e]];
      for (auto q : truth.edge_predicates[e]) {
        const double gt_score = pred.node_probs[pred.edge_src[e]][cs] *
                                pred.edge_probs[e][q] *
                                pred.node_probs[pred.edge_dst[e]][co];
        const std::size_t local =
            (cs * num_predicates + q) * num_classes + co;
        std::size_t rank;
        if (global_ranking) {
          const std::size_t gt_index =
              e * num_classes * num_predicates * num_classes + local;
          rank = 0;
          for (std::size_t e2 = 0; e2 < pred.edge_probs.size(); ++e2)
            rank += count_above(e2, gt_score, gt_index);
        } else {
          rank = count_above(e, gt_score, local);
        }
        tally.add(q, rank < static_cast<std::size_t>(k));
      }
    }
  }
  return tally;
}

/// Convenience single-value forms.
inline double object_recall_at_k(const std::vector<GraphPrediction>& preds,
                                 const std::vector<GraphTruth>& truths, int k,
                                 std::size_t num_classes) {
  auto v = object_recall_tally(preds, truths, k, num_classes).micro();
  if (!v) throw ContractError("object recall over an empty ground truth");
  return *v;
}

inline double predicate_recall_at_k(const std::vector<GraphPrediction>& preds,
                                    const std::vector<GraphTruth>& truths,
                                    int k, std::size_t num_predicates) {
  auto v = predicate_recall_tally(preds, truths, k, num_predicates).micro();
  if (!v) throw ContractError("predicate recall over an empty ground truth");
  return *v;
}

inline double relationship_recall_at_k(
    const std::vector<GraphPrediction>& preds,
    const std::vector<GraphTruth>& truths, int k, std::size_t num_classes,
    std::size_t num_predicates, bool global_ranking = false) {
  auto v = relationship_recall_tally(preds, truths, k, num_classes,
                                     num_predicates, global_ranking)
               .micro();
  if (!v)
    throw ContractError("relationship recall over an empty ground truth");
  return *v;
}

/// Frequency tertiles of the training-class distribution. Classes sort
/// by descending frequency (ties favor the lower index); the head takes
/// any remainder first, then the body.
struct ClassSplit {
  std::vector<std::size_t> head, body, tail;
  std::vector<std::size_t> frequency;

  std::vector<std::size_t> all() const {
    std::vector<std::size_t> everything(frequency.size());
    std::iota(everything.begin(), everything.end(), std::size_t{0});
    return everything;
  }
};

inline ClassSplit build_class_split(const std::vector<std::size_t>& freq) {
  if (freq.empty()) throw ContractError("class split needs a frequency table");
  std::vector<std::size_t> order(freq.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (freq[a] != freq[b]) return freq[a] > freq[b];
    return a < b;
  });
  const std::size_t n = freq.size();
  const std::size_t base = n / 3, rem = n % 3;
  const std::size_t head_n = base + (rem > 0 ? 1 : 0);
  const std::size_t body_n = base + (rem > 1 ? 1 : 0);
  ClassSplit split;
  split.frequency = freq;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < head_n)
      split.head.push_back(order[i]);
    else if (i < head_n + body_n)
      split.body.push_back(order[i]);
    else
      split.tail.push_back(order[i]);
  }
  return split;
}

/// Fraction of ground-truth relations that still hold when the relation
/// rules are replayed on the reconstructed boxes (shape families come
/// from the original objects). Object correspondence is by index.
struct PreservationReport {
  std::vector<std::size_t> preserved, checked;  // per predicate
  std::size_t preserved_sum = 0, checked_sum = 0;

  std::optional<double> overall() const {
    if (checked_sum == 0) return std::nullopt;
    return static_cast<double>(preserved_sum) /
           static_cast<double>(checked_sum);
  }

  std::optional<double> per_predicate(std::size_t p) const {
    if (p >= checked.size() || checked[p] == 0) return std::nullopt;
    return static_cast<double>(preserved[p]) /
           static_cast<double>(checked[p]);
  }
};

inline PreservationReport preservation_accuracy(
    const Scene& original, const ReconstructedScene& reconstructed,
    const std::vector<int>& predicates_to_check = {},
    const RuleThresholds& thresholds = {}) {
  if (original.objects.size() != reconstructed.objects.size())
    throw ContractError("preservation: object count mismatch");
  std::vector<bool> check(static_cast<std::size_t>(original.num_predicates),
                          predicates_to_check.empty());
  for (int p : predicates_to_check) {
    if (p < 0 || p >= original.num_predicates)
      throw ContractError("preservation: predicate out of range");
    check[static_cast<std::size_t>(p)] = true;
  }

  PreservationReport report;
  report.preserved.assign(static_cast<std::size_t>(original.num_predicates),
                          0);
  report.checked.assign(static_cast<std::size_t>(original.num_predicates), 0);

  for (const auto& edge : original.graph.edges) {
    const auto i = static_cast<std::size_t>(edge.src);
    const auto j = static_cast<std::size_t>(edge.dst);
    if (i >= original.objects.size() || j >= original.objects.size())
      throw ContractError("preservation: edge object index out of range");
    const bool same_family = original.objects[i].shape_family ==
                             original.objects[j].shape_family;
    auto replayed = relation_rules(reconstructed.objects[i].box,
                                   reconstructed.objects[j].box, same_family,
                                   thresholds);
    for (int p : edge.predicates) {
      const auto pu = static_cast<std::size_t>(p);
      if (pu >= check.size() || !check[pu]) continue;
      const bool held =
          std::find(replayed.begin(), replayed.end(), p) != replayed.end();
      ++report.checked[pu];
      ++report.checked_sum;
      if (held) {
        ++report.preserved[pu];
        ++report.preserved_sum;
      }
    }
  }
  return report;
}

}  // namespace sgae
