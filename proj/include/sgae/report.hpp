#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sgae/metrics.hpp"
#include "sgae/scene_io.hpp"

namespace sgae {

/// One line of a metric file: a named value at some k for one class
/// split ("all" for micro recall, head/body/tail for class means).
/// `count` records how many ground-truth items (micro) or contributing
/// classes (means) stand behind the value; splits whose classes never
/// occur in the evaluation set are undefined rather than zero.
struct MetricEntry {
  std::string name;
  int k = 0;
  std::string split;
  bool defined = false;
  double value = 0.0;
  std::size_t count = 0;
};

struct MetricReport {
  std::size_t scene_count = 0;
  std::vector<MetricEntry> entries;

  const MetricEntry* find(const std::string& name, int k,
                          const std::string& split) const {
    for (const auto& e : entries)
      if (e.name == name && e.k == k && e.split == split) return &e;
    return nullptr;
  }

  double value_of(const std::string& name, int k,
                  const std::string& split) const {
    const auto* e = find(name, k, split);
    if (!e) throw ContractError("metric report has no '" + name + "' at k=" +
                                std::to_string(k) + " split=" + split);
    if (!e->defined)
      throw ContractError("metric '" + name + "' is undefined for " + split);
    return e->value;
  }
};

struct EvalOptions {
  std::vector<int> object_ks{1, 3, 5};
  std::vector<int> predicate_ks{1, 2, 3};
  std::vector<int> relationship_ks{1, 3, 5};
  bool global_relationship_ranking = false;
};

namespace detail {

inline void append_metric(MetricReport& report, const std::string& name,
                          int k, const std::string& split,
                          std::optional<double> value, std::size_t count) {
  MetricEntry e;
  e.name = name;
  e.k = k;
  e.split = split;
  e.defined = value.has_value();
  e.value = value.value_or(0.0);
  e.count = count;
  report.entries.push_back(std::move(e));
}

inline void append_tally(MetricReport& report, const std::string& prefix,
                         int k, const RecallTally& tally,
                         const ClassSplit& split) {
  append_metric(report, prefix + "_recall", k, "all", tally.micro(),
                tally.total_sum);
  const std::vector<std::pair<std::string, std::vector<std::size_t>>> groups =
      {{"all", split.all()},
       {"head", split.head},
       {"body", split.body},
       {"tail", split.tail}};
  for (const auto& [name, classes] : groups)
    append_metric(report, prefix + "_mean_recall", k, name,
                  tally.mean_over(classes), tally.present_count(classes));
}

}  // namespace detail

/// All recall metrics over a batch of scenes. The splits carry the
/// training-frequency tables that define head/body/tail membership; the
/// object split's table length is the class vocabulary, the predicate
/// split's the predicate vocabulary.
inline MetricReport evaluate_graphs(const std::vector<GraphPrediction>& preds,
                                    const std::vector<GraphTruth>& truths,
                                    const ClassSplit& object_split,
                                    const ClassSplit& predicate_split,
                                    const EvalOptions& options = {}) {
  MetricReport report;
  report.scene_count = preds.size();
  const std::size_t num_classes = object_split.frequency.size();
  const std::size_t num_predicates = predicate_split.frequency.size();

  for (int k : options.object_ks)
    detail::append_tally(report, "object", k,
                         object_recall_tally(preds, truths, k, num_classes),
                         object_split);
  for (int k : options.predicate_ks)
    detail::append_tally(
        report, "predicate", k,
        predicate_recall_tally(preds, truths, k, num_predicates),
        predicate_split);
  for (int k : options.relationship_ks)
    detail::append_tally(
        report, "relationship", k,
        relationship_recall_tally(preds, truths, k, num_classes,
                                  num_predicates,
                                  options.global_relationship_ranking),
        predicate_split);
  return report;
}

inline void write_metric_report(std::ostream& out,
                                const MetricReport& report) {
  out << "SGMETRICS v1\n";
  out << "scenes " << report.scene_count << '\n';
  out << "metrics " << report.entries.size() << '\n';
  for (const auto& e : report.entries) {
    out << "metric " << e.name << ' ' << e.k << ' ' << e.split << ' ';
    if (e.defined)
      out << detail::fmt9(e.value);
    else
      out << "undef";
    out << ' ' << e.count << '\n';
  }
  out << "end\n";
}

inline void save_metric_report(const MetricReport& report,
                               const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open metric file for writing: " + path);
  write_metric_report(out, report);
  if (!out) throw DataError("failed writing metric file: " + path);
}

inline MetricReport read_metric_report(std::istream& in,
                                       const std::string& label) {
  detail::LineReader reader(in, label);
  {
    auto ls = reader.next("SGMETRICS");
    const auto version = reader.value<std::string>(ls, "format version");
    if (version != "v1")
      throw DataError(label + ": unsupported metric format " + version);
  }
  MetricReport report;
  {
    auto ls = reader.next("scenes");
    report.scene_count = reader.value<std::size_t>(ls, "scene count");
  }
  std::size_t count;
  {
    auto ls = reader.next("metrics");
    count = reader.value<std::size_t>(ls, "metric count");
  }
  for (std::size_t i = 0; i < count; ++i) {
    auto ls = reader.next("metric");
    MetricEntry e;
    e.name = reader.value<std::string>(ls, "metric name");
    e.k = reader.value<int>(ls, "metric k");
    e.split = reader.value<std::string>(ls, "metric split");
    const auto value = reader.value<std::string>(ls, "metric value");
    if (value == "undef") {
      e.defined = false;
    } else {
      e.defined = true;
      e.value = std::strtod(value.c_str(), nullptr);
    }
    e.count = reader.value<std::size_t>(ls, "metric count");
    report.entries.push_back(std::move(e));
  }
  reader.next("end");
  return report;
}

inline MetricReport load_metric_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open metric file: " + path);
  return read_metric_report(in, path);
}

/// Preservation report: per-predicate replay accuracy plus the overall
/// fraction, with raw counts for downstream aggregation.
inline void write_preservation_report(std::ostream& out,
                                      const PreservationReport& report) {
  out << "SGPRESERVE v1\n";
  out << "predicates " << report.checked.size() << '\n';
  for (std::size_t p = 0; p < report.checked.size(); ++p) {
    out << "predicate " << predicate_name(static_cast<int>(p)) << ' '
        << report.preserved[p] << ' ' << report.checked[p] << ' ';
    if (auto acc = report.per_predicate(p))
      out << detail::fmt9(*acc);
    else
      out << "undef";
    out << '\n';
  }
  out << "overall " << report.preserved_sum << ' ' << report.checked_sum
      << ' ';
  if (auto acc = report.overall())
    out << detail::fmt9(*acc);
  else
    out << "undef";
  out << '\n';
  out << "end\n";
}

inline void save_preservation_report(const PreservationReport& report,
                                     const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open report for writing: " + path);
  write_preservation_report(out, report);
  if (!out) throw DataError("failed writing report: " + path);
}

}  // namespace sgae
