#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "sgae/checkpoint.hpp"
#include "sgae/config.hpp"
#include "sgae/dataset.hpp"
#include "sgae/metrics.hpp"
#include "sgae/report.hpp"
#include "sgae/train.hpp"

namespace sgae {

namespace detail {

inline ModelConfig effective_model(const ExperimentConfig& cfg) {
  ModelConfig model = cfg.model;
  model.no_gcn = cfg.ablation.no_gcn;
  model.no_skip = cfg.ablation.no_skip;
  return model;
}

inline TrainLoopConfig loop_config(const ExperimentConfig& cfg, int epochs) {
  TrainLoopConfig loop;
  loop.epochs = epochs;
  loop.batch_size = cfg.batch_size;
  loop.optimizer = cfg.optimizer;
  loop.weights = cfg.weights;
  loop.ablation = cfg.ablation;
  loop.seed = cfg.seed;
  return loop;
}

inline std::filesystem::path ensure_output_dir(const ExperimentConfig& cfg) {
  std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Provenance record every command leaves next to its outputs. No
/// timestamps: reruns of the same config and seed must match byte-wise.
inline void write_run_manifest(const std::filesystem::path& dir,
                               const std::string& command,
                               const ExperimentConfig& cfg,
                               const std::vector<std::string>& env_overrides) {
  std::ofstream out(dir / "run.txt", std::ios::trunc);
  if (!out) throw DataError("cannot write run manifest in '" + dir.string() +
                            "'");
  out << "SGRUN v1\n";
  out << "command " << command << '\n';
  out << "version " << kCodeVersion << '\n';
  out << "config_hash " << config_hash(cfg) << '\n';
  out << "seed " << cfg.seed << '\n';
  out << "env_overrides " << env_overrides.size();
  for (const auto& key : env_overrides) out << ' ' << key;
  out << '\n';
  out << "end\n";
}

inline void write_loss_curves(const std::filesystem::path& path,
                              const std::vector<CurveRow>& curve) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "epoch,split,component,value\n";
  for (const auto& row : curve)
    out << row.epoch << ',' << row.split << ',' << row.component << ','
        << fmt9(row.value) << '\n';
}

struct LoadedSplit {
  std::vector<Scene> scenes;
  std::vector<SceneInputs> inputs;

  std::vector<const SceneInputs*> views() const {
    std::vector<const SceneInputs*> v;
    v.reserve(inputs.size());
    for (const auto& in : inputs) v.push_back(&in);
    return v;
  }
};

inline LoadedSplit load_inputs(const std::string& dir,
                               const std::vector<std::string>& files,
                               const PreprocessConfig& pre,
                               const ModelConfig& model,
                               const FrozenShapeCodec& codec) {
  LoadedSplit split;
  split.scenes = load_split(dir, files);
  split.inputs.reserve(split.scenes.size());
  for (const auto& scene : split.scenes)
    split.inputs.push_back(preprocess_scene(scene, pre, model, codec));
  return split;
}

/// A checkpoint knows the architecture it was trained with; commands
/// that resurrect one must build that exact model, and its vocabulary
/// must agree with the dataset the config points at.
inline ModelConfig checkpoint_model(const Checkpoint& ck,
                                    const ExperimentConfig& cfg) {
  ModelConfig model = ck.info.model;
  model.validate();
  if (model.num_classes != cfg.model.num_classes ||
      model.num_predicates != cfg.model.num_predicates)
    throw ConfigError(
        "checkpoint vocabulary does not match the configured dataset");
  return model;
}

inline DatasetManifest require_dataset(const ExperimentConfig& cfg,
                                       const char* command) {
  if (cfg.scene_dir.empty())
    throw ConfigError(std::string(command) +
                      ": config must set scene_dir to an existing corpus");
  return load_manifest(cfg.scene_dir);
}

/// Per-epoch checkpointing: always refresh the latest checkpoint, track
/// the best held-out total separately, and abort on non-finite losses
/// before overwriting the last good state.
class CheckpointSink {
 public:
  CheckpointSink(std::filesystem::path dir, TrainMode mode,
                 const ExperimentConfig& cfg, const ParameterStore& store,
                 const AdamOptimizer& opt)
      : dir_(std::move(dir)),
        mode_(mode),
        cfg_(cfg),
        store_(store),
        opt_(opt) {}

  void on_epoch(int epoch, const LossReport& train, const LossReport& held) {
    if (!std::isfinite(train.total) || !std::isfinite(held.total))
      throw NumericError("training diverged at epoch " +
                         std::to_string(epoch) +
                         "; last checkpoint left in place");
    write(epoch, "checkpoint.sgck");
    if (held.total < best_) {
      best_ = held.total;
      write(epoch, "best.sgck");
    }
  }

  /// Snapshot before any update, so downstream consumers can always
  /// compare against the untrained model.
  void write_initial() { write(0, "initial.sgck"); }

 private:
  void write(int epoch, const char* name) {
    CheckpointInfo info;
    info.mode = mode_;
    info.ablation = cfg_.ablation;
    info.epoch = static_cast<std::uint32_t>(epoch);
    info.model = effective_model(cfg_);
    info.rng_state = Rng(cfg_.seed).state();
    write_checkpoint(make_checkpoint(info, store_, &opt_),
                     (dir_ / name).string());
  }

  std::filesystem::path dir_;
  TrainMode mode_;
  const ExperimentConfig& cfg_;
  const ParameterStore& store_;
  const AdamOptimizer& opt_;
  double best_ = std::numeric_limits<double>::infinity();
};

/// Ground-truth class and predicate frequencies over a split, used to
/// form the head/body/tail tertiles.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
split_frequencies(const std::vector<Scene>& scenes, int num_classes,
                  int num_predicates) {
  std::vector<std::size_t> obj(static_cast<std::size_t>(num_classes), 0);
  std::vector<std::size_t> pred(static_cast<std::size_t>(num_predicates), 0);
  for (const auto& scene : scenes) {
    for (const auto& o : scene.objects) {
      if (o.class_id < 0 || o.class_id >= num_classes)
        throw DataError("evaluation requires labeled scenes");
      ++obj[static_cast<std::size_t>(o.class_id)];
    }
    for (const auto& e : scene.graph.edges)
      for (int p : e.predicates)
        ++pred[static_cast<std::size_t>(p)];
  }
  return {obj, pred};
}

inline MetricReport evaluate_split(const SceneEncoder& encoder,
                                   const LoadedSplit& eval_split,
                                   const std::vector<Scene>& train_scenes,
                                   const ExperimentConfig& cfg) {
  std::vector<GraphPrediction> preds;
  std::vector<GraphTruth> truths;
  preds.reserve(eval_split.inputs.size());
  for (const auto& in : eval_split.inputs) {
    if (!in.has_labels)
      throw ConfigError("evaluation requires ground-truth graph labels");
    preds.push_back(detach_prediction(encoder.encode(in, false), in));
    truths.push_back(detach_truth(in));
  }
  auto [obj_freq, pred_freq] = split_frequencies(
      train_scenes, cfg.model.num_classes, cfg.model.num_predicates);
  return evaluate_graphs(preds, truths, build_class_split(obj_freq),
                         build_class_split(pred_freq), EvalOptions{});
}

}  // namespace detail

/// Generates the scene corpus plus its split manifest.
inline void cmd_gen_data(const ExperimentConfig& cfg, bool force,
                         const std::vector<std::string>& env_overrides = {}) {
  cfg.validate();
  generate_corpus(cfg, force);
  const auto dir = cfg.scene_dir.empty()
                       ? std::filesystem::path(cfg.output_dir) / "scenes"
                       : std::filesystem::path(cfg.scene_dir);
  detail::write_run_manifest(dir, "gen-data", cfg, env_overrides);
}

/// Label-free pre-training of the autoencoder. Emits per-epoch
/// checkpoints (latest, best and the untrained snapshot) plus the loss
/// curves and a run manifest.
inline TrainResult cmd_pretrain(
    const ExperimentConfig& cfg,
    const std::vector<std::string>& env_overrides = {}) {
  cfg.validate();
  if (cfg.ablation.no_pretrain)
    throw ConfigError("no_pretrain contradicts the pretrain command");
  const auto manifest = detail::require_dataset(cfg, "pretrain");
  const auto model = detail::effective_model(cfg);
  FrozenShapeCodec codec(model.shape_code_dim, model.codec_points,
                         model.codec_seed);
  auto train_split = detail::load_inputs(cfg.scene_dir, manifest.train,
                                         cfg.preprocess, model, codec);
  auto val_split = detail::load_inputs(cfg.scene_dir, manifest.val,
                                       cfg.preprocess, model, codec);

  ParameterStore store;
  Rng init_rng = Rng(cfg.seed).fork(0x4d4f44454cULL);  // weight-init stream
  SceneEncoder encoder(store, model, init_rng);
  SceneDecoder decoder(store, model, init_rng);

  auto params = pretrain_parameters(encoder, decoder, store,
                                    train_split.inputs.front(), cfg.weights,
                                    cfg.ablation);
  AdamOptimizer opt(params, cfg.optimizer);

  const auto dir = detail::ensure_output_dir(cfg);
  detail::CheckpointSink sink(dir, TrainMode::kPretrain, cfg, store, opt);
  sink.write_initial();

  auto result = pretrain(
      encoder, decoder, store, opt, train_split.views(), val_split.views(),
      detail::loop_config(cfg, cfg.pretrain_epochs),
      [&](int epoch, const LossReport& train, const LossReport& held) {
        sink.on_epoch(epoch, train, held);
      });

  detail::write_loss_curves(dir / "loss_curves.csv", result.curve);
  detail::write_run_manifest(dir, "pretrain", cfg, env_overrides);
  return result;
}

/// Supervised fine-tuning of the encoder on the labeled fraction of the
/// training split. Starts from a pre-trained checkpoint (decoder weights
/// are dropped) unless `no_pretrain` asks for a from-scratch baseline.
/// Ends with an evaluation of the test split.
inline TrainResult cmd_finetune(
    const ExperimentConfig& cfg, const std::string& checkpoint_path,
    const std::vector<std::string>& env_overrides = {}) {
  cfg.validate();
  if (checkpoint_path.empty() && !cfg.ablation.no_pretrain)
    throw ConfigError(
        "finetune needs --checkpoint, or --no-pretrain for a from-scratch "
        "baseline");
  if (!checkpoint_path.empty() && cfg.ablation.no_pretrain)
    throw ConfigError("--no-pretrain contradicts --checkpoint");

  const auto manifest = detail::require_dataset(cfg, "finetune");
  const auto model = detail::effective_model(cfg);
  FrozenShapeCodec codec(model.shape_code_dim, model.codec_points,
                         model.codec_seed);

  auto keep = label_fraction_subset(manifest.train.size(),
                                    cfg.label_fraction, cfg.seed);
  std::vector<std::string> train_files;
  train_files.reserve(keep.size());
  for (auto i : keep) train_files.push_back(manifest.train[i]);

  auto train_split = detail::load_inputs(cfg.scene_dir, train_files,
                                         cfg.preprocess, model, codec);
  auto val_split = detail::load_inputs(cfg.scene_dir, manifest.val,
                                       cfg.preprocess, model, codec);
  for (const auto& in : train_split.inputs)
    if (!in.has_labels)
      throw ConfigError("fine-tuning requires ground-truth graph labels");

  ParameterStore store;
  Rng init_rng = Rng(cfg.seed).fork(0x4d4f44454cULL);
  SceneEncoder encoder(store, model, init_rng);

  if (!checkpoint_path.empty()) {
    auto ck = read_checkpoint(checkpoint_path);
    const auto& cm = ck.info.model;
    if (cm.num_classes != model.num_classes ||
        cm.num_predicates != model.num_predicates ||
        cm.feature_dim != model.feature_dim ||
        cm.box_feature_dim != model.box_feature_dim ||
        cm.encoder_layers != model.encoder_layers ||
        cm.no_gcn != model.no_gcn)
      throw ConfigError(
          "checkpoint encoder architecture does not match the config");
    apply_checkpoint(ck, store, {"dec."});
  }

  auto params = finetune_parameters(encoder, store,
                                    train_split.inputs.front(), cfg.weights);
  AdamOptimizer opt(params, cfg.optimizer);

  const auto dir = detail::ensure_output_dir(cfg);
  detail::CheckpointSink sink(dir, TrainMode::kFinetune, cfg, store, opt);
  sink.write_initial();

  auto result = finetune(
      encoder, store, opt, train_split.views(), val_split.views(),
      detail::loop_config(cfg, cfg.finetune_epochs),
      [&](int epoch, const LossReport& train, const LossReport& held) {
        sink.on_epoch(epoch, train, held);
      });

  detail::write_loss_curves(dir / "loss_curves.csv", result.curve);

  auto test_split = detail::load_inputs(cfg.scene_dir, manifest.test,
                                        cfg.preprocess, model, codec);
  auto full_train_scenes = load_split(cfg.scene_dir, manifest.train);
  auto metrics =
      detail::evaluate_split(encoder, test_split, full_train_scenes, cfg);
  save_metric_report(metrics, (dir / "metrics.txt").string());
  detail::write_run_manifest(dir, "finetune", cfg, env_overrides);
  return result;
}

/// Evaluates a checkpoint on the test split and writes the metric file.
inline MetricReport cmd_eval(
    const ExperimentConfig& cfg, const std::string& checkpoint_path,
    const std::vector<std::string>& env_overrides = {}) {
  cfg.validate();
  if (checkpoint_path.empty())
    throw ConfigError("eval requires --checkpoint");
  const auto manifest = detail::require_dataset(cfg, "eval");
  auto ck = read_checkpoint(checkpoint_path);
  const auto model = detail::checkpoint_model(ck, cfg);
  FrozenShapeCodec codec(model.shape_code_dim, model.codec_points,
                         model.codec_seed);

  ParameterStore store;
  Rng init_rng = Rng(cfg.seed).fork(0x4d4f44454cULL);
  SceneEncoder encoder(store, model, init_rng);
  apply_checkpoint(ck, store, {"dec."});

  auto test_split = detail::load_inputs(cfg.scene_dir, manifest.test,
                                        cfg.preprocess, model, codec);
  auto train_scenes = load_split(cfg.scene_dir, manifest.train);
  auto metrics =
      detail::evaluate_split(encoder, test_split, train_scenes, cfg);

  const auto dir = detail::ensure_output_dir(cfg);
  save_metric_report(metrics, (dir / "metrics.txt").string());
  detail::write_run_manifest(dir, "eval", cfg, env_overrides);
  return metrics;
}

/// Runs the autoencoder over the test split, writes one reconstructed
/// scene file per input and the relation-preservation report.
inline PreservationReport cmd_reconstruct(
    const ExperimentConfig& cfg, const std::string& checkpoint_path,
    const std::vector<std::string>& env_overrides = {}) {
  cfg.validate();
  if (checkpoint_path.empty())
    throw ConfigError("reconstruct requires --checkpoint");
  auto ck = read_checkpoint(checkpoint_path);
  if (ck.info.mode != TrainMode::kPretrain)
    throw ConfigError(
        "reconstruct requires a pretrain checkpoint (this one is from "
        "fine-tuning and carries no decoder)");

  const auto manifest = detail::require_dataset(cfg, "reconstruct");
  const auto model = detail::checkpoint_model(ck, cfg);
  FrozenShapeCodec codec(model.shape_code_dim, model.codec_points,
                         model.codec_seed);

  ParameterStore store;
  Rng init_rng = Rng(cfg.seed).fork(0x4d4f44454cULL);
  SceneEncoder encoder(store, model, init_rng);
  SceneDecoder decoder(store, model, init_rng);
  apply_checkpoint(ck, store);

  auto test_split = detail::load_inputs(cfg.scene_dir, manifest.test,
                                        cfg.preprocess, model, codec);

  const auto dir = detail::ensure_output_dir(cfg);
  const auto recon_dir = dir / "reconstructed";
  std::filesystem::create_directories(recon_dir);

  PreservationReport total;
  total.preserved.assign(static_cast<std::size_t>(model.num_predicates), 0);
  total.checked.assign(static_cast<std::size_t>(model.num_predicates), 0);

  for (std::size_t s = 0; s < test_split.inputs.size(); ++s) {
    const auto& original = test_split.scenes[s];
    auto bottleneck = encoder.encode(test_split.inputs[s], false);
    auto decoded = decoder.decode(bottleneck, test_split.inputs[s], false);
    auto boxes = extract_box_predictions(decoded);
    std::vector<std::vector<double>> codes;
    codes.reserve(decoded.shape_codes->rows());
    for (std::size_t i = 0; i < decoded.shape_codes->rows(); ++i) {
      std::vector<double> code(decoded.shape_codes->cols());
      for (std::size_t c = 0; c < code.size(); ++c)
        code[c] = decoded.shape_codes->at(i, c);
      codes.push_back(std::move(code));
    }
    auto recon = assemble_scene(boxes, codes, codec, model.angle_bins);

    auto report = preservation_accuracy(original, recon);
    for (std::size_t p = 0; p < report.checked.size(); ++p) {
      total.preserved[p] += report.preserved[p];
      total.checked[p] += report.checked[p];
    }
    total.preserved_sum += report.preserved_sum;
    total.checked_sum += report.checked_sum;

    // Reconstructions are stored in the corpus format: original labels
    // and instance ids, predicted geometry, relabeled edges. Geometry is
    // quantized to the file precision before the edges are derived, so
    // the stored graph replays exactly from the stored boxes.
    Scene out = original;
    out.points.clear();
    out.point_instance.clear();
    for (std::size_t i = 0; i < recon.objects.size(); ++i) {
      OrientedBox box = recon.objects[i].box;
      box.center = {quantize9(box.center.x), quantize9(box.center.y),
                    quantize9(box.center.z)};
      box.extents = {quantize9(box.extents.x), quantize9(box.extents.y),
                     quantize9(box.extents.z)};
      box.yaw = quantize9(box.yaw);
      out.objects[i].box = box;
      for (const auto& p : recon.objects[i].points) {
        out.points.push_back(
            {quantize9(p.x), quantize9(p.y), quantize9(p.z)});
        out.point_instance.push_back(out.objects[i].instance_id);
      }
    }
    out.graph = out.has_labels ? derive_graph(out) : GroundTruthGraph{};
    save_scene((recon_dir / manifest.test[s]).string(), out);
  }

  save_preservation_report(total, (dir / "preservation.txt").string());
  detail::write_run_manifest(dir, "reconstruct", cfg, env_overrides);
  return total;
}

/// Merges metric files into one aligned table: a row per metric key and
/// a column per input file, blanks marking metrics a run did not emit.
inline std::string merge_metric_reports(const std::vector<std::string>& paths)
{
  if (paths.empty()) throw ConfigError("report needs at least one file");
  std::vector<MetricReport> reports;
  for (const auto& path : paths) {
    try {
      reports.push_back(load_metric_report(path));
    } catch (const DataError& e) {
      throw DataError("report: '" + path + "': " + e.what());
    }
  }

  // Row keys in first-seen order across inputs.
  std::vector<std::tuple<std::string, int, std::string>> keys;
  auto seen = [&](const MetricEntry& m) {
    for (const auto& [name, k, split] : keys)
      if (name == m.name && k == m.k && split == m.split) return true;
    return false;
  };
  for (const auto& report : reports)
    for (const auto& m : report.entries)
      if (!seen(m)) keys.emplace_back(m.name, m.k, m.split);

  std::ostringstream out;
  out << "SGTABLE v1\n";
  out << "columns " << paths.size();
  for (const auto& path : paths) out << ' ' << path;
  out << '\n';
  for (const auto& [name, k, split] : keys) {
    out << name << '@' << k << '/' << split;
    for (const auto& report : reports) {
      const auto* entry = report.find(name, k, split);
      if (!entry)
        out << " -";
      else if (!entry->defined)
        out << " undef";
      else
        out << ' ' << detail::fmt9(entry->value);
    }
    out << '\n';
  }
  out << "end\n";
  return out.str();
}

inline void cmd_report(const std::vector<std::string>& paths,
                       std::ostream& out) {
  out << merge_metric_reports(paths);
}

}  // namespace sgae
