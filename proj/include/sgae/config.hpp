#pragma once

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sgae/encoder.hpp"
#include "sgae/error.hpp"
#include "sgae/scene_gen.hpp"
#include "sgae/train.hpp"

namespace sgae {

inline constexpr const char* kCodeVersion = "sgae 1.0";

/// Everything a run needs, gathered from one flat text file. Field
/// defaults are the reference hyperparameters; a config file only needs
/// to list the keys it changes.
struct ExperimentConfig {
  // Dataset: either an existing directory of scene files with a
  // manifest, or generator parameters for `gen-data` to produce one.
  std::string scene_dir;
  int num_scenes = 512;
  double train_fraction = 0.70;
  double val_fraction = 0.15;  // test split takes the remainder
  GeneratorConfig generator;

  ModelConfig model;
  PreprocessConfig preprocess;

  LossWeights weights;
  OptimizerConfig optimizer;
  AblationFlags ablation;

  int pretrain_epochs = 35;
  int finetune_epochs = 20;
  int batch_size = 4;
  double label_fraction = 1.0;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string output_dir = "out";

  void validate() const {
    model.validate();
    preprocess.validate();
    ablation.validate();
    if (num_scenes < 3)
      throw ConfigError("config: num_scenes must be at least 3");
    if (train_fraction <= 0.0 || val_fraction <= 0.0 ||
        train_fraction + val_fraction >= 1.0)
      throw ConfigError("config: split fractions must be positive and sum "
                        "below 1");
    if (pretrain_epochs < 0 || finetune_epochs < 0)
      throw ConfigError("config: epoch counts must be non-negative");
    if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
    if (!(label_fraction > 0.0) || label_fraction > 1.0)
      throw ConfigError("config: label_fraction must lie in (0, 1]");
    if (threads < 1) throw ConfigError("config: threads must be >= 1");
    if (output_dir.empty()) throw ConfigError("config: output_dir is empty");
    if (weights.box < 0 || weights.angle < 0 || weights.shape < 0 ||
        weights.node < 0 || weights.edge < 0)
      throw ConfigError("config: loss weights must be non-negative");
    if (optimizer.learning_rate <= 0.0)
      throw ConfigError("config: learning_rate must be positive");
  }
};

namespace detail {

/// One mutable view per config key: how to print it and how to parse it.
struct ConfigField {
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline double parse_double(const std::string& key, const std::string& raw) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(raw, &used);
  } catch (const std::exception&) {
    throw ConfigError("config: bad numeric value for '" + key + "'");
  }
  if (used != raw.size())
    throw ConfigError("config: bad numeric value for '" + key + "'");
  return v;
}

inline long long parse_int(const std::string& key, const std::string& raw) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(raw, &used);
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer value for '" + key + "'");
  }
  if (used != raw.size())
    throw ConfigError("config: bad integer value for '" + key + "'");
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& raw) {
  if (raw == "0" || raw == "false") return false;
  if (raw == "1" || raw == "true") return true;
  throw ConfigError("config: bad boolean value for '" + key + "'");
}

inline std::uint64_t parse_u64(const std::string& key,
                               const std::string& raw) {
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(raw, &used);
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer value for '" + key + "'");
  }
  if (used != raw.size())
    throw ConfigError("config: bad integer value for '" + key + "'");
  return v;
}

#define SGAE_FIELD_INT(KEY, REF)                                         \
  ConfigField{KEY,                                                       \
              [](const ExperimentConfig& c) {                            \
                return std::to_string(c.REF);                            \
              },                                                         \
              [](ExperimentConfig& c, const std::string& v) {            \
                c.REF = static_cast<int>(parse_int(KEY, v));             \
              }}

#define SGAE_FIELD_DOUBLE(KEY, REF)                                      \
  ConfigField{KEY,                                                       \
              [](const ExperimentConfig& c) {                            \
                return format_double(c.REF);                             \
              },                                                         \
              [](ExperimentConfig& c, const std::string& v) {            \
                c.REF = parse_double(KEY, v);                            \
              }}

#define SGAE_FIELD_BOOL(KEY, REF)                                        \
  ConfigField{KEY,                                                       \
              [](const ExperimentConfig& c) {                            \
                return std::string(c.REF ? "1" : "0");                   \
              },                                                         \
              [](ExperimentConfig& c, const std::string& v) {            \
                c.REF = parse_bool(KEY, v);                              \
              }}

#define SGAE_FIELD_U64(KEY, REF)                                         \
  ConfigField{KEY,                                                       \
              [](const ExperimentConfig& c) {                            \
                return std::to_string(c.REF);                            \
              },                                                         \
              [](ExperimentConfig& c, const std::string& v) {            \
                c.REF = parse_u64(KEY, v);                               \
              }}

#define SGAE_FIELD_STRING(KEY, REF)                                      \
  ConfigField{KEY,                                                       \
              [](const ExperimentConfig& c) { return c.REF; },           \
              [](ExperimentConfig& c, const std::string& v) {            \
                c.REF = v;                                               \
              }}

inline const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = {
      SGAE_FIELD_STRING("scene_dir", scene_dir),
      SGAE_FIELD_INT("num_scenes", num_scenes),
      SGAE_FIELD_DOUBLE("train_fraction", train_fraction),
      SGAE_FIELD_DOUBLE("val_fraction", val_fraction),
      SGAE_FIELD_INT("min_objects", generator.min_objects),
      SGAE_FIELD_INT("max_objects", generator.max_objects),
      SGAE_FIELD_INT("points_per_object", generator.points_per_object),
      SGAE_FIELD_INT("floor_points", generator.floor_points),
      SGAE_FIELD_DOUBLE("room_extent", generator.room_extent),
      SGAE_FIELD_DOUBLE("jitter_sigma", generator.jitter_sigma),
      SGAE_FIELD_INT("num_classes", model.num_classes),
      SGAE_FIELD_INT("num_predicates", model.num_predicates),
      SGAE_FIELD_INT("feature_dim", model.feature_dim),
      SGAE_FIELD_INT("box_feature_dim", model.box_feature_dim),
      SGAE_FIELD_INT("encoder_layers", model.encoder_layers),
      SGAE_FIELD_INT("decoder_layers", model.decoder_layers),
      SGAE_FIELD_INT("angle_bins", model.angle_bins),
      SGAE_FIELD_INT("shape_code_dim", model.shape_code_dim),
      SGAE_FIELD_INT("codec_points", model.codec_points),
      SGAE_FIELD_U64("codec_seed", model.codec_seed),
      SGAE_FIELD_INT("fps_object_points", preprocess.fps_object_points),
      SGAE_FIELD_INT("fps_pair_points", preprocess.fps_pair_points),
      SGAE_FIELD_DOUBLE("box_weight", weights.box),
      SGAE_FIELD_DOUBLE("angle_weight", weights.angle),
      SGAE_FIELD_DOUBLE("shape_weight", weights.shape),
      SGAE_FIELD_DOUBLE("node_weight", weights.node),
      SGAE_FIELD_DOUBLE("edge_weight", weights.edge),
      SGAE_FIELD_DOUBLE("focal_alpha", weights.focal_alpha),
      SGAE_FIELD_DOUBLE("focal_gamma", weights.focal_gamma),
      SGAE_FIELD_DOUBLE("learning_rate", optimizer.learning_rate),
      SGAE_FIELD_DOUBLE("beta1", optimizer.beta1),
      SGAE_FIELD_DOUBLE("beta2", optimizer.beta2),
      SGAE_FIELD_DOUBLE("adam_eps", optimizer.eps),
      SGAE_FIELD_INT("plateau_patience", optimizer.plateau_patience),
      SGAE_FIELD_DOUBLE("plateau_factor", optimizer.plateau_factor),
      SGAE_FIELD_BOOL("no_gcn", ablation.no_gcn),
      SGAE_FIELD_BOOL("no_skip", ablation.no_skip),
      SGAE_FIELD_BOOL("shape_loss_only", ablation.shape_loss_only),
      SGAE_FIELD_BOOL("box_loss_only", ablation.box_loss_only),
      SGAE_FIELD_BOOL("no_pretrain", ablation.no_pretrain),
      SGAE_FIELD_INT("pretrain_epochs", pretrain_epochs),
      SGAE_FIELD_INT("finetune_epochs", finetune_epochs),
      SGAE_FIELD_INT("batch_size", batch_size),
      SGAE_FIELD_DOUBLE("label_fraction", label_fraction),
      SGAE_FIELD_U64("seed", seed),
      SGAE_FIELD_INT("threads", threads),
      SGAE_FIELD_STRING("output_dir", output_dir),
  };
  return fields;
}

#undef SGAE_FIELD_INT
#undef SGAE_FIELD_DOUBLE
#undef SGAE_FIELD_BOOL
#undef SGAE_FIELD_U64
#undef SGAE_FIELD_STRING

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Canonical text form: fixed key order, one `key value` pair per line.
inline void write_config(std::ostream& out, const ExperimentConfig& cfg) {
  out << "SGCONFIG v1\n";
  for (const auto& field : detail::config_fields())
    out << field.key << ' ' << field.get(cfg) << '\n';
}

inline std::string config_text(const ExperimentConfig& cfg) {
  std::ostringstream os;
  write_config(os, cfg);
  return os.str();
}

/// Parses an SGCONFIG v1 stream over the defaults. Blank lines and lines
/// starting with '#' are skipped; unknown or repeated keys are rejected.
inline ExperimentConfig read_config(std::istream& in) {
  ExperimentConfig cfg;
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != "SGCONFIG v1")
    throw ConfigError("config: expected an 'SGCONFIG v1' header");

  std::map<std::string, const detail::ConfigField*> by_key;
  for (const auto& field : detail::config_fields())
    by_key[field.key] = &field;

  std::map<std::string, bool> seen;
  while (std::getline(in, line)) {
    const auto text = detail::trim(line);
    if (text.empty() || text[0] == '#') continue;
    const auto space = text.find(' ');
    const auto key = space == std::string::npos ? text : text.substr(0, space);
    const auto value =
        space == std::string::npos ? "" : detail::trim(text.substr(space + 1));
    auto it = by_key.find(key);
    if (it == by_key.end())
      throw ConfigError("config: unknown key '" + key + "'");
    if (seen[key]) throw ConfigError("config: repeated key '" + key + "'");
    seen[key] = true;
    it->second->set(cfg, value);
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  return read_config(in);
}

inline void save_config(const std::string& path, const ExperimentConfig& cfg) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("config: cannot write '" + path + "'");
  write_config(out, cfg);
}

/// FNV-1a over the canonical text form, for run manifests.
inline std::uint64_t config_hash(const ExperimentConfig& cfg) {
  const auto text = config_text(cfg);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// Environment may override output placement and parallelism, nothing
/// else. Returns the list of applied overrides for the run log.
inline std::vector<std::string> apply_env_overrides(ExperimentConfig& cfg) {
  std::vector<std::string> applied;
  if (const char* dir = std::getenv("SGAE_OUTPUT_DIR"); dir && *dir) {
    cfg.output_dir = dir;
    applied.push_back("output_dir");
  }
  if (const char* threads = std::getenv("SGAE_THREADS"); threads && *threads) {
    cfg.threads =
        static_cast<int>(detail::parse_int("SGAE_THREADS", threads));
    applied.push_back("threads");
  }
  return applied;
}

}  // namespace sgae
