#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sgae/config.hpp"
#include "sgae/rng.hpp"
#include "sgae/scene_gen.hpp"
#include "sgae/scene_io.hpp"

namespace sgae {

/// Which scene files belong to which split. File names are relative to
/// the corpus directory; the seed is recorded for provenance.
struct DatasetManifest {
  std::uint64_t seed = 0;
  std::vector<std::string> train, val, test;

  std::size_t size() const { return train.size() + val.size() + test.size(); }
};

inline void write_manifest(std::ostream& out, const DatasetManifest& m) {
  out << "SGMANIFEST v1\n";
  out << "seed " << m.seed << '\n';
  auto write_split = [&](const char* name,
                         const std::vector<std::string>& files) {
    out << name << ' ' << files.size() << '\n';
    for (const auto& file : files) out << "scene " << file << '\n';
  };
  write_split("train", m.train);
  write_split("val", m.val);
  write_split("test", m.test);
  out << "end\n";
}

inline DatasetManifest read_manifest(std::istream& in) {
  detail::LineReader r(in, "manifest");
  auto header = r.next("SGMANIFEST");
  if (r.value<std::string>(header, "format version") != "v1")
    throw DataError("manifest: unsupported version");
  DatasetManifest m;
  auto seed_line = r.next("seed");
  m.seed = r.value<std::uint64_t>(seed_line, "seed");
  for (auto* files : {&m.train, &m.val, &m.test}) {
    const char* key = files == &m.train ? "train"
                      : files == &m.val ? "val"
                                        : "test";
    auto count_line = r.next(key);
    const auto count = r.value<std::size_t>(count_line, "split size");
    for (std::size_t i = 0; i < count; ++i) {
      auto scene_line = r.next("scene");
      files->push_back(r.value<std::string>(scene_line, "scene file"));
    }
  }
  r.next("end");
  return m;
}

inline void save_manifest(const std::string& path, const DatasetManifest& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("manifest: cannot write '" + path + "'");
  write_manifest(out, m);
}

inline DatasetManifest load_manifest(const std::string& dir) {
  const auto path = (std::filesystem::path(dir) / "manifest.txt").string();
  std::ifstream in(path);
  if (!in) throw DataError("manifest: cannot open '" + path + "'");
  return read_manifest(in);
}

namespace detail {

inline std::string scene_file_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%05zu.txt", index);
  return buf;
}

}  // namespace detail

/// Shuffles scene indices with the corpus seed and cuts train/val/test
/// by the configured fractions, keeping at least one scene per split.
inline DatasetManifest split_corpus(std::size_t num_scenes,
                                    double train_fraction,
                                    double val_fraction, std::uint64_t seed) {
  if (num_scenes < 3)
    throw ConfigError("dataset: need at least 3 scenes to split");
  if (train_fraction <= 0.0 || val_fraction <= 0.0 ||
      train_fraction + val_fraction >= 1.0)
    throw ConfigError("dataset: bad split fractions");

  std::vector<std::size_t> order(num_scenes);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng = Rng(seed).fork(0x53504c4954);  // split stream
  rng.shuffle(order);

  const auto n = static_cast<double>(num_scenes);
  auto clamp = [&](double want) {
    auto v = static_cast<std::size_t>(std::llround(want));
    return std::min(std::max<std::size_t>(v, 1), num_scenes - 2);
  };
  std::size_t n_train = clamp(train_fraction * n);
  std::size_t n_val = clamp(val_fraction * n);
  if (n_train + n_val >= num_scenes) n_train = num_scenes - n_val - 1;

  DatasetManifest m;
  m.seed = seed;
  for (std::size_t i = 0; i < num_scenes; ++i) {
    const auto file = detail::scene_file_name(order[i]);
    if (i < n_train)
      m.train.push_back(file);
    else if (i < n_train + n_val)
      m.val.push_back(file);
    else
      m.test.push_back(file);
  }
  for (auto* files : {&m.train, &m.val, &m.test})
    std::sort(files->begin(), files->end());
  return m;
}

/// Generates the corpus into `dir` and writes its manifest. Refuses a
/// non-empty directory unless `force` is set. Each scene draws from its
/// own forked stream, so the corpus is reproducible file-by-file.
inline DatasetManifest generate_corpus(const ExperimentConfig& cfg,
                                       bool force = false) {
  namespace fs = std::filesystem;
  const fs::path dir = cfg.scene_dir.empty()
                           ? fs::path(cfg.output_dir) / "scenes"
                           : fs::path(cfg.scene_dir);
  if (fs::exists(dir) && !fs::is_empty(dir) && !force)
    throw DataError("dataset: directory '" + dir.string() +
                    "' is not empty (use --force to overwrite)");
  fs::create_directories(dir);

  const Rng root(cfg.seed);
  for (int i = 0; i < cfg.num_scenes; ++i) {
    Scene scene;
    // A placement can exhaust its retry budget on unlucky draws; give
    // each scene a few independent streams before giving up.
    const int attempts = 16;
    for (int attempt = 0;; ++attempt) {
      Rng rng = root.fork(static_cast<std::uint64_t>(i) * attempts +
                          static_cast<std::uint64_t>(attempt));
      try {
        scene = generate_scene(cfg.generator, rng);
        break;
      } catch (const DataError&) {
        if (attempt + 1 >= attempts) throw;
      }
    }
    const auto path =
        dir / detail::scene_file_name(static_cast<std::size_t>(i));
    save_scene(path.string(), scene);
  }

  auto manifest = split_corpus(static_cast<std::size_t>(cfg.num_scenes),
                               cfg.train_fraction, cfg.val_fraction, cfg.seed);
  save_manifest((dir / "manifest.txt").string(), manifest);
  return manifest;
}

inline std::vector<Scene> load_split(const std::string& dir,
                                     const std::vector<std::string>& files) {
  std::vector<Scene> scenes;
  scenes.reserve(files.size());
  for (const auto& file : files)
    scenes.push_back(
        load_scene((std::filesystem::path(dir) / file).string()));
  return scenes;
}

}  // namespace sgae
