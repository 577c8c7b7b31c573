#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sgae/commands.hpp"
#include "sgae/config.hpp"
#include "sgae/dataset.hpp"
#include "support/tempdir.hpp"

using namespace sgae;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// Small-but-real experiment: full pipeline in well under a second.
ExperimentConfig tiny_config(const std::string& scene_dir,
                             const std::string& out_dir) {
  ExperimentConfig cfg;
  cfg.scene_dir = scene_dir;
  cfg.output_dir = out_dir;
  cfg.num_scenes = 12;
  cfg.generator.min_objects = 3;
  cfg.generator.max_objects = 4;
  cfg.generator.points_per_object = 64;
  cfg.generator.floor_points = 32;
  cfg.model.feature_dim = 16;
  cfg.model.box_feature_dim = 8;
  cfg.model.encoder_layers = 1;
  cfg.model.decoder_layers = 1;
  cfg.model.angle_bins = 8;
  cfg.model.shape_code_dim = 16;
  cfg.model.codec_points = 32;
  cfg.preprocess.fps_object_points = 16;
  cfg.preprocess.fps_pair_points = 24;
  cfg.pretrain_epochs = 2;
  cfg.finetune_epochs = 2;
  cfg.batch_size = 4;
  cfg.seed = 7;
  return cfg;
}

}  // namespace

TEST_CASE("experiment config files") {
  SECTION("defaults carry the reference hyperparameters") {
    ExperimentConfig cfg;
    REQUIRE(cfg.weights.box == 0.4);
    REQUIRE(cfg.weights.angle == 0.2);
    REQUIRE(cfg.weights.shape == 0.4);
    REQUIRE(cfg.weights.node == 0.1);
    REQUIRE(cfg.weights.edge == 1.0);
    REQUIRE(cfg.weights.focal_alpha == 0.25);
    REQUIRE(cfg.weights.focal_gamma == 2.0);
    REQUIRE(cfg.optimizer.learning_rate == 1e-4);
    REQUIRE(cfg.batch_size == 4);
    REQUIRE(cfg.model.encoder_layers == 4);
    REQUIRE(cfg.model.decoder_layers == 3);
    REQUIRE(cfg.model.feature_dim == 256);
    REQUIRE(cfg.model.angle_bins == 24);
    REQUIRE(cfg.threads == 1);
    REQUIRE_NOTHROW(cfg.validate());
  }

  SECTION("the canonical text form round trips") {
    ExperimentConfig cfg = tiny_config("scenes", "out");
    cfg.weights.focal_gamma = 1.5;
    cfg.ablation.no_skip = true;
    cfg.label_fraction = 0.05;
    std::istringstream in(config_text(cfg));
    auto back = read_config(in);
    REQUIRE(config_text(back) == config_text(cfg));
    REQUIRE(config_hash(back) == config_hash(cfg));
  }

  SECTION("a partial file only changes the listed keys") {
    std::istringstream in(
        "SGCONFIG v1\n"
        "# comment lines and blanks are fine\n"
        "\n"
        "feature_dim 32\n"
        "no_gcn 1\n"
        "output_dir /tmp/x\n");
    auto cfg = read_config(in);
    REQUIRE(cfg.model.feature_dim == 32);
    REQUIRE(cfg.ablation.no_gcn);
    REQUIRE(cfg.output_dir == "/tmp/x");
    REQUIRE(cfg.model.encoder_layers == 4);  // untouched default
  }

  SECTION("unknown, repeated and malformed keys are rejected") {
    auto parse = [](const std::string& body) {
      std::istringstream in("SGCONFIG v1\n" + body);
      return read_config(in);
    };
    REQUIRE_THROWS_AS(parse("not_a_key 3\n"), ConfigError);
    REQUIRE_THROWS_AS(parse("seed 1\nseed 2\n"), ConfigError);
    REQUIRE_THROWS_AS(parse("feature_dim fast\n"), ConfigError);
    REQUIRE_THROWS_AS(parse("no_gcn maybe\n"), ConfigError);
    REQUIRE_THROWS_AS(parse("learning_rate 1e-4x\n"), ConfigError);
    std::istringstream bad_header("CONFIG v1\nseed 3\n");
    REQUIRE_THROWS_AS(read_config(bad_header), ConfigError);
  }

  SECTION("validation catches bad combinations") {
    ExperimentConfig cfg;
    cfg.label_fraction = 0.0;
    REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
    cfg = ExperimentConfig{};
    cfg.train_fraction = 0.9;
    cfg.val_fraction = 0.2;
    REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
    cfg = ExperimentConfig{};
    cfg.ablation.shape_loss_only = true;
    cfg.ablation.box_loss_only = true;
    REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
  }

  SECTION("environment overrides touch only output paths and threads") {
    ExperimentConfig cfg = tiny_config("scenes", "out");
    const auto before = config_text(cfg);
    ::setenv("SGAE_OUTPUT_DIR", "/tmp/env_out", 1);
    ::setenv("SGAE_THREADS", "3", 1);
    auto applied = apply_env_overrides(cfg);
    ::unsetenv("SGAE_OUTPUT_DIR");
    ::unsetenv("SGAE_THREADS");
    REQUIRE(applied == std::vector<std::string>{"output_dir", "threads"});
    REQUIRE(cfg.output_dir == "/tmp/env_out");
    REQUIRE(cfg.threads == 3);
    cfg.output_dir = "out";
    cfg.threads = 1;
    REQUIRE(config_text(cfg) == before);  // nothing else changed

    ExperimentConfig untouched = tiny_config("scenes", "out");
    REQUIRE(apply_env_overrides(untouched).empty());
  }
}

TEST_CASE("corpus splitting") {
  SECTION("100 scenes cut 70/15/15 by default") {
    auto m = split_corpus(100, 0.70, 0.15, 42);
    REQUIRE(m.train.size() == 70);
    REQUIRE(m.val.size() == 15);
    REQUIRE(m.test.size() == 15);
  }

  SECTION("every scene lands in exactly one split") {
    Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
      const auto n = 3 + rng.below(40);
      auto m = split_corpus(n, 0.7, 0.15, rng.next_u64());
      std::vector<std::string> all;
      for (const auto* files : {&m.train, &m.val, &m.test})
        all.insert(all.end(), files->begin(), files->end());
      REQUIRE(all.size() == n);
      std::sort(all.begin(), all.end());
      REQUIRE(std::adjacent_find(all.begin(), all.end()) == all.end());
      REQUIRE(!m.train.empty());
      REQUIRE(!m.val.empty());
      REQUIRE(!m.test.empty());
    }
  }

  SECTION("identical seeds reproduce the manifest") {
    auto a = split_corpus(37, 0.7, 0.15, 99);
    auto b = split_corpus(37, 0.7, 0.15, 99);
    REQUIRE(a.train == b.train);
    REQUIRE(a.val == b.val);
    REQUIRE(a.test == b.test);
    auto c = split_corpus(37, 0.7, 0.15, 100);
    REQUIRE(a.train != c.train);
  }

  SECTION("manifest files round trip") {
    auto m = split_corpus(10, 0.7, 0.15, 3);
    std::ostringstream os;
    write_manifest(os, m);
    std::istringstream is(os.str());
    auto back = read_manifest(is);
    REQUIRE(back.seed == m.seed);
    REQUIRE(back.train == m.train);
    REQUIRE(back.val == m.val);
    REQUIRE(back.test == m.test);

    std::istringstream truncated(os.str().substr(0, os.str().size() / 2));
    REQUIRE_THROWS_AS(read_manifest(truncated), DataError);
  }
}

TEST_CASE("dataset generation command") {
  gradtest::TempDir tmp("gen");
  auto cfg = tiny_config((tmp.path() / "scenes").string(),
                         (tmp.path() / "out").string());

  cmd_gen_data(cfg, false);

  SECTION("scenes, manifest and run record are written and parse") {
    auto manifest = load_manifest(cfg.scene_dir);
    REQUIRE(manifest.size() == 12);
    auto scenes = load_split(cfg.scene_dir, manifest.train);
    for (const auto& scene : scenes) {
      REQUIRE(scene.has_labels);
      REQUIRE(scene.objects.size() >= 3);
    }
    const auto run = slurp(fs::path(cfg.scene_dir) / "run.txt");
    REQUIRE(run.find("SGRUN v1") == 0);
    REQUIRE(run.find("command gen-data") != std::string::npos);
    REQUIRE(run.find("config_hash " + std::to_string(config_hash(cfg))) !=
            std::string::npos);
  }

  SECTION("a non-empty target needs --force") {
    REQUIRE_THROWS_AS(cmd_gen_data(cfg, false), DataError);
    REQUIRE_NOTHROW(cmd_gen_data(cfg, true));
  }

  SECTION("regeneration with the same seed is byte-identical") {
    const auto first = slurp(fs::path(cfg.scene_dir) / "scene_00003.txt");
    const auto manifest_first = slurp(fs::path(cfg.scene_dir) /
                                      "manifest.txt");
    cmd_gen_data(cfg, true);
    REQUIRE(slurp(fs::path(cfg.scene_dir) / "scene_00003.txt") == first);
    REQUIRE(slurp(fs::path(cfg.scene_dir) / "manifest.txt") ==
            manifest_first);
  }
}

TEST_CASE("training commands") {
  gradtest::TempDir tmp("train");
  auto cfg = tiny_config((tmp.path() / "scenes").string(),
                         (tmp.path() / "pre").string());
  cmd_gen_data(cfg, false);

  SECTION("pretraining emits checkpoints, curves and the run record") {
    auto result = cmd_pretrain(cfg);
    REQUIRE(result.epochs_run == 2);
    const fs::path dir(cfg.output_dir);
    for (const char* name :
         {"initial.sgck", "checkpoint.sgck", "best.sgck", "loss_curves.csv",
          "run.txt"})
      REQUIRE(fs::exists(dir / name));

    auto ck = read_checkpoint((dir / "checkpoint.sgck").string());
    REQUIRE(ck.info.mode == TrainMode::kPretrain);
    REQUIRE(ck.info.epoch == 2);
    REQUIRE(read_checkpoint((dir / "initial.sgck").string()).info.epoch == 0);

    // Header plus epoch-0 val rows plus per-epoch train and val rows,
    // four components each (bbox, angle, shape, total).
    const auto curves = slurp(dir / "loss_curves.csv");
    REQUIRE(curves.find("epoch,split,component,value\n") == 0);
    REQUIRE(std::count(curves.begin(), curves.end(), '\n') == 1 + 4 + 8 * 2);
  }

  SECTION("identical config and seed reproduce checkpoint bytes") {
    cmd_pretrain(cfg);
    const auto first = slurp(fs::path(cfg.output_dir) / "checkpoint.sgck");
    const auto curves = slurp(fs::path(cfg.output_dir) / "loss_curves.csv");
    auto cfg_b = cfg;
    cfg_b.output_dir = (tmp.path() / "pre_b").string();
    cmd_pretrain(cfg_b);
    REQUIRE(slurp(fs::path(cfg_b.output_dir) / "checkpoint.sgck") == first);
    REQUIRE(slurp(fs::path(cfg_b.output_dir) / "loss_curves.csv") == curves);
  }

  SECTION("the pretrain command rejects --no-pretrain") {
    auto bad = cfg;
    bad.ablation.no_pretrain = true;
    REQUIRE_THROWS_AS(cmd_pretrain(bad), ConfigError);
  }

  SECTION("divergence aborts with a numeric failure, snapshot intact") {
    auto bad = cfg;
    bad.optimizer.learning_rate = 1e155;
    bad.pretrain_epochs = 5;
    REQUIRE_THROWS_AS(cmd_pretrain(bad), NumericError);
    auto initial =
        read_checkpoint((fs::path(bad.output_dir) / "initial.sgck").string());
    for (const auto& tensor : initial.tensors)
      for (double v : tensor.values) REQUIRE(std::isfinite(v));
  }

  SECTION("fine-tuning requires an explicit starting point") {
    REQUIRE_THROWS_AS(cmd_finetune(cfg, ""), ConfigError);
    auto scratch = cfg;
    scratch.ablation.no_pretrain = true;
    REQUIRE_THROWS_AS(cmd_finetune(scratch, "some.sgck"), ConfigError);
  }

  SECTION("fine-tuning from a pretrained checkpoint emits metrics") {
    cmd_pretrain(cfg);
    auto fine = cfg;
    fine.output_dir = (tmp.path() / "fine").string();
    fine.label_fraction = 0.5;
    auto result = cmd_finetune(
        fine, (fs::path(cfg.output_dir) / "checkpoint.sgck").string());
    REQUIRE(result.epochs_run == 2);

    const fs::path dir(fine.output_dir);
    auto metrics = load_metric_report((dir / "metrics.txt").string());
    REQUIRE(metrics.scene_count == 2);
    REQUIRE(metrics.find("object_recall", 1, "all") != nullptr);
    REQUIRE(metrics.find("predicate_mean_recall", 2, "tail") != nullptr);
    REQUIRE(metrics.find("relationship_recall", 5, "all") != nullptr);

    auto ck = read_checkpoint((dir / "checkpoint.sgck").string());
    REQUIRE(ck.info.mode == TrainMode::kFinetune);
    for (const auto& tensor : ck.tensors)
      REQUIRE(tensor.name.rfind("dec.", 0) != 0);

    SECTION("eval of the final checkpoint reproduces those metrics") {
      auto ev = fine;
      ev.output_dir = (tmp.path() / "ev").string();
      cmd_eval(ev, (dir / "checkpoint.sgck").string());
      REQUIRE(slurp(fs::path(ev.output_dir) / "metrics.txt") ==
              slurp(dir / "metrics.txt"));
    }
  }

  SECTION("from-scratch fine-tuning runs without a checkpoint") {
    auto scratch = cfg;
    scratch.output_dir = (tmp.path() / "scratch").string();
    scratch.ablation.no_pretrain = true;
    auto result = cmd_finetune(scratch, "");
    REQUIRE(result.epochs_run == 2);
    REQUIRE(fs::exists(fs::path(scratch.output_dir) / "metrics.txt"));
  }

  SECTION("architecture mismatches are refused up front") {
    cmd_pretrain(cfg);
    auto other = cfg;
    other.output_dir = (tmp.path() / "mismatch").string();
    other.model.feature_dim = 32;
    REQUIRE_THROWS_AS(
        cmd_finetune(other,
                     (fs::path(cfg.output_dir) / "checkpoint.sgck").string()),
        ConfigError);
  }
}

TEST_CASE("reconstruction command") {
  gradtest::TempDir tmp("recon");
  auto cfg = tiny_config((tmp.path() / "scenes").string(),
                         (tmp.path() / "pre").string());
  cmd_gen_data(cfg, false);
  cmd_pretrain(cfg);
  const auto pre_ck = (fs::path(cfg.output_dir) / "checkpoint.sgck").string();

  SECTION("emits parseable scene files and a preservation report") {
    auto rec = cfg;
    rec.output_dir = (tmp.path() / "rec").string();
    auto report = cmd_reconstruct(rec, pre_ck);
    REQUIRE(report.checked_sum > 0);

    const auto manifest = load_manifest(cfg.scene_dir);
    for (const auto& file : manifest.test) {
      auto scene = load_scene(
          (fs::path(rec.output_dir) / "reconstructed" / file).string());
      REQUIRE(scene.has_labels);
      // Stored edges describe the predicted geometry, not the original.
      auto derived = derive_graph(scene).edges;
      REQUIRE(scene.graph.edges.size() == derived.size());
      for (std::size_t e = 0; e < derived.size(); ++e) {
        REQUIRE(scene.graph.edges[e].src == derived[e].src);
        REQUIRE(scene.graph.edges[e].dst == derived[e].dst);
        REQUIRE(scene.graph.edges[e].predicates == derived[e].predicates);
      }
    }
  }

  SECTION("refuses a fine-tuned checkpoint") {
    auto fine = cfg;
    fine.output_dir = (tmp.path() / "fine").string();
    cmd_finetune(fine, pre_ck);
    auto rec = cfg;
    rec.output_dir = (tmp.path() / "rec2").string();
    REQUIRE_THROWS_AS(
        cmd_reconstruct(
            rec, (fs::path(fine.output_dir) / "checkpoint.sgck").string()),
        ConfigError);
  }

  SECTION("an eval checkpoint is required at all") {
    REQUIRE_THROWS_AS(cmd_reconstruct(cfg, ""), ConfigError);
    REQUIRE_THROWS_AS(cmd_eval(cfg, ""), ConfigError);
  }
}

TEST_CASE("report merging") {
  gradtest::TempDir tmp("report");

  MetricReport a;
  a.scene_count = 2;
  detail::append_metric(a, "object_recall", 1, "all", 0.5, 4);
  detail::append_metric(a, "object_recall", 3, "all", 0.75, 4);
  save_metric_report(a, tmp.file("a.txt"));

  MetricReport b;
  b.scene_count = 3;
  detail::append_metric(b, "object_recall", 1, "all", 0.25, 8);
  detail::append_metric(b, "predicate_recall", 1, "all", std::nullopt, 0);
  save_metric_report(b, tmp.file("b.txt"));

  SECTION("a single input echoes its own metrics") {
    auto table = merge_metric_reports({tmp.file("a.txt")});
    REQUIRE(table.find("SGTABLE v1") == 0);
    REQUIRE(table.find("object_recall@1/all 0.5") != std::string::npos);
    REQUIRE(table.find("object_recall@3/all 0.75") != std::string::npos);
  }

  SECTION("two runs align by metric key with explicit blanks") {
    auto table = merge_metric_reports({tmp.file("a.txt"), tmp.file("b.txt")});
    REQUIRE(table.find("object_recall@1/all 0.5 0.25") != std::string::npos);
    REQUIRE(table.find("object_recall@3/all 0.75 -") != std::string::npos);
    REQUIRE(table.find("predicate_recall@1/all - undef") !=
            std::string::npos);
  }

  SECTION("schema mismatches name the offending file") {
    std::ofstream bad(tmp.file("bad.txt"));
    bad << "SGMETRICS v9\nscenes 1\nmetrics 0\nend\n";
    bad.close();
    try {
      merge_metric_reports({tmp.file("a.txt"), tmp.file("bad.txt")});
      FAIL("expected a DataError");
    } catch (const DataError& e) {
      REQUIRE(std::string(e.what()).find("bad.txt") != std::string::npos);
    }
    REQUIRE_THROWS_AS(merge_metric_reports({}), ConfigError);
  }
}

TEST_CASE("command-line binary") {
  gradtest::TempDir tmp("binary");
  const std::string bin = SGAE_CLI_BINARY;
  auto run = [&](const std::string& args) {
    const auto cmd = bin + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
  };

  auto cfg = tiny_config((tmp.path() / "scenes").string(),
                         (tmp.path() / "out").string());
  save_config(tmp.file("cfg.txt"), cfg);

  REQUIRE(run("gen-data --config " + tmp.file("cfg.txt")) == 0);
  REQUIRE(run("gen-data --config " + tmp.file("cfg.txt")) == 3);
  REQUIRE(run("pretrain --config " + tmp.file("cfg.txt")) == 0);
  REQUIRE(fs::exists(tmp.path() / "out" / "checkpoint.sgck"));
  REQUIRE(run("finetune --config " + tmp.file("cfg.txt")) == 2);
  REQUIRE(run("pretrain --config " + tmp.file("missing.txt")) == 2);
  REQUIRE(run("--bogus-flag") == 2);
  REQUIRE(run("") == 2);
}
