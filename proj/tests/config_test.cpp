#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fskws/config.hpp"

using namespace fskws;
namespace fs = std::filesystem;

TEST_CASE("defaults round trip through json") {
  RunConfig cfg;
  const std::string text = run_config_to_json_text(cfg);
  RunConfig back = run_config_from_json_text(text);
  CHECK(back.seed == cfg.seed);
  CHECK(back.dsp.n_mfcc == 40);
  CHECK(back.buffer.m_buffer == 32768);
  CHECK(back.train.total_steps == 300000);
  CHECK(back.train.lr == 0.001);
  CHECK(back.augment.apply_prob == 0.9);
  CHECK(back.oracle.l_min == 10);
  CHECK(back.oracle.l_max == 20);
  CHECK(back.eval.n_targets == 10);
  CHECK(back.eval.n_unknown == 20);
  CHECK(back.eval.k_shots == std::vector<int>{1, 5, 20});
  CHECK(back.eval.n_trials == 100);
  CHECK(run_config_to_json_text(back) == text);
}

TEST_CASE("unknown keys are rejected with their path") {
  CHECK_THROWS_WITH_AS(run_config_from_json_text(R"({"sead": 1})"),
                       doctest::Contains("sead"), ConfigError);
  CHECK_THROWS_WITH_AS(run_config_from_json_text(R"({"dsp": {"n_mfc": 40}})"),
                       doctest::Contains("dsp.n_mfc"), ConfigError);
  CHECK_THROWS_WITH_AS(run_config_from_json_text(R"({"train": {"steps": 1}})"),
                       doctest::Contains("train.steps"), ConfigError);
}

TEST_CASE("partial configs keep defaults elsewhere") {
  RunConfig cfg = run_config_from_json_text(R"({"train": {"n_way": 16}, "buffer": {"n_way": 16}})");
  CHECK(cfg.train.n_way == 16);
  CHECK(cfg.train.lr == 0.001);
  CHECK(cfg.buffer.m_buffer == 32768);
}

TEST_CASE("cross-section consistency is validated") {
  RunConfig cfg;
  cfg.train.k_shots = 7;  // buffer still 5
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("k_shots"), ConfigError);
  cfg = RunConfig{};
  cfg.encoder.input_dim = 32;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("input_dim"), ConfigError);
  cfg = RunConfig{};
  cfg.eval.dataset_layout = "imagenet";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("overrides take highest precedence and reject unknown keys") {
  RunConfig cfg;
  apply_override(cfg, "train.lr=0.01");
  CHECK(cfg.train.lr == 0.01);
  apply_override(cfg, "train.distance=euclidean");
  CHECK(cfg.train.distance == Distance::kEuclidean);
  apply_override(cfg, "paths.out_dir=/tmp/somewhere");
  CHECK(cfg.paths.out_dir == "/tmp/somewhere");
  apply_override(cfg, "augment.vol_max_range=[0.3,0.5]");
  CHECK(cfg.augment.vol_max_range.first == 0.3);
  CHECK_THROWS_AS(apply_override(cfg, "train.lrate=3"), ConfigError);
  CHECK_THROWS_AS(apply_override(cfg, "no-equals-sign"), ConfigError);
}

TEST_CASE("config file loading and snapshot") {
  const fs::path dir = fs::temp_directory_path() / "fskws_config_test";
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "config.json");
    os << R"({"seed": 42, "train": {"total_steps": 100}})";
  }
  RunConfig cfg = load_run_config(dir / "config.json");
  CHECK(cfg.seed == 42);
  CHECK(cfg.train.total_steps == 100);

  write_config_snapshot(dir, cfg);
  RunConfig snap = load_run_config(dir / "config.resolved.json");
  CHECK(snap.seed == 42);
  CHECK(snap.train.total_steps == 100);
  CHECK(snap.buffer.m_buffer == cfg.buffer.m_buffer);

  CHECK_THROWS_AS(load_run_config(dir / "absent.json"), ConfigError);
  {
    std::ofstream os(dir / "broken.json");
    os << "{not json";
  }
  CHECK_THROWS_AS(load_run_config(dir / "broken.json"), ConfigError);
}

TEST_CASE("augment providers are built from the spec") {
  AugmentSpec spec;
  PathsConfig paths;
  AugmentConfig cfg = make_augment_config(spec, paths);
  CHECK(cfg.rir_source != nullptr);
  CHECK(cfg.noise_source != nullptr);
  CHECK(cfg.apply_prob == 0.9);

  spec.noise_kind = "dir";
  CHECK_THROWS_WITH_AS(make_augment_config(spec, paths), doctest::Contains("noise_dir"),
                       ConfigError);
  spec.noise_kind = "sinewaves";
  CHECK_THROWS_AS(make_augment_config(spec, paths), ConfigError);
  spec.noise_kind = "pink";
  spec.rir_kind = "dir";
  CHECK_THROWS_WITH_AS(make_augment_config(spec, paths), doctest::Contains("rir_dir"),
                       ConfigError);
}
