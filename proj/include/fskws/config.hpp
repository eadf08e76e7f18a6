#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fskws/augment.hpp"
#include "fskws/dsp.hpp"
#include "fskws/episode_buffer.hpp"
#include "fskws/evaluation.hpp"
#include "fskws/nn/encoder.hpp"
#include "fskws/oracle_source.hpp"
#include "fskws/trainer.hpp"

namespace fskws {

// Serializable augmentation description; providers are constructed from it
// (and the paths section) by make_augment_config.
struct AugmentSpec {
  bool enabled = true;
  std::pair<double, double> vol_max_range{0.2, 0.9};
  std::pair<double, double> snr_db_range{10.0, 20.0};
  double apply_prob = 0.9;
  std::string noise_kind = "white";  // white | pink | dir
  std::string rir_kind = "synth";    // synth | dir
  std::pair<double, double> rir_t60_range{0.1, 0.6};
};

struct EvalConfig {
  int n_targets = 10;
  int n_unknown = 20;
  std::vector<int> k_shots{1, 5, 20};
  int n_trials = 100;
  bool held_out_threshold = false;
  int support_pool = 25;
  int queries_per_class = 10;  // oracle datasets; 0 = all clips for directories
  int oracle_classes = 30;
  std::string dataset_layout = "mswc-like";  // gsc | mswc-like
  int mswc_test_count = 250;
  std::optional<int> keyword_min_count;
  std::optional<int> keyword_max_count;
  bool corrupt_queries = false;
  std::pair<double, double> corrupt_snr_db{10.0, 20.0};
};

struct PathsConfig {
  std::string dataset;  // directory dataset root, or "oracle"
  std::string noise_dir;
  std::string rir_dir;
  std::string out_dir = "out";
};

struct RunConfig {
  std::uint64_t seed = 0;
  int workers = 1;
  DspConfig dsp;
  AugmentSpec augment;
  OracleGenConfig oracle;
  BufferConfig buffer;
  nn::EncoderConfig encoder;
  TrainConfig train;
  EvalConfig eval;
  PathsConfig paths;

  // Cross-section consistency (k_shots across buffer/train and so on).
  void validate() const;
};

// Loads a JSON config file. Unknown keys anywhere are rejected.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig run_config_from_json_text(const std::string& text);

// Serializes the fully resolved config (defaults filled in).
std::string run_config_to_json_text(const RunConfig& cfg);

// Applies a "section.key=value" override; value is parsed as JSON when
// possible and as a string otherwise.
void apply_override(RunConfig& cfg, const std::string& assignment);

// Writes the resolved snapshot beside command outputs.
void write_config_snapshot(const std::filesystem::path& out_dir, const RunConfig& cfg);

// Builds providers from the spec; throws ConfigError when a directory
// provider is requested without the matching path.
AugmentConfig make_augment_config(const AugmentSpec& spec, const PathsConfig& paths);

}  // namespace fskws
