#pragma once

#include <filesystem>
#include <utility>

#include "fskws/sample_source.hpp"

namespace fskws {

// Parametric synthetic keyword generator. A class is a random sequence of
// unit ids; each unit maps deterministically to a base spectral template
// (two formant resonances and a base duration). A view draws pitch, tempo
// and per-unit formant jitter, so views of one class share phonetic
// identity while differing in "speaker" and prosody.
struct OracleGenConfig {
  int n_units = 64;
  int l_min = 10;
  int l_max = 20;
  std::pair<double, double> unit_duration_range_s{0.04, 0.12};
  std::pair<double, double> pitch_range_hz{90.0, 300.0};
  double formant_jitter = 0.10;
  std::pair<double, double> tempo_range{0.85, 1.15};
  double crossfade_s = 0.005;
  int sample_rate = kDefaultSampleRate;

  void validate() const;
};

class OracleSource : public SampleSource {
 public:
  explicit OracleSource(OracleGenConfig cfg);

  // unit_ids length ~ U{l_min..l_max}, ids ~ U{0..n_units-1}.
  KeywordClass new_class(Rng& rng) const override;

  // Per-unit resonant bursts over an impulse-train excitation, tempo-scaled
  // base durations, 5 ms crossfade concatenation, peak normalized to 0.8.
  // Total length in samples is sum(dur_i) - (U-1) * crossfade (all in
  // samples, durations rounded per unit before summing).
  Waveform render(const KeywordClass& cls, Rng& rng) const override;

  const OracleGenConfig& config() const { return cfg_; }

  // Deterministic per-unit template parameters.
  double unit_formant1_hz(int unit_id) const;
  double unit_formant2_hz(int unit_id) const;
  double unit_base_duration_s(int unit_id) const;
  double unit_formant_balance(int unit_id) const;
  double unit_formant3_hz(int unit_id) const;
  double unit_formant3_balance(int unit_id) const;
  double unit_tilt(int unit_id) const;
  double unit_gain(int unit_id) const;

 private:
  OracleGenConfig cfg_;
};

// Line-delimited class manifest: "<id hex> <unit ids space separated>".
void write_oracle_manifest(const std::filesystem::path& path, const std::vector<KeywordClass>& classes);
std::vector<KeywordClass> read_oracle_manifest(const std::filesystem::path& path);

}  // namespace fskws
