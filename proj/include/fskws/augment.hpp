#pragma once

#include <filesystem>
#include <memory>
#include <utility>
#include <vector>

#include "fskws/rng.hpp"
#include "fskws/waveform.hpp"

namespace fskws {

// Source of room impulse responses or noise segments. Providers must be
// callable from multiple generation workers at once; each worker passes
// its own rng.
class WaveProvider {
 public:
  virtual ~WaveProvider() = default;
  // Returns a non-empty, finite waveform. `length` is a hint: noise
  // providers must return at least `length` samples; RIR providers may
  // ignore it.
  virtual Waveform next(Rng& rng, std::size_t length) const = 0;
};

struct AugmentConfig {
  std::pair<double, double> vol_max_range{0.2, 0.9};
  std::pair<double, double> snr_db_range{10.0, 20.0};
  double apply_prob = 0.9;
  std::shared_ptr<const WaveProvider> rir_source;
  std::shared_ptr<const WaveProvider> noise_source;

  void validate() const;
};

// Statistics accumulated across augment() calls (clipping from noise
// injection is expected occasionally and surfaced rather than hidden).
struct AugmentStats {
  std::size_t calls = 0;
  std::size_t reverb_applied = 0;
  std::size_t noise_applied = 0;
  std::size_t clipped_samples = 0;
};

// Rescales so that max|output| == target_max. Errors on silent input.
Waveform scale_volume(const Waveform& w, double target_max);

// Full linear convolution with `rir`, truncated to len(w), then rescaled
// so the output peak equals the input peak.
Waveform add_reverb(const Waveform& w, const Waveform& rir);

// Exponentially decaying white noise with a unit direct-path sample at
// t = 0; the envelope reaches -60 dB at decay_t60_s.
Waveform synth_rir(Rng& rng, double duration_s, double decay_t60_s, int sample_rate = kDefaultSampleRate);

// Adds noise at exactly snr_db (pre-clipping), then clips to [-1, 1].
// `clipped`, when given, receives the number of clipped samples.
Waveform add_noise(const Waveform& w, const Waveform& noise, double snr_db, std::size_t* clipped = nullptr);

// Stochastic composition: volume scaling always, reverb and noise each
// with probability apply_prob. Deterministic given the rng state.
Waveform augment(const Waveform& w, const AugmentConfig& cfg, Rng& rng, AugmentStats* stats = nullptr);

// Built-in providers.

class SynthRirProvider : public WaveProvider {
 public:
  SynthRirProvider(double t60_lo = 0.1, double t60_hi = 0.6, int sample_rate = kDefaultSampleRate)
      : t60_lo_(t60_lo), t60_hi_(t60_hi), sample_rate_(sample_rate) {}
  Waveform next(Rng& rng, std::size_t length) const override;

 private:
  double t60_lo_, t60_hi_;
  int sample_rate_;
};

class WhiteNoiseProvider : public WaveProvider {
 public:
  explicit WhiteNoiseProvider(int sample_rate = kDefaultSampleRate) : sample_rate_(sample_rate) {}
  Waveform next(Rng& rng, std::size_t length) const override;

 private:
  int sample_rate_;
};

// Pink (1/f) noise via the Paul Kellet IIR approximation.
class PinkNoiseProvider : public WaveProvider {
 public:
  explicit PinkNoiseProvider(int sample_rate = kDefaultSampleRate) : sample_rate_(sample_rate) {}
  Waveform next(Rng& rng, std::size_t length) const override;

 private:
  int sample_rate_;
};

// Serves 16 kHz mono WAVs from a directory, enumerated in sorted filename
// order. Noise use: picks a random file and tiles/crops it to `length`.
// RIR use: pass length 0 to get a whole file.
class DirWavProvider : public WaveProvider {
 public:
  explicit DirWavProvider(const std::filesystem::path& dir);
  Waveform next(Rng& rng, std::size_t length) const override;
  std::size_t file_count() const { return files_.size(); }

 private:
  std::vector<std::filesystem::path> files_;
};

}  // namespace fskws
