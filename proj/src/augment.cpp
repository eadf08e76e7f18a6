#include "fskws/augment.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <unsupported/Eigen/FFT>

#include "fskws/error.hpp"
#include "fskws/wav_io.hpp"

namespace fskws {

void AugmentConfig::validate() const {
  if (!(vol_max_range.first > 0.0 && vol_max_range.first <= vol_max_range.second))
    throw ConfigError("augment: require 0 < vol_max low <= high");
  if (!(snr_db_range.first > 0.0 && snr_db_range.first <= snr_db_range.second))
    throw ConfigError("augment: require 0 < snr low <= high");
  if (apply_prob < 0.0 || apply_prob > 1.0) throw ConfigError("augment: apply_prob outside [0, 1]");
}

Waveform scale_volume(const Waveform& w, double target_max) {
  check_audio_input(w, "scale_volume");
  if (target_max <= 0.0) throw Error("scale_volume: target_max must be positive");
  const double peak = w.max_abs();
  if (peak == 0.0) throw Error("scale_volume: silent input");
  Waveform out = w;
  const double gain = target_max / peak;
  for (double& s : out.samples) s *= gain;
  return out;
}

Waveform add_reverb(const Waveform& w, const Waveform& rir) {
  check_audio_input(w, "add_reverb");
  check_audio_input(rir, "add_reverb (rir)");
  if (w.sample_rate != rir.sample_rate)
    throw Error("add_reverb: sample rate mismatch (" + std::to_string(w.sample_rate) + " vs " +
                std::to_string(rir.sample_rate) + ")");

  const std::size_t n = w.size(), m = rir.size();
  std::size_t fft_n = 1;
  while (fft_n < n + m - 1) fft_n <<= 1;

  std::vector<double> a(fft_n, 0.0), b(fft_n, 0.0);
  std::copy(w.samples.begin(), w.samples.end(), a.begin());
  std::copy(rir.samples.begin(), rir.samples.end(), b.begin());

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> fa, fb;
  fft.fwd(fa, a);
  fft.fwd(fb, b);
  for (std::size_t i = 0; i < fft_n; ++i) fa[i] *= fb[i];
  std::vector<double> conv;
  fft.inv(conv, fa);

  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.assign(conv.begin(), conv.begin() + n);

  const double in_peak = w.max_abs();
  const double out_peak = out.max_abs();
  if (out_peak > 0.0) {
    const double gain = in_peak / out_peak;
    for (double& s : out.samples) s *= gain;
  }
  return out;
}

Waveform synth_rir(Rng& rng, double duration_s, double decay_t60_s, int sample_rate) {
  if (duration_s <= 0.0 || decay_t60_s <= 0.0)
    throw Error("synth_rir: duration and t60 must be positive");
  const std::size_t n = std::max<std::size_t>(1, static_cast<std::size_t>(duration_s * sample_rate));
  // ln(1000): the envelope is 10^-3 of the direct path at t = t60.
  const double rate = 6.907755278982137 / decay_t60_s;
  Waveform out;
  out.sample_rate = sample_rate;
  out.samples.resize(n);
  out.samples[0] = 1.0;
  for (std::size_t i = 1; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    out.samples[i] = rng.uniform(-1.0, 1.0) * std::exp(-rate * t);
  }
  return out;
}

Waveform add_noise(const Waveform& w, const Waveform& noise, double snr_db, std::size_t* clipped) {
  check_audio_input(w, "add_noise");
  check_audio_input(noise, "add_noise (noise)");
  if (noise.size() < w.size()) throw Error("add_noise: noise shorter than signal");
  const double sig_rms = w.rms();
  const double noise_rms_full = [&] {
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) acc += noise.samples[i] * noise.samples[i];
    return std::sqrt(acc / static_cast<double>(w.size()));
  }();
  if (sig_rms == 0.0) throw Error("add_noise: silent signal");
  if (noise_rms_full == 0.0) throw Error("add_noise: silent noise");

  const double gain = (sig_rms / noise_rms_full) * std::pow(10.0, -snr_db / 20.0);
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.resize(w.size());
  std::size_t n_clip = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    double s = w.samples[i] + gain * noise.samples[i];
    if (s > 1.0) {
      s = 1.0;
      ++n_clip;
    } else if (s < -1.0) {
      s = -1.0;
      ++n_clip;
    }
    out.samples[i] = s;
  }
  if (clipped) *clipped = n_clip;
  return out;
}

Waveform augment(const Waveform& w, const AugmentConfig& cfg, Rng& rng, AugmentStats* stats) {
  cfg.validate();
  // Decision bits and parameter draws happen in a fixed order so the rng
  // stream alignment does not depend on which branches are taken.
  const double target_max = rng.uniform(cfg.vol_max_range.first, cfg.vol_max_range.second);
  const bool do_reverb = rng.bernoulli(cfg.apply_prob);
  const bool do_noise = rng.bernoulli(cfg.apply_prob);
  const double snr_db = rng.uniform(cfg.snr_db_range.first, cfg.snr_db_range.second);

  Waveform out = scale_volume(w, target_max);
  if (do_reverb) {
    if (!cfg.rir_source) throw ConfigError("augment: reverb enabled but no rir_source");
    Waveform rir = cfg.rir_source->next(rng, 0);
    out = add_reverb(out, rir);
  }
  std::size_t n_clip = 0;
  if (do_noise) {
    if (!cfg.noise_source) throw ConfigError("augment: noise enabled but no noise_source");
    Waveform noise = cfg.noise_source->next(rng, out.size());
    out = add_noise(out, noise, snr_db, &n_clip);
  }
  if (stats) {
    ++stats->calls;
    if (do_reverb) ++stats->reverb_applied;
    if (do_noise) ++stats->noise_applied;
    stats->clipped_samples += n_clip;
  }
  return out;
}

Waveform SynthRirProvider::next(Rng& rng, std::size_t) const {
  const double t60 = rng.uniform(t60_lo_, t60_hi_);
  return synth_rir(rng, t60, t60, sample_rate_);
}

Waveform WhiteNoiseProvider::next(Rng& rng, std::size_t length) const {
  if (length == 0) length = sample_rate_;
  Waveform out;
  out.sample_rate = sample_rate_;
  out.samples.resize(length);
  for (auto& s : out.samples) s = 0.3 * rng.normal();
  return out;
}

Waveform PinkNoiseProvider::next(Rng& rng, std::size_t length) const {
  if (length == 0) length = sample_rate_;
  Waveform out;
  out.sample_rate = sample_rate_;
  out.samples.resize(length);
  double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
  for (auto& s : out.samples) {
    const double white = rng.normal();
    b0 = 0.99886 * b0 + white * 0.0555179;
    b1 = 0.99332 * b1 + white * 0.0750759;
    b2 = 0.96900 * b2 + white * 0.1538520;
    b3 = 0.86650 * b3 + white * 0.3104856;
    b4 = 0.55000 * b4 + white * 0.5329522;
    b5 = -0.7616 * b5 - white * 0.0168980;
    const double pink = b0 + b1 + b2 + b3 + b4 + b5 + b6 + white * 0.5362;
    b6 = white * 0.115926;
    s = 0.05 * pink;
  }
  return out;
}

DirWavProvider::DirWavProvider(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw IoError("DirWavProvider: not a directory: " + dir.string());
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".wav")
      files_.push_back(entry.path());
  }
  std::sort(files_.begin(), files_.end());
  if (files_.empty()) throw IoError("DirWavProvider: no .wav files in " + dir.string());
}

Waveform DirWavProvider::next(Rng& rng, std::size_t length) const {
  const auto& path = files_[rng.uniform_int(files_.size())];
  Waveform w = read_wav(path);
  if (length == 0 || w.size() == length) return w;
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.resize(length);
  if (w.size() > length) {
    // Random crop.
    const std::size_t start = rng.uniform_int(w.size() - length + 1);
    std::copy(w.samples.begin() + start, w.samples.begin() + start + length, out.samples.begin());
  } else {
    // Tile.
    for (std::size_t i = 0; i < length; ++i) out.samples[i] = w.samples[i % w.size()];
  }
  return out;
}

}  // namespace fskws
