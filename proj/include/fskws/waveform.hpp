#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "fskws/error.hpp"

namespace fskws {

inline constexpr int kDefaultSampleRate = 16000;

// Mono audio buffer. Samples are dimensionless amplitudes, nominally in
// [-1, 1]; all operations that consume audio require non-empty, finite data.
struct Waveform {
  std::vector<double> samples;
  int sample_rate = kDefaultSampleRate;

  Waveform() = default;
  Waveform(std::vector<double> s, int rate) : samples(std::move(s)), sample_rate(rate) {}

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }

  double max_abs() const {
    double m = 0.0;
    for (double s : samples) m = std::max(m, std::abs(s));
    return m;
  }

  double rms() const {
    if (samples.empty()) return 0.0;
    double acc = 0.0;
    for (double s : samples) acc += s * s;
    return std::sqrt(acc / static_cast<double>(samples.size()));
  }

  bool all_finite() const {
    for (double s : samples) {
      if (!std::isfinite(s)) return false;
    }
    return true;
  }
};

inline void check_audio_input(const Waveform& w, const char* where) {
  if (w.empty()) throw Error(std::string(where) + ": empty waveform");
  if (w.sample_rate <= 0) throw Error(std::string(where) + ": non-positive sample rate");
  if (!w.all_finite()) throw Error(std::string(where) + ": non-finite sample");
}

}  // namespace fskws
