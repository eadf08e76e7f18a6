#pragma once

#include <Eigen/Dense>
#include <vector>

#include "fskws/waveform.hpp"

namespace fskws {

// Front-end configuration. Defaults are standard small-footprint KWS
// values; only the 40-dim MFCC output is fixed by the model contract.
struct DspConfig {
  int n_mfcc = 40;
  int n_mels = 64;
  int fft_size = 512;
  double frame_len_s = 0.025;
  double frame_hop_s = 0.010;
  double mel_fmin_hz = 20.0;
  double mel_fmax_hz = 7600.0;
  double log_floor = 1e-10;
  double pre_emphasis = 0.97;
  bool cepstral_mean_norm = false;

  int frame_len(int sample_rate) const { return static_cast<int>(frame_len_s * sample_rate + 0.5); }
  int frame_hop(int sample_rate) const { return static_cast<int>(frame_hop_s * sample_rate + 0.5); }

  void validate() const;
};

// T x D feature matrix, one row per frame.
struct MfccSequence {
  Eigen::MatrixXd frames;
  double frame_hop_s = 0.0;
  double frame_len_s = 0.0;

  int num_frames() const { return static_cast<int>(frames.rows()); }
  int dim() const { return static_cast<int>(frames.cols()); }
};

// Number of analysis frames for a signal of `len` samples.
inline int frame_count(int len, int frame_len, int hop) {
  if (len < frame_len) return 0;
  return 1 + (len - frame_len) / hop;
}

// HTK mel scale.
inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Center frequencies (Hz) of the triangular mel filters.
std::vector<double> mel_center_frequencies_hz(const DspConfig& cfg);

// Triangular mel filterbank, n_mels x (fft_size/2 + 1), weights evaluated
// at FFT bin center frequencies.
Eigen::MatrixXd mel_filterbank(const DspConfig& cfg, int sample_rate);

// Orthonormal DCT-II matrix, n_out x n_in.
Eigen::MatrixXd dct2_orthonormal_matrix(int n_out, int n_in);

// Log mel spectrogram: pre-emphasis, periodic Hann window, magnitude FFT,
// mel filterbank, log with floor. T x n_mels.
Eigen::MatrixXd log_mel_spectrogram(const Waveform& w, const DspConfig& cfg);

// Full MFCC pipeline (log mel + DCT-II, first n_mfcc coefficients).
MfccSequence mfcc(const Waveform& w, const DspConfig& cfg);

}  // namespace fskws
