#include "fskws/dsp.hpp"

#include <unsupported/Eigen/FFT>

#include "fskws/error.hpp"

namespace fskws {

void DspConfig::validate() const {
  if (n_mfcc < 1 || n_mels < n_mfcc) throw ConfigError("dsp: require 1 <= n_mfcc <= n_mels");
  if (n_mels > fft_size / 2 + 1) throw ConfigError("dsp: require n_mels <= fft_size/2 + 1");
  if (log_floor <= 0.0) throw ConfigError("dsp: log_floor must be positive");
  if (frame_len_s <= 0.0 || frame_hop_s <= 0.0) throw ConfigError("dsp: frame sizes must be positive");
  if (mel_fmin_hz < 0.0 || mel_fmax_hz <= mel_fmin_hz) throw ConfigError("dsp: bad mel band edges");
}

std::vector<double> mel_center_frequencies_hz(const DspConfig& cfg) {
  const double mel_lo = hz_to_mel(cfg.mel_fmin_hz);
  const double mel_hi = hz_to_mel(cfg.mel_fmax_hz);
  std::vector<double> centers(cfg.n_mels);
  for (int m = 1; m <= cfg.n_mels; ++m)
    centers[m - 1] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * m / (cfg.n_mels + 1));
  return centers;
}

Eigen::MatrixXd mel_filterbank(const DspConfig& cfg, int sample_rate) {
  const int n_bins = cfg.fft_size / 2 + 1;
  const double mel_lo = hz_to_mel(cfg.mel_fmin_hz);
  const double mel_hi = hz_to_mel(cfg.mel_fmax_hz);

  std::vector<double> edges(cfg.n_mels + 2);
  for (int m = 0; m < cfg.n_mels + 2; ++m)
    edges[m] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * m / (cfg.n_mels + 1));

  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(cfg.n_mels, n_bins);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double f_lo = edges[m], f_c = edges[m + 1], f_hi = edges[m + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / cfg.fft_size;
      if (f > f_lo && f < f_c) {
        fb(m, k) = (f - f_lo) / (f_c - f_lo);
      } else if (f >= f_c && f < f_hi) {
        fb(m, k) = (f_hi - f) / (f_hi - f_c);
      }
    }
  }
  return fb;
}

Eigen::MatrixXd dct2_orthonormal_matrix(int n_out, int n_in) {
  Eigen::MatrixXd d(n_out, n_in);
  const double scale0 = std::sqrt(1.0 / n_in);
  const double scale = std::sqrt(2.0 / n_in);
  for (int k = 0; k < n_out; ++k) {
    for (int n = 0; n < n_in; ++n) {
      d(k, n) = (k == 0 ? scale0 : scale) * std::cos(M_PI * k * (2 * n + 1) / (2.0 * n_in));
    }
  }
  return d;
}

Eigen::MatrixXd log_mel_spectrogram(const Waveform& w, const DspConfig& cfg) {
  cfg.validate();
  check_audio_input(w, "log_mel_spectrogram");
  const int sr = w.sample_rate;
  const int flen = cfg.frame_len(sr);
  const int hop = cfg.frame_hop(sr);
  if (flen > cfg.fft_size) throw ConfigError("dsp: frame longer than fft_size");
  const int n = static_cast<int>(w.size());
  const int n_frames = frame_count(n, flen, hop);
  if (n_frames < 1)
    throw Error("log_mel_spectrogram: waveform shorter than one frame (" + std::to_string(n) +
                " < " + std::to_string(flen) + " samples)");

  // Pre-emphasis over the whole signal; sample 0 passes through so that
  // framing a prefix of a longer signal yields identical frames.
  std::vector<double> pre(n);
  pre[0] = w.samples[0];
  for (int i = 1; i < n; ++i) pre[i] = w.samples[i] - cfg.pre_emphasis * w.samples[i - 1];

  // Periodic Hann window.
  std::vector<double> window(flen);
  for (int i = 0; i < flen; ++i) window[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / flen));

  const int n_bins = cfg.fft_size / 2 + 1;
  Eigen::MatrixXd mags(n_bins, n_frames);

  Eigen::FFT<double> fft;
  std::vector<double> buf(cfg.fft_size);
  std::vector<std::complex<double>> spec;
  for (int t = 0; t < n_frames; ++t) {
    const int start = t * hop;
    for (int i = 0; i < flen; ++i) buf[i] = pre[start + i] * window[i];
    std::fill(buf.begin() + flen, buf.end(), 0.0);
    fft.fwd(spec, buf);
    for (int k = 0; k < n_bins; ++k) mags(k, t) = std::abs(spec[k]);
  }

  // Per-frame matvec keeps identical frames bit-identical (a single GEMM
  // may vary accumulation order across columns).
  const Eigen::MatrixXd fb = mel_filterbank(cfg, sr);
  Eigen::MatrixXd out(n_frames, cfg.n_mels);
  Eigen::VectorXd mel(cfg.n_mels);
  for (int t = 0; t < n_frames; ++t) {
    mel.noalias() = fb * mags.col(t);
    for (int m = 0; m < cfg.n_mels; ++m)
      out(t, m) = std::log(std::max(mel(m), cfg.log_floor));
  }
  return out;
}

MfccSequence mfcc(const Waveform& w, const DspConfig& cfg) {
  Eigen::MatrixXd logmel = log_mel_spectrogram(w, cfg);  // T x n_mels
  Eigen::MatrixXd dct = dct2_orthonormal_matrix(cfg.n_mfcc, cfg.n_mels);
  MfccSequence seq;
  seq.frames.resize(logmel.rows(), cfg.n_mfcc);
  for (Eigen::Index t = 0; t < logmel.rows(); ++t)
    seq.frames.row(t).noalias() = (dct * logmel.row(t).transpose()).transpose();
  seq.frame_hop_s = cfg.frame_hop_s;
  seq.frame_len_s = cfg.frame_len_s;
  if (cfg.cepstral_mean_norm) {
    Eigen::RowVectorXd mean = seq.frames.colwise().mean();
    seq.frames.rowwise() -= mean;
  }
  return seq;
}

}  // namespace fskws
