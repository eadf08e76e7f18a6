#include "fskws/oracle_source.hpp"

#include <cmath>
#include <complex>
#include <fstream>
#include <sstream>

#include "fskws/error.hpp"

namespace fskws {

namespace {

double unit_hash01(int unit_id, std::uint64_t salt) {
  const std::uint64_t h = splitmix64(static_cast<std::uint64_t>(unit_id) * 0x9e3779b97f4a7c15ULL + salt);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Two-pole resonator with unit gain at the resonance frequency.
struct Resonator {
  double a1, a2, gain;

  Resonator(double freq_hz, double bw_hz, int sr) {
    const double r = std::exp(-M_PI * bw_hz / sr);
    const double theta = 2.0 * M_PI * freq_hz / sr;
    a1 = 2.0 * r * std::cos(theta);
    a2 = -r * r;
    const std::complex<double> z = std::polar(1.0, -theta);
    gain = std::abs(1.0 - 2.0 * r * std::cos(theta) * z + r * r * z * z);
  }

  void apply(const std::vector<double>& x, std::vector<double>& y) const {
    double y1 = 0.0, y2 = 0.0;
    y.resize(x.size());
    for (std::size_t n = 0; n < x.size(); ++n) {
      const double v = gain * x[n] + a1 * y1 + a2 * y2;
      y[n] = v;
      y2 = y1;
      y1 = v;
    }
  }
};

}  // namespace

void OracleGenConfig::validate() const {
  if (n_units < 2) throw ConfigError("oracle: n_units must be >= 2");
  if (l_min < 1 || l_max < l_min) throw ConfigError("oracle: require 1 <= l_min <= l_max");
  if (unit_duration_range_s.first <= 0.0 || unit_duration_range_s.second < unit_duration_range_s.first)
    throw ConfigError("oracle: bad unit duration range");
  if (pitch_range_hz.first <= 0.0 || pitch_range_hz.second < pitch_range_hz.first)
    throw ConfigError("oracle: bad pitch range");
  if (formant_jitter < 0.0 || formant_jitter >= 1.0) throw ConfigError("oracle: bad formant jitter");
  if (tempo_range.first <= 0.0 || tempo_range.second < tempo_range.first)
    throw ConfigError("oracle: bad tempo range");
  if (crossfade_s < 0.0) throw ConfigError("oracle: negative crossfade");
}

OracleSource::OracleSource(OracleGenConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

KeywordClass OracleSource::new_class(Rng& rng) const {
  KeywordClass cls;
  cls.id = rng.next_u64();
  const int len = cfg_.l_min + static_cast<int>(rng.uniform_int(cfg_.l_max - cfg_.l_min + 1));
  cls.unit_ids.resize(len);
  for (int& u : cls.unit_ids) u = static_cast<int>(rng.uniform_int(cfg_.n_units));
  return cls;
}

double OracleSource::unit_formant1_hz(int unit_id) const {
  // Above the voiced low band, so formant bands stay noise excited.
  return 500.0 + 1900.0 * unit_hash01(unit_id, 0x11);
}

double OracleSource::unit_formant2_hz(int unit_id) const {
  return unit_formant1_hz(unit_id) + 400.0 + 3400.0 * unit_hash01(unit_id, 0x22);
}

double OracleSource::unit_base_duration_s(int unit_id) const {
  const auto& [lo, hi] = cfg_.unit_duration_range_s;
  return lo + (hi - lo) * unit_hash01(unit_id, 0x33);
}

double OracleSource::unit_formant_balance(int unit_id) const {
  return 0.3 + 0.7 * unit_hash01(unit_id, 0x44);
}

double OracleSource::unit_formant3_hz(int unit_id) const {
  return 3800.0 + 2600.0 * unit_hash01(unit_id, 0x77);
}

double OracleSource::unit_formant3_balance(int unit_id) const {
  return 0.2 + 0.55 * unit_hash01(unit_id, 0x88);
}

double OracleSource::unit_tilt(int unit_id) const {
  return -0.92 + 1.84 * unit_hash01(unit_id, 0x55);
}

double OracleSource::unit_gain(int unit_id) const {
  return 0.35 + 0.65 * unit_hash01(unit_id, 0x66);
}

Waveform OracleSource::render(const KeywordClass& cls, Rng& rng) const {
  if (cls.unit_ids.empty()) throw Error("oracle render: class has no units");
  const int sr = cfg_.sample_rate;

  // Per-view prosody: one pitch and tempo for the whole keyword, one
  // formant jitter factor per unit.
  const double pitch = rng.uniform(cfg_.pitch_range_hz.first, cfg_.pitch_range_hz.second);
  const double tempo = rng.uniform(cfg_.tempo_range.first, cfg_.tempo_range.second);
  std::vector<double> jitter(cls.unit_ids.size());
  for (double& j : jitter)
    j = rng.uniform(1.0 - cfg_.formant_jitter, 1.0 + cfg_.formant_jitter);

  const int n_fade = static_cast<int>(cfg_.crossfade_s * sr + 0.5);

  std::vector<std::vector<double>> bursts;
  bursts.reserve(cls.unit_ids.size());
  std::size_t total = 0;
  for (std::size_t i = 0; i < cls.unit_ids.size(); ++i) {
    const int u = cls.unit_ids[i];
    const int n = std::max(2 * n_fade + 1,
                           static_cast<int>(unit_base_duration_s(u) / tempo * sr + 0.5));

    // Excitation: a glottal-like voiced source plus an aspiration noise
    // floor. The impulse train is power normalized across pitch and low
    // passed so that formant bands are mostly noise excited, which keeps
    // the mel spectrum of a unit stable when the pitch moves. The noise is
    // seeded by the unit id: it belongs to the unit template, not the view.
    // Constant pulse amplitude keeps the time-domain peak (and with it the
    // final peak normalization gain) stable across pitch.
    std::vector<double> exc(n, 0.0);
    const double period = sr / pitch;
    for (double pos = 0.0; pos < n; pos += period) exc[static_cast<int>(pos)] = 0.55;
    {
      // Three cascaded one-pole sections confine the harmonic comb to the
      // lowest mel bands, as in the glottal rolloff of real speech.
      const double pole = std::exp(-2.0 * M_PI * 200.0 / sr);
      double s1 = 0.0, s2 = 0.0, s3 = 0.0;
      for (int t = 0; t < n; ++t) {
        s1 = (1.0 - pole) * exc[t] + pole * s1;
        s2 = (1.0 - pole) * s1 + pole * s2;
        s3 = (1.0 - pole) * s2 + pole * s3;
        exc[t] = 8.0 * s3;
      }
    }
    // Breath floor: low-tilted plus white noise, template seeded. The low
    // component gives the voiced bands a stable baseline under the
    // harmonic peaks.
    Rng noise_rng(splitmix64(0x9d2c5680 ^ static_cast<std::uint64_t>(u)));
    {
      const double pole = std::exp(-2.0 * M_PI * 600.0 / sr);
      double low = 0.0;
      for (int t = 0; t < n; ++t) {
        const double white = noise_rng.uniform(-1.0, 1.0);
        low = (1.0 - pole) * white + pole * low;
        exc[t] += 0.45 * low + 0.06 * white;
      }
    }

    const double f1 = unit_formant1_hz(u) * jitter[i];
    const double f2 = unit_formant2_hz(u) * jitter[i];
    const double f3 = unit_formant3_hz(u) * jitter[i];
    Resonator r1(f1, 200.0, sr), r2(f2, 250.0, sr), r3(f3, 300.0, sr);
    std::vector<double> y1, y2, y3;
    r1.apply(exc, y1);
    r2.apply(exc, y2);
    r3.apply(exc, y3);

    // Per-unit template shaping: formant balance, broadband spectral tilt
    // (first difference filter) and unit gain.
    const double balance = unit_formant_balance(u);
    const double balance3 = unit_formant3_balance(u);
    const double tilt = unit_tilt(u);
    const double gain = unit_gain(u);
    std::vector<double> burst(n);
    double prev = 0.0;
    for (int t = 0; t < n; ++t) {
      const double v = y1[t] + balance * y2[t] + balance3 * y3[t];
      burst[t] = gain * (v - tilt * prev);
      prev = v;
    }

    // Trapezoid envelope with crossfade-length ramps.
    for (int t = 0; t < n_fade && t < n; ++t) {
      const double ramp = static_cast<double>(t + 1) / (n_fade + 1);
      burst[t] *= ramp;
      burst[n - 1 - t] *= ramp;
    }
    total += n;
    bursts.push_back(std::move(burst));
  }

  // Overlap-add with n_fade samples of overlap between adjacent units.
  const std::size_t overlap_total = n_fade * (bursts.size() - 1);
  Waveform out;
  out.sample_rate = sr;
  out.samples.assign(total - overlap_total, 0.0);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < bursts.size(); ++i) {
    for (std::size_t t = 0; t < bursts[i].size(); ++t) out.samples[pos + t] += bursts[i][t];
    pos += bursts[i].size() - n_fade;
  }

  const double peak = out.max_abs();
  if (peak > 0.0) {
    const double gain = 0.8 / peak;
    for (double& s : out.samples) s *= gain;
  }
  return out;
}

void write_oracle_manifest(const std::filesystem::path& path, const std::vector<KeywordClass>& classes) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("write_oracle_manifest: cannot open " + path.string());
  os << std::hex;
  for (const auto& cls : classes) {
    os << cls.id << std::dec;
    for (int u : cls.unit_ids) os << ' ' << u;
    os << '\n' << std::hex;
  }
  if (!os) throw IoError("write_oracle_manifest: write failed: " + path.string());
}

std::vector<KeywordClass> read_oracle_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("read_oracle_manifest: cannot open " + path.string());
  std::vector<KeywordClass> classes;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    KeywordClass cls;
    ls >> std::hex >> cls.id >> std::dec;
    int u;
    while (ls >> u) cls.unit_ids.push_back(u);
    if (ls.fail() && !ls.eof())
      throw IoError("read_oracle_manifest: malformed line: " + line);
    classes.push_back(std::move(cls));
  }
  return classes;
}

}  // namespace fskws
