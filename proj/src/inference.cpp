#include "fskws/inference.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "fskws/error.hpp"

namespace fskws {

std::uint64_t dsp_config_hash(const DspConfig& cfg) {
  nlohmann::json j{{"n_mfcc", cfg.n_mfcc},
                   {"n_mels", cfg.n_mels},
                   {"fft_size", cfg.fft_size},
                   {"frame_len_s", cfg.frame_len_s},
                   {"frame_hop_s", cfg.frame_hop_s},
                   {"mel_fmin_hz", cfg.mel_fmin_hz},
                   {"mel_fmax_hz", cfg.mel_fmax_hz},
                   {"log_floor", cfg.log_floor},
                   {"pre_emphasis", cfg.pre_emphasis},
                   {"cepstral_mean_norm", cfg.cepstral_mean_norm}};
  return fnv1a64(j.dump());
}

Eigen::MatrixXd embed_waveforms(nn::Encoder<float>& encoder, const DspConfig& dsp,
                                const std::vector<Waveform>& waveforms, int) {
  // One forward call per clip: identical clips embed bit-identically no
  // matter how a caller groups them (batched GEMM kernels are not exact
  // across column positions).
  const int n = static_cast<int>(waveforms.size());
  Eigen::MatrixXd out(encoder.config().embed_dim, n);
  for (int i = 0; i < n; ++i) {
    MfccSequence feat = mfcc(waveforms[i], dsp);
    std::vector<const MfccSequence*> batch{&feat};
    nn::Mat<float> emb = encoder.forward(batch, nn::Mode::kInfer);
    out.col(i) = emb.col(0).cast<double>();
  }
  return out;
}

EnrollmentProfile enroll(nn::Encoder<float>& encoder, const DspConfig& dsp,
                         const std::vector<std::pair<std::string, std::vector<Waveform>>>& supports,
                         Distance distance) {
  if (supports.empty()) throw Error("enroll: empty keyword list");
  EnrollmentProfile profile;
  profile.distance = distance;
  profile.dsp_hash = dsp_config_hash(dsp);
  profile.prototypes.resize(encoder.config().embed_dim, static_cast<Eigen::Index>(supports.size()));
  for (std::size_t i = 0; i < supports.size(); ++i) {
    const auto& [keyword, waves] = supports[i];
    if (waves.empty()) throw Error("enroll: keyword " + keyword + " has no supports");
    Eigen::MatrixXd emb = embed_waveforms(encoder, dsp, waves);
    profile.prototypes.col(static_cast<Eigen::Index>(i)) = emb.rowwise().mean();
    profile.keywords.push_back(keyword);
  }
  return profile;
}

DetectionResult detect_embedding(const EnrollmentProfile& profile, const Eigen::VectorXd& embedding,
                                 const DetectionConfig& cfg) {
  if (profile.prototypes.cols() == 0) throw Error("detect: empty profile");
  if (embedding.size() != profile.prototypes.rows())
    throw Error("detect: embedding dimension mismatch");
  if (cfg.distance != profile.distance)
    throw ConfigError("detect: distance metric disagrees with the enrollment profile");

  Eigen::MatrixXd q = embedding;
  Eigen::MatrixXd d = pairwise_distances<double>(q, profile.prototypes, cfg.distance);
  DetectionResult res;
  res.all_distances = d.row(0).transpose();
  res.candidate = nearest_index<double>(res.all_distances);
  res.distance_to_candidate = res.all_distances(res.candidate);
  res.predicted = res.distance_to_candidate < cfg.d_th ? res.candidate : kUnknownClass;
  return res;
}

DetectionResult detect(nn::Encoder<float>& encoder, const DspConfig& dsp,
                       const EnrollmentProfile& profile, const Waveform& query,
                       const DetectionConfig& cfg) {
  if (profile.dsp_hash != 0 && profile.dsp_hash != dsp_config_hash(dsp))
    throw ConfigError("detect: dsp config does not match the enrollment profile");
  Eigen::MatrixXd emb = embed_waveforms(encoder, dsp, {query});
  return detect_embedding(profile, emb.col(0), cfg);
}

void save_profile(const std::filesystem::path& path, const EnrollmentProfile& profile) {
  nlohmann::json j;
  j["version"] = 1;
  j["distance"] = distance_to_string(profile.distance);
  // Infinity (threshold disabled) is stored as null; JSON has no inf.
  j["d_th"] = std::isfinite(profile.d_th) ? nlohmann::json(profile.d_th) : nlohmann::json();
  j["dsp_hash"] = profile.dsp_hash;
  j["checkpoint_hash"] = profile.checkpoint_hash;
  j["keywords"] = profile.keywords;
  std::vector<std::vector<double>> protos;
  for (Eigen::Index c = 0; c < profile.prototypes.cols(); ++c) {
    std::vector<double> col(profile.prototypes.rows());
    for (Eigen::Index r = 0; r < profile.prototypes.rows(); ++r) col[r] = profile.prototypes(r, c);
    protos.push_back(std::move(col));
  }
  j["prototypes"] = protos;
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("profile: cannot open " + path.string());
  os << j.dump(2) << '\n';
  if (!os) throw IoError("profile: write failed: " + path.string());
}

EnrollmentProfile load_profile(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("profile: cannot open " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("profile: parse error in " + path.string() + ": " + e.what());
  }
  if (j.value("version", 0) != 1) throw IoError("profile: unsupported version in " + path.string());
  EnrollmentProfile p;
  p.distance = distance_from_string(j.at("distance").get<std::string>());
  p.d_th = j.at("d_th").is_null() ? std::numeric_limits<double>::infinity()
                                  : j.at("d_th").get<double>();
  p.dsp_hash = j.at("dsp_hash").get<std::uint64_t>();
  p.checkpoint_hash = j.at("checkpoint_hash").get<std::uint64_t>();
  j.at("keywords").get_to(p.keywords);
  const auto protos = j.at("prototypes").get<std::vector<std::vector<double>>>();
  if (protos.size() != p.keywords.size()) throw IoError("profile: prototype/keyword count mismatch");
  if (protos.empty()) throw IoError("profile: no prototypes");
  p.prototypes.resize(static_cast<Eigen::Index>(protos[0].size()),
                      static_cast<Eigen::Index>(protos.size()));
  for (std::size_t c = 0; c < protos.size(); ++c) {
    if (protos[c].size() != protos[0].size()) throw IoError("profile: ragged prototype matrix");
    for (std::size_t r = 0; r < protos[c].size(); ++r)
      p.prototypes(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = protos[c][r];
  }
  return p;
}

void export_embeddings(nn::Encoder<float>& encoder, const DspConfig& dsp,
                       const std::vector<std::tuple<std::string, std::string, Waveform>>& items,
                       const std::filesystem::path& out) {
  std::FILE* os = std::fopen(out.c_str(), "w");
  if (!os) throw IoError("export_embeddings: cannot open " + out.string());
  std::vector<Waveform> waves;
  waves.reserve(items.size());
  for (const auto& [label, id, wav] : items) waves.push_back(wav);
  Eigen::MatrixXd emb = embed_waveforms(encoder, dsp, waves);
  for (std::size_t i = 0; i < items.size(); ++i) {
    std::fprintf(os, "%s\t%s\t", std::get<0>(items[i]).c_str(), std::get<1>(items[i]).c_str());
    for (Eigen::Index r = 0; r < emb.rows(); ++r)
      std::fprintf(os, "%s%.9g", r ? " " : "", emb(r, static_cast<Eigen::Index>(i)));
    std::fprintf(os, "\n");
  }
  if (std::fclose(os) != 0) throw IoError("export_embeddings: write failed: " + out.string());
}

}  // namespace fskws
