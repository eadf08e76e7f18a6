#pragma once

#include <filesystem>
#include <limits>
#include <tuple>

#include "fskws/dsp.hpp"
#include "fskws/nn/encoder.hpp"
#include "fskws/protonet.hpp"

namespace fskws {

inline constexpr int kUnknownClass = -1;

// Prototypes of the enrolled keywords plus the configuration fingerprints
// that must match at query time. Immutable after enrollment.
struct EnrollmentProfile {
  Eigen::MatrixXd prototypes;  // embed_dim x n_keywords
  std::vector<std::string> keywords;
  Distance distance = Distance::kSquaredEuclidean;
  double d_th = std::numeric_limits<double>::infinity();
  std::uint64_t dsp_hash = 0;
  std::uint64_t checkpoint_hash = 0;
};

struct DetectionConfig {
  double d_th = std::numeric_limits<double>::infinity();
  Distance distance = Distance::kSquaredEuclidean;
};

struct DetectionResult {
  int predicted = kUnknownClass;  // keyword index, or kUnknownClass on rejection
  int candidate = 0;              // argmin-distance keyword, ties to lowest index
  double distance_to_candidate = 0.0;
  Eigen::VectorXd all_distances;
};

std::uint64_t dsp_config_hash(const DspConfig& cfg);

// Embeds waveforms in inference mode, batched. embed_dim x n.
Eigen::MatrixXd embed_waveforms(nn::Encoder<float>& encoder, const DspConfig& dsp,
                                const std::vector<Waveform>& waveforms, int max_batch = 64);

// Prototype per keyword = mean of its support embeddings (inference mode).
EnrollmentProfile enroll(nn::Encoder<float>& encoder, const DspConfig& dsp,
                         const std::vector<std::pair<std::string, std::vector<Waveform>>>& supports,
                         Distance distance);

// Threshold rule on a raw embedding; the test seam that bypasses audio.
// predicted == candidate iff distance_to_candidate < d_th (strict).
DetectionResult detect_embedding(const EnrollmentProfile& profile, const Eigen::VectorXd& embedding,
                                 const DetectionConfig& cfg);

DetectionResult detect(nn::Encoder<float>& encoder, const DspConfig& dsp,
                       const EnrollmentProfile& profile, const Waveform& query,
                       const DetectionConfig& cfg);

// Versioned JSON profile file.
void save_profile(const std::filesystem::path& path, const EnrollmentProfile& profile);
EnrollmentProfile load_profile(const std::filesystem::path& path);

// Line-delimited embedding export: "<label>\t<id>\t<v0> <v1> ...".
// Values are printed with enough digits to round-trip float32 exactly.
void export_embeddings(nn::Encoder<float>& encoder, const DspConfig& dsp,
                       const std::vector<std::tuple<std::string, std::string, Waveform>>& items,
                       const std::filesystem::path& out);

}  // namespace fskws
