#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fskws/inference.hpp"
#include "fskws/oracle_source.hpp"

using namespace fskws;
namespace fs = std::filesystem;

namespace {

nn::EncoderConfig tiny_encoder() {
  nn::EncoderConfig cfg;
  cfg.width_multiplier = 1;
  cfg.base_channels = {8, 12, 16, 24};
  cfg.gru_hidden = 16;
  cfg.embed_dim = 16;
  return cfg;
}

EnrollmentProfile toy_profile() {
  EnrollmentProfile p;
  p.prototypes.resize(2, 2);
  p.prototypes.col(0) << 0.0, 0.0;
  p.prototypes.col(1) << 10.0, 0.0;
  p.keywords = {"zero", "ten"};
  p.distance = Distance::kEuclidean;
  return p;
}

}  // namespace

TEST_CASE("injected embedding detection on a hand-computed profile") {
  EnrollmentProfile p = toy_profile();
  DetectionConfig cfg;
  cfg.distance = Distance::kEuclidean;
  cfg.d_th = 5.0;
  Eigen::VectorXd q(2);
  q << 1.0, 0.0;
  DetectionResult res = detect_embedding(p, q, cfg);
  CHECK(res.candidate == 0);
  CHECK(res.distance_to_candidate == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(res.predicted == 0);
  CHECK(res.all_distances(1) == doctest::Approx(9.0).epsilon(1e-12));
}

TEST_CASE("infinite threshold always accepts the candidate") {
  EnrollmentProfile p = toy_profile();
  DetectionConfig cfg;
  cfg.distance = Distance::kEuclidean;
  cfg.d_th = std::numeric_limits<double>::infinity();
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd q(2);
    q << rng.uniform(-20.0, 20.0), rng.uniform(-20.0, 20.0);
    DetectionResult res = detect_embedding(p, q, cfg);
    CHECK(res.predicted == res.candidate);
  }
}

TEST_CASE("zero threshold always rejects (strict inequality)") {
  EnrollmentProfile p = toy_profile();
  DetectionConfig cfg;
  cfg.distance = Distance::kEuclidean;
  cfg.d_th = 0.0;
  Eigen::VectorXd q = p.prototypes.col(0);  // distance exactly 0
  DetectionResult res = detect_embedding(p, q, cfg);
  CHECK(res.candidate == 0);
  CHECK(res.distance_to_candidate == 0.0);
  CHECK(res.predicted == kUnknownClass);
}

TEST_CASE("threshold sweep is monotone and never changes the candidate") {
  EnrollmentProfile p = toy_profile();
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd q(2);
    q << rng.uniform(-15.0, 15.0), rng.uniform(-5.0, 5.0);
    bool accepted_before = false;
    int candidate = -1;
    for (int t = 0; t <= 100; ++t) {
      DetectionConfig cfg;
      cfg.distance = Distance::kEuclidean;
      cfg.d_th = 0.2 * t;
      DetectionResult res = detect_embedding(p, q, cfg);
      if (candidate < 0) candidate = res.candidate;
      CHECK(res.candidate == candidate);
      const bool accepted = res.predicted != kUnknownClass;
      if (accepted_before) CHECK(accepted);  // raising d_th never revokes
      accepted_before = accepted;
    }
  }
}

TEST_CASE("metric mismatch with the profile is rejected") {
  EnrollmentProfile p = toy_profile();
  DetectionConfig cfg;
  cfg.distance = Distance::kSquaredEuclidean;
  Eigen::VectorXd q = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(detect_embedding(p, q, cfg), ConfigError);
}

TEST_CASE("enrollment prototypes are support means, idempotent under duplication") {
  OracleGenConfig ocfg;
  ocfg.l_min = 4;
  ocfg.l_max = 6;
  ocfg.unit_duration_range_s = {0.05, 0.09};
  OracleSource source(ocfg);
  DspConfig dsp;
  nn::Encoder<float> enc(tiny_encoder());
  Rng rng(7);
  enc.init_params(rng);

  std::vector<std::pair<std::string, std::vector<Waveform>>> supports;
  for (int c = 0; c < 2; ++c) {
    KeywordClass cls = source.new_class(rng);
    std::vector<Waveform> waves;
    for (int k = 0; k < 5; ++k) waves.push_back(source.render(cls, rng));
    supports.emplace_back("kw" + std::to_string(c), std::move(waves));
  }

  EnrollmentProfile p = enroll(enc, dsp, supports, Distance::kSquaredEuclidean);
  REQUIRE(p.prototypes.cols() == 2);
  CHECK(p.keywords == std::vector<std::string>{"kw0", "kw1"});

  // Brute-force mean oracle.
  for (int c = 0; c < 2; ++c) {
    Eigen::MatrixXd emb = embed_waveforms(enc, dsp, supports[c].second);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(emb.rows());
    for (int k = 0; k < emb.cols(); ++k) mean += emb.col(k);
    mean /= static_cast<double>(emb.cols());
    CHECK((p.prototypes.col(c) - mean).cwiseAbs().maxCoeff() <= 1e-12);
  }

  // Duplicating every support leaves prototypes unchanged.
  auto doubled = supports;
  for (auto& [kw, waves] : doubled) {
    auto copy = waves;
    waves.insert(waves.end(), copy.begin(), copy.end());
  }
  EnrollmentProfile p2 = enroll(enc, dsp, doubled, Distance::kSquaredEuclidean);
  CHECK((p.prototypes - p2.prototypes).cwiseAbs().maxCoeff() <= 1e-12);

  // Single-support enrollment equals the embedding itself.
  std::vector<std::pair<std::string, std::vector<Waveform>>> singles = {
      {"solo", {supports[0].second[0]}}};
  EnrollmentProfile p3 = enroll(enc, dsp, singles, Distance::kSquaredEuclidean);
  Eigen::MatrixXd emb = embed_waveforms(enc, dsp, {supports[0].second[0]});
  CHECK((p3.prototypes.col(0) - emb.col(0)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("profile file round trips") {
  EnrollmentProfile p = toy_profile();
  p.d_th = 3.25;
  p.dsp_hash = 0xabcdef;
  p.checkpoint_hash = 0x123456;
  const fs::path path = fs::temp_directory_path() / "fskws_profile.json";
  save_profile(path, p);
  EnrollmentProfile q = load_profile(path);
  CHECK(q.keywords == p.keywords);
  CHECK(q.d_th == p.d_th);
  CHECK(q.dsp_hash == p.dsp_hash);
  CHECK(q.checkpoint_hash == p.checkpoint_hash);
  CHECK(q.distance == p.distance);
  CHECK((q.prototypes - p.prototypes).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("empty keyword list cannot be enrolled") {
  nn::Encoder<float> enc(tiny_encoder());
  Rng rng(9);
  enc.init_params(rng);
  std::vector<std::pair<std::string, std::vector<Waveform>>> empty;
  CHECK_THROWS_WITH_AS(enroll(enc, DspConfig{}, empty, Distance::kEuclidean),
                       doctest::Contains("empty"), Error);
}

TEST_CASE("export writes one parseable record per item") {
  OracleGenConfig ocfg;
  ocfg.l_min = 4;
  ocfg.l_max = 5;
  OracleSource source(ocfg);
  nn::Encoder<float> enc(tiny_encoder());
  Rng rng(11);
  enc.init_params(rng);
  DspConfig dsp;

  std::vector<std::tuple<std::string, std::string, Waveform>> items;
  KeywordClass cls = source.new_class(rng);
  Waveform w = source.render(cls, rng);
  for (int i = 0; i < 7; ++i) items.emplace_back("kw", "clip" + std::to_string(i), w);

  const fs::path path = fs::temp_directory_path() / "fskws_export.tsv";
  export_embeddings(enc, dsp, items, path);

  std::ifstream is(path);
  std::string line;
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    std::vector<double> values;
    const auto second_tab = line.find('\t', line.find('\t') + 1);
    std::istringstream ls(line.substr(second_tab + 1));
    double v;
    while (ls >> v) values.push_back(v);
    rows.push_back(values);
    CHECK(values.size() == 16);
  }
  REQUIRE(rows.size() == 7);

  // Identical clips give identical embedding rows; text round trip is
  // within 1e-6 relative of the computed embedding.
  Eigen::MatrixXd emb = embed_waveforms(enc, dsp, {w});
  for (const auto& row : rows) {
    for (int r = 0; r < 16; ++r) {
      CHECK(row[r] == rows[0][r]);
      const double denom = std::max(1.0, std::abs(emb(r, 0)));
      CHECK(std::abs(row[r] - emb(r, 0)) / denom <= 1e-6);
    }
  }
}
