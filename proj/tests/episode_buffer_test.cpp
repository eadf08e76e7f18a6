#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "fskws/episode_buffer.hpp"
#include "fskws/oracle_source.hpp"

using namespace fskws;

namespace {

// Small, fast synthetic source for buffer tests.
OracleGenConfig fast_oracle() {
  OracleGenConfig cfg;
  cfg.l_min = 2;
  cfg.l_max = 4;
  cfg.unit_duration_range_s = {0.06, 0.1};
  return cfg;
}

DspConfig fast_dsp() { return DspConfig{}; }

BufferConfig small_buffer(int m_buffer, int k, int n_way, int m_update = 1) {
  BufferConfig cfg;
  cfg.m_buffer = m_buffer;
  cfg.k_shots = k;
  cfg.n_way = n_way;
  cfg.m_update = m_update;
  return cfg;
}

}  // namespace

TEST_CASE("init fills m_buffer slots of k+1 views") {
  OracleSource src(fast_oracle());
  Rng rng(1);
  EpisodeBuffer buf(src, small_buffer(4, 2, 2), nullptr, fast_dsp(), rng);
  CHECK(buf.size() == 4);
  int views = 0;
  for (int i = 0; i < buf.size(); ++i) views += static_cast<int>(buf.slot(i).views.size());
  CHECK(views == 12);
}

TEST_CASE("all class ids are distinct after init") {
  OracleSource src(fast_oracle());
  Rng rng(2);
  EpisodeBuffer buf(src, small_buffer(16, 1, 4), nullptr, fast_dsp(), rng);
  std::set<std::uint64_t> ids;
  for (int i = 0; i < buf.size(); ++i) ids.insert(buf.slot(i).cls.id);
  CHECK(ids.size() == 16);
}

TEST_CASE("episode covers the whole buffer when n_way equals m_buffer") {
  OracleSource src(fast_oracle());
  Rng rng(3);
  EpisodeBuffer buf(src, small_buffer(4, 1, 4), nullptr, fast_dsp(), rng);
  Episode ep = buf.sample_episode(rng);
  std::set<int> slots;
  for (const auto& item : ep.items) slots.insert(item.slot_index);
  CHECK(slots.size() == 4);
}

TEST_CASE("episode class ids are pairwise distinct") {
  OracleSource src(fast_oracle());
  Rng rng(4);
  EpisodeBuffer buf(src, small_buffer(8, 1, 4), nullptr, fast_dsp(), rng);
  for (int i = 0; i < 20; ++i) {
    Episode ep = buf.sample_episode(rng);
    std::set<std::uint64_t> ids;
    for (const auto& item : ep.items) ids.insert(item.class_id);
    CHECK(ids.size() == ep.items.size());
  }
}

TEST_CASE("slot inclusion frequency is near uniform") {
  OracleSource src(fast_oracle());
  Rng rng(5);
  EpisodeBuffer buf(src, small_buffer(8, 1, 2), nullptr, fast_dsp(), rng);
  std::vector<int> hits(8, 0);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    Episode ep = buf.sample_episode(rng);
    for (const auto& item : ep.items) ++hits[item.slot_index];
  }
  for (int h : hits) {
    const double freq = static_cast<double>(h) / draws;
    CHECK(freq >= 0.23);
    CHECK(freq <= 0.27);
  }
}

TEST_CASE("refresh is fifo") {
  OracleSource src(fast_oracle());
  Rng rng(6);
  EpisodeBuffer buf(src, small_buffer(4, 1, 2), nullptr, fast_dsp(), rng);
  std::vector<std::uint64_t> before;
  for (int i = 0; i < 4; ++i) before.push_back(buf.slot(i).cls.id);
  buf.refresh();
  CHECK(buf.size() == 4);
  // Oldest removed, order preserved, one new slot appended.
  CHECK(buf.slot(0).cls.id == before[1]);
  CHECK(buf.slot(1).cls.id == before[2]);
  CHECK(buf.slot(2).cls.id == before[3]);
  CHECK(buf.slot(3).cls.id != before[0]);
  CHECK(buf.slot(3).insert_order == 4);
}

TEST_CASE("after m_buffer refreshes no original class remains") {
  OracleSource src(fast_oracle());
  Rng rng(7);
  EpisodeBuffer buf(src, small_buffer(4, 1, 2), nullptr, fast_dsp(), rng);
  std::set<std::uint64_t> original;
  for (int i = 0; i < 4; ++i) original.insert(buf.slot(i).cls.id);
  for (int i = 0; i < 4; ++i) buf.refresh();
  for (int i = 0; i < 4; ++i) CHECK(original.count(buf.slot(i).cls.id) == 0);
}

TEST_CASE("m_update zero keeps the buffer unchanged") {
  OracleSource src(fast_oracle());
  Rng rng(8);
  EpisodeBuffer buf(src, small_buffer(4, 1, 2, 0), nullptr, fast_dsp(), rng);
  std::vector<std::uint64_t> before;
  for (int i = 0; i < 4; ++i) before.push_back(buf.slot(i).cls.id);
  buf.refresh();
  for (int i = 0; i < 4; ++i) CHECK(buf.slot(i).cls.id == before[i]);
}

TEST_CASE("n_way larger than the buffer is an error") {
  OracleSource src(fast_oracle());
  Rng rng(9);
  BufferConfig cfg = small_buffer(4, 1, 4);
  EpisodeBuffer buf(src, cfg, nullptr, fast_dsp(), rng);
  // Make an episode request that exceeds the current size via config abuse.
  BufferConfig bad = cfg;
  bad.n_way = 5;
  bad.m_buffer = 3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("episode sampling never mutates buffer contents") {
  OracleSource src(fast_oracle());
  Rng rng(10);
  EpisodeBuffer buf(src, small_buffer(4, 2, 2), nullptr, fast_dsp(), rng);
  const Eigen::MatrixXd snapshot = buf.slot(0).views[0].frames;
  for (int i = 0; i < 10; ++i) buf.sample_episode(rng);
  CHECK((buf.slot(0).views[0].frames.array() == snapshot.array()).all());
}

TEST_CASE("buffer construction is identical regardless of worker count") {
  OracleSource src(fast_oracle());
  Rng a(11), b(11);
  EpisodeBuffer one(src, small_buffer(6, 1, 2), nullptr, fast_dsp(), a, 1);
  EpisodeBuffer two(src, small_buffer(6, 1, 2), nullptr, fast_dsp(), b, 4);
  for (int i = 0; i < 6; ++i) {
    CHECK(one.slot(i).cls.id == two.slot(i).cls.id);
    CHECK((one.slot(i).views[0].frames.array() == two.slot(i).views[0].frames.array()).all());
  }
}

TEST_CASE("episode features follow the class-major layout") {
  OracleSource src(fast_oracle());
  Rng rng(12);
  EpisodeBuffer buf(src, small_buffer(4, 2, 2), nullptr, fast_dsp(), rng);
  Episode ep = buf.sample_episode(rng);
  const auto feats = buf.episode_features(ep);
  REQUIRE(feats.size() == 2 * 3);
  for (std::size_t n = 0; n < ep.items.size(); ++n) {
    const auto& slot = buf.slot(ep.items[n].slot_index);
    for (int j = 0; j <= ep.k_shots; ++j)
      CHECK(feats[n * 3 + j] == &slot.views[ep.items[n].view_order[j]]);
  }
}

TEST_CASE("manifest lists one line per slot") {
  OracleSource src(fast_oracle());
  Rng rng(13);
  EpisodeBuffer buf(src, small_buffer(5, 1, 2), nullptr, fast_dsp(), rng);
  const auto path = std::filesystem::temp_directory_path() / "fskws_buffer_manifest.tsv";
  buf.dump_manifest(path);
  std::ifstream is(path);
  int lines = 0;
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) ++lines;
  CHECK(lines == 5);
}
