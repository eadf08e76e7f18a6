#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>

#include "fskws/augment.hpp"
#include "fskws/dsp.hpp"
#include "fskws/sample_source.hpp"

namespace fskws {

struct BufferConfig {
  int m_buffer = 32768;
  int m_update = 1;
  int k_shots = 5;
  int n_way = 512;

  void validate() const;
};

// One buffered class: exactly k_shots + 1 featurized views, generated and
// augmented once at insertion time.
struct BufferSlot {
  KeywordClass cls;
  std::vector<MfccSequence> views;
  std::vector<std::uint64_t> view_seeds;
  std::uint64_t slot_seed = 0;
  std::uint64_t insert_order = 0;
};

// One training episode: n_way distinct buffer slots with a per-slot
// permutation assigning support and query roles among the K+1 views.
// view_order[0..k) are supports, view_order[k] is the query.
struct Episode {
  struct Item {
    std::uint64_t class_id = 0;
    int slot_index = 0;
    std::vector<int> view_order;
  };
  std::vector<Item> items;
  int k_shots = 0;
};

// FIFO reservoir of m_buffer classes x (K+1) samples. Refreshed by
// m_update classes per training iteration; episodes are drawn uniformly
// without replacement. Single writer (refresh) and single reader
// (sample_episode) alternate; slot generation may fan out over workers.
class EpisodeBuffer {
 public:
  // Fills the buffer with m_buffer freshly generated slots. `aug` may be
  // null to disable augmentation. One value is drawn from `rng` to derive
  // all slot seeds, so identical seeds rebuild identical buffers
  // regardless of worker count.
  EpisodeBuffer(const SampleSource& source, const BufferConfig& cfg, const AugmentConfig* aug,
                const DspConfig& dsp, Rng& rng, int workers = 1);

  // Uniform sample of n_way distinct slots plus per-slot view permutations.
  Episode sample_episode(Rng& rng) const;

  // Removes the m_update oldest slots and appends m_update new ones.
  void refresh();

  int size() const { return static_cast<int>(slots_.size()); }
  const BufferSlot& slot(int i) const { return slots_[i]; }
  const BufferConfig& config() const { return cfg_; }
  const AugmentStats& augment_stats() const { return aug_stats_; }

  // Features of an episode in class-major order: item n's supports at
  // [n*(k+1), n*(k+1)+k), its query at n*(k+1)+k.
  std::vector<const MfccSequence*> episode_features(const Episode& ep) const;

  // One line per slot: insert order, slot seed, class, view seeds.
  void dump_manifest(const std::filesystem::path& path) const;

 private:
  BufferSlot generate_slot(std::uint64_t counter, AugmentStats* stats) const;

  const SampleSource& source_;
  BufferConfig cfg_;
  bool has_aug_ = false;
  AugmentConfig aug_;
  DspConfig dsp_;
  std::uint64_t gen_seed_ = 0;
  std::uint64_t next_counter_ = 0;
  std::deque<BufferSlot> slots_;
  AugmentStats aug_stats_;
};

}  // namespace fskws
