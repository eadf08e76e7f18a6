#include "fskws/episode_buffer.hpp"

#include <fstream>

#include "fskws/error.hpp"
#include "fskws/parallel.hpp"

namespace fskws {

void BufferConfig::validate() const {
  if (k_shots < 1) throw ConfigError("buffer: k_shots must be >= 1");
  if (m_buffer < 1) throw ConfigError("buffer: m_buffer must be >= 1");
  if (m_update < 0) throw ConfigError("buffer: m_update must be >= 0");
  if (!(m_update <= n_way && n_way <= m_buffer))
    throw ConfigError("buffer: require m_update <= n_way <= m_buffer");
}

EpisodeBuffer::EpisodeBuffer(const SampleSource& source, const BufferConfig& cfg,
                             const AugmentConfig* aug, const DspConfig& dsp, Rng& rng, int workers)
    : source_(source), cfg_(cfg), has_aug_(aug != nullptr), dsp_(dsp) {
  cfg_.validate();
  dsp_.validate();
  if (aug) {
    aug->validate();
    aug_ = *aug;
  }
  gen_seed_ = rng.next_u64();

  std::vector<BufferSlot> initial(cfg_.m_buffer);
  std::vector<AugmentStats> stats(cfg_.m_buffer);
  parallel_for(cfg_.m_buffer, workers,
               [&](int i) { initial[i] = generate_slot(static_cast<std::uint64_t>(i), &stats[i]); });
  next_counter_ = static_cast<std::uint64_t>(cfg_.m_buffer);
  for (auto& slot : initial) slots_.push_back(std::move(slot));
  for (const auto& s : stats) {
    aug_stats_.calls += s.calls;
    aug_stats_.reverb_applied += s.reverb_applied;
    aug_stats_.noise_applied += s.noise_applied;
    aug_stats_.clipped_samples += s.clipped_samples;
  }
}

BufferSlot EpisodeBuffer::generate_slot(std::uint64_t counter, AugmentStats* stats) const {
  BufferSlot slot;
  slot.insert_order = counter;
  slot.slot_seed = splitmix64(gen_seed_ ^ splitmix64(counter));
  Rng slot_rng(slot.slot_seed);
  slot.cls = source_.new_class(slot_rng);

  const int n_views = cfg_.k_shots + 1;
  slot.views.resize(n_views);
  slot.view_seeds.resize(n_views);
  for (int j = 0; j < n_views; ++j) {
    slot.view_seeds[j] = splitmix64(slot.slot_seed ^ splitmix64(0x100 + j));
    Rng view_rng(slot.view_seeds[j]);
    Waveform w = source_.render(slot.cls, view_rng);
    if (has_aug_) w = augment(w, aug_, view_rng, stats);
    slot.views[j] = mfcc(w, dsp_);
  }
  return slot;
}

Episode EpisodeBuffer::sample_episode(Rng& rng) const {
  if (cfg_.n_way > size())
    throw Error("buffer: n_way " + std::to_string(cfg_.n_way) + " exceeds buffer size " +
                std::to_string(size()));
  Episode ep;
  ep.k_shots = cfg_.k_shots;
  const std::vector<int> chosen = sample_without_replacement(size(), cfg_.n_way, rng);
  ep.items.reserve(chosen.size());
  for (int idx : chosen) {
    Episode::Item item;
    item.slot_index = idx;
    item.class_id = slots_[idx].cls.id;
    item.view_order.resize(cfg_.k_shots + 1);
    for (int j = 0; j <= cfg_.k_shots; ++j) item.view_order[j] = j;
    shuffle(item.view_order, rng);
    ep.items.push_back(std::move(item));
  }
  return ep;
}

void EpisodeBuffer::refresh() {
  for (int i = 0; i < cfg_.m_update; ++i) {
    slots_.pop_front();
    slots_.push_back(generate_slot(next_counter_++, &aug_stats_));
  }
}

std::vector<const MfccSequence*> EpisodeBuffer::episode_features(const Episode& ep) const {
  std::vector<const MfccSequence*> out;
  out.reserve(ep.items.size() * (ep.k_shots + 1));
  for (const auto& item : ep.items) {
    const BufferSlot& slot = slots_[item.slot_index];
    for (int j = 0; j <= ep.k_shots; ++j) out.push_back(&slot.views[item.view_order[j]]);
  }
  return out;
}

void EpisodeBuffer::dump_manifest(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("buffer manifest: cannot open " + path.string());
  for (const auto& slot : slots_) {
    os << slot.insert_order << '\t' << std::hex << slot.slot_seed << '\t' << slot.cls.id << std::dec
       << '\t';
    if (!slot.cls.name.empty()) os << slot.cls.name;
    for (std::size_t i = 0; i < slot.cls.unit_ids.size(); ++i)
      os << (i ? " " : "") << slot.cls.unit_ids[i];
    os << '\t' << std::hex;
    for (std::size_t i = 0; i < slot.view_seeds.size(); ++i)
      os << (i ? " " : "") << slot.view_seeds[i];
    os << std::dec << '\n';
  }
  if (!os) throw IoError("buffer manifest: write failed: " + path.string());
}

}  // namespace fskws
