#pragma once

#include <filesystem>
#include <functional>
#include <optional>

#include "fskws/checkpoint.hpp"
#include "fskws/episode_buffer.hpp"
#include "fskws/protonet.hpp"

namespace fskws {

struct TrainConfig {
  int n_way = 512;
  int k_shots = 5;
  std::int64_t total_steps = 300000;
  double lr = 0.001;
  double lr_min = 0.0;
  Distance distance = Distance::kSquaredEuclidean;
  std::int64_t checkpoint_every = 10000;

  void validate() const;
};

struct TrainProgress {
  std::int64_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct TrainResult {
  std::vector<double> losses;
  std::filesystem::path final_checkpoint;
  std::int64_t steps_run = 0;
};

// Episodic training loop: sample an episode from the buffer, run the
// encoder in train mode, apply the prototypical loss, back-propagate,
// take an Adam step on the cosine schedule, then refresh the buffer by
// m_update classes. Writes loss.tsv (step, lr, loss) and periodic plus
// final checkpoints under out_dir. Fully reproducible from the seed.
TrainResult train(const SampleSource& source, const BufferConfig& buf_cfg,
                  const AugmentConfig* aug, const DspConfig& dsp,
                  const nn::EncoderConfig& enc_cfg, const TrainConfig& cfg, std::uint64_t seed,
                  const std::filesystem::path& out_dir, int workers = 1,
                  const std::optional<std::filesystem::path>& resume = std::nullopt,
                  const std::function<void(const TrainProgress&)>& on_step = nullptr);

}  // namespace fskws
