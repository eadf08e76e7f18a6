#pragma once

#include <filesystem>

#include "fskws/nn/adam.hpp"
#include "fskws/nn/encoder.hpp"

namespace fskws {

// Full training state: encoder config and tensors, batch-norm running
// statistics, Adam moments, rng stream states and the step counter.
// The on-disk format is versioned binary and round-trips byte exactly.
struct CheckpointData {
  explicit CheckpointData(nn::EncoderConfig cfg) : encoder(std::move(cfg)) {}

  nn::Encoder<float> encoder;
  nn::AdamState<float> adam;
  std::int64_t step = 0;
  std::string distance = "squared_euclidean";
  std::string train_rng_state;
  std::string gen_rng_state;
};

// Atomic (write-temp-then-rename).
void save_checkpoint(const std::filesystem::path& path, nn::Encoder<float>& encoder,
                     const nn::AdamState<float>& adam, std::int64_t step,
                     const std::string& distance, const std::string& train_rng_state,
                     const std::string& gen_rng_state);

CheckpointData load_checkpoint(const std::filesystem::path& path);

// FNV-1a over the file bytes; binds enrollment profiles to a checkpoint.
std::uint64_t file_hash(const std::filesystem::path& path);

}  // namespace fskws
