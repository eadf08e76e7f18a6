#pragma once

#include <filesystem>
#include <string>

#include "fskws/waveform.hpp"

namespace fskws {

// RIFF/WAVE reader restricted to mono 16 kHz PCM16 or float32 files.
// PCM16 samples are scaled by 2^-15 into [-1, 1). Unsupported channel
// counts, encodings and sample rates are reported as distinct errors.
Waveform read_wav(const std::filesystem::path& path);

// Writes mono PCM16 at the waveform's sample rate. Out-of-range samples
// are clipped; the number of clipped samples is returned.
// read_wav(write_wav(w)) recovers w within one 16-bit quantization step.
int write_wav(const std::filesystem::path& path, const Waveform& w);

}  // namespace fskws
