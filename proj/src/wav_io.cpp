#include "fskws/wav_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace fskws {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xfffe;

struct FmtChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits_per_sample = 0;
};

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint16_t read_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

void write_u32(std::ostream& os, std::uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

void write_u16(std::ostream& os, std::uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  os.write(b, 2);
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("read_wav: cannot open " + path.string());

  char tag[4];
  is.read(tag, 4);
  if (!is || std::memcmp(tag, "RIFF", 4) != 0)
    throw IoError("read_wav: not a RIFF file: " + path.string());
  read_u32(is);  // riff size, unused
  is.read(tag, 4);
  if (!is || std::memcmp(tag, "WAVE", 4) != 0)
    throw IoError("read_wav: not a WAVE file: " + path.string());

  FmtChunk fmt;
  bool have_fmt = false;
  std::vector<char> data;
  bool have_data = false;

  while (is.read(tag, 4)) {
    std::uint32_t chunk_size = read_u32(is);
    if (!is) break;
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      fmt.format = read_u16(is);
      fmt.channels = read_u16(is);
      fmt.sample_rate = read_u32(is);
      read_u32(is);  // byte rate
      read_u16(is);  // block align
      fmt.bits_per_sample = read_u16(is);
      if (chunk_size > 16) is.seekg(chunk_size - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      data.resize(chunk_size);
      is.read(data.data(), chunk_size);
      if (!is) throw IoError("read_wav: truncated data chunk: " + path.string());
      have_data = true;
    } else {
      is.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
    }
  }
  if (!have_fmt || !have_data)
    throw IoError("read_wav: missing fmt or data chunk: " + path.string());

  if (fmt.format == kFormatExtensible) fmt.format = fmt.bits_per_sample == 32 ? kFormatFloat : kFormatPcm;
  if (fmt.channels != 1)
    throw Error("read_wav: unsupported channel count " + std::to_string(fmt.channels) +
                " (mono required): " + path.string());
  if (fmt.sample_rate != kDefaultSampleRate)
    throw Error("read_wav: unsupported sample rate " + std::to_string(fmt.sample_rate) +
                " (16000 required): " + path.string());

  Waveform w;
  w.sample_rate = static_cast<int>(fmt.sample_rate);
  if (fmt.format == kFormatPcm && fmt.bits_per_sample == 16) {
    std::size_t n = data.size() / 2;
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::int16_t v;
      std::memcpy(&v, data.data() + 2 * i, 2);
      w.samples[i] = static_cast<double>(v) / 32768.0;
    }
  } else if (fmt.format == kFormatFloat && fmt.bits_per_sample == 32) {
    std::size_t n = data.size() / 4;
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      float v;
      std::memcpy(&v, data.data() + 4 * i, 4);
      w.samples[i] = static_cast<double>(v);
    }
  } else {
    throw Error("read_wav: unsupported encoding (format " + std::to_string(fmt.format) + ", " +
                std::to_string(fmt.bits_per_sample) + " bit): " + path.string());
  }
  if (!w.all_finite()) throw Error("read_wav: non-finite sample in " + path.string());
  return w;
}

int write_wav(const std::filesystem::path& path, const Waveform& w) {
  if (w.empty()) throw Error("write_wav: empty waveform");
  if (w.sample_rate <= 0) throw Error("write_wav: non-positive sample rate");

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("write_wav: cannot open " + path.string());

  const std::uint32_t n = static_cast<std::uint32_t>(w.samples.size());
  const std::uint32_t data_bytes = n * 2;

  os.write("RIFF", 4);
  write_u32(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  write_u32(os, 16);
  write_u16(os, kFormatPcm);
  write_u16(os, 1);
  write_u32(os, static_cast<std::uint32_t>(w.sample_rate));
  write_u32(os, static_cast<std::uint32_t>(w.sample_rate) * 2);
  write_u16(os, 2);
  write_u16(os, 16);
  os.write("data", 4);
  write_u32(os, data_bytes);

  int clipped = 0;
  for (double s : w.samples) {
    double x = s;
    if (x > 1.0) {
      x = 1.0;
      ++clipped;
    } else if (x < -1.0) {
      x = -1.0;
      ++clipped;
    }
    double scaled = x * 32768.0;
    if (scaled > 32767.0) scaled = 32767.0;
    std::int16_t v = static_cast<std::int16_t>(std::lrint(scaled));
    char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
    os.write(b, 2);
  }
  if (!os) throw IoError("write_wav: write failed: " + path.string());
  return clipped;
}

}  // namespace fskws
