#include "fskws/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

#include "fskws/error.hpp"
#include "fskws/rng.hpp"

namespace fskws {

namespace {

constexpr char kMagic[8] = {'F', 'S', 'K', 'W', 'C', 'K', 'P', '1'};

void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), 8);
}

void write_i64(std::ostream& os, std::int64_t v) {
  os.write(reinterpret_cast<const char*>(&v), 8);
}

void write_str(std::ostream& os, const std::string& s) {
  write_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

std::int64_t read_i64(std::istream& is) {
  std::int64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

std::string read_str(std::istream& is) {
  const std::uint64_t n = read_u64(is);
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}

void write_tensor(std::ostream& os, const std::string& name, const float* data,
                  std::uint64_t rows, std::uint64_t cols) {
  write_str(os, name);
  write_u64(os, rows);
  write_u64(os, cols);
  os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(rows * cols * 4));
}

nlohmann::json encoder_config_json(const nn::EncoderConfig& c) {
  return nlohmann::json{{"input_dim", c.input_dim},
                        {"width_multiplier", c.width_multiplier},
                        {"base_channels", c.base_channels},
                        {"first_kernel", c.first_kernel},
                        {"block_kernel", c.block_kernel},
                        {"block_strides", c.block_strides},
                        {"gru_hidden", c.gru_hidden},
                        {"embed_dim", c.embed_dim},
                        {"bn_momentum", c.bn_momentum},
                        {"bn_eps", c.bn_eps},
                        {"min_frames", c.min_frames}};
}

nn::EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  nn::EncoderConfig c;
  j.at("input_dim").get_to(c.input_dim);
  j.at("width_multiplier").get_to(c.width_multiplier);
  j.at("base_channels").get_to(c.base_channels);
  j.at("first_kernel").get_to(c.first_kernel);
  j.at("block_kernel").get_to(c.block_kernel);
  j.at("block_strides").get_to(c.block_strides);
  j.at("gru_hidden").get_to(c.gru_hidden);
  j.at("embed_dim").get_to(c.embed_dim);
  j.at("bn_momentum").get_to(c.bn_momentum);
  j.at("bn_eps").get_to(c.bn_eps);
  j.at("min_frames").get_to(c.min_frames);
  return c;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, nn::Encoder<float>& encoder,
                     const nn::AdamState<float>& adam, std::int64_t step,
                     const std::string& distance, const std::string& train_rng_state,
                     const std::string& gen_rng_state) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("checkpoint: cannot open " + tmp.string());
    os.write(kMagic, 8);
    write_str(os, encoder_config_json(encoder.config()).dump());
    write_i64(os, step);
    write_str(os, distance);
    write_str(os, train_rng_state);
    write_str(os, gen_rng_state);
    write_i64(os, adam.step);

    const auto params = encoder.params();
    const auto buffers = encoder.buffers();
    if (adam.m.size() != params.size())
      throw Error("checkpoint: adam state does not match parameter registry");
    write_u64(os, params.size() + buffers.size() + 2 * params.size());
    for (const auto& p : params)
      write_tensor(os, p.name, p.data, static_cast<std::uint64_t>(p.rows),
                   static_cast<std::uint64_t>(p.cols));
    for (const auto& b : buffers)
      write_tensor(os, b.name, b.data, static_cast<std::uint64_t>(b.rows),
                   static_cast<std::uint64_t>(b.cols));
    for (std::size_t i = 0; i < params.size(); ++i)
      write_tensor(os, "adam.m." + params[i].name, adam.m[i].data(),
                   static_cast<std::uint64_t>(adam.m[i].size()), 1);
    for (std::size_t i = 0; i < params.size(); ++i)
      write_tensor(os, "adam.v." + params[i].name, adam.v[i].data(),
                   static_cast<std::uint64_t>(adam.v[i].size()), 1);
    if (!os) throw IoError("checkpoint: write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

CheckpointData load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checkpoint: cannot open " + path.string());
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw IoError("checkpoint: bad magic in " + path.string());

  const auto cfg = encoder_config_from_json(nlohmann::json::parse(read_str(is)));
  CheckpointData out(cfg);
  out.step = read_i64(is);
  out.distance = read_str(is);
  out.train_rng_state = read_str(is);
  out.gen_rng_state = read_str(is);
  const std::int64_t adam_step = read_i64(is);

  // Allocate tensors (values are fully overwritten below).
  Rng scratch(0);
  out.encoder.init_params(scratch);
  out.adam.init(out.encoder.params());
  out.adam.step = adam_step;

  struct Raw {
    std::uint64_t rows, cols;
    std::vector<float> data;
  };
  std::map<std::string, Raw> tensors;
  const std::uint64_t count = read_u64(is);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = read_str(is);
    Raw raw;
    raw.rows = read_u64(is);
    raw.cols = read_u64(is);
    raw.data.resize(raw.rows * raw.cols);
    is.read(reinterpret_cast<char*>(raw.data.data()),
            static_cast<std::streamsize>(raw.data.size() * 4));
    if (!is) throw IoError("checkpoint: truncated tensor " + name + " in " + path.string());
    tensors.emplace(name, std::move(raw));
  }

  auto restore = [&](const nn::TensorRef<float>& ref, const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw IoError("checkpoint: missing tensor " + name);
    const Raw& raw = it->second;
    if (static_cast<Eigen::Index>(raw.rows) != ref.rows ||
        static_cast<Eigen::Index>(raw.cols) != ref.cols)
      throw IoError("checkpoint: shape mismatch for " + name);
    std::memcpy(ref.data, raw.data.data(), raw.data.size() * 4);
  };

  const auto params = out.encoder.params();
  for (const auto& p : params) restore(p, p.name);
  for (const auto& b : out.encoder.buffers()) restore(b, b.name);
  for (std::size_t i = 0; i < params.size(); ++i) {
    restore({params[i].name, out.adam.m[i].data(), out.adam.m[i].size(), 1},
            "adam.m." + params[i].name);
    restore({params[i].name, out.adam.v[i].data(), out.adam.v[i].size(), 1},
            "adam.v." + params[i].name);
  }
  return out;
}

std::uint64_t file_hash(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("file_hash: cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[65536];
  while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
    const std::streamsize n = is.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
    if (!is) break;
  }
  return h;
}

}  // namespace fskws
