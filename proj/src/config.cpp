#include "fskws/config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "fskws/error.hpp"

namespace fskws {

namespace {

using nlohmann::json;

// Pulls known keys out of `j`, then rejects leftovers so typos fail loudly.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError("config: section " + name_ + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      j_.at(key).get_to(out);
    } catch (const json::exception& e) {
      throw ConfigError("config: bad value for " + name_ + "." + key + ": " + e.what());
    }
  }

  void get_pair(const char* key, std::pair<double, double>& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_array() || v.size() != 2)
      throw ConfigError("config: " + name_ + "." + key + " must be a [low, high] pair");
    out.first = v[0].get<double>();
    out.second = v[1].get<double>();
  }

  void get_optional_int(const char* key, std::optional<int>& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    if (j_.at(key).is_null()) {
      out.reset();
      return;
    }
    out = j_.at(key).get<int>();
  }

  json subsection(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? j_.at(key) : json::object();
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      (void)value;
      if (!seen_.count(key))
        throw ConfigError("config: unknown key " + name_ + "." + key);
    }
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

void parse_dsp(const json& j, DspConfig& c) {
  Section s(j, "dsp");
  s.get("n_mfcc", c.n_mfcc);
  s.get("n_mels", c.n_mels);
  s.get("fft_size", c.fft_size);
  s.get("frame_len_s", c.frame_len_s);
  s.get("frame_hop_s", c.frame_hop_s);
  s.get("mel_fmin_hz", c.mel_fmin_hz);
  s.get("mel_fmax_hz", c.mel_fmax_hz);
  s.get("log_floor", c.log_floor);
  s.get("pre_emphasis", c.pre_emphasis);
  s.get("cepstral_mean_norm", c.cepstral_mean_norm);
  s.finish();
}

json dump_dsp(const DspConfig& c) {
  return json{{"n_mfcc", c.n_mfcc},
              {"n_mels", c.n_mels},
              {"fft_size", c.fft_size},
              {"frame_len_s", c.frame_len_s},
              {"frame_hop_s", c.frame_hop_s},
              {"mel_fmin_hz", c.mel_fmin_hz},
              {"mel_fmax_hz", c.mel_fmax_hz},
              {"log_floor", c.log_floor},
              {"pre_emphasis", c.pre_emphasis},
              {"cepstral_mean_norm", c.cepstral_mean_norm}};
}

void parse_augment(const json& j, AugmentSpec& c) {
  Section s(j, "augment");
  s.get("enabled", c.enabled);
  s.get_pair("vol_max_range", c.vol_max_range);
  s.get_pair("snr_db_range", c.snr_db_range);
  s.get("apply_prob", c.apply_prob);
  s.get("noise_kind", c.noise_kind);
  s.get("rir_kind", c.rir_kind);
  s.get_pair("rir_t60_range", c.rir_t60_range);
  s.finish();
}

json dump_augment(const AugmentSpec& c) {
  return json{{"enabled", c.enabled},
              {"vol_max_range", {c.vol_max_range.first, c.vol_max_range.second}},
              {"snr_db_range", {c.snr_db_range.first, c.snr_db_range.second}},
              {"apply_prob", c.apply_prob},
              {"noise_kind", c.noise_kind},
              {"rir_kind", c.rir_kind},
              {"rir_t60_range", {c.rir_t60_range.first, c.rir_t60_range.second}}};
}

void parse_oracle(const json& j, OracleGenConfig& c) {
  Section s(j, "oracle");
  s.get("n_units", c.n_units);
  s.get("l_min", c.l_min);
  s.get("l_max", c.l_max);
  s.get_pair("unit_duration_range_s", c.unit_duration_range_s);
  s.get_pair("pitch_range_hz", c.pitch_range_hz);
  s.get("formant_jitter", c.formant_jitter);
  s.get_pair("tempo_range", c.tempo_range);
  s.get("crossfade_s", c.crossfade_s);
  s.finish();
}

json dump_oracle(const OracleGenConfig& c) {
  return json{
      {"n_units", c.n_units},
      {"l_min", c.l_min},
      {"l_max", c.l_max},
      {"unit_duration_range_s", {c.unit_duration_range_s.first, c.unit_duration_range_s.second}},
      {"pitch_range_hz", {c.pitch_range_hz.first, c.pitch_range_hz.second}},
      {"formant_jitter", c.formant_jitter},
      {"tempo_range", {c.tempo_range.first, c.tempo_range.second}},
      {"crossfade_s", c.crossfade_s}};
}

void parse_buffer(const json& j, BufferConfig& c) {
  Section s(j, "buffer");
  s.get("m_buffer", c.m_buffer);
  s.get("m_update", c.m_update);
  s.get("k_shots", c.k_shots);
  s.get("n_way", c.n_way);
  s.finish();
}

json dump_buffer(const BufferConfig& c) {
  return json{
      {"m_buffer", c.m_buffer}, {"m_update", c.m_update}, {"k_shots", c.k_shots}, {"n_way", c.n_way}};
}

void parse_encoder(const json& j, nn::EncoderConfig& c) {
  Section s(j, "encoder");
  s.get("input_dim", c.input_dim);
  s.get("width_multiplier", c.width_multiplier);
  s.get("base_channels", c.base_channels);
  s.get("first_kernel", c.first_kernel);
  s.get("block_kernel", c.block_kernel);
  s.get("block_strides", c.block_strides);
  s.get("gru_hidden", c.gru_hidden);
  s.get("embed_dim", c.embed_dim);
  s.get("bn_momentum", c.bn_momentum);
  s.get("bn_eps", c.bn_eps);
  s.get("min_frames", c.min_frames);
  s.finish();
}

json dump_encoder(const nn::EncoderConfig& c) {
  return json{{"input_dim", c.input_dim},
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

void parse_train(const json& j, TrainConfig& c) {
  Section s(j, "train");
  s.get("n_way", c.n_way);
  s.get("k_shots", c.k_shots);
  s.get("total_steps", c.total_steps);
  s.get("lr", c.lr);
  s.get("lr_min", c.lr_min);
  std::string dist = distance_to_string(c.distance);
  s.get("distance", dist);
  c.distance = distance_from_string(dist);
  s.get("checkpoint_every", c.checkpoint_every);
  s.finish();
}

json dump_train(const TrainConfig& c) {
  return json{{"n_way", c.n_way},
              {"k_shots", c.k_shots},
              {"total_steps", c.total_steps},
              {"lr", c.lr},
              {"lr_min", c.lr_min},
              {"distance", distance_to_string(c.distance)},
              {"checkpoint_every", c.checkpoint_every}};
}

void parse_eval(const json& j, EvalConfig& c) {
  Section s(j, "eval");
  s.get("n_targets", c.n_targets);
  s.get("n_unknown", c.n_unknown);
  s.get("k_shots", c.k_shots);
  s.get("n_trials", c.n_trials);
  s.get("held_out_threshold", c.held_out_threshold);
  s.get("support_pool", c.support_pool);
  s.get("queries_per_class", c.queries_per_class);
  s.get("oracle_classes", c.oracle_classes);
  s.get("dataset_layout", c.dataset_layout);
  s.get("mswc_test_count", c.mswc_test_count);
  s.get_optional_int("keyword_min_count", c.keyword_min_count);
  s.get_optional_int("keyword_max_count", c.keyword_max_count);
  s.get("corrupt_queries", c.corrupt_queries);
  s.get_pair("corrupt_snr_db", c.corrupt_snr_db);
  s.finish();
}

json dump_eval(const EvalConfig& c) {
  json j{{"n_targets", c.n_targets},
         {"n_unknown", c.n_unknown},
         {"k_shots", c.k_shots},
         {"n_trials", c.n_trials},
         {"held_out_threshold", c.held_out_threshold},
         {"support_pool", c.support_pool},
         {"queries_per_class", c.queries_per_class},
         {"oracle_classes", c.oracle_classes},
         {"dataset_layout", c.dataset_layout},
         {"mswc_test_count", c.mswc_test_count},
         {"corrupt_queries", c.corrupt_queries},
         {"corrupt_snr_db", {c.corrupt_snr_db.first, c.corrupt_snr_db.second}}};
  j["keyword_min_count"] = c.keyword_min_count ? json(*c.keyword_min_count) : json();
  j["keyword_max_count"] = c.keyword_max_count ? json(*c.keyword_max_count) : json();
  return j;
}

void parse_paths(const json& j, PathsConfig& c) {
  Section s(j, "paths");
  s.get("dataset", c.dataset);
  s.get("noise_dir", c.noise_dir);
  s.get("rir_dir", c.rir_dir);
  s.get("out_dir", c.out_dir);
  s.finish();
}

json dump_paths(const PathsConfig& c) {
  return json{{"dataset", c.dataset},
              {"noise_dir", c.noise_dir},
              {"rir_dir", c.rir_dir},
              {"out_dir", c.out_dir}};
}

RunConfig parse_run_config(const json& j) {
  RunConfig cfg;
  Section s(j, "config");
  s.get("seed", cfg.seed);
  s.get("workers", cfg.workers);
  parse_dsp(s.subsection("dsp"), cfg.dsp);
  parse_augment(s.subsection("augment"), cfg.augment);
  parse_oracle(s.subsection("oracle"), cfg.oracle);
  parse_buffer(s.subsection("buffer"), cfg.buffer);
  parse_encoder(s.subsection("encoder"), cfg.encoder);
  parse_train(s.subsection("train"), cfg.train);
  parse_eval(s.subsection("eval"), cfg.eval);
  parse_paths(s.subsection("paths"), cfg.paths);
  s.finish();
  return cfg;
}

}  // namespace

void RunConfig::validate() const {
  dsp.validate();
  oracle.validate();
  buffer.validate();
  encoder.validate();
  train.validate();
  if (buffer.k_shots != train.k_shots)
    throw ConfigError("config: buffer.k_shots and train.k_shots disagree");
  if (buffer.n_way != train.n_way)
    throw ConfigError("config: buffer.n_way and train.n_way disagree");
  if (workers < 1) throw ConfigError("config: workers must be >= 1");
  if (encoder.input_dim != dsp.n_mfcc)
    throw ConfigError("config: encoder.input_dim must equal dsp.n_mfcc");
  if (eval.dataset_layout != "gsc" && eval.dataset_layout != "mswc-like")
    throw ConfigError("config: eval.dataset_layout must be gsc or mswc-like");
}

RunConfig run_config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: JSON parse error: ") + e.what());
  }
  return parse_run_config(j);
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return run_config_from_json_text(text);
}

std::string run_config_to_json_text(const RunConfig& cfg) {
  json j{{"seed", cfg.seed},
         {"workers", cfg.workers},
         {"dsp", dump_dsp(cfg.dsp)},
         {"augment", dump_augment(cfg.augment)},
         {"oracle", dump_oracle(cfg.oracle)},
         {"buffer", dump_buffer(cfg.buffer)},
         {"encoder", dump_encoder(cfg.encoder)},
         {"train", dump_train(cfg.train)},
         {"eval", dump_eval(cfg.eval)},
         {"paths", dump_paths(cfg.paths)}};
  return j.dump(2) + "\n";
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("config: override must look like section.key=value: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);

  json root = json::parse(run_config_to_json_text(cfg));
  json* node = &root;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
    if (!node->contains(part)) throw ConfigError("config: unknown key in override: " + key);
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  json parsed = json::parse(value, nullptr, false);
  *node = parsed.is_discarded() ? json(value) : parsed;
  cfg = parse_run_config(root);
}

void write_config_snapshot(const std::filesystem::path& out_dir, const RunConfig& cfg) {
  std::filesystem::create_directories(out_dir);
  const auto path = out_dir / "config.resolved.json";
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("config snapshot: cannot open " + path.string());
  os << run_config_to_json_text(cfg);
  if (!os) throw IoError("config snapshot: write failed: " + path.string());
}

AugmentConfig make_augment_config(const AugmentSpec& spec, const PathsConfig& paths) {
  AugmentConfig cfg;
  cfg.vol_max_range = spec.vol_max_range;
  cfg.snr_db_range = spec.snr_db_range;
  cfg.apply_prob = spec.apply_prob;
  if (spec.rir_kind == "synth") {
    cfg.rir_source =
        std::make_shared<SynthRirProvider>(spec.rir_t60_range.first, spec.rir_t60_range.second);
  } else if (spec.rir_kind == "dir") {
    if (paths.rir_dir.empty()) throw ConfigError("config: rir_kind=dir requires paths.rir_dir");
    cfg.rir_source = std::make_shared<DirWavProvider>(paths.rir_dir);
  } else {
    throw ConfigError("config: unknown rir_kind " + spec.rir_kind);
  }
  if (spec.noise_kind == "white") {
    cfg.noise_source = std::make_shared<WhiteNoiseProvider>();
  } else if (spec.noise_kind == "pink") {
    cfg.noise_source = std::make_shared<PinkNoiseProvider>();
  } else if (spec.noise_kind == "dir") {
    if (paths.noise_dir.empty())
      throw ConfigError("config: noise_kind=dir requires paths.noise_dir");
    cfg.noise_source = std::make_shared<DirWavProvider>(paths.noise_dir);
  } else {
    throw ConfigError("config: unknown noise_kind " + spec.noise_kind);
  }
  cfg.validate();
  return cfg;
}

}  // namespace fskws
