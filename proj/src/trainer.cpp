#include "fskws/trainer.hpp"

#include <cinttypes>
#include <cstdio>

#include "fskws/error.hpp"

namespace fskws {

void TrainConfig::validate() const {
  if (n_way < 2) throw ConfigError("train: n_way must be >= 2");
  if (k_shots < 1) throw ConfigError("train: k_shots must be >= 1");
  if (total_steps < 1) throw ConfigError("train: total_steps must be >= 1");
  if (lr <= 0.0) throw ConfigError("train: lr must be positive");
  if (lr_min < 0.0 || lr_min > lr) throw ConfigError("train: require 0 <= lr_min <= lr");
  if (checkpoint_every < 1) throw ConfigError("train: checkpoint_every must be >= 1");
}

TrainResult train(const SampleSource& source, const BufferConfig& buf_cfg,
                  const AugmentConfig* aug, const DspConfig& dsp,
                  const nn::EncoderConfig& enc_cfg, const TrainConfig& cfg, std::uint64_t seed,
                  const std::filesystem::path& out_dir, int workers,
                  const std::optional<std::filesystem::path>& resume,
                  const std::function<void(const TrainProgress&)>& on_step) {
  cfg.validate();
  buf_cfg.validate();
  if (buf_cfg.k_shots != cfg.k_shots)
    throw ConfigError("train: k_shots disagrees between buffer and train configs");
  if (buf_cfg.n_way != cfg.n_way)
    throw ConfigError("train: n_way disagrees between buffer and train configs");
  std::filesystem::create_directories(out_dir);

  Rng root(seed);
  Rng gen_rng = root.split("generation");
  Rng train_rng = root.split("training");
  Rng init_rng = root.split("init");

  nn::Encoder<float> encoder(enc_cfg);
  nn::AdamState<float> adam;
  std::int64_t start_step = 0;
  if (resume) {
    CheckpointData ckpt = load_checkpoint(*resume);
    encoder = std::move(ckpt.encoder);
    adam = std::move(ckpt.adam);
    start_step = ckpt.step;
    train_rng = Rng::from_state(ckpt.train_rng_state);
    gen_rng = Rng::from_state(ckpt.gen_rng_state);
    if (ckpt.distance != distance_to_string(cfg.distance))
      throw ConfigError("train: resume checkpoint was trained with metric " + ckpt.distance);
  } else {
    encoder.init_params(init_rng);
    adam.init(encoder.params());
  }

  EpisodeBuffer buffer(source, buf_cfg, aug, dsp, gen_rng, workers);
  buffer.dump_manifest(out_dir / "buffer_manifest.tsv");

  std::FILE* loss_log = std::fopen((out_dir / "loss.tsv").c_str(), resume ? "a" : "w");
  if (!loss_log) throw IoError("train: cannot open loss log in " + out_dir.string());

  TrainResult result;
  const std::string dist_name = distance_to_string(cfg.distance);
  const auto save = [&](const std::filesystem::path& p, std::int64_t step) {
    save_checkpoint(p, encoder, adam, step, dist_name, train_rng.state_string(),
                    gen_rng.state_string());
  };

  for (std::int64_t step = start_step; step < cfg.total_steps; ++step) {
    const double lr = nn::cosine_lr(step, cfg.total_steps, cfg.lr, cfg.lr_min);

    Episode ep = buffer.sample_episode(train_rng);
    const auto feats = buffer.episode_features(ep);

    nn::Encoder<float>::Trace trace;
    nn::Mat<float> emb = encoder.forward(feats, nn::Mode::kTrain, &trace, true);
    auto loss_grad = episode_loss<float>(emb, cfg.n_way, cfg.k_shots, cfg.distance);
    if (!std::isfinite(loss_grad.loss)) {
      std::fclose(loss_log);
      throw Error("train: non-finite loss at step " + std::to_string(step));
    }
    encoder.zero_grad();
    encoder.backward(trace, loss_grad.grad);
    adam_step(encoder.params(), encoder.grads(), adam, lr);

    buffer.refresh();

    const double loss = static_cast<double>(loss_grad.loss);
    result.losses.push_back(loss);
    std::fprintf(loss_log, "%" PRId64 "\t%.17g\t%.17g\n", step, lr, loss);
    if (on_step) on_step({step, lr, loss});

    if ((step + 1) % cfg.checkpoint_every == 0 && step + 1 < cfg.total_steps) {
      char name[64];
      std::snprintf(name, sizeof(name), "checkpoint_%09" PRId64 ".ckpt", step + 1);
      save(out_dir / name, step + 1);
    }
  }
  std::fclose(loss_log);

  result.final_checkpoint = out_dir / "checkpoint_final.ckpt";
  save(result.final_checkpoint, cfg.total_steps);
  result.steps_run = cfg.total_steps - start_step;
  return result;
}

}  // namespace fskws
