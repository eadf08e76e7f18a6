// Command line surface: generate | train | enroll | detect | evaluate |
// export-embeddings. One JSON config file (FSKWS_CONFIG or --config) plus
// --set section.key=value overrides; every command writes a resolved
// config snapshot beside its outputs.

#include <cstdio>
#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "fskws/config.hpp"
#include "fskws/trainer.hpp"
#include "fskws/wav_io.hpp"

namespace {

using namespace fskws;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

RunConfig resolve_config(const std::string& config_path, const std::vector<std::string>& overrides,
                         const std::string& out_override) {
  RunConfig cfg;
  if (!config_path.empty()) {
    cfg = load_run_config(config_path);
  } else if (const char* env = std::getenv("FSKWS_CONFIG"); env && *env) {
    cfg = load_run_config(env);
  }
  for (const auto& o : overrides) apply_override(cfg, o);
  if (!out_override.empty()) cfg.paths.out_dir = out_override;
  cfg.validate();
  return cfg;
}

const AugmentConfig* maybe_augment(const RunConfig& cfg, AugmentConfig& storage) {
  if (!cfg.augment.enabled) return nullptr;
  storage = make_augment_config(cfg.augment, cfg.paths);
  return &storage;
}

int cmd_generate(const RunConfig& cfg, int n_classes, int views) {
  if (n_classes < 1 || views < 1) throw ConfigError("generate: need positive --classes and --views");
  const std::filesystem::path out = cfg.paths.out_dir;
  std::filesystem::create_directories(out);
  write_config_snapshot(out, cfg);

  OracleSource source(cfg.oracle);
  AugmentConfig aug_storage;
  const AugmentConfig* aug = maybe_augment(cfg, aug_storage);

  Rng root(cfg.seed);
  const std::uint64_t gen_seed = root.split("generation").next_u64();
  std::vector<KeywordClass> classes;
  for (int c = 0; c < n_classes; ++c) {
    const std::uint64_t class_seed = splitmix64(gen_seed ^ splitmix64(c));
    Rng class_rng(class_seed);
    KeywordClass cls = source.new_class(class_rng);
    char dir_name[32];
    std::snprintf(dir_name, sizeof(dir_name), "class_%04d", c);
    std::filesystem::create_directories(out / dir_name);
    for (int v = 0; v < views; ++v) {
      Rng view_rng(splitmix64(class_seed ^ splitmix64(0x100 + v)));
      Waveform w = source.render(cls, view_rng);
      if (aug) w = augment(w, *aug, view_rng);
      char file_name[32];
      std::snprintf(file_name, sizeof(file_name), "view_%03d.wav", v);
      write_wav(out / dir_name / file_name, w);
    }
    classes.push_back(std::move(cls));
  }
  write_oracle_manifest(out / "manifest.tsv", classes);
  std::printf("generated %d classes x %d views under %s\n", n_classes, views, out.c_str());
  return kExitOk;
}

int cmd_train(const RunConfig& cfg, const std::string& resume) {
  const std::filesystem::path out = cfg.paths.out_dir;
  std::filesystem::create_directories(out);
  write_config_snapshot(out, cfg);

  OracleSource source(cfg.oracle);
  AugmentConfig aug_storage;
  const AugmentConfig* aug = maybe_augment(cfg, aug_storage);

  std::optional<std::filesystem::path> resume_path;
  if (!resume.empty()) resume_path = resume;

  std::int64_t last_report = -1;
  TrainResult result =
      train(source, cfg.buffer, aug, cfg.dsp, cfg.encoder, cfg.train, cfg.seed, out, cfg.workers,
            resume_path, [&](const TrainProgress& p) {
              if (p.step - last_report >= 100 || p.step + 1 == cfg.train.total_steps) {
                std::fprintf(stderr, "step %lld lr %.6f loss %.4f\n",
                             static_cast<long long>(p.step), p.lr, p.loss);
                last_report = p.step;
              }
            });
  std::printf("trained %lld steps, final checkpoint %s\n",
              static_cast<long long>(result.steps_run), result.final_checkpoint.c_str());
  return kExitOk;
}

std::vector<std::pair<std::string, std::vector<Waveform>>> read_support_tree(
    const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw Error("enroll: supports directory not found: " + dir.string());
  std::vector<std::pair<std::string, std::vector<Waveform>>> supports;
  std::vector<std::filesystem::path> kw_dirs;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_directory()) kw_dirs.push_back(e.path());
  std::sort(kw_dirs.begin(), kw_dirs.end());
  if (kw_dirs.empty()) throw Error("enroll: no keyword directories in " + dir.string());
  for (const auto& kw_dir : kw_dirs) {
    std::vector<std::filesystem::path> files;
    for (const auto& f : std::filesystem::directory_iterator(kw_dir))
      if (f.is_regular_file() && f.path().extension() == ".wav") files.push_back(f.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw Error("enroll: keyword folder has no wavs: " + kw_dir.string());
    std::vector<Waveform> waves;
    for (const auto& f : files) waves.push_back(read_wav(f));
    supports.emplace_back(kw_dir.filename().string(), std::move(waves));
  }
  return supports;
}

int cmd_enroll(const RunConfig& cfg, const std::string& checkpoint, const std::string& supports_dir,
               const std::string& profile_out, double d_th) {
  CheckpointData ckpt = load_checkpoint(checkpoint);
  EnrollmentProfile profile = enroll(ckpt.encoder, cfg.dsp, read_support_tree(supports_dir),
                                     distance_from_string(ckpt.distance));
  profile.d_th = d_th;
  profile.checkpoint_hash = file_hash(checkpoint);
  save_profile(profile_out, profile);
  write_config_snapshot(std::filesystem::path(profile_out).parent_path(), cfg);
  std::printf("enrolled %zu keywords into %s\n", profile.keywords.size(), profile_out.c_str());
  return kExitOk;
}

int cmd_detect(const RunConfig& cfg, const std::string& checkpoint, const std::string& profile_path,
               const std::vector<std::string>& wavs, double d_th_override) {
  CheckpointData ckpt = load_checkpoint(checkpoint);
  EnrollmentProfile profile = load_profile(profile_path);
  if (profile.checkpoint_hash != 0 && profile.checkpoint_hash != file_hash(checkpoint))
    throw ConfigError("detect: profile was enrolled with a different checkpoint");
  DetectionConfig det;
  det.distance = profile.distance;
  det.d_th = std::isnan(d_th_override) ? profile.d_th : d_th_override;
  for (const auto& path : wavs) {
    Waveform w = read_wav(path);
    DetectionResult res = detect(ckpt.encoder, cfg.dsp, profile, w, det);
    const std::string label =
        res.predicted == kUnknownClass ? "unknown" : profile.keywords[res.predicted];
    std::printf("%s\t%s\t%.9g\n", path.c_str(), label.c_str(), res.distance_to_candidate);
  }
  return kExitOk;
}

DirDataset open_eval_dataset(const RunConfig& cfg, const std::string& dataset) {
  DirDatasetOptions opts;
  opts.layout = cfg.eval.dataset_layout == "gsc" ? DirLayout::kGsc : DirLayout::kMswcLike;
  opts.test_count = cfg.eval.mswc_test_count;
  opts.min_count = cfg.eval.keyword_min_count;
  opts.max_count = cfg.eval.keyword_max_count;
  return DirDataset::open(dataset, opts);
}

int cmd_evaluate(const RunConfig& cfg, const std::string& checkpoint, const std::string& dataset_arg,
                 const std::string& method) {
  const std::string dataset = dataset_arg.empty() ? cfg.paths.dataset : dataset_arg;
  if (dataset.empty())
    throw ConfigError("evaluate: no dataset (set paths.dataset or pass --dataset)");
  const std::filesystem::path out = cfg.paths.out_dir;
  std::filesystem::create_directories(out);
  write_config_snapshot(out, cfg);

  CheckpointData ckpt = load_checkpoint(checkpoint);
  const Distance distance = distance_from_string(ckpt.distance);
  Rng root(cfg.seed);
  const std::uint64_t eval_seed = root.split("evaluation").next_u64();

  QueryCorruption corruption;
  corruption.enabled = cfg.eval.corrupt_queries;
  corruption.snr_db_lo = cfg.eval.corrupt_snr_db.first;
  corruption.snr_db_hi = cfg.eval.corrupt_snr_db.second;

  PrecomputedTrialProvider provider;
  if (dataset == "oracle") {
    OracleSource source(cfg.oracle);
    const int queries = cfg.eval.queries_per_class > 0 ? cfg.eval.queries_per_class : 10;
    provider = build_oracle_provider(ckpt.encoder, cfg.dsp, source, cfg.eval.oracle_classes,
                                     cfg.eval.support_pool, queries, eval_seed, corruption);
  } else {
    DirDataset ds = open_eval_dataset(cfg, dataset);
    provider = build_dataset_provider(ckpt.encoder, cfg.dsp, ds, cfg.eval.support_pool,
                                      cfg.eval.queries_per_class, eval_seed, corruption);
  }

  std::vector<std::pair<int, EvalReport>> rows;
  for (int k : cfg.eval.k_shots) {
    TrialSpec spec;
    spec.n_targets = cfg.eval.n_targets;
    spec.n_unknown = cfg.eval.n_unknown;
    spec.k_shots = k;
    spec.n_trials = cfg.eval.n_trials;
    spec.held_out_threshold = cfg.eval.held_out_threshold;
    rows.emplace_back(k, evaluate_trials(provider, spec, distance, eval_seed, cfg.workers));
  }

  const std::string table = format_report_table(rows, method);
  std::printf("%s", table.c_str());
  std::FILE* f = std::fopen((out / "report.txt").c_str(), "w");
  if (!f) throw IoError("evaluate: cannot write report");
  std::fputs(table.c_str(), f);
  std::fclose(f);
  write_trial_records(out / "trials.jsonl", rows);
  return kExitOk;
}

int cmd_export_embeddings(const RunConfig& cfg, const std::string& checkpoint,
                          const std::string& dataset_arg, const std::string& out_file,
                          const std::string& partition) {
  const std::string dataset = dataset_arg.empty() ? cfg.paths.dataset : dataset_arg;
  if (dataset.empty() || dataset == "oracle")
    throw ConfigError("export-embeddings: needs a directory dataset");
  CheckpointData ckpt = load_checkpoint(checkpoint);
  DirDataset ds = open_eval_dataset(cfg, dataset);

  std::vector<std::tuple<std::string, std::string, Waveform>> items;
  for (const auto& kw : ds.keywords()) {
    const auto& parts = ds.partitions(kw);
    auto add = [&](const std::vector<std::filesystem::path>& files) {
      for (const auto& f : files)
        items.emplace_back(kw, kw + "/" + f.filename().string(), read_wav(f));
    };
    if (partition == "all" || partition == "train") add(parts.train);
    if (partition == "all" || partition == "val") add(parts.val);
    if (partition == "all" || partition == "test") add(parts.test);
  }
  export_embeddings(ckpt.encoder, cfg.dsp, items, out_file);
  write_config_snapshot(std::filesystem::path(out_file).parent_path(), cfg);
  std::printf("exported %zu embeddings to %s\n", items.size(), out_file.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot open-set keyword spotting"};
  app.require_subcommand(1);

  std::string config_path, out_override;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "JSON config file (default: $FSKWS_CONFIG)");
  app.add_option("--set", overrides, "Override, section.key=value (repeatable)");
  app.add_option("--out", out_override, "Output directory (overrides paths.out_dir)");

  auto* gen = app.add_subcommand("generate", "Materialize a synthetic corpus + manifest");
  int n_classes = 8, views = 6;
  gen->add_option("--classes", n_classes, "Number of keyword classes");
  gen->add_option("--views", views, "Views per class");

  auto* tr = app.add_subcommand("train", "Train the encoder");
  std::string resume;
  tr->add_option("--resume", resume, "Resume from a checkpoint");

  auto* en = app.add_subcommand("enroll", "Build an enrollment profile from support WAVs");
  std::string checkpoint, supports_dir, profile_path;
  double d_th = std::numeric_limits<double>::infinity();
  en->add_option("--checkpoint", checkpoint, "Encoder checkpoint")->required();
  en->add_option("--supports", supports_dir, "Directory of <keyword>/<clip>.wav")->required();
  en->add_option("--profile", profile_path, "Profile output path")->required();
  en->add_option("--d-th", d_th, "Detection threshold stored in the profile");

  auto* de = app.add_subcommand("detect", "Classify query WAVs against a profile");
  std::vector<std::string> wavs;
  double d_th_override = std::numeric_limits<double>::quiet_NaN();
  de->add_option("--checkpoint", checkpoint, "Encoder checkpoint")->required();
  de->add_option("--profile", profile_path, "Enrollment profile")->required();
  de->add_option("--d-th", d_th_override, "Detection threshold (overrides the profile)");
  de->add_option("wavs", wavs, "Query WAV files")->required();

  auto* ev = app.add_subcommand("evaluate", "Run the open-set evaluation protocol");
  std::string dataset_arg, method = "unsupervised";
  ev->add_option("--checkpoint", checkpoint, "Encoder checkpoint")->required();
  ev->add_option("--dataset", dataset_arg, "Dataset root, or 'oracle'");
  ev->add_option("--method", method, "Method label for the report table");

  auto* ex = app.add_subcommand("export-embeddings", "Write per-clip embeddings as text");
  std::string out_file = "embeddings.tsv", partition = "all";
  ex->add_option("--checkpoint", checkpoint, "Encoder checkpoint")->required();
  ex->add_option("--dataset", dataset_arg, "Dataset root");
  ex->add_option("--output", out_file, "Output file");
  ex->add_option("--partition", partition, "train | val | test | all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}));

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig cfg = resolve_config(config_path, overrides, out_override);
    if (gen->parsed()) return cmd_generate(cfg, n_classes, views);
    if (tr->parsed()) return cmd_train(cfg, resume);
    if (en->parsed()) return cmd_enroll(cfg, checkpoint, supports_dir, profile_path, d_th);
    if (de->parsed()) return cmd_detect(cfg, checkpoint, profile_path, wavs, d_th_override);
    if (ev->parsed()) return cmd_evaluate(cfg, checkpoint, dataset_arg, method);
    if (ex->parsed())
      return cmd_export_embeddings(cfg, checkpoint, dataset_arg, out_file, partition);
  } catch (const fskws::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}
