#include "fskws/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "fskws/augment.hpp"
#include "fskws/error.hpp"
#include "fskws/parallel.hpp"
#include "fskws/wav_io.hpp"

namespace fskws {

double auroc(const std::vector<double>& unknown_scores, const std::vector<double>& known_scores) {
  if (unknown_scores.empty() || known_scores.empty())
    throw Error("auroc: empty score list");
  struct Entry {
    double score;
    bool unknown;
  };
  std::vector<Entry> all;
  all.reserve(unknown_scores.size() + known_scores.size());
  for (double s : unknown_scores) all.push_back({s, true});
  for (double s : known_scores) all.push_back({s, false});
  std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.score < b.score; });

  // Midranks over tied groups; rank sum of the unknown group gives the
  // Mann-Whitney U statistic.
  double rank_sum_unknown = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (all[k].unknown) rank_sum_unknown += midrank;
    i = j;
  }
  const double nu = static_cast<double>(unknown_scores.size());
  const double nk = static_cast<double>(known_scores.size());
  const double u = rank_sum_unknown - nu * (nu + 1.0) / 2.0;
  return u / (nu * nk);
}

EerResult eer_threshold(const std::vector<double>& unknown_scores,
                        const std::vector<double>& known_scores) {
  if (unknown_scores.empty() || known_scores.empty())
    throw Error("eer_threshold: empty score list");
  std::vector<double> candidates;
  candidates.reserve(unknown_scores.size() + known_scores.size());
  candidates.insert(candidates.end(), unknown_scores.begin(), unknown_scores.end());
  candidates.insert(candidates.end(), known_scores.begin(), known_scores.end());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  std::vector<double> su(unknown_scores), sk(known_scores);
  std::sort(su.begin(), su.end());
  std::sort(sk.begin(), sk.end());
  const auto frac_below = [](const std::vector<double>& v, double t) {
    return static_cast<double>(std::lower_bound(v.begin(), v.end(), t) - v.begin()) /
           static_cast<double>(v.size());
  };

  EerResult best;
  double best_gap = std::numeric_limits<double>::infinity();
  for (double t : candidates) {
    const double fpr = frac_below(su, t);        // unknowns accepted
    const double fnr = 1.0 - frac_below(sk, t);  // knowns rejected
    const double gap = std::abs(fpr - fnr);
    if (gap < best_gap) {  // strict: ties keep the smaller threshold
      best_gap = gap;
      best.threshold = t;
      best.eer = 0.5 * (fpr + fnr);
    }
  }
  return best;
}

void TrialSpec::validate() const {
  if (n_targets < 1 || n_unknown < 1) throw ConfigError("eval: need targets and unknowns");
  if (k_shots < 1) throw ConfigError("eval: k_shots must be >= 1");
  if (n_trials < 1) throw ConfigError("eval: n_trials must be >= 1");
}

void PrecomputedTrialProvider::add(const std::string& keyword, Eigen::MatrixXd supports,
                                   Eigen::MatrixXd queries) {
  if (data_.count(keyword)) throw Error("trial provider: duplicate keyword " + keyword);
  keywords_.push_back(keyword);
  data_[keyword] = {std::move(supports), std::move(queries)};
}

const Eigen::MatrixXd& PrecomputedTrialProvider::support_pool(const std::string& keyword) const {
  auto it = data_.find(keyword);
  if (it == data_.end()) throw Error("trial provider: unknown keyword " + keyword);
  return it->second.first;
}

const Eigen::MatrixXd& PrecomputedTrialProvider::test_queries(const std::string& keyword) const {
  auto it = data_.find(keyword);
  if (it == data_.end()) throw Error("trial provider: unknown keyword " + keyword);
  return it->second.second;
}

TrialRecord run_trial(const TrialProvider& provider, const TrialSpec& spec, Distance distance,
                      Rng& rng) {
  spec.validate();
  const auto& kws = provider.keywords();
  const int total_kw = static_cast<int>(kws.size());
  if (spec.n_targets + spec.n_unknown > total_kw)
    throw Error("run_trial: dataset has " + std::to_string(total_kw) +
                " keywords, need " + std::to_string(spec.n_targets + spec.n_unknown));

  const std::vector<int> picks =
      sample_without_replacement(total_kw, spec.n_targets + spec.n_unknown, rng);
  std::vector<int> targets(picks.begin(), picks.begin() + spec.n_targets);
  std::vector<int> unknowns(picks.begin() + spec.n_targets, picks.end());

  // Enroll: K supports per target, sampled without replacement from the pool.
  Eigen::Index dim = 0;
  Eigen::MatrixXd protos;
  for (int i = 0; i < spec.n_targets; ++i) {
    const Eigen::MatrixXd& pool = provider.support_pool(kws[targets[i]]);
    if (pool.cols() < spec.k_shots)
      throw Error("run_trial: keyword " + kws[targets[i]] + " has only " +
                  std::to_string(pool.cols()) + " supports, need " + std::to_string(spec.k_shots));
    if (dim == 0) {
      dim = pool.rows();
      protos.resize(dim, spec.n_targets);
    }
    const auto idx = sample_without_replacement(static_cast<int>(pool.cols()), spec.k_shots, rng);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    for (int k : idx) mean += pool.col(k);
    protos.col(i) = mean / static_cast<double>(spec.k_shots);
  }

  // Classify every test query of all sampled keywords.
  struct Q {
    int target_index;  // -1 for unknown-keyword queries
    int candidate;
    double dmin;
  };
  std::vector<Q> queries;
  auto add_queries = [&](int target_index, const std::string& kw) {
    const Eigen::MatrixXd& q = provider.test_queries(kw);
    Eigen::MatrixXd d = pairwise_distances<double>(q, protos, distance);
    for (Eigen::Index r = 0; r < d.rows(); ++r) {
      Eigen::VectorXd row = d.row(r).transpose();
      const int cand = nearest_index<double>(row);
      queries.push_back({target_index, cand, row(cand)});
    }
  };
  for (int i = 0; i < spec.n_targets; ++i) add_queries(i, kws[targets[i]]);
  for (int u : unknowns) add_queries(-1, kws[u]);

  // Optional held-out split: fit the threshold on one half, measure on the
  // other. Default: fit and measure on the full set (the oracle-threshold
  // protocol).
  std::vector<int> fit_idx, measure_idx;
  fit_idx.reserve(queries.size());
  measure_idx.reserve(queries.size());
  if (spec.held_out_threshold) {
    for (std::size_t i = 0; i < queries.size(); ++i)
      (rng.bernoulli(0.5) ? fit_idx : measure_idx).push_back(static_cast<int>(i));
    if (fit_idx.empty() || measure_idx.empty())
      throw Error("run_trial: held-out split produced an empty half");
  } else {
    for (std::size_t i = 0; i < queries.size(); ++i) {
      fit_idx.push_back(static_cast<int>(i));
      measure_idx.push_back(static_cast<int>(i));
    }
  }

  std::vector<double> fit_unknown, fit_known;
  for (int i : fit_idx)
    (queries[i].target_index < 0 ? fit_unknown : fit_known).push_back(queries[i].dmin);
  const EerResult eer = eer_threshold(fit_unknown, fit_known);

  TrialRecord rec;
  rec.d_th = eer.threshold;
  rec.eer = eer.eer;

  std::vector<double> meas_unknown, meas_known;
  int target_total = 0, target_correct = 0, total_correct = 0;
  for (int i : measure_idx) {
    const Q& q = queries[i];
    const bool accepted = q.dmin < eer.threshold;
    if (q.target_index >= 0) {
      ++target_total;
      if (q.candidate == q.target_index) ++target_correct;
      if (accepted && q.candidate == q.target_index) ++total_correct;
      meas_known.push_back(q.dmin);
    } else {
      if (!accepted) ++total_correct;
      meas_unknown.push_back(q.dmin);
    }
  }
  if (target_total == 0 || meas_unknown.empty())
    throw Error("run_trial: a measurement split has no target or no unknown queries");
  rec.target_queries = target_total;
  rec.unknown_queries = static_cast<int>(meas_unknown.size());
  rec.acc_target = static_cast<double>(target_correct) / target_total;
  rec.acc_total = static_cast<double>(total_correct) /
                  static_cast<double>(target_total + meas_unknown.size());
  rec.auroc_score = auroc(meas_unknown, meas_known);
  return rec;
}

EvalReport evaluate_trials(const TrialProvider& provider, const TrialSpec& spec, Distance distance,
                           std::uint64_t seed, int workers) {
  spec.validate();
  std::vector<TrialRecord> trials(spec.n_trials);
  parallel_for(spec.n_trials, workers, [&](int t) {
    Rng rng(seed ^ static_cast<std::uint64_t>(t));
    trials[t] = run_trial(provider, spec, distance, rng);
  });
  return aggregate(std::move(trials));
}

EvalReport aggregate(std::vector<TrialRecord> trials) {
  if (trials.size() < 2) throw Error("aggregate: need at least 2 trials");
  const auto summarize = [&](auto field) {
    const double n = static_cast<double>(trials.size());
    double mean = 0.0;
    for (const auto& t : trials) mean += field(t);
    mean /= n;
    double var = 0.0;
    for (const auto& t : trials) var += (field(t) - mean) * (field(t) - mean);
    var /= (n - 1.0);
    MetricSummary s;
    s.mean_pct = 100.0 * mean;
    s.ci_half_pct = 100.0 * 1.96 * std::sqrt(var / n);
    return s;
  };
  EvalReport report;
  report.acc_target = summarize([](const TrialRecord& t) { return t.acc_target; });
  report.acc_total = summarize([](const TrialRecord& t) { return t.acc_total; });
  report.auroc_pct = summarize([](const TrialRecord& t) { return t.auroc_score; });
  report.trials = std::move(trials);
  return report;
}

namespace {

Waveform corrupt_query(const Waveform& w, const QueryCorruption& c, Rng& rng) {
  if (!c.enabled) return w;
  WhiteNoiseProvider noise;
  const double snr = rng.uniform(c.snr_db_lo, c.snr_db_hi);
  return add_noise(w, noise.next(rng, w.size()), snr);
}

}  // namespace

PrecomputedTrialProvider build_oracle_provider(nn::Encoder<float>& encoder, const DspConfig& dsp,
                                               const OracleSource& source, int n_classes,
                                               int support_pool, int queries_per_class,
                                               std::uint64_t seed,
                                               const QueryCorruption& corruption) {
  if (n_classes < 1 || support_pool < 1 || queries_per_class < 1)
    throw ConfigError("oracle eval: class, pool and query counts must be positive");
  Rng root(seed);
  Rng class_rng = root.split("eval-classes");
  PrecomputedTrialProvider provider;
  for (int c = 0; c < n_classes; ++c) {
    const KeywordClass cls = source.new_class(class_rng);
    Rng view_rng = root.split("eval-views").split(static_cast<std::uint64_t>(c));
    std::vector<Waveform> supports, queries;
    for (int i = 0; i < support_pool; ++i) supports.push_back(source.render(cls, view_rng));
    for (int i = 0; i < queries_per_class; ++i) {
      Waveform q = source.render(cls, view_rng);
      queries.push_back(corrupt_query(q, corruption, view_rng));
    }
    char name[32];
    std::snprintf(name, sizeof(name), "class%03d", c);
    provider.add(name, embed_waveforms(encoder, dsp, supports),
                 embed_waveforms(encoder, dsp, queries));
  }
  return provider;
}

PrecomputedTrialProvider build_dataset_provider(nn::Encoder<float>& encoder, const DspConfig& dsp,
                                                const DirDataset& dataset, int support_pool_cap,
                                                int queries_cap, std::uint64_t seed,
                                                const QueryCorruption& corruption) {
  Rng root(seed);
  PrecomputedTrialProvider provider;
  for (const auto& kw : dataset.keywords()) {
    const auto& parts = dataset.partitions(kw);
    if (parts.train.empty()) throw Error("dataset eval: keyword " + kw + " has no support pool");
    if (parts.test.empty()) throw Error("dataset eval: keyword " + kw + " has no test clips");
    Rng kw_rng = root.split("eval-dataset").split(fnv1a64(kw));

    std::vector<std::filesystem::path> pool = parts.train;
    if (support_pool_cap > 0 && static_cast<int>(pool.size()) > support_pool_cap) {
      const auto idx =
          sample_without_replacement(static_cast<int>(pool.size()), support_pool_cap, kw_rng);
      std::vector<std::filesystem::path> capped;
      for (int i : idx) capped.push_back(pool[i]);
      pool = std::move(capped);
    }
    std::vector<std::filesystem::path> tests = parts.test;
    if (queries_cap > 0 && static_cast<int>(tests.size()) > queries_cap)
      tests.resize(queries_cap);

    std::vector<Waveform> supports, queries;
    for (const auto& p : pool) supports.push_back(read_wav(p));
    for (const auto& p : tests) queries.push_back(corrupt_query(read_wav(p), corruption, kw_rng));
    provider.add(kw, embed_waveforms(encoder, dsp, supports),
                 embed_waveforms(encoder, dsp, queries));
  }
  return provider;
}

std::string format_report_table(const std::vector<std::pair<int, EvalReport>>& rows,
                                const std::string& method) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-24s %9s %18s %18s %18s\n", "method", "supports",
                "Acc(target)", "Acc(total)", "AUROC");
  out += line;
  for (const auto& [k, report] : rows) {
    char shots[16];
    std::snprintf(shots, sizeof(shots), "%d-shot", k);
    std::snprintf(line, sizeof(line), "%-24s %9s %10.1f+-%5.2f %10.1f+-%5.2f %10.1f+-%5.2f\n",
                  method.c_str(), shots, report.acc_target.mean_pct, report.acc_target.ci_half_pct,
                  report.acc_total.mean_pct, report.acc_total.ci_half_pct,
                  report.auroc_pct.mean_pct, report.auroc_pct.ci_half_pct);
    out += line;
  }
  return out;
}

void write_trial_records(const std::filesystem::path& path,
                         const std::vector<std::pair<int, EvalReport>>& rows) {
  std::FILE* os = std::fopen(path.c_str(), "w");
  if (!os) throw IoError("trial records: cannot open " + path.string());
  for (const auto& [k, report] : rows) {
    for (std::size_t i = 0; i < report.trials.size(); ++i) {
      const TrialRecord& t = report.trials[i];
      nlohmann::json j{{"k_shots", k},
                       {"trial", i},
                       {"acc_target", t.acc_target},
                       {"acc_total", t.acc_total},
                       {"auroc", t.auroc_score},
                       {"d_th", t.d_th},
                       {"eer", t.eer},
                       {"target_queries", t.target_queries},
                       {"unknown_queries", t.unknown_queries}};
      std::fprintf(os, "%s\n", j.dump().c_str());
    }
  }
  if (std::fclose(os) != 0) throw IoError("trial records: write failed: " + path.string());
}

}  // namespace fskws
