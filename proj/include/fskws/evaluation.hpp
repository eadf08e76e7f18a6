#pragma once

#include <filesystem>
#include <map>

#include "fskws/dir_dataset.hpp"
#include "fskws/inference.hpp"
#include "fskws/oracle_source.hpp"

namespace fskws {

// Probability a random unknown score exceeds a random known score, ties
// counted half. Computed from midranks; equals brute-force pair counting.
double auroc(const std::vector<double>& unknown_scores, const std::vector<double>& known_scores);

struct EerResult {
  double threshold = 0.0;  // accept iff score < threshold
  double eer = 0.0;        // (FPR + FNR) / 2 at the threshold
};

// Sweeps all distinct scores as candidate thresholds and returns the one
// minimizing |FPR - FNR| (ties to the smaller threshold). FPR is the
// fraction of unknowns accepted, FNR the fraction of knowns rejected.
EerResult eer_threshold(const std::vector<double>& unknown_scores,
                        const std::vector<double>& known_scores);

struct TrialSpec {
  int n_targets = 10;
  int n_unknown = 20;
  int k_shots = 5;
  int n_trials = 100;
  // When set, the EER threshold is fitted on one half of the queries and
  // the metrics are measured on the other half.
  bool held_out_threshold = false;

  void validate() const;
};

struct TrialRecord {
  double acc_target = 0.0;  // fraction in [0, 1]
  double acc_total = 0.0;
  double auroc_score = 0.0;
  double d_th = 0.0;
  double eer = 0.0;
  int target_queries = 0;
  int unknown_queries = 0;
};

struct MetricSummary {
  double mean_pct = 0.0;
  double ci_half_pct = 0.0;  // 1.96 * sample std / sqrt(n)
};

struct EvalReport {
  std::vector<TrialRecord> trials;
  MetricSummary acc_target, acc_total, auroc_pct;
};

// Embedding-level dataset view used by trials: per keyword, a support
// pool and a set of test queries (columns are embeddings). Implementations
// may wrap a real encoder or inject synthetic embeddings directly.
class TrialProvider {
 public:
  virtual ~TrialProvider() = default;
  virtual const std::vector<std::string>& keywords() const = 0;
  virtual const Eigen::MatrixXd& support_pool(const std::string& keyword) const = 0;
  virtual const Eigen::MatrixXd& test_queries(const std::string& keyword) const = 0;
};

class PrecomputedTrialProvider : public TrialProvider {
 public:
  void add(const std::string& keyword, Eigen::MatrixXd supports, Eigen::MatrixXd queries);
  const std::vector<std::string>& keywords() const override { return keywords_; }
  const Eigen::MatrixXd& support_pool(const std::string& keyword) const override;
  const Eigen::MatrixXd& test_queries(const std::string& keyword) const override;

 private:
  std::vector<std::string> keywords_;
  std::map<std::string, std::pair<Eigen::MatrixXd, Eigen::MatrixXd>> data_;
};

// One open-set trial: sample targets and unknowns, enroll K supports per
// target, classify every test query of all sampled keywords, fix D_th at
// the EER of the unknown-vs-known score split, and report Acc(target),
// Acc(total), AUROC.
TrialRecord run_trial(const TrialProvider& provider, const TrialSpec& spec, Distance distance,
                      Rng& rng);

// n_trials independent trials; trial i owns the rng seeded with
// seed ^ trial-index. Trials may run in parallel.
EvalReport evaluate_trials(const TrialProvider& provider, const TrialSpec& spec, Distance distance,
                           std::uint64_t seed, int workers = 1);

// Mean and 95% normal-approximation confidence intervals, in percent.
EvalReport aggregate(std::vector<TrialRecord> trials);

// Optional corruption of evaluation queries (noise at a uniform SNR).
struct QueryCorruption {
  bool enabled = false;
  double snr_db_lo = 10.0;
  double snr_db_hi = 20.0;
};

// Builds the embedding table for held-out oracle classes: per class, a
// rendered support pool and test queries, embedded once.
PrecomputedTrialProvider build_oracle_provider(nn::Encoder<float>& encoder, const DspConfig& dsp,
                                               const OracleSource& source, int n_classes,
                                               int support_pool, int queries_per_class,
                                               std::uint64_t seed,
                                               const QueryCorruption& corruption = {});

// Embedding table for a directory dataset: support pool from the train
// partition (capped, sampled deterministically), queries from the test
// partition (all, or capped when queries_cap > 0).
PrecomputedTrialProvider build_dataset_provider(nn::Encoder<float>& encoder, const DspConfig& dsp,
                                                const DirDataset& dataset, int support_pool_cap,
                                                int queries_cap, std::uint64_t seed,
                                                const QueryCorruption& corruption = {});

// Table 1 style report: one row per K.
std::string format_report_table(const std::vector<std::pair<int, EvalReport>>& rows,
                                const std::string& method);

// Machine-readable per-trial records, one JSON object per line.
void write_trial_records(const std::filesystem::path& path,
                         const std::vector<std::pair<int, EvalReport>>& rows);

}  // namespace fskws
