#pragma once

#include <filesystem>
#include <map>
#include <optional>

#include "fskws/sample_source.hpp"

namespace fskws {

enum class DirLayout { kGsc, kMswcLike };

struct DirDatasetOptions {
  DirLayout layout = DirLayout::kMswcLike;
  // MSWC-like: first test_count files per keyword (sorted filename order)
  // form the test split, the rest the support pool.
  int test_count = 250;
  // Optional keyword filter: keep keywords whose file count lies strictly
  // inside (min_count, max_count). Disabled when unset.
  std::optional<int> min_count;
  std::optional<int> max_count;
};

// Finite dataset of keyword-named subdirectories of WAV files with
// per-keyword train/val/test partitions. GSC layouts take partitions from
// the official validation_list.txt / testing_list.txt files; MSWC-like
// layouts split by sorted filename order. Read-only after open.
class DirDataset : public SampleSource {
 public:
  struct Partitions {
    std::vector<std::filesystem::path> train;  // support pool
    std::vector<std::filesystem::path> val;
    std::vector<std::filesystem::path> test;
  };

  static DirDataset open(const std::filesystem::path& root, const DirDatasetOptions& opts);

  const std::vector<std::string>& keywords() const { return keywords_; }
  const Partitions& partitions(const std::string& keyword) const;

  // SampleSource: a random keyword / a random clip from its support pool.
  KeywordClass new_class(Rng& rng) const override;
  Waveform render(const KeywordClass& cls, Rng& rng) const override;
  std::vector<KeywordClass> list_classes() const override;

 private:
  std::vector<std::string> keywords_;
  std::map<std::string, Partitions> parts_;
};

}  // namespace fskws
