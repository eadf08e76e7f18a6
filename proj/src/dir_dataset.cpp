#include "fskws/dir_dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "fskws/error.hpp"
#include "fskws/wav_io.hpp"

namespace fskws {

namespace {

// Lines of the form "keyword/clip.wav".
std::set<std::string> read_list_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("dataset: cannot open list file " + path.string());
  std::set<std::string> entries;
  std::string line;
  while (std::getline(is, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n' || line.back() == ' '))
      line.pop_back();
    if (line.empty()) continue;
    if (line.find('/') == std::string::npos)
      throw IoError("dataset: malformed list line (expected keyword/file): " + line);
    entries.insert(line);
  }
  return entries;
}

}  // namespace

DirDataset DirDataset::open(const std::filesystem::path& root, const DirDatasetOptions& opts) {
  if (!std::filesystem::is_directory(root))
    throw IoError("dataset: missing root directory " + root.string());

  std::set<std::string> val_list, test_list;
  if (opts.layout == DirLayout::kGsc) {
    val_list = read_list_file(root / "validation_list.txt");
    test_list = read_list_file(root / "testing_list.txt");
  }

  DirDataset ds;
  std::vector<std::string> keywords;
  for (const auto& entry : std::filesystem::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    const std::string name = entry.path().filename().string();
    if (name == "_background_noise_") continue;
    keywords.push_back(name);
  }
  std::sort(keywords.begin(), keywords.end());

  for (const auto& kw : keywords) {
    std::vector<std::filesystem::path> files;
    for (const auto& f : std::filesystem::directory_iterator(root / kw)) {
      if (f.is_regular_file() && f.path().extension() == ".wav") files.push_back(f.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoError("dataset: empty keyword folder " + (root / kw).string());

    const int count = static_cast<int>(files.size());
    if (opts.min_count && opts.max_count && !(count > *opts.min_count && count < *opts.max_count))
      continue;

    Partitions p;
    if (opts.layout == DirLayout::kGsc) {
      for (const auto& f : files) {
        const std::string rel = kw + "/" + f.filename().string();
        if (test_list.count(rel)) {
          p.test.push_back(f);
        } else if (val_list.count(rel)) {
          p.val.push_back(f);
        } else {
          p.train.push_back(f);
        }
      }
    } else {
      const int n_test = std::min<int>(opts.test_count, count);
      p.test.assign(files.begin(), files.begin() + n_test);
      p.train.assign(files.begin() + n_test, files.end());
    }
    ds.keywords_.push_back(kw);
    ds.parts_[kw] = std::move(p);
  }
  if (ds.keywords_.empty()) throw IoError("dataset: no keywords found in " + root.string());
  return ds;
}

const DirDataset::Partitions& DirDataset::partitions(const std::string& keyword) const {
  auto it = parts_.find(keyword);
  if (it == parts_.end()) throw Error("dataset: unknown keyword " + keyword);
  return it->second;
}

KeywordClass DirDataset::new_class(Rng& rng) const {
  const auto idx = rng.uniform_int(keywords_.size());
  KeywordClass cls;
  cls.id = idx;
  cls.name = keywords_[idx];
  return cls;
}

Waveform DirDataset::render(const KeywordClass& cls, Rng& rng) const {
  const auto& pool = partitions(cls.name).train;
  if (pool.empty()) throw Error("dataset: keyword " + cls.name + " has an empty support pool");
  return read_wav(pool[rng.uniform_int(pool.size())]);
}

std::vector<KeywordClass> DirDataset::list_classes() const {
  std::vector<KeywordClass> out;
  for (std::size_t i = 0; i < keywords_.size(); ++i) {
    KeywordClass cls;
    cls.id = i;
    cls.name = keywords_[i];
    out.push_back(std::move(cls));
  }
  return out;
}

}  // namespace fskws
