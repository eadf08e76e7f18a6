#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "fskws/dir_dataset.hpp"
#include "fskws/wav_io.hpp"

using namespace fskws;
namespace fs = std::filesystem;

namespace {

Waveform tiny_wave(double value) {
  Waveform w;
  w.sample_rate = 16000;
  w.samples.assign(160, value);
  return w;
}

fs::path make_toy_dataset(const std::string& tag, const std::vector<std::string>& keywords,
                          int files_per_keyword) {
  fs::path root = fs::temp_directory_path() / ("fskws_ds_" + tag);
  fs::remove_all(root);
  for (const auto& kw : keywords) {
    fs::create_directories(root / kw);
    for (int i = 0; i < files_per_keyword; ++i) {
      char name[16];
      std::snprintf(name, sizeof(name), "%02d.wav", i);
      write_wav(root / kw / name, tiny_wave(0.05 * (i + 1)));
    }
  }
  return root;
}

}  // namespace

TEST_CASE("mswc-like split takes the first files as test") {
  fs::path root = make_toy_dataset("mswc", {"a", "b"}, 3);
  DirDatasetOptions opts;
  opts.layout = DirLayout::kMswcLike;
  opts.test_count = 1;
  DirDataset ds = DirDataset::open(root, opts);
  REQUIRE(ds.keywords() == std::vector<std::string>{"a", "b"});
  for (const auto& kw : ds.keywords()) {
    const auto& p = ds.partitions(kw);
    CHECK(p.test.size() == 1);
    CHECK(p.train.size() == 2);
    CHECK(p.test[0].filename() == "00.wav");  // sorted order
  }
}

TEST_CASE("gsc list files control the partitions") {
  fs::path root = make_toy_dataset("gsc", {"yes", "no"}, 3);
  {
    std::ofstream val(root / "validation_list.txt");
    val << "yes/01.wav\n";
    std::ofstream test(root / "testing_list.txt");
    test << "yes/02.wav\nno/00.wav\n";
  }
  DirDatasetOptions opts;
  opts.layout = DirLayout::kGsc;
  DirDataset ds = DirDataset::open(root, opts);
  const auto& yes = ds.partitions("yes");
  CHECK(yes.train.size() == 1);
  CHECK(yes.val.size() == 1);
  CHECK(yes.test.size() == 1);
  CHECK(yes.test[0].filename() == "02.wav");
  // A listed file is in test and absent from train.
  for (const auto& f : yes.train) CHECK(f.filename() != "02.wav");
  const auto& no = ds.partitions("no");
  CHECK(no.test.size() == 1);
  CHECK(no.train.size() == 2);
}

TEST_CASE("keyword count filter uses exclusive bounds") {
  fs::path root = fs::temp_directory_path() / "fskws_ds_filter";
  fs::remove_all(root);
  const std::vector<std::pair<std::string, int>> kws = {{"two", 2}, {"three", 3}, {"four", 4}};
  for (const auto& [kw, count] : kws) {
    fs::create_directories(root / kw);
    for (int i = 0; i < count; ++i)
      write_wav(root / kw / (std::to_string(i) + ".wav"), tiny_wave(0.1));
  }
  DirDatasetOptions opts;
  opts.layout = DirLayout::kMswcLike;
  opts.test_count = 1;
  opts.min_count = 2;
  opts.max_count = 4;
  DirDataset ds = DirDataset::open(root, opts);
  REQUIRE(ds.keywords().size() == 1);
  CHECK(ds.keywords()[0] == "three");
}

TEST_CASE("partitions are pairwise disjoint") {
  fs::path root = make_toy_dataset("disjoint", {"k"}, 6);
  {
    std::ofstream val(root / "validation_list.txt");
    val << "k/01.wav\nk/02.wav\n";
    std::ofstream test(root / "testing_list.txt");
    test << "k/03.wav\n";
  }
  DirDatasetOptions opts;
  opts.layout = DirLayout::kGsc;
  DirDataset ds = DirDataset::open(root, opts);
  const auto& p = ds.partitions("k");
  std::set<fs::path> all;
  for (const auto& f : p.train) all.insert(f);
  for (const auto& f : p.val) all.insert(f);
  for (const auto& f : p.test) all.insert(f);
  CHECK(all.size() == p.train.size() + p.val.size() + p.test.size());
  CHECK(all.size() == 6);
}

TEST_CASE("missing root and malformed lists are errors") {
  CHECK_THROWS_AS(DirDataset::open("/nonexistent/root", {}), IoError);

  fs::path root = make_toy_dataset("badlist", {"a"}, 2);
  {
    std::ofstream val(root / "validation_list.txt");
    val << "not-a-path-line\n";
    std::ofstream test(root / "testing_list.txt");
  }
  DirDatasetOptions opts;
  opts.layout = DirLayout::kGsc;
  CHECK_THROWS_WITH_AS(DirDataset::open(root, opts), doctest::Contains("malformed"), IoError);
}

TEST_CASE("empty keyword folder is an error") {
  fs::path root = make_toy_dataset("empty", {"a"}, 1);
  fs::create_directories(root / "hollow");
  DirDatasetOptions opts;
  CHECK_THROWS_WITH_AS(DirDataset::open(root, opts), doctest::Contains("empty keyword"), IoError);
}

TEST_CASE("render draws from the support pool only") {
  fs::path root = make_toy_dataset("render", {"a"}, 4);
  DirDatasetOptions opts;
  opts.layout = DirLayout::kMswcLike;
  opts.test_count = 2;
  DirDataset ds = DirDataset::open(root, opts);
  Rng rng(1);
  KeywordClass cls;
  cls.name = "a";
  // Train pool holds files 02 and 03 with values 0.15 and 0.2.
  for (int i = 0; i < 20; ++i) {
    Waveform w = ds.render(cls, rng);
    CHECK((std::abs(w.samples[0] - 0.15) < 1e-3 || std::abs(w.samples[0] - 0.2) < 1e-3));
  }
}

TEST_CASE("list_classes covers every keyword once") {
  fs::path root = make_toy_dataset("classes", {"a", "b", "c"}, 2);
  DirDatasetOptions opts;
  opts.test_count = 1;
  DirDataset ds = DirDataset::open(root, opts);
  const auto classes = ds.list_classes();
  REQUIRE(classes.size() == 3);
  CHECK(classes[0].name == "a");
  CHECK(classes[2].name == "c");
}
