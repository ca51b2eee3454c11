#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "rpn/dataset.hpp"

using rpn::Index;
using rpn::LabeledDataset;
using rpn::RngStream;
using rpn::TsvSchema;

namespace {

class TempDir {
 public:
  TempDir() {
    dir_ = std::filesystem::temp_directory_path() /
           ("rpn_test_" + std::to_string(++instance_counter));
    std::filesystem::create_directories(dir_);
  }
  ~TempDir() { std::filesystem::remove_all(dir_); }

  std::filesystem::path write(const std::string& name, const std::string& content) const {
    const std::filesystem::path path = dir_ / name;
    std::ofstream out(path, std::ios::binary);
    out << content;
    return path;
  }
  const std::filesystem::path& path() const { return dir_; }

 private:
  static inline int instance_counter = 0;
  std::filesystem::path dir_;
};

}  // namespace

TEST_CASE("load_tsv reads header, columns and labels") {
  TempDir tmp;
  const auto path = tmp.write("train.tsv",
                              "sentence\tlabel\n"
                              "a fine film\t1\n"
                              "dull and slow\t0\r\n"
                              "\n"
                              "the best one\t1\n");
  const auto result = rpn::load_tsv(path, TsvSchema{});
  CHECK(result.malformed_lines.empty());
  REQUIRE(result.dataset.size() == 3);
  CHECK(result.dataset.num_classes == 2);
  CHECK(result.dataset.sequences[0].raw_text == "a fine film");
  CHECK(result.dataset.sequences[0].label == 1);
  CHECK(result.dataset.sequences[1].raw_text == "dull and slow");
  CHECK(result.dataset.sequences[1].label == 0);
  CHECK(result.dataset.label_counts() == std::vector<Index>{1, 2});
}

TEST_CASE("load_tsv strict mode aborts with the line number") {
  TempDir tmp;
  const auto path = tmp.write("bad.tsv",
                              "sentence\tlabel\n"
                              "fine\t1\n"
                              "no label here\n");
  try {
    rpn::load_tsv(path, TsvSchema{});
    FAIL("expected ParseError");
  } catch (const rpn::ParseError& e) {
    CHECK(std::string(e.what()).find(":3") != std::string::npos);
  }
}

TEST_CASE("load_tsv lenient mode counts malformed rows") {
  TempDir tmp;
  const auto path = tmp.write("bad.tsv",
                              "fine\t1\n"
                              "no label\n"
                              "also bad\tnotint\n"
                              "ok\t0\n");
  TsvSchema schema;
  schema.has_header = false;
  schema.strict = false;
  const auto result = rpn::load_tsv(path, schema);
  CHECK(result.dataset.size() == 2);
  CHECK(result.malformed_lines == std::vector<std::size_t>{2, 3});
}

TEST_CASE("load_tsv honours custom column order") {
  TempDir tmp;
  const auto path = tmp.write("cols.tsv", "1\tgreat stuff\n0\tnot good\n");
  TsvSchema schema;
  schema.text_column = 1;
  schema.label_column = 0;
  schema.has_header = false;
  const auto result = rpn::load_tsv(path, schema);
  REQUIRE(result.dataset.size() == 2);
  CHECK(result.dataset.sequences[0].raw_text == "great stuff");
  CHECK(result.dataset.sequences[0].label == 1);
  CHECK_THROWS_AS(rpn::load_tsv(path, TsvSchema{0, 0, false, true}), rpn::ConfigError);
}

TEST_CASE("load_tsv reports a missing file as an io error") {
  CHECK_THROWS_AS(rpn::load_tsv("/nonexistent/nope.tsv", TsvSchema{}), rpn::IoError);
}

TEST_CASE("encode_dataset tokenizes and truncates") {
  LabeledDataset data;
  data.num_classes = 2;
  data.sequences.push_back({{}, 1, "Fine, fine movie"});
  data.sequences.push_back({{}, 0, "one two three four five"});
  const rpn::Vocabulary vocab =
      rpn::Vocabulary::build({{"fine", ",", "movie", "one", "two", "three"}}, 100);
  rpn::encode_dataset(data, vocab, 3);
  CHECK(data.sequences[0].token_ids ==
        std::vector<Index>{vocab.encode("fine"), vocab.encode(","), vocab.encode("fine")});
  REQUIRE(data.sequences[1].token_ids.size() == 3);
  CHECK(data.sequences[1].token_ids[2] == vocab.encode("three"));
  CHECK_THROWS_AS(rpn::encode_dataset(data, vocab, 0), rpn::ConfigError);
}

TEST_CASE("synth_dataset is deterministic, balanced and class-separable") {
  const LabeledDataset a = rpn::synth_dataset(120, 60, 8, 3, RngStream(5));
  const LabeledDataset b = rpn::synth_dataset(120, 60, 8, 3, RngStream(5));
  REQUIRE(a.size() == 120);
  CHECK(a.label_counts() == std::vector<Index>{40, 40, 40});
  for (Index i = 0; i < a.size(); ++i) {
    const auto& sa = a.sequences[static_cast<std::size_t>(i)];
    const auto& sb = b.sequences[static_cast<std::size_t>(i)];
    CHECK(sa.token_ids == sb.token_ids);
    CHECK(sa.label == sb.label);
    CHECK(sa.raw_text == sb.raw_text);
    CHECK(sa.token_ids.size() == 8);
  }

  // Tokens seen in exactly one class are that class's markers; every sample
  // must carry one, otherwise the fixture is not linearly separable.
  std::map<Index, std::set<int>> classes_using;
  for (const auto& seq : a.sequences)
    for (Index id : seq.token_ids) classes_using[id].insert(seq.label);
  for (const auto& seq : a.sequences) {
    bool has_marker = false;
    for (Index id : seq.token_ids)
      has_marker |= classes_using.at(id) == std::set<int>{seq.label};
    CHECK(has_marker);
  }
}

TEST_CASE("a bag-of-words perceptron separates the synthetic fixture") {
  // Independent linear probe: if the fixture is linearly separable, a
  // perceptron over token-count features must reach zero training errors.
  const LabeledDataset data = rpn::synth_dataset(100, 50, 8, 2, RngStream(7));
  std::vector<double> w(50, 0.0);
  double bias = 0.0;
  Index mistakes = 1;
  for (int pass = 0; pass < 200 && mistakes > 0; ++pass) {
    mistakes = 0;
    for (const auto& seq : data.sequences) {
      std::vector<double> x(50, 0.0);
      for (Index id : seq.token_ids) x[static_cast<std::size_t>(id)] += 1.0;
      double score = bias;
      for (std::size_t j = 0; j < x.size(); ++j) score += w[j] * x[j];
      const double target = seq.label == 1 ? 1.0 : -1.0;
      if (score * target <= 0.0) {
        ++mistakes;
        for (std::size_t j = 0; j < x.size(); ++j) w[j] += target * x[j];
        bias += target;
      }
    }
  }
  CHECK(mistakes == 0);
}

TEST_CASE("synth_dataset rejects infeasible parameters") {
  CHECK_THROWS_AS(rpn::synth_dataset(10, 3, 5, 2, RngStream(1)), rpn::ConfigError);
  CHECK_THROWS_AS(rpn::synth_dataset(0, 50, 5, 2, RngStream(1)), rpn::ConfigError);
  CHECK_THROWS_AS(rpn::synth_dataset(10, 50, 0, 2, RngStream(1)), rpn::ConfigError);
  CHECK_THROWS_AS(rpn::synth_dataset(10, 50, 5, 1, RngStream(1)), rpn::ConfigError);
}

TEST_CASE("synth_vocabulary round-trips synth_dataset text") {
  const rpn::Vocabulary vocab = rpn::synth_vocabulary(40);
  CHECK(vocab.size() == 40);
  CHECK(vocab.encode("w17") == 17);

  LabeledDataset data = rpn::synth_dataset(20, 40, 6, 2, RngStream(9));
  const auto original = data.sequences;
  rpn::encode_dataset(data, vocab, 6);
  for (std::size_t i = 0; i < original.size(); ++i)
    CHECK(data.sequences[i].token_ids == original[i].token_ids);
}

TEST_CASE("synth_bundle keeps splits disjoint and shares one vocabulary") {
  const rpn::DatasetBundle bundle = rpn::synth_bundle(200, 60, 8, 2, 8, RngStream(21));
  CHECK(bundle.train.size() == 200);
  CHECK(bundle.dev.size() > 0);
  CHECK(bundle.test.size() > 0);
  CHECK(bundle.num_classes == 2);
  CHECK(&bundle.split("dev") == &bundle.dev);
  CHECK_THROWS_AS(bundle.split("validation"), rpn::ConfigError);

  std::set<std::string> seen;
  for (const auto* split : {&bundle.train, &bundle.dev, &bundle.test})
    for (const auto& seq : split->sequences) {
      CHECK(seen.insert(seq.raw_text).second);
      REQUIRE(!seq.token_ids.empty());
      for (Index id : seq.token_ids) CHECK(id >= 2);
    }
}

TEST_CASE("manifest loading builds the vocabulary on train only") {
  TempDir tmp;
  tmp.write("train.tsv", "sentence\tlabel\nalpha beta\t1\ngamma beta\t0\n");
  tmp.write("dev.tsv", "sentence\tlabel\nalpha delta\t1\n");
  tmp.write("test.tsv", "sentence\tlabel\ngamma alpha\t0\n");
  const auto manifest = tmp.write("data.manifest",
                                  "train=train.tsv\n"
                                  "dev=dev.tsv\n"
                                  "test=test.tsv\n");
  const rpn::DatasetBundle bundle = rpn::load_bundle(manifest, 100, 16);
  CHECK(bundle.num_classes == 2);
  CHECK(bundle.vocab.contains("alpha"));
  CHECK_FALSE(bundle.vocab.contains("delta"));
  CHECK(bundle.dev.sequences[0].token_ids[1] == rpn::Vocabulary::kUnkId);
}

TEST_CASE("manifest rejects unknown keys and overlapping splits") {
  TempDir tmp;
  tmp.write("train.tsv", "sentence\tlabel\nsame text\t1\nother text\t0\n");
  tmp.write("dev.tsv", "sentence\tlabel\nsame text\t1\n");
  tmp.write("test.tsv", "sentence\tlabel\nthird text\t0\n");
  const auto overlapping = tmp.write("bad.manifest",
                                     "train=train.tsv\ndev=dev.tsv\ntest=test.tsv\n");
  try {
    rpn::load_bundle(overlapping, 100, 16);
    FAIL("expected DataError");
  } catch (const rpn::DataError& e) {
    CHECK(std::string(e.what()).find("same text") != std::string::npos);
  }

  const auto unknown = tmp.write("unknown.manifest",
                                 "train=train.tsv\ndev=dev.tsv\ntest=test.tsv\nfoo=1\n");
  CHECK_THROWS_AS(rpn::load_bundle(unknown, 100, 16), rpn::ConfigError);

  const auto missing = tmp.write("missing.manifest", "train=train.tsv\ndev=dev.tsv\n");
  CHECK_THROWS_AS(rpn::load_bundle(missing, 100, 16), rpn::ConfigError);
}
