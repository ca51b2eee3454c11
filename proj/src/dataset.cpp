#include "rpn/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <unordered_set>

#include "rpn/config.hpp"
#include "rpn/kernels.hpp"

namespace rpn {
namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (start <= line.size()) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

// Labels must be small non-negative integers; anything else is -1.
int parse_label_or_fail(std::string_view text) {
  int out = -1;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc{} || ptr != text.data() + text.size() || out < 0) return -1;
  return out;
}

std::string clip(std::string_view text) {
  constexpr std::size_t kMax = 60;
  if (text.size() <= kMax) return std::string(text);
  return std::string(text.substr(0, kMax)) + "...";
}

void check_disjoint(const LabeledDataset& a, const LabeledDataset& b) {
  std::unordered_set<std::string_view> seen;
  seen.reserve(a.sequences.size());
  for (const TokenSequence& seq : a.sequences) seen.insert(seq.raw_text);
  for (const TokenSequence& seq : b.sequences) {
    if (seen.count(seq.raw_text))
      throw DataError("splits '" + a.split + "' and '" + b.split + "' share a row: \"" +
                      clip(seq.raw_text) + "\"");
  }
}

}  // namespace

std::vector<Index> LabeledDataset::label_counts() const {
  std::vector<Index> counts(static_cast<std::size_t>(std::max(num_classes, 0)), 0);
  for (const TokenSequence& seq : sequences) {
    if (seq.label < 0 || seq.label >= num_classes)
      throw DataError("label " + std::to_string(seq.label) + " outside [0, " +
                      std::to_string(num_classes) + ") in split '" + split + "'");
    ++counts[static_cast<std::size_t>(seq.label)];
  }
  return counts;
}

TsvLoadResult load_tsv(const std::filesystem::path& path, const TsvSchema& schema) {
  if (schema.text_column < 0 || schema.label_column < 0 ||
      schema.text_column == schema.label_column)
    throw ConfigError("tsv columns must be distinct and non-negative");
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file: " + path.string());

  TsvLoadResult result;
  const std::size_t want =
      static_cast<std::size_t>(std::max(schema.text_column, schema.label_column)) + 1;
  std::string line;
  std::size_t line_no = 0;
  int max_label = -1;
  bool skip_header = schema.has_header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (skip_header) {
      skip_header = false;
      continue;
    }
    if (line.empty()) continue;

    const auto fields = split_tabs(line);
    int label = -1;
    if (fields.size() >= want)
      label = parse_label_or_fail(fields[static_cast<std::size_t>(schema.label_column)]);
    if (label < 0) {
      if (schema.strict)
        throw ParseError(path.string() + ":" + std::to_string(line_no) +
                         ": malformed row (need a text column and an integer label)");
      result.malformed_lines.push_back(line_no);
      continue;
    }
    TokenSequence seq;
    seq.raw_text = std::string(fields[static_cast<std::size_t>(schema.text_column)]);
    seq.label = label;
    max_label = std::max(max_label, label);
    result.dataset.sequences.push_back(std::move(seq));
  }
  result.dataset.num_classes = max_label + 1;
  return result;
}

void encode_dataset(LabeledDataset& dataset, const Vocabulary& vocab, Index max_seq_len) {
  if (max_seq_len <= 0) throw ConfigError("max_seq_len must be positive");
  for (TokenSequence& seq : dataset.sequences) {
    seq.token_ids = vocab.encode_all(tokenize(seq.raw_text));
    if (static_cast<Index>(seq.token_ids.size()) > max_seq_len)
      seq.token_ids.resize(static_cast<std::size_t>(max_seq_len));
  }
}

LabeledDataset synth_dataset(Index num_samples, Index vocab_size, Index seq_len,
                             int num_classes, RngStream rng) {
  if (num_samples <= 0) throw ConfigError("synth_dataset needs num_samples >= 1");
  if (seq_len <= 0) throw ConfigError("synth_dataset needs seq_len >= 1");
  if (num_classes < 2) throw ConfigError("synth_dataset needs num_classes >= 2");
  if (vocab_size < static_cast<Index>(num_classes) + 2)
    throw ConfigError("synth_dataset needs one marker token per class: vocab_size " +
                      std::to_string(vocab_size) + " is too small for " +
                      std::to_string(num_classes) + " classes");

  // Ids [2, 2+C*m) are class markers, m per class; the rest are shared filler.
  const Index usable = vocab_size - 2;
  const Index per_class = std::max<Index>(1, usable / (4 * num_classes));
  const Index filler_base = 2 + per_class * num_classes;
  const Index filler_count = vocab_size - filler_base;

  LabeledDataset out;
  out.num_classes = num_classes;
  out.split = "synth";
  out.sequences.reserve(static_cast<std::size_t>(num_samples));
  for (Index i = 0; i < num_samples; ++i) {
    const int label = static_cast<int>(i % num_classes);
    const Index marker_base = 2 + per_class * static_cast<Index>(label);
    const Index num_markers = std::min<Index>(seq_len, rng.bernoulli(0.5) ? 2 : 1);
    const std::vector<Index> order = random_permutation(seq_len, rng);

    std::vector<Index> ids(static_cast<std::size_t>(seq_len), 0);
    for (Index pos = 0; pos < seq_len; ++pos) {
      const bool marker = pos < num_markers || filler_count == 0;
      const Index base = marker ? marker_base : filler_base;
      const Index span = marker ? per_class : filler_count;
      ids[static_cast<std::size_t>(order[static_cast<std::size_t>(pos)])] =
          base + static_cast<Index>(rng.next_below(static_cast<std::uint64_t>(span)));
    }

    TokenSequence seq;
    seq.token_ids = ids;
    seq.label = label;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (k > 0) seq.raw_text += ' ';
      seq.raw_text += 'w';
      seq.raw_text += std::to_string(ids[k]);
    }
    out.sequences.push_back(std::move(seq));
  }
  return out;
}

Vocabulary synth_vocabulary(Index vocab_size) {
  if (vocab_size < 2) throw ConfigError("synth_vocabulary needs vocab_size >= 2");
  std::vector<std::string> tokens;
  tokens.reserve(static_cast<std::size_t>(vocab_size));
  tokens.push_back("<pad>");
  tokens.push_back("<unk>");
  for (Index i = 2; i < vocab_size; ++i) tokens.push_back("w" + std::to_string(i));
  return Vocabulary::from_tokens(std::move(tokens));
}

const LabeledDataset& DatasetBundle::split(std::string_view name) const {
  if (name == "train") return train;
  if (name == "dev") return dev;
  if (name == "test") return test;
  throw ConfigError("unknown split '" + std::string(name) + "' (want train, dev, or test)");
}

ManifestSchema read_manifest(const std::filesystem::path& path) {
  const KeyValueConfig config = KeyValueConfig::from_file(path);
  ManifestSchema manifest;
  manifest.train_path = config.require_string("train");
  manifest.dev_path = config.require_string("dev");
  manifest.test_path = config.require_string("test");
  manifest.tsv.text_column = static_cast<int>(config.get_int("text_column", 0));
  manifest.tsv.label_column = static_cast<int>(config.get_int("label_column", 1));
  manifest.tsv.has_header = config.get_bool("has_header", true);
  manifest.tsv.strict = config.get_bool("strict", true);
  config.reject_unknown_keys();

  const std::filesystem::path base = path.parent_path();
  for (std::filesystem::path* p : {&manifest.train_path, &manifest.dev_path, &manifest.test_path})
    if (p->is_relative()) *p = base / *p;
  return manifest;
}

DatasetBundle load_bundle(const std::filesystem::path& manifest_path, Index vocab_cap,
                          Index max_seq_len) {
  const ManifestSchema manifest = read_manifest(manifest_path);

  DatasetBundle bundle;
  bundle.train = load_tsv(manifest.train_path, manifest.tsv).dataset;
  bundle.dev = load_tsv(manifest.dev_path, manifest.tsv).dataset;
  bundle.test = load_tsv(manifest.test_path, manifest.tsv).dataset;
  bundle.train.split = "train";
  bundle.dev.split = "dev";
  bundle.test.split = "test";
  for (const LabeledDataset* split : {&bundle.train, &bundle.dev, &bundle.test})
    if (split->sequences.empty())
      throw DataError("split '" + split->split + "' is empty: " + manifest_path.string());

  bundle.num_classes = std::max(
      {bundle.train.num_classes, bundle.dev.num_classes, bundle.test.num_classes});
  if (bundle.num_classes < 2)
    throw DataError("need at least 2 label values, found " +
                    std::to_string(bundle.num_classes));
  bundle.train.num_classes = bundle.num_classes;
  bundle.dev.num_classes = bundle.num_classes;
  bundle.test.num_classes = bundle.num_classes;

  check_disjoint(bundle.train, bundle.dev);
  check_disjoint(bundle.train, bundle.test);
  check_disjoint(bundle.dev, bundle.test);

  std::vector<std::vector<std::string>> token_lists;
  token_lists.reserve(bundle.train.sequences.size());
  for (const TokenSequence& seq : bundle.train.sequences)
    token_lists.push_back(tokenize(seq.raw_text));
  bundle.vocab = Vocabulary::build(token_lists, vocab_cap);

  encode_dataset(bundle.train, bundle.vocab, max_seq_len);
  encode_dataset(bundle.dev, bundle.vocab, max_seq_len);
  encode_dataset(bundle.test, bundle.vocab, max_seq_len);
  return bundle;
}

DatasetBundle synth_bundle(Index train_samples, Index vocab_size, Index seq_len,
                           int num_classes, Index max_seq_len, RngStream rng) {
  DatasetBundle bundle;
  bundle.vocab = synth_vocabulary(vocab_size);
  bundle.train =
      synth_dataset(train_samples, vocab_size, seq_len, num_classes, rng.derive("train"));
  bundle.dev = synth_dataset(std::max<Index>(1, train_samples / 8), vocab_size, seq_len,
                             num_classes, rng.derive("dev"));
  bundle.test = synth_dataset(std::max<Index>(1, train_samples / 4), vocab_size, seq_len,
                              num_classes, rng.derive("test"));
  bundle.train.split = "train";
  bundle.dev.split = "dev";
  bundle.test.split = "test";
  bundle.num_classes = num_classes;

  std::unordered_set<std::string> taken;
  taken.reserve(bundle.train.sequences.size());
  for (const TokenSequence& seq : bundle.train.sequences) taken.insert(seq.raw_text);
  for (LabeledDataset* split : {&bundle.dev, &bundle.test}) {
    std::vector<TokenSequence> kept;
    kept.reserve(split->sequences.size());
    for (TokenSequence& seq : split->sequences) {
      if (taken.count(seq.raw_text)) continue;
      taken.insert(seq.raw_text);
      kept.push_back(std::move(seq));
    }
    split->sequences = std::move(kept);
  }

  encode_dataset(bundle.train, bundle.vocab, max_seq_len);
  encode_dataset(bundle.dev, bundle.vocab, max_seq_len);
  encode_dataset(bundle.test, bundle.vocab, max_seq_len);
  return bundle;
}

}  // namespace rpn
