#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rpn/rng.hpp"
#include "rpn/text.hpp"

namespace rpn {

struct TokenSequence {
  std::vector<Index> token_ids;  // unpadded, truncated to the configured max length
  int label = 0;
  std::string raw_text;
};

struct LabeledDataset {
  std::vector<TokenSequence> sequences;
  int num_classes = 0;
  std::string split;  // train/dev/test

  Index size() const { return static_cast<Index>(sequences.size()); }
  std::vector<Index> label_counts() const;
};

struct TsvSchema {
  int text_column = 0;
  int label_column = 1;
  bool has_header = true;
  // strict: first malformed row aborts with its line number. Otherwise
  // malformed rows are skipped but counted, never silently dropped.
  bool strict = true;
};

struct TsvLoadResult {
  LabeledDataset dataset;
  std::vector<std::size_t> malformed_lines;  // 1-based line numbers
};

// Reads a UTF-8 TSV file (SST-2/CoLA style) into raw-text records. Token ids
// are filled in later by encode_dataset once a vocabulary exists.
TsvLoadResult load_tsv(const std::filesystem::path& path, const TsvSchema& schema);

// Tokenizes raw_text and fills token_ids (truncated to max_seq_len).
void encode_dataset(LabeledDataset& dataset, const Vocabulary& vocab, Index max_seq_len);

// Deterministic linearly separable fixture: each class owns a disjoint set of
// marker tokens; every sample carries at least one marker of its class and
// none of any other class. Labels are round-robin, so classes stay balanced.
LabeledDataset synth_dataset(Index num_samples, Index vocab_size, Index seq_len,
                             int num_classes, RngStream rng);

// The word list synth_dataset draws from; id i >= 2 maps to token "w<i>".
Vocabulary synth_vocabulary(Index vocab_size);

// One complete task: three splits sharing a vocabulary built on train.
struct DatasetBundle {
  Vocabulary vocab;
  LabeledDataset train;
  LabeledDataset dev;
  LabeledDataset test;
  int num_classes = 0;

  const LabeledDataset& split(std::string_view name) const;
};

struct ManifestSchema {
  std::filesystem::path train_path;
  std::filesystem::path dev_path;
  std::filesystem::path test_path;
  TsvSchema tsv;
};

// Plain key=value manifest naming the split files and their TSV schema.
// Relative paths resolve against the manifest's directory.
ManifestSchema read_manifest(const std::filesystem::path& path);

// Loads all three splits, builds the vocabulary on train (capped), encodes
// every split, and verifies the splits are disjoint by raw text.
DatasetBundle load_bundle(const std::filesystem::path& manifest_path, Index vocab_cap,
                          Index max_seq_len);

// Synthetic bundle with derived per-split streams. Dev/test rows whose text
// collides with a train row are dropped to keep the splits disjoint.
DatasetBundle synth_bundle(Index train_samples, Index vocab_size, Index seq_len,
                           int num_classes, Index max_seq_len, RngStream rng);

}  // namespace rpn
