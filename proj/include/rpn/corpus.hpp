#pragma once

#include <cstdint>
#include <filesystem>

#include "rpn/dataset.hpp"
#include "rpn/rng.hpp"

namespace rpn {

// Deterministic sentence-polarity corpus in SST-2 TSV form. Sentences come
// from review-style templates over sentiment lexicons with negation and
// contrast rules, a Zipf-weighted rare-word tail, and a configurable label
// noise rate; all three splits are globally deduplicated by raw text.
struct CorpusConfig {
  Index train_sentences = 6000;
  Index dev_sentences = 800;
  Index test_sentences = 1800;
  double label_noise = 0.06;  // probability a sentence's label is flipped
  std::uint64_t seed = 2024;

  void validate() const;
};

struct SentimentCorpus {
  LabeledDataset train;
  LabeledDataset dev;
  LabeledDataset test;
  Index noisy_labels = 0;  // count of flipped labels across all splits
};

SentimentCorpus make_sentiment_corpus(const CorpusConfig& config);

// SST-2 layout: header "sentence\tlabel", text column 0, label column 1.
void write_corpus_tsv(const LabeledDataset& split, const std::filesystem::path& path);

// Writes train.tsv/dev.tsv/test.tsv plus a manifest.txt readable by
// load_bundle; returns the manifest path.
std::filesystem::path write_corpus(const SentimentCorpus& corpus,
                                   const std::filesystem::path& directory);

// In-memory bundle over the generated corpus: vocabulary built on train
// (capped), every split encoded against it.
DatasetBundle bundle_from_corpus(const SentimentCorpus& corpus, Index vocab_cap,
                                 Index max_seq_len);

}  // namespace rpn
