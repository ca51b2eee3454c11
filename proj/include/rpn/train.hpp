#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "rpn/augment.hpp"
#include "rpn/config.hpp"
#include "rpn/dataset.hpp"
#include "rpn/model.hpp"

namespace rpn {

enum class TrainMode { kBaseline, kRpn, kFreeLb, kFreeLbRpn, kAeda, kEdaLite };

// How the per-step gradients of a noise-augmented batch reach the optimizer:
// kAccumulate applies the running sum after every step (the interleaved
// schedule), kAverage applies the mean once per batch.
enum class UpdateRule { kAccumulate, kAverage };

// Whether embedding weights learn from virtual (noise-step) batches. kDetach
// updates them from the clean pass only; kFlow routes virtual gradients back
// through the stored masks and permutations (ablation).
enum class VirtualGrad { kDetach, kFlow };

TrainMode parse_train_mode(const std::string& name);
std::string train_mode_name(TrainMode mode);

struct TrainConfig {
  TrainMode mode = TrainMode::kBaseline;
  std::uint64_t seed = 0;
  double lr = 1e-4;
  double momentum = 0.0;
  Index epochs = 10;
  Index batch_size = 32;
  Index eval_every = 1;  // epochs between metric rows
  Index max_seq_len = 20;
  UpdateRule update_rule = UpdateRule::kAccumulate;
  VirtualGrad virtual_grad = VirtualGrad::kDetach;
  // Wall-clock column in metrics; off writes 0.0 so repeated runs produce
  // byte-identical files.
  bool wall_clock = true;

  RpnConfig rpn;
  FreeLbConfig freelb;

  Index aug_copies = 1;       // offline copies per sample for token modes
  double aug_strength = 0.3;  // punctuation ratio / token-op strength
  EdaOp eda_op = EdaOp::kRandomSwap;

  TextCnnConfig model;  // vocab_size and num_classes are filled from data

  void validate() const;

  // Reads every train/model/rpn/freelb/aug key from a key=value config.
  // Unknown keys are left for the caller's reject_unknown_keys.
  static TrainConfig from_config(const KeyValueConfig& kv);
  // Canonical echo of the resolved configuration.
  std::vector<std::string> render() const;
};

struct MetricsRecord {
  Index epoch = 0;
  std::string split;
  double loss = 0.0;
  double accuracy = 0.0;
  double wall_time_s = 0.0;
};

struct MetricsLog {
  std::vector<MetricsRecord> records;
};

inline constexpr const char* kMetricsCsvHeader = "epoch,split,loss,accuracy,wall_time_s";

void write_metrics_csv(const MetricsLog& log, const std::filesystem::path& path);

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

// Test instrumentation; every hook is optional.
struct TrainHooks {
  // One call per forward/backward pass: pass index is the noise step t for
  // the gradient-free path, n * ascent_steps + a for the adversarial path.
  std::function<void(Index epoch, Index batch, Index pass, double loss)> on_pass_loss;
  std::function<void(Index epoch, Index batch, double loss)> on_batch_loss;
  std::function<void(Index epoch, Index batch, Index pass, const GradientSet&)> on_pass_grads;
  std::function<void(Index epoch, Index batch, const GradientSet&)> on_applied_grads;
  std::function<void(double delta_norm)> on_delta_norm;
  std::function<void(Index epoch, const TextCnnModel&)> on_epoch_end;
};

struct TrainResult {
  MetricsLog metrics;
  Index train_size = 0;  // after any offline expansion
};

// Offline token-level expansion: the original set followed by `copies`
// augmented copies of every sample, re-encoded against the vocabulary.
LabeledDataset expand_token_aug(const LabeledDataset& train, const Vocabulary& vocab,
                                const TrainConfig& config, RngStream rng);

// One entry point for every mode; the degenerate settings collapse onto the
// identical code path, so e.g. rpn with zero steps is bitwise the baseline.
TrainResult train(TextCnnModel& model, const DatasetBundle& data, const TrainConfig& config,
                  const TrainHooks* hooks = nullptr);

// Mode-checked convenience wrappers.
TrainResult train_rpn(TextCnnModel& model, const DatasetBundle& data, const TrainConfig& config,
                      const TrainHooks* hooks = nullptr);
TrainResult train_freelb(TextCnnModel& model, const DatasetBundle& data,
                         const TrainConfig& config, const TrainHooks* hooks = nullptr);
TrainResult train_freelb_rpn(TextCnnModel& model, const DatasetBundle& data,
                             const TrainConfig& config, const TrainHooks* hooks = nullptr);
TrainResult train_token_aug(TextCnnModel& model, const DatasetBundle& data,
                            const TrainConfig& config, const TrainHooks* hooks = nullptr);

// Dropout off, fixed chunking, pure: calling twice gives bitwise-identical
// results.
EvalResult evaluate(const TextCnnModel& model, const LabeledDataset& split,
                    Index chunk_size = 128);

}  // namespace rpn
