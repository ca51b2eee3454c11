#pragma once

#include <string>
#include <vector>

#include "rpn/model.hpp"
#include "rpn/rng.hpp"
#include "rpn/tensor.hpp"

namespace rpn {

enum class ShuffleScope {
  kPerSampleRows,  // one permutation per sample, over its own word rows
  kCrossBatchRows  // one permutation over all word rows in the batch
};

struct RpnConfig {
  double epsilon = 0.3;  // per-entry modification probability
  Index steps = 3;       // virtual batches per real batch
  ShuffleScope shuffle_scope = ShuffleScope::kPerSampleRows;
  // Padding rows join the shuffle by default; with mask_padding they become
  // fixed points with an all-zero mask, so real values never leak into (or
  // out of) padding.
  bool mask_padding = false;
  // Default: the noise rows are shuffled together with the mask before being
  // re-added, so every modified entry is a copy of a same-column entry.
  // Disabled, the un-shuffled noise is re-added instead (the additive variant
  // of the update); kept for comparison, not used by training.
  bool coupled_shuffle = true;

  void validate() const;
};

struct FreeLbConfig {
  double norm_bound = 1e-2;  // Frobenius-ball radius for the perturbation
  double alpha = 1e-4;       // ascent step size; 0 freezes the perturbation
  Index ascent_steps = 3;
  double init_range = 1e-4;

  void validate() const;
};

// One noise step. mask is the shuffled 0/1 position tensor aligned with
// x_next: exactly the entries with mask==1 changed, and they hold the
// same-column value of the row the permutation points at. perm is flat over
// all batch*seq word rows (identity outside the shuffle scope).
struct RpnStepResult {
  EmbeddingBatch x_next;
  Tensor mask;
  std::vector<Index> perm;

  double mask_density() const;
};

RpnStepResult rpn_step(const EmbeddingBatch& x, const RpnConfig& config, RngStream& rng);

// Chains rpn_step K times: result[t] holds X_{t+1} built from X_t. Empty for
// steps == 0.
std::vector<RpnStepResult> rpn_augment(const EmbeddingBatch& x0, const RpnConfig& config,
                                       RngStream& rng);

// Uniform perturbation in [-init_range, init_range], the adversarial warm
// start.
Tensor freelb_init(std::vector<Index> shape, const FreeLbConfig& config, RngStream& rng);

// delta + alpha * grad / ||delta||_F, then projection onto the Frobenius ball
// of radius norm_bound. A zero-norm delta uses divisor 1 (the ascent
// direction is then just alpha * grad).
Tensor freelb_update(const Tensor& delta, const Tensor& grad, const FreeLbConfig& config);

// Inserts floor(insert_ratio * len) punctuation marks at random interior
// positions, preserving token order.
std::vector<std::string> aeda(const std::vector<std::string>& tokens, double insert_ratio,
                              RngStream& rng);

enum class EdaOp { kRandomSwap, kRandomDelete };

// Swap: ceil(strength * len) random transpositions (multiset preserved).
// Delete: each token dropped with probability strength, keeping one random
// token when everything would vanish.
std::vector<std::string> eda_lite(const std::vector<std::string>& tokens, EdaOp op,
                                  double strength, RngStream& rng);

}  // namespace rpn
