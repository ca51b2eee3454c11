#include "rpn/augment.hpp"

#include <cmath>
#include <numeric>

#include "rpn/kernels.hpp"

namespace rpn {
namespace {

constexpr const char* kAedaMarks[] = {".", ";", "?", ":", "!", ","};

void validate_batch(const EmbeddingBatch& x, const char* what) {
  if (x.values.rank() < 2)
    throw DimensionError(std::string(what) + " needs word rows, got tensor " +
                         shape_string(x.values.shape()));
  ensure_finite(x.values, what);
  if (x.lengths.empty()) return;
  if (static_cast<Index>(x.lengths.size()) != x.batch_size())
    throw DimensionError(std::string(what) + ": " + std::to_string(x.lengths.size()) +
                         " lengths for batch of " + std::to_string(x.batch_size()));
  for (Index len : x.lengths)
    if (len < 0 || len > x.seq_len())
      throw DimensionError(std::string(what) + ": length " + std::to_string(len) +
                           " outside [0, " + std::to_string(x.seq_len()) + "]");
}

// Flat word-row indices that shuffle together, one list per permutation
// block. Padding rows are excluded only under mask_padding.
std::vector<std::vector<Index>> shuffle_blocks(const EmbeddingBatch& x,
                                               const RpnConfig& config) {
  const Index batch = x.batch_size();
  const Index seq = x.seq_len();
  std::vector<std::vector<Index>> blocks;
  for (Index b = 0; b < batch; ++b) {
    const Index rows = (config.mask_padding && !x.lengths.empty())
                           ? x.lengths[static_cast<std::size_t>(b)]
                           : seq;
    std::vector<Index> block;
    block.reserve(static_cast<std::size_t>(rows));
    for (Index i = 0; i < rows; ++i) block.push_back(b * seq + i);
    if (config.shuffle_scope == ShuffleScope::kCrossBatchRows && !blocks.empty()) {
      blocks.front().insert(blocks.front().end(), block.begin(), block.end());
    } else {
      blocks.push_back(std::move(block));
    }
  }
  return blocks;
}

}  // namespace

void RpnConfig::validate() const {
  if (epsilon < 0.0 || epsilon > 1.0)
    throw ConfigError("rpn.epsilon must be in [0, 1], got " + std::to_string(epsilon));
  if (steps < 0)
    throw ConfigError("rpn.steps must be >= 0, got " + std::to_string(steps));
}

void FreeLbConfig::validate() const {
  if (norm_bound <= 0.0)
    throw ConfigError("freelb.norm_bound must be positive, got " + std::to_string(norm_bound));
  if (alpha < 0.0)
    throw ConfigError("freelb.alpha must be >= 0, got " + std::to_string(alpha));
  if (ascent_steps < 1)
    throw ConfigError("freelb.ascent_steps must be >= 1, got " + std::to_string(ascent_steps));
  if (init_range < 0.0)
    throw ConfigError("freelb.init_range must be >= 0, got " + std::to_string(init_range));
}

double RpnStepResult::mask_density() const {
  if (mask.size() == 0) return 0.0;
  return mask.as_flat().sum() / static_cast<double>(mask.size());
}

RpnStepResult rpn_step(const EmbeddingBatch& x, const RpnConfig& config, RngStream& rng) {
  config.validate();
  validate_batch(x, "rpn_step");

  const Index rows = x.values.row_count();
  const Index dim = x.values.row_width();
  const auto blocks = shuffle_blocks(x, config);

  // P: entrywise Bernoulli(epsilon) on shuffled rows, zero elsewhere.
  Tensor p = Tensor::zeros(x.values.shape());
  auto p_rows = p.as_rows();
  for (const auto& block : blocks)
    for (Index r : block)
      for (Index j = 0; j < dim; ++j) p_rows(r, j) = rng.bernoulli(config.epsilon) ? 1.0 : 0.0;

  // One row permutation, applied identically to the noise and to P.
  std::vector<Index> perm(static_cast<std::size_t>(rows));
  std::iota(perm.begin(), perm.end(), Index{0});
  for (const auto& block : blocks) {
    for (std::size_t i = block.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
      std::swap(perm[static_cast<std::size_t>(block[i - 1])],
                perm[static_cast<std::size_t>(block[j])]);
    }
  }

  RpnStepResult result;
  result.x_next.values = x.values;
  result.x_next.lengths = x.lengths;
  result.x_next.token_ids = x.token_ids;
  result.mask = Tensor::zeros(x.values.shape());
  result.perm = perm;

  const auto in = x.values.as_rows();
  auto out = result.x_next.values.as_rows();
  auto mask = result.mask.as_rows();
  for (Index r = 0; r < rows; ++r) {
    const Index src = perm[static_cast<std::size_t>(r)];
    for (Index j = 0; j < dim; ++j) {
      const bool marked = p_rows(src, j) != 0.0;
      mask(r, j) = marked ? 1.0 : 0.0;
      if (config.coupled_shuffle) {
        // Select form of X - X.P' + delta': a marked entry is a plain copy
        // from the permutation source row, an unmarked one stays untouched.
        if (marked) out(r, j) = in(src, j);
      } else {
        // Additive variant: the un-shuffled noise X.P is re-added instead.
        out(r, j) = in(r, j) - in(r, j) * mask(r, j) + in(r, j) * p_rows(r, j);
      }
    }
  }
  return result;
}

std::vector<RpnStepResult> rpn_augment(const EmbeddingBatch& x0, const RpnConfig& config,
                                       RngStream& rng) {
  config.validate();
  std::vector<RpnStepResult> steps;
  steps.reserve(static_cast<std::size_t>(config.steps));
  const EmbeddingBatch* current = &x0;
  for (Index t = 0; t < config.steps; ++t) {
    steps.push_back(rpn_step(*current, config, rng));
    current = &steps.back().x_next;
  }
  return steps;
}

Tensor freelb_init(std::vector<Index> shape, const FreeLbConfig& config, RngStream& rng) {
  config.validate();
  Tensor delta = Tensor::zeros(std::move(shape));
  for (Index i = 0; i < delta.size(); ++i)
    delta(i) = rng.uniform(-config.init_range, config.init_range);
  return delta;
}

Tensor freelb_update(const Tensor& delta, const Tensor& grad, const FreeLbConfig& config) {
  config.validate();
  if (!delta.same_shape(grad))
    throw DimensionError("freelb_update: delta " + shape_string(delta.shape()) +
                         " vs grad " + shape_string(grad.shape()));
  ensure_finite(delta, "freelb_update delta");
  ensure_finite(grad, "freelb_update grad");

  const double norm = frobenius_norm(delta);
  const double divisor = norm == 0.0 ? 1.0 : norm;
  Tensor next = delta;
  next.as_flat() += (config.alpha / divisor) * grad.as_flat();

  const double next_norm = frobenius_norm(next);
  if (next_norm > config.norm_bound) next.as_flat() *= config.norm_bound / next_norm;
  return next;
}

std::vector<std::string> aeda(const std::vector<std::string>& tokens, double insert_ratio,
                              RngStream& rng) {
  if (insert_ratio < 0.0)
    throw ConfigError("aeda insert_ratio must be >= 0, got " + std::to_string(insert_ratio));
  const std::size_t count =
      static_cast<std::size_t>(std::floor(insert_ratio * static_cast<double>(tokens.size())));
  std::vector<std::string> out = tokens;
  for (std::size_t k = 0; k < count; ++k) {
    // Interior slots only: never before the first or after the last token.
    // A single-token sequence has no interior, so the mark lands after it.
    const std::size_t pos =
        out.size() >= 2 ? 1 + static_cast<std::size_t>(rng.next_below(out.size() - 1))
                        : out.size();
    const char* mark = kAedaMarks[rng.next_below(6)];
    out.insert(out.begin() + static_cast<std::ptrdiff_t>(pos), mark);
  }
  return out;
}

std::vector<std::string> eda_lite(const std::vector<std::string>& tokens, EdaOp op,
                                  double strength, RngStream& rng) {
  if (strength < 0.0 || strength > 1.0)
    throw ConfigError("eda strength must be in [0, 1], got " + std::to_string(strength));
  const std::size_t len = tokens.size();

  if (op == EdaOp::kRandomSwap) {
    if (len < 2) return tokens;
    std::vector<std::string> out = tokens;
    const auto swaps =
        static_cast<std::size_t>(std::ceil(strength * static_cast<double>(len)));
    for (std::size_t k = 0; k < swaps; ++k) {
      const std::size_t i = static_cast<std::size_t>(rng.next_below(len));
      std::size_t j = static_cast<std::size_t>(rng.next_below(len - 1));
      if (j >= i) ++j;
      std::swap(out[i], out[j]);
    }
    return out;
  }

  std::vector<std::string> out;
  out.reserve(len);
  for (const std::string& tok : tokens)
    if (!rng.bernoulli(strength)) out.push_back(tok);
  if (out.empty() && !tokens.empty())
    out.push_back(tokens[static_cast<std::size_t>(rng.next_below(len))]);
  return out;
}

}  // namespace rpn
