#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rpn/dataset.hpp"
#include "rpn/rng.hpp"
#include "rpn/tensor.hpp"

namespace rpn {

// Output of the embedding layer: batch x seq x embed_dim values plus the real
// (pre-padding) token count of every sample. Rows at positions >= length are
// padding and stay all-zero straight out of embed(). token_ids (unpadded, one
// list per sample) travel along so the embedding-weight gradient can be
// scattered; noise steps keep them, since every virtual row still stands in
// for the original token at that position.
struct EmbeddingBatch {
  Tensor values;
  std::vector<Index> lengths;
  std::vector<std::vector<Index>> token_ids;

  Index batch_size() const { return values.rank() == 3 ? values.extent(0) : 1; }
  Index seq_len() const { return values.rank() == 3 ? values.extent(1) : values.extent(0); }
  Index embed_dim() const { return values.shape().back(); }
};

// Lookup table with two pinned rows: row 0 is the padding vector and is kept
// all-zero through every update; row 1 is the unknown-word vector.
struct EmbeddingLayer {
  Tensor weights;  // vocab_size x embed_dim

  Index vocab_size() const { return weights.extent(0); }
  Index embed_dim() const { return weights.extent(1); }
};

struct TextCnnConfig {
  Index vocab_size = 0;
  Index embed_dim = 64;
  std::vector<Index> filter_widths = {3, 4, 5};
  Index filters_per_width = 32;
  Index num_classes = 2;
  double dropout = 0.1;

  void validate() const;
};

// Every learnable tensor, in a fixed order shared with GradientSet:
// embedding, then conv weight/bias per width, then the dense head.
struct NamedParameter {
  std::string name;
  Tensor* value;
};

struct GradientSet {
  std::vector<Tensor> params;  // aligned with TextCnnModel::parameters()
  Tensor d_input;              // d_loss / d_embedding-output, shape of the input batch
};

// Intermediate activations needed by backward. `revision` ties the cache to
// the exact parameter state that produced it.
struct ForwardCache {
  EmbeddingBatch input;
  std::vector<int> labels;
  std::vector<Tensor> conv_pre;   // per width: batch x positions x filters, pre-ReLU
  std::vector<Tensor> argmax;     // per width: batch x filters, winning position or -1
  Tensor pooled;                  // batch x total_filters, post-ReLU max
  Tensor dropout_mask;            // batch x total_filters, inverted-dropout scale
  Tensor probs;                   // batch x classes, softmax output
  std::uint64_t revision = 0;
};

struct ForwardResult {
  double loss = 0.0;
  Tensor logits;  // batch x classes
  ForwardCache cache;
};

// TextCNN: parallel convolution branches (one per filter width) over the
// embedded sequence, ReLU, max-pool over positions whose window lies fully
// inside the real length, concatenation, inverted dropout, dense head,
// softmax cross-entropy. Padding positions can never reach the loss, so
// d_loss/d_input at padding is structurally zero.
class TextCnnModel {
 public:
  TextCnnModel(TextCnnConfig config, RngStream init_rng);

  const TextCnnConfig& config() const { return config_; }
  const EmbeddingLayer& embedding() const { return embedding_; }
  EmbeddingLayer& embedding() { return embedding_; }

  std::vector<NamedParameter> parameters();
  std::vector<NamedParameter> parameters() const;  // values read-only by convention
  Index parameter_count() const;
  Index total_filters() const {
    return static_cast<Index>(config_.filter_widths.size()) * config_.filters_per_width;
  }

  // Conv weights are stored width-major: conv_w[w] is (width * embed_dim) x
  // filters so the im2col product is one GEMM per branch.
  const Tensor& conv_weight(std::size_t branch) const { return conv_w_[branch]; }
  const Tensor& conv_bias(std::size_t branch) const { return conv_b_[branch]; }
  const Tensor& head_weight() const { return head_w_; }
  const Tensor& head_bias() const { return head_b_; }

  std::uint64_t revision() const { return revision_; }
  void bump_revision() { ++revision_; }

  std::uint64_t backward_calls() const { return backward_calls_; }
  void count_backward() const { ++backward_calls_; }

 private:
  TextCnnConfig config_;
  EmbeddingLayer embedding_;
  std::vector<Tensor> conv_w_;
  std::vector<Tensor> conv_b_;
  Tensor head_w_;  // total_filters x classes
  Tensor head_b_;  // classes
  std::uint64_t revision_ = 0;
  mutable std::uint64_t backward_calls_ = 0;
};

// Pads every sequence to the longest in the batch (or to pad_to when given)
// and gathers embedding rows; padding positions stay all-zero.
EmbeddingBatch embed(std::span<const TokenSequence> batch, const EmbeddingLayer& layer,
                     Index pad_to = 0);

// Mean softmax cross-entropy over the batch. Dropout runs only when a stream
// is supplied; evaluation passes none and is a pure function. The stream is
// taken by pointer and copied internally, so the caller's stream never moves.
ForwardResult forward(const TextCnnModel& model, const EmbeddingBatch& batch,
                      const std::vector<int>& labels, const RngStream* dropout_rng);

// Gradients for every parameter plus d_loss/d_input. The embedding-weight
// gradient is scattered through the batch's token_ids (left zero when the
// batch carries none). Throws ContractError if the parameters changed since
// the cache was built.
GradientSet backward(const TextCnnModel& model, const ForwardCache& cache);

struct SgdState {
  std::vector<Tensor> velocity;  // sized on first use, aligned with parameters()
};

// v <- momentum * v + g; theta <- theta - lr * v. Row 0 of the embedding is
// re-pinned to zero after the update.
void sgd_step(TextCnnModel& model, SgdState& state, const GradientSet& grads, double lr,
              double momentum);

// Argmax class per sample; ties break toward the smaller class id.
std::vector<int> predict(const Tensor& logits);
double accuracy(const Tensor& logits, const std::vector<int>& labels);

}  // namespace rpn
