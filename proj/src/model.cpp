#include "rpn/model.hpp"

#include <algorithm>
#include <cmath>

#include "rpn/kernels.hpp"

namespace rpn {
namespace {

// Window starts for one filter width; zero when the sequence is too short.
Index position_count(Index seq, Index width) { return std::max<Index>(0, seq - width + 1); }

// im2col: one row per (sample, window start), columns are the width
// consecutive embedding rows laid out flat. One GEMM against the (width *
// dim) x filters weight then covers the whole branch.
Tensor build_im2col(const Tensor& values, Index width) {
  const Index batch = values.extent(0);
  const Index seq = values.extent(1);
  const Index dim = values.extent(2);
  const Index positions = position_count(seq, width);
  Tensor out = Tensor::zeros({std::max<Index>(1, batch * positions), width * dim});
  if (positions == 0) return out;
  auto rows = out.as_matrix();
  const auto in = values.as_rows();
  for (Index s = 0; s < batch; ++s)
    for (Index p = 0; p < positions; ++p)
      for (Index w = 0; w < width; ++w)
        rows.block(s * positions + p, w * dim, 1, dim) = in.row(s * seq + p + w);
  return out;
}

std::vector<Index> batch_lengths(const EmbeddingBatch& batch) {
  if (!batch.lengths.empty()) return batch.lengths;
  return std::vector<Index>(static_cast<std::size_t>(batch.batch_size()), batch.seq_len());
}

}  // namespace

void TextCnnConfig::validate() const {
  if (vocab_size < 2) throw ConfigError("model.vocab_size must be >= 2");
  if (embed_dim < 1) throw ConfigError("model.embed_dim must be >= 1");
  if (filter_widths.empty()) throw ConfigError("model.filter_widths must not be empty");
  for (Index w : filter_widths)
    if (w < 1) throw ConfigError("model.filter_widths entries must be >= 1");
  if (filters_per_width < 1) throw ConfigError("model.filters_per_width must be >= 1");
  if (num_classes < 2) throw ConfigError("model.num_classes must be >= 2");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("model.dropout must be in [0, 1)");
}

TextCnnModel::TextCnnModel(TextCnnConfig config, RngStream init_rng)
    : config_(std::move(config)) {
  config_.validate();

  embedding_.weights = Tensor::zeros({config_.vocab_size, config_.embed_dim});
  RngStream embed_rng = init_rng.derive("embedding");
  for (Index i = config_.embed_dim; i < embedding_.weights.size(); ++i)
    embedding_.weights(i) = embed_rng.uniform(-0.1, 0.1);  // row 0 stays zero

  for (std::size_t branch = 0; branch < config_.filter_widths.size(); ++branch) {
    const Index width = config_.filter_widths[branch];
    const Index fan_in = width * config_.embed_dim;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor w = Tensor::zeros({fan_in, config_.filters_per_width});
    RngStream conv_rng = init_rng.derive("conv", static_cast<std::uint64_t>(branch));
    for (Index i = 0; i < w.size(); ++i) w(i) = conv_rng.uniform(-bound, bound);
    conv_w_.push_back(std::move(w));
    conv_b_.push_back(Tensor::zeros({config_.filters_per_width}));
  }

  const double head_bound = 1.0 / std::sqrt(static_cast<double>(total_filters()));
  head_w_ = Tensor::zeros({total_filters(), config_.num_classes});
  RngStream head_rng = init_rng.derive("head");
  for (Index i = 0; i < head_w_.size(); ++i) head_w_(i) = head_rng.uniform(-head_bound, head_bound);
  head_b_ = Tensor::zeros({config_.num_classes});
}

std::vector<NamedParameter> TextCnnModel::parameters() {
  std::vector<NamedParameter> params;
  params.push_back({"embedding", &embedding_.weights});
  for (std::size_t branch = 0; branch < conv_w_.size(); ++branch) {
    const std::string width = std::to_string(config_.filter_widths[branch]);
    params.push_back({"conv_w" + width, &conv_w_[branch]});
    params.push_back({"conv_b" + width, &conv_b_[branch]});
  }
  params.push_back({"head_w", &head_w_});
  params.push_back({"head_b", &head_b_});
  return params;
}

std::vector<NamedParameter> TextCnnModel::parameters() const {
  return const_cast<TextCnnModel*>(this)->parameters();
}

Index TextCnnModel::parameter_count() const {
  Index count = 0;
  for (const NamedParameter& p : parameters()) count += p.value->size();
  return count;
}

EmbeddingBatch embed(std::span<const TokenSequence> batch, const EmbeddingLayer& layer,
                     Index pad_to) {
  if (batch.empty()) throw DimensionError("embed needs at least one sequence");
  Index max_len = 1;
  for (const TokenSequence& seq : batch)
    max_len = std::max(max_len, static_cast<Index>(seq.token_ids.size()));
  if (pad_to > 0) {
    if (pad_to < max_len)
      throw DimensionError("pad_to " + std::to_string(pad_to) +
                           " shorter than longest sequence " + std::to_string(max_len));
    max_len = pad_to;
  }

  EmbeddingBatch out;
  out.values =
      Tensor::zeros({static_cast<Index>(batch.size()), max_len, layer.embed_dim()});
  out.lengths.reserve(batch.size());
  out.token_ids.reserve(batch.size());
  auto rows = out.values.as_rows();
  const auto weights = layer.weights.as_matrix();
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const auto& ids = batch[s].token_ids;
    out.lengths.push_back(static_cast<Index>(ids.size()));
    out.token_ids.push_back(ids);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const Index id = ids[i];
      if (id < 0 || id >= layer.vocab_size())
        throw IndexError("token id " + std::to_string(id) + " outside vocabulary of size " +
                         std::to_string(layer.vocab_size()));
      rows.row(static_cast<Index>(s) * max_len + static_cast<Index>(i)) = weights.row(id);
    }
  }
  return out;
}

ForwardResult forward(const TextCnnModel& model, const EmbeddingBatch& batch,
                      const std::vector<int>& labels, const RngStream* dropout_rng) {
  const TextCnnConfig& config = model.config();
  if (batch.values.rank() != 3)
    throw DimensionError("forward expects batch x seq x dim, got " +
                         shape_string(batch.values.shape()));
  const Index b = batch.batch_size();
  const Index seq = batch.seq_len();
  const Index dim = batch.embed_dim();
  if (dim != config.embed_dim)
    throw DimensionError("embed_dim mismatch: batch " + std::to_string(dim) + ", model " +
                         std::to_string(config.embed_dim));
  if (static_cast<Index>(labels.size()) != b)
    throw DimensionError(std::to_string(labels.size()) + " labels for batch of " +
                         std::to_string(b));
  for (int label : labels)
    if (label < 0 || label >= config.num_classes)
      throw IndexError("label " + std::to_string(label) + " outside [0, " +
                       std::to_string(config.num_classes) + ")");
  const std::vector<Index> lengths = batch_lengths(batch);

  ForwardResult result;
  ForwardCache& cache = result.cache;
  cache.input = batch;
  cache.labels = labels;
  cache.revision = model.revision();

  const Index total = model.total_filters();
  const Index per_width = config.filters_per_width;
  cache.pooled = Tensor::zeros({b, total});
  auto pooled = cache.pooled.as_matrix();

  for (std::size_t branch = 0; branch < config.filter_widths.size(); ++branch) {
    const Index width = config.filter_widths[branch];
    const Index positions = position_count(seq, width);
    const Index offset = static_cast<Index>(branch) * per_width;

    Tensor pre = Tensor::zeros({b, std::max<Index>(1, positions), per_width});
    if (positions > 0) {
      const Tensor columns = build_im2col(batch.values, width);
      Tensor flat = matmul(columns, model.conv_weight(branch));
      flat.as_matrix().rowwise() +=
          model.conv_bias(branch).as_rows().row(0);
      pre.as_flat() = flat.as_flat();
      if (!pre.all_finite())
        throw NumericError("non-finite activation in conv width " + std::to_string(width));
    }

    Tensor argmax = Tensor::constant({b, per_width}, -1.0);
    for (Index s = 0; s < b; ++s) {
      // Only windows fully inside the real length feed the pool, so padding
      // can never influence the loss.
      const Index valid = position_count(std::min(lengths[static_cast<std::size_t>(s)], seq), width);
      for (Index f = 0; f < per_width; ++f) {
        Index best = -1;
        double best_value = 0.0;
        for (Index p = 0; p < valid; ++p) {
          const double v = pre(s, p, f);
          if (best < 0 || v > best_value) {
            best = p;
            best_value = v;
          }
        }
        argmax(s, f) = static_cast<double>(best);
        pooled(s, offset + f) = best < 0 ? 0.0 : std::max(0.0, best_value);
      }
    }
    cache.conv_pre.push_back(std::move(pre));
    cache.argmax.push_back(std::move(argmax));
  }

  cache.dropout_mask = Tensor::constant({b, total}, 1.0);
  if (dropout_rng != nullptr && config.dropout > 0.0) {
    RngStream rng = *dropout_rng;  // copy: the caller's stream never advances
    const double keep_scale = 1.0 / (1.0 - config.dropout);
    for (Index i = 0; i < cache.dropout_mask.size(); ++i)
      cache.dropout_mask(i) = rng.bernoulli(config.dropout) ? 0.0 : keep_scale;
  }

  Tensor dropped = Tensor::zeros({b, total});
  dropped.as_flat() = cache.pooled.as_flat() * cache.dropout_mask.as_flat();
  result.logits = matmul(dropped, model.head_weight());
  result.logits.as_matrix().rowwise() += model.head_bias().as_rows().row(0);
  if (!result.logits.all_finite()) throw NumericError("non-finite activation in head");

  cache.probs = Tensor::zeros({b, config.num_classes});
  std::vector<double> losses(static_cast<std::size_t>(b));
  for (Index s = 0; s < b; ++s) {
    const auto row = result.logits.as_matrix().row(s);
    const double peak = row.maxCoeff();
    double z = 0.0;
    for (Index c = 0; c < config.num_classes; ++c) z += std::exp(row(c) - peak);
    for (Index c = 0; c < config.num_classes; ++c)
      cache.probs(s, c) = std::exp(row(c) - peak) / z;
    losses[static_cast<std::size_t>(s)] =
        std::log(z) - (row(labels[static_cast<std::size_t>(s)]) - peak);
  }
  result.loss = mean(losses);
  if (!std::isfinite(result.loss)) throw NumericError("non-finite loss");
  return result;
}

GradientSet backward(const TextCnnModel& model, const ForwardCache& cache) {
  if (cache.revision != model.revision())
    throw ContractError("backward on a stale cache: parameters changed since forward");
  model.count_backward();

  const TextCnnConfig& config = model.config();
  const Index b = cache.input.batch_size();
  const Index seq = cache.input.seq_len();
  const Index dim = cache.input.embed_dim();
  const Index total = model.total_filters();
  const Index per_width = config.filters_per_width;
  const double inv_b = 1.0 / static_cast<double>(b);

  GradientSet grads;
  grads.d_input = Tensor::zeros(cache.input.values.shape());

  // d loss / d logits for mean softmax cross-entropy.
  Tensor d_logits = cache.probs;
  for (Index s = 0; s < b; ++s) {
    d_logits(s, cache.labels[static_cast<std::size_t>(s)]) -= 1.0;
    d_logits.as_matrix().row(s) *= inv_b;
  }

  Tensor dropped = Tensor::zeros({b, total});
  dropped.as_flat() = cache.pooled.as_flat() * cache.dropout_mask.as_flat();

  // Head: logits = dropped * W + bias.
  Tensor d_head_w = Tensor::zeros({total, config.num_classes});
  d_head_w.as_matrix() = dropped.as_matrix().transpose() * d_logits.as_matrix();
  Tensor d_head_b = Tensor::zeros({config.num_classes});
  d_head_b.as_rows().row(0) = d_logits.as_matrix().colwise().sum();

  Tensor d_pooled = Tensor::zeros({b, total});
  d_pooled.as_matrix() = d_logits.as_matrix() * model.head_weight().as_matrix().transpose();
  d_pooled.as_flat() *= cache.dropout_mask.as_flat();

  Tensor d_embedding = Tensor::zeros({config.vocab_size, dim});
  std::vector<Tensor> d_conv_w;
  std::vector<Tensor> d_conv_b;

  for (std::size_t branch = 0; branch < config.filter_widths.size(); ++branch) {
    const Index width = config.filter_widths[branch];
    const Index positions = position_count(seq, width);
    const Index offset = static_cast<Index>(branch) * per_width;
    const Tensor& pre = cache.conv_pre[branch];
    const Tensor& argmax = cache.argmax[branch];

    // Pool + ReLU: the winning window takes the whole signal, and only if its
    // pre-activation was positive.
    Tensor d_pre = Tensor::zeros(pre.shape());
    for (Index s = 0; s < b; ++s)
      for (Index f = 0; f < per_width; ++f) {
        const Index best = static_cast<Index>(argmax(s, f));
        if (best >= 0 && pre(s, best, f) > 0.0)
          d_pre(s, best, f) = d_pooled(s, offset + f);
      }

    Tensor dw = Tensor::zeros({width * dim, per_width});
    Tensor db = Tensor::zeros({per_width});
    if (positions > 0) {
      const Tensor columns = build_im2col(cache.input.values, width);
      Eigen::Map<const Tensor::MatrixType> d_pre_flat(d_pre.data(), b * positions, per_width);
      dw.as_matrix() = columns.as_matrix().transpose() * d_pre_flat;
      db.as_rows().row(0) = d_pre_flat.colwise().sum();

      // Scatter d(im2col) back onto the input windows.
      Tensor::MatrixType d_columns = d_pre_flat * model.conv_weight(branch).as_matrix().transpose();
      auto d_in = grads.d_input.as_rows();
      for (Index s = 0; s < b; ++s)
        for (Index p = 0; p < positions; ++p) {
          const auto row = d_columns.row(s * positions + p);
          if (row.isZero(0.0)) continue;
          for (Index w = 0; w < width; ++w)
            d_in.row(s * seq + p + w) += row.segment(w * dim, dim);
        }
    }
    d_conv_w.push_back(std::move(dw));
    d_conv_b.push_back(std::move(db));
  }

  // Scatter word-row gradients onto embedding rows; padding row 0 stays zero.
  if (!cache.input.token_ids.empty()) {
    if (static_cast<Index>(cache.input.token_ids.size()) != b)
      throw DimensionError("backward: " + std::to_string(cache.input.token_ids.size()) +
                           " token id lists for batch of " + std::to_string(b));
    auto d_v = d_embedding.as_matrix();
    const auto d_in = grads.d_input.as_rows();
    for (Index s = 0; s < b; ++s) {
      const auto& ids = cache.input.token_ids[static_cast<std::size_t>(s)];
      for (std::size_t i = 0; i < ids.size(); ++i) {
        const Index id = ids[i];
        if (id < 0 || id >= config.vocab_size)
          throw IndexError("token id " + std::to_string(id) + " outside vocabulary of size " +
                           std::to_string(config.vocab_size));
        if (id != 0) d_v.row(id) += d_in.row(s * seq + static_cast<Index>(i));
      }
    }
  }

  grads.params.push_back(std::move(d_embedding));
  for (std::size_t branch = 0; branch < config.filter_widths.size(); ++branch) {
    grads.params.push_back(std::move(d_conv_w[branch]));
    grads.params.push_back(std::move(d_conv_b[branch]));
  }
  grads.params.push_back(std::move(d_head_w));
  grads.params.push_back(std::move(d_head_b));
  for (const Tensor& g : grads.params) ensure_finite(g, "backward gradient");
  ensure_finite(grads.d_input, "backward d_input");
  return grads;
}

void sgd_step(TextCnnModel& model, SgdState& state, const GradientSet& grads, double lr,
              double momentum) {
  if (lr < 0.0) throw ConfigError("learning rate must be >= 0");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must be in [0, 1)");

  const auto params = model.parameters();
  if (grads.params.size() != params.size())
    throw DimensionError("gradient set has " + std::to_string(grads.params.size()) +
                         " tensors for " + std::to_string(params.size()) + " parameters");
  if (state.velocity.empty())
    for (const NamedParameter& p : params) state.velocity.push_back(Tensor::zeros(p.value->shape()));

  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& g = grads.params[i];
    Tensor& v = state.velocity[i];
    Tensor& theta = *params[i].value;
    if (!g.same_shape(theta))
      throw DimensionError("gradient shape " + shape_string(g.shape()) + " for parameter " +
                           params[i].name + " " + shape_string(theta.shape()));
    ensure_finite(g, "gradient for " + params[i].name);
    v.as_flat() = momentum * v.as_flat() + g.as_flat();
    theta.as_flat() -= lr * v.as_flat();
    if (!theta.all_finite())
      throw NumericError("parameter " + params[i].name + " not finite after update");
  }
  model.embedding().weights.as_matrix().row(0).setZero();
  model.bump_revision();
}

std::vector<int> predict(const Tensor& logits) {
  const auto rows = logits.as_matrix();
  std::vector<int> out(static_cast<std::size_t>(rows.rows()));
  for (Index s = 0; s < rows.rows(); ++s) {
    int best = 0;
    for (Index c = 1; c < rows.cols(); ++c)
      if (rows(s, c) > rows(s, best)) best = static_cast<int>(c);
    out[static_cast<std::size_t>(s)] = best;
  }
  return out;
}

double accuracy(const Tensor& logits, const std::vector<int>& labels) {
  const std::vector<int> predictions = predict(logits);
  if (predictions.size() != labels.size())
    throw DimensionError("accuracy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(predictions.size()) + " predictions");
  if (labels.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    hits += predictions[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

}  // namespace rpn
