#include "rpn/train.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <utility>

#include "rpn/kernels.hpp"

namespace rpn {
namespace {

std::vector<Tensor> zero_parameter_grads(const TextCnnModel& model) {
  std::vector<Tensor> out;
  for (const NamedParameter& p : model.parameters()) out.push_back(Tensor::zeros(p.value->shape()));
  return out;
}

// Transpose of one coupled noise step over the flat word rows: position (q, j)
// of the pre-step tensor feeds (q, j) where it stayed put and (r, j) with
// perm[r] == q where it was copied.
Tensor route_step_back(const Tensor& d, const RpnStepResult& step) {
  const std::vector<Index> inv = inverse_permutation(step.perm);
  Tensor out = Tensor::zeros(d.shape());
  const auto din = d.as_rows();
  const auto mask = step.mask.as_rows();
  auto dout = out.as_rows();
  const Index rows = d.row_count();
  const Index dim = d.row_width();
  for (Index q = 0; q < rows; ++q) {
    const Index r = inv[static_cast<std::size_t>(q)];
    for (Index j = 0; j < dim; ++j)
      dout(q, j) = (1.0 - mask(q, j)) * din(q, j) + mask(r, j) * din(r, j);
  }
  return out;
}

// Carries a virtual pass's input gradient back through the first `upto` chain
// steps and scatters it into the embedding rows of the clean batch. Token id 0
// is the pinned padding row and is skipped, matching backward().
void scatter_flow_gradient(Tensor d_input, const std::vector<RpnStepResult>& chain,
                           std::size_t upto, const EmbeddingBatch& x0, double scale,
                           Tensor& d_embedding) {
  for (std::size_t s = upto; s-- > 0;) d_input = route_step_back(d_input, chain[s]);
  if (x0.token_ids.empty()) return;
  const Index seq = x0.seq_len();
  const auto rows = d_input.as_rows();
  auto emb = d_embedding.as_rows();
  for (Index b = 0; b < x0.batch_size(); ++b) {
    const auto& ids = x0.token_ids[static_cast<std::size_t>(b)];
    for (Index p = 0; p < static_cast<Index>(ids.size()); ++p) {
      const Index id = ids[static_cast<std::size_t>(p)];
      if (id == 0) continue;
      emb.row(id) += scale * rows.row(b * seq + p);
    }
  }
}

// Embedding-weight policy for one pass: the clean pass contributes through
// backward()'s own scatter; virtual passes either drop it (detach) or replace
// it with the chain-routed scatter (flow), since their position-to-id pairing
// no longer matches the shuffled values.
void accumulate_pass(GradientSet& acc, const GradientSet& grads, double scale, bool virtual_pass,
                     VirtualGrad policy, const std::vector<RpnStepResult>& chain, std::size_t upto,
                     const EmbeddingBatch& x0) {
  for (std::size_t i = 0; i < acc.params.size(); ++i) {
    if (i == 0 && virtual_pass) continue;
    acc.params[i].as_flat() += scale * grads.params[i].as_flat();
  }
  if (virtual_pass && policy == VirtualGrad::kFlow)
    scatter_flow_gradient(grads.d_input, chain, upto, x0, scale, acc.params[0]);
}

struct BatchView {
  std::vector<TokenSequence> sequences;
  std::vector<int> labels;
};

BatchView gather_batch(const LabeledDataset& data, std::span<const Index> order, Index begin,
                       Index end) {
  BatchView view;
  view.sequences.reserve(static_cast<std::size_t>(end - begin));
  view.labels.reserve(static_cast<std::size_t>(end - begin));
  for (Index i = begin; i < end; ++i) {
    const auto& seq = data.sequences[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
    view.sequences.push_back(seq);
    view.labels.push_back(seq.label);
  }
  return view;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += ' ';
    out += tokens[i];
  }
  return out;
}

UpdateRule parse_update_rule(const std::string& name) {
  if (name == "accumulate") return UpdateRule::kAccumulate;
  if (name == "average") return UpdateRule::kAverage;
  throw ConfigError("unknown update_rule '" + name + "' (expected accumulate or average)");
}

VirtualGrad parse_virtual_grad(const std::string& name) {
  if (name == "detach") return VirtualGrad::kDetach;
  if (name == "flow") return VirtualGrad::kFlow;
  throw ConfigError("unknown virtual_grad '" + name + "' (expected detach or flow)");
}

ShuffleScope parse_shuffle_scope(const std::string& name) {
  if (name == "per_sample") return ShuffleScope::kPerSampleRows;
  if (name == "cross_batch") return ShuffleScope::kCrossBatchRows;
  throw ConfigError("unknown rpn.shuffle_scope '" + name +
                    "' (expected per_sample or cross_batch)");
}

EdaOp parse_eda_op(const std::string& name) {
  if (name == "swap") return EdaOp::kRandomSwap;
  if (name == "delete") return EdaOp::kRandomDelete;
  throw ConfigError("unknown aug.eda_op '" + name + "' (expected swap or delete)");
}

class Trainer {
 public:
  Trainer(TextCnnModel& model, const DatasetBundle& data, const TrainConfig& config,
          const TrainHooks* hooks)
      : model_(model), data_(data), config_(config), hooks_(hooks), root_(config.seed) {}

  TrainResult run() {
    config_.validate();
    check_model_matches_data();

    LabeledDataset train_set = data_.train;
    const bool token_mode =
        config_.mode == TrainMode::kAeda || config_.mode == TrainMode::kEdaLite;
    if (token_mode && config_.aug_copies > 0)
      train_set = expand_token_aug(data_.train, data_.vocab, config_, root_.derive("token_aug"));
    if (train_set.size() == 0) throw ConfigError("train: empty train split");

    const auto started = std::chrono::steady_clock::now();
    const auto elapsed = [&] {
      if (!config_.wall_clock) return 0.0;
      return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    };

    TrainResult result;
    result.train_size = train_set.size();
    const Index n = train_set.size();

    for (Index epoch = 1; epoch <= config_.epochs; ++epoch) {
      RngStream shuffle_rng = root_.derive("shuffle", static_cast<std::uint64_t>(epoch));
      const std::vector<Index> order = random_permutation(n, shuffle_rng);
      Index batch_index = 0;
      for (Index begin = 0; begin < n; begin += config_.batch_size, ++batch_index) {
        const Index end = std::min(n, begin + config_.batch_size);
        const BatchView view = gather_batch(train_set, order, begin, end);
        try {
          run_batch(epoch, batch_index, view);
        } catch (const NumericError& e) {
          throw NumericError("epoch " + std::to_string(epoch) + " batch " +
                             std::to_string(batch_index) + ": " + e.what());
        }
      }
      if (epoch % config_.eval_every == 0 || epoch == config_.epochs) {
        // Metric rows always cover the original split so modes that expand
        // their training set stay comparable.
        append_record(result.metrics, epoch, "train", evaluate(model_, data_.train), elapsed());
        append_record(result.metrics, epoch, "dev", evaluate(model_, data_.dev), elapsed());
      }
      if (hooks_ && hooks_->on_epoch_end) hooks_->on_epoch_end(epoch, model_);
    }
    append_record(result.metrics, config_.epochs, "test", evaluate(model_, data_.test),
                  elapsed());
    return result;
  }

 private:
  void check_model_matches_data() const {
    if (model_.config().vocab_size != data_.vocab.size())
      throw ConfigError("train: model vocab " + std::to_string(model_.config().vocab_size) +
                        " != data vocab " + std::to_string(data_.vocab.size()));
    if (model_.config().num_classes != data_.num_classes)
      throw ConfigError("train: model classes " + std::to_string(model_.config().num_classes) +
                        " != data classes " + std::to_string(data_.num_classes));
  }

  static void append_record(MetricsLog& log, Index epoch, std::string split, EvalResult eval,
                            double wall) {
    log.records.push_back({epoch, std::move(split), eval.loss, eval.accuracy, wall});
  }

  bool adversarial_mode() const {
    return config_.mode == TrainMode::kFreeLb || config_.mode == TrainMode::kFreeLbRpn;
  }

  RngStream dropout_stream(Index epoch, Index batch, Index pass) const {
    return root_.derive("dropout", static_cast<std::uint64_t>(epoch),
                        static_cast<std::uint64_t>(batch))
        .derive(static_cast<std::uint64_t>(pass));
  }

  std::vector<RpnStepResult> noise_chain(const EmbeddingBatch& x0, Index epoch, Index batch,
                                         Index steps) {
    if (steps == 0) return {};
    RpnConfig cfg = config_.rpn;
    cfg.steps = steps;
    RngStream rng = root_.derive("rpn", static_cast<std::uint64_t>(epoch),
                                 static_cast<std::uint64_t>(batch));
    return rpn_augment(x0, cfg, rng);
  }

  void run_batch(Index epoch, Index batch, const BatchView& view) {
    const EmbeddingBatch x0 = embed(view.sequences, model_.embedding());
    if (adversarial_mode())
      run_adversarial_batch(epoch, batch, x0, view.labels);
    else
      run_noise_batch(epoch, batch, x0, view.labels);
  }

  // baseline, rpn, and the token modes after offline expansion. One forward/
  // backward per chain slot with loss weight 1/(K+1); the accumulate rule
  // re-applies the running sum after every pass, the average rule applies it
  // once.
  void run_noise_batch(Index epoch, Index batch, const EmbeddingBatch& x0,
                       const std::vector<int>& labels) {
    const Index steps = config_.mode == TrainMode::kRpn ? config_.rpn.steps : Index{0};
    const auto chain = noise_chain(x0, epoch, batch, steps);
    const double scale = 1.0 / static_cast<double>(steps + 1);

    GradientSet acc;
    acc.params = zero_parameter_grads(model_);
    double loss_sum = 0.0;
    for (Index t = 0; t <= steps; ++t) {
      const EmbeddingBatch& xt = t == 0 ? x0 : chain[static_cast<std::size_t>(t - 1)].x_next;
      const RngStream drop = dropout_stream(epoch, batch, t);
      const ForwardResult fwd = forward(model_, xt, labels, &drop);
      if (hooks_ && hooks_->on_pass_loss) hooks_->on_pass_loss(epoch, batch, t, fwd.loss);
      loss_sum += fwd.loss;

      const GradientSet grads = backward(model_, fwd.cache);
      if (hooks_ && hooks_->on_pass_grads) hooks_->on_pass_grads(epoch, batch, t, grads);
      accumulate_pass(acc, grads, scale, t > 0, config_.virtual_grad, chain,
                      static_cast<std::size_t>(t), x0);

      if (config_.update_rule == UpdateRule::kAccumulate) {
        if (hooks_ && hooks_->on_applied_grads) hooks_->on_applied_grads(epoch, batch, acc);
        sgd_step(model_, sgd_, acc, config_.lr, config_.momentum);
      }
    }
    if (config_.update_rule == UpdateRule::kAverage) {
      if (hooks_ && hooks_->on_applied_grads) hooks_->on_applied_grads(epoch, batch, acc);
      sgd_step(model_, sgd_, acc, config_.lr, config_.momentum);
    }
    if (hooks_ && hooks_->on_batch_loss) hooks_->on_batch_loss(epoch, batch, loss_sum * scale);
  }

  // freelb and its noise-chain combination. Outer slots n walk the chain
  // (n = 0 only for plain freelb), each slot runs a fresh ascent of K steps,
  // and the parameters move once per batch by the grand average over all
  // (N+1)*K passes.
  void run_adversarial_batch(Index epoch, Index batch, const EmbeddingBatch& x0,
                             const std::vector<int>& labels) {
    const Index outer = config_.mode == TrainMode::kFreeLbRpn ? config_.rpn.steps : Index{0};
    const auto chain = noise_chain(x0, epoch, batch, outer);
    const Index ascent = config_.freelb.ascent_steps;
    const double scale = 1.0 / static_cast<double>((outer + 1) * ascent);

    GradientSet acc;
    acc.params = zero_parameter_grads(model_);
    double loss_sum = 0.0;
    for (Index n = 0; n <= outer; ++n) {
      const EmbeddingBatch& xn = n == 0 ? x0 : chain[static_cast<std::size_t>(n - 1)].x_next;
      RngStream delta_rng = root_.derive("freelb", static_cast<std::uint64_t>(epoch),
                                         static_cast<std::uint64_t>(batch))
                                .derive(static_cast<std::uint64_t>(n));
      Tensor delta = freelb_init(xn.values.shape(), config_.freelb, delta_rng);
      for (Index a = 0; a < ascent; ++a) {
        const Index pass = n * ascent + a;
        EmbeddingBatch perturbed = xn;
        perturbed.values.as_flat() += delta.as_flat();
        const RngStream drop = dropout_stream(epoch, batch, pass);
        const ForwardResult fwd = forward(model_, perturbed, labels, &drop);
        if (hooks_ && hooks_->on_pass_loss) hooks_->on_pass_loss(epoch, batch, pass, fwd.loss);
        loss_sum += fwd.loss;

        const GradientSet grads = backward(model_, fwd.cache);
        if (hooks_ && hooks_->on_pass_grads) hooks_->on_pass_grads(epoch, batch, pass, grads);
        accumulate_pass(acc, grads, scale, n > 0, config_.virtual_grad, chain,
                        static_cast<std::size_t>(n), x0);

        delta = freelb_update(delta, grads.d_input, config_.freelb);
        if (hooks_ && hooks_->on_delta_norm) hooks_->on_delta_norm(frobenius_norm(delta));
      }
    }
    if (hooks_ && hooks_->on_applied_grads) hooks_->on_applied_grads(epoch, batch, acc);
    sgd_step(model_, sgd_, acc, config_.lr, config_.momentum);
    if (hooks_ && hooks_->on_batch_loss) hooks_->on_batch_loss(epoch, batch, loss_sum * scale);
  }

  TextCnnModel& model_;
  const DatasetBundle& data_;
  TrainConfig config_;
  const TrainHooks* hooks_;
  RngStream root_;
  SgdState sgd_;
};

}  // namespace

TrainMode parse_train_mode(const std::string& name) {
  if (name == "baseline") return TrainMode::kBaseline;
  if (name == "rpn") return TrainMode::kRpn;
  if (name == "freelb") return TrainMode::kFreeLb;
  if (name == "freelb_rpn") return TrainMode::kFreeLbRpn;
  if (name == "aeda") return TrainMode::kAeda;
  if (name == "eda_lite") return TrainMode::kEdaLite;
  throw ConfigError("unknown mode '" + name +
                    "' (expected baseline, rpn, freelb, freelb_rpn, aeda, or eda_lite)");
}

std::string train_mode_name(TrainMode mode) {
  switch (mode) {
    case TrainMode::kBaseline: return "baseline";
    case TrainMode::kRpn: return "rpn";
    case TrainMode::kFreeLb: return "freelb";
    case TrainMode::kFreeLbRpn: return "freelb_rpn";
    case TrainMode::kAeda: return "aeda";
    case TrainMode::kEdaLite: return "eda_lite";
  }
  throw ConfigError("unknown mode value");
}

void TrainConfig::validate() const {
  if (lr < 0.0) throw ConfigError("lr must be >= 0, got " + format_double(lr));
  if (momentum < 0.0 || momentum >= 1.0)
    throw ConfigError("momentum must be in [0, 1), got " + format_double(momentum));
  if (epochs < 0) throw ConfigError("epochs must be >= 0, got " + std::to_string(epochs));
  if (batch_size < 1)
    throw ConfigError("batch_size must be >= 1, got " + std::to_string(batch_size));
  if (eval_every < 1)
    throw ConfigError("eval_every must be >= 1, got " + std::to_string(eval_every));
  if (max_seq_len < 1)
    throw ConfigError("max_seq_len must be >= 1, got " + std::to_string(max_seq_len));
  if (aug_copies < 0)
    throw ConfigError("aug.copies must be >= 0, got " + std::to_string(aug_copies));
  if (mode == TrainMode::kAeda && aug_strength < 0.0)
    throw ConfigError("aug.strength must be >= 0 for aeda, got " + format_double(aug_strength));
  if (mode == TrainMode::kEdaLite && (aug_strength < 0.0 || aug_strength > 1.0))
    throw ConfigError("aug.strength must be in [0, 1] for eda_lite, got " +
                      format_double(aug_strength));
  rpn.validate();
  freelb.validate();
  const bool uses_chain = mode == TrainMode::kRpn || mode == TrainMode::kFreeLbRpn;
  if (uses_chain && virtual_grad == VirtualGrad::kFlow && !rpn.coupled_shuffle)
    throw ConfigError("virtual_grad=flow needs rpn.coupled_shuffle=true");
}

TrainConfig TrainConfig::from_config(const KeyValueConfig& kv) {
  TrainConfig c;
  c.mode = parse_train_mode(kv.get_string("mode", "baseline"));
  c.seed = kv.require_u64("seed");
  c.lr = kv.get_double("lr", c.lr);
  c.momentum = kv.get_double("momentum", c.momentum);
  c.epochs = static_cast<Index>(kv.get_int("epochs", c.epochs));
  c.batch_size = static_cast<Index>(kv.get_int("batch_size", c.batch_size));
  c.eval_every = static_cast<Index>(kv.get_int("eval_every", c.eval_every));
  c.max_seq_len = static_cast<Index>(kv.get_int("max_seq_len", c.max_seq_len));
  c.update_rule = parse_update_rule(kv.get_string("update_rule", "accumulate"));
  c.virtual_grad = parse_virtual_grad(kv.get_string("virtual_grad", "detach"));
  c.wall_clock = kv.get_bool("metrics.wall_clock", c.wall_clock);

  c.rpn.epsilon = kv.get_double("rpn.epsilon", c.rpn.epsilon);
  c.rpn.steps = static_cast<Index>(kv.get_int("rpn.steps", c.rpn.steps));
  c.rpn.shuffle_scope = parse_shuffle_scope(kv.get_string("rpn.shuffle_scope", "per_sample"));
  c.rpn.mask_padding = kv.get_bool("rpn.mask_padding", c.rpn.mask_padding);
  c.rpn.coupled_shuffle = kv.get_bool("rpn.coupled_shuffle", c.rpn.coupled_shuffle);

  c.freelb.norm_bound = kv.get_double("freelb.norm_bound", c.freelb.norm_bound);
  c.freelb.alpha = kv.get_double("freelb.alpha", c.freelb.alpha);
  c.freelb.ascent_steps = static_cast<Index>(kv.get_int("freelb.ascent_steps", c.freelb.ascent_steps));
  c.freelb.init_range = kv.get_double("freelb.init_range", c.freelb.init_range);

  c.aug_copies = static_cast<Index>(kv.get_int("aug.copies", c.aug_copies));
  c.aug_strength = kv.get_double("aug.strength", c.aug_strength);
  c.eda_op = parse_eda_op(kv.get_string("aug.eda_op", "swap"));

  c.model.embed_dim = static_cast<Index>(kv.get_int("model.embed_dim", c.model.embed_dim));
  const std::vector<std::int64_t> widths =
      kv.get_int_list("model.filter_widths", {3, 4, 5});
  c.model.filter_widths.assign(widths.begin(), widths.end());
  c.model.filters_per_width =
      static_cast<Index>(kv.get_int("model.filters_per_width", c.model.filters_per_width));
  c.model.dropout = kv.get_double("model.dropout", c.model.dropout);
  return c;
}

std::vector<std::string> TrainConfig::render() const {
  KeyValueConfig kv;
  const auto set = [&kv](const std::string& key, const std::string& value) {
    kv.set_assignment(key + "=" + value);
  };
  set("mode", train_mode_name(mode));
  set("seed", std::to_string(seed));
  set("lr", format_double(lr));
  set("momentum", format_double(momentum));
  set("epochs", std::to_string(epochs));
  set("batch_size", std::to_string(batch_size));
  set("eval_every", std::to_string(eval_every));
  set("max_seq_len", std::to_string(max_seq_len));
  set("update_rule", update_rule == UpdateRule::kAccumulate ? "accumulate" : "average");
  set("virtual_grad", virtual_grad == VirtualGrad::kDetach ? "detach" : "flow");
  set("metrics.wall_clock", wall_clock ? "true" : "false");
  set("rpn.epsilon", format_double(rpn.epsilon));
  set("rpn.steps", std::to_string(rpn.steps));
  set("rpn.shuffle_scope",
      rpn.shuffle_scope == ShuffleScope::kPerSampleRows ? "per_sample" : "cross_batch");
  set("rpn.mask_padding", rpn.mask_padding ? "true" : "false");
  set("rpn.coupled_shuffle", rpn.coupled_shuffle ? "true" : "false");
  set("freelb.norm_bound", format_double(freelb.norm_bound));
  set("freelb.alpha", format_double(freelb.alpha));
  set("freelb.ascent_steps", std::to_string(freelb.ascent_steps));
  set("freelb.init_range", format_double(freelb.init_range));
  set("aug.copies", std::to_string(aug_copies));
  set("aug.strength", format_double(aug_strength));
  set("aug.eda_op", eda_op == EdaOp::kRandomSwap ? "swap" : "delete");
  set("model.embed_dim", std::to_string(model.embed_dim));
  std::string widths;
  for (std::size_t i = 0; i < model.filter_widths.size(); ++i) {
    if (i > 0) widths += ',';
    widths += std::to_string(model.filter_widths[i]);
  }
  set("model.filter_widths", widths);
  set("model.filters_per_width", std::to_string(model.filters_per_width));
  set("model.dropout", format_double(model.dropout));
  return kv.render();
}

void write_metrics_csv(const MetricsLog& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open metrics file " + path.string());
  out << kMetricsCsvHeader << '\n';
  for (const MetricsRecord& r : log.records)
    out << r.epoch << ',' << r.split << ',' << format_double(r.loss) << ','
        << format_double(r.accuracy) << ',' << format_double(r.wall_time_s) << '\n';
  if (!out) throw IoError("failed writing metrics file " + path.string());
}

LabeledDataset expand_token_aug(const LabeledDataset& train, const Vocabulary& vocab,
                                const TrainConfig& config, RngStream rng) {
  if (config.mode != TrainMode::kAeda && config.mode != TrainMode::kEdaLite)
    throw ConfigError("expand_token_aug: mode " + train_mode_name(config.mode) +
                      " is not a token mode");
  LabeledDataset out = train;
  out.sequences.reserve(train.sequences.size() *
                        static_cast<std::size_t>(config.aug_copies + 1));
  for (Index copy = 1; copy <= config.aug_copies; ++copy) {
    for (std::size_t i = 0; i < train.sequences.size(); ++i) {
      const TokenSequence& src = train.sequences[i];
      RngStream stream =
          rng.derive(static_cast<std::uint64_t>(copy)).derive(static_cast<std::uint64_t>(i));
      const std::vector<std::string> tokens = tokenize(src.raw_text);
      const std::vector<std::string> augmented =
          config.mode == TrainMode::kAeda
              ? aeda(tokens, config.aug_strength, stream)
              : eda_lite(tokens, config.eda_op, config.aug_strength, stream);
      TokenSequence copy_seq;
      copy_seq.label = src.label;
      copy_seq.raw_text = join_tokens(augmented);
      copy_seq.token_ids = vocab.encode_all(augmented);
      if (static_cast<Index>(copy_seq.token_ids.size()) > config.max_seq_len)
        copy_seq.token_ids.resize(static_cast<std::size_t>(config.max_seq_len));
      out.sequences.push_back(std::move(copy_seq));
    }
  }
  return out;
}

TrainResult train(TextCnnModel& model, const DatasetBundle& data, const TrainConfig& config,
                  const TrainHooks* hooks) {
  return Trainer(model, data, config, hooks).run();
}

namespace {

TrainResult train_with_modes(TextCnnModel& model, const DatasetBundle& data,
                             const TrainConfig& config, const TrainHooks* hooks,
                             std::initializer_list<TrainMode> allowed, const char* entry) {
  if (std::find(allowed.begin(), allowed.end(), config.mode) == allowed.end())
    throw ConfigError(std::string(entry) + ": mode " + train_mode_name(config.mode) +
                      " not handled by this entry point");
  return train(model, data, config, hooks);
}

}  // namespace

TrainResult train_rpn(TextCnnModel& model, const DatasetBundle& data, const TrainConfig& config,
                      const TrainHooks* hooks) {
  return train_with_modes(model, data, config, hooks, {TrainMode::kRpn, TrainMode::kBaseline},
                          "train_rpn");
}

TrainResult train_freelb(TextCnnModel& model, const DatasetBundle& data,
                         const TrainConfig& config, const TrainHooks* hooks) {
  return train_with_modes(model, data, config, hooks, {TrainMode::kFreeLb}, "train_freelb");
}

TrainResult train_freelb_rpn(TextCnnModel& model, const DatasetBundle& data,
                             const TrainConfig& config, const TrainHooks* hooks) {
  return train_with_modes(model, data, config, hooks, {TrainMode::kFreeLbRpn},
                          "train_freelb_rpn");
}

TrainResult train_token_aug(TextCnnModel& model, const DatasetBundle& data,
                            const TrainConfig& config, const TrainHooks* hooks) {
  return train_with_modes(model, data, config, hooks, {TrainMode::kAeda, TrainMode::kEdaLite},
                          "train_token_aug");
}

EvalResult evaluate(const TextCnnModel& model, const LabeledDataset& split, Index chunk_size) {
  if (split.size() == 0)
    throw ConfigError("evaluate: empty split '" + split.split + "'");
  if (chunk_size < 1)
    throw ConfigError("evaluate: chunk_size must be >= 1, got " + std::to_string(chunk_size));

  const Index n = split.size();
  double loss_sum = 0.0;
  Index correct = 0;
  std::vector<Index> identity(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) identity[static_cast<std::size_t>(i)] = i;
  for (Index begin = 0; begin < n; begin += chunk_size) {
    const Index end = std::min(n, begin + chunk_size);
    const BatchView view = gather_batch(split, identity, begin, end);
    const EmbeddingBatch batch = embed(view.sequences, model.embedding());
    const ForwardResult fwd = forward(model, batch, view.labels, nullptr);
    loss_sum += fwd.loss * static_cast<double>(end - begin);
    const std::vector<int> preds = predict(fwd.logits);
    for (std::size_t i = 0; i < preds.size(); ++i)
      if (preds[i] == view.labels[i]) ++correct;
  }
  return {loss_sum / static_cast<double>(n), static_cast<double>(correct) / static_cast<double>(n)};
}

}  // namespace rpn
