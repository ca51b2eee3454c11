#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "rpn/kernels.hpp"
#include "rpn/train.hpp"

using rpn::DatasetBundle;
using rpn::EmbeddingBatch;
using rpn::GradientSet;
using rpn::Index;
using rpn::KeyValueConfig;
using rpn::LabeledDataset;
using rpn::MetricsLog;
using rpn::RngStream;
using rpn::Tensor;
using rpn::TextCnnConfig;
using rpn::TextCnnModel;
using rpn::TokenSequence;
using rpn::TrainConfig;
using rpn::TrainHooks;
using rpn::TrainMode;
using rpn::TrainResult;

namespace {

TextCnnConfig small_model(Index vocab, Index num_classes = 2) {
  TextCnnConfig config;
  config.vocab_size = vocab;
  config.embed_dim = 8;
  config.filter_widths = {2, 3};
  config.filters_per_width = 4;
  config.num_classes = num_classes;
  config.dropout = 0.0;
  return config;
}

// Three separable synthetic splits sharing one vocabulary; train() does not
// require the splits to be textually disjoint.
DatasetBundle hand_bundle(Index train_samples = 24, Index vocab = 30, Index seq = 6) {
  DatasetBundle bundle;
  bundle.vocab = rpn::synth_vocabulary(vocab);
  bundle.num_classes = 2;
  bundle.train = rpn::synth_dataset(train_samples, vocab, seq, 2, RngStream(501));
  bundle.train.split = "train";
  bundle.dev = rpn::synth_dataset(8, vocab, seq, 2, RngStream(502));
  bundle.dev.split = "dev";
  bundle.test = rpn::synth_dataset(8, vocab, seq, 2, RngStream(503));
  bundle.test.split = "test";
  return bundle;
}

TrainConfig base_config(std::uint64_t seed) {
  TrainConfig config;
  config.mode = TrainMode::kBaseline;
  config.seed = seed;
  config.lr = 0.05;
  config.momentum = 0.0;
  config.epochs = 2;
  config.batch_size = 8;
  config.eval_every = 1;
  config.max_seq_len = 6;
  return config;
}

bool tensors_bitwise(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) return false;
  for (Index i = 0; i < a.size(); ++i)
    if (a(i) != b(i)) return false;
  return true;
}

bool models_bitwise(const TextCnnModel& a, const TextCnnModel& b) {
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i)
    if (!tensors_bitwise(*pa[i].value, *pb[i].value)) return false;
  return true;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.same_shape(b));
  double worst = 0.0;
  for (Index i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a(i) - b(i)));
  return worst;
}

TrainResult run_mode(const DatasetBundle& bundle, TrainConfig config, TextCnnModel& model,
                     const TrainHooks* hooks = nullptr) {
  config.model = model.config();
  return rpn::train(model, bundle, config, hooks);
}

// Two complete runs from the same initialization; returns whether the final
// parameters agree bitwise and the metric logs match.
bool runs_identical(const DatasetBundle& bundle, const TrainConfig& a, const TrainConfig& b) {
  TextCnnConfig mc = small_model(bundle.vocab.size(), bundle.num_classes);
  TextCnnModel ma(mc, RngStream(77));
  TextCnnModel mb(mc, RngStream(77));
  TrainConfig ca = a;
  TrainConfig cb = b;
  ca.wall_clock = false;
  cb.wall_clock = false;
  const TrainResult ra = run_mode(bundle, ca, ma);
  const TrainResult rb = run_mode(bundle, cb, mb);
  if (!models_bitwise(ma, mb)) return false;
  if (ra.metrics.records.size() != rb.metrics.records.size()) return false;
  for (std::size_t i = 0; i < ra.metrics.records.size(); ++i) {
    const auto& x = ra.metrics.records[i];
    const auto& y = rb.metrics.records[i];
    if (x.epoch != y.epoch || x.split != y.split || x.loss != y.loss ||
        x.accuracy != y.accuracy)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("training is deterministic in the seed") {
  const DatasetBundle bundle = hand_bundle();
  REQUIRE(runs_identical(bundle, base_config(9), base_config(9)));

  TextCnnConfig mc = small_model(bundle.vocab.size());
  TextCnnModel ma(mc, RngStream(77));
  TextCnnModel mb(mc, RngStream(77));
  run_mode(bundle, base_config(9), ma);
  run_mode(bundle, base_config(10), mb);
  CHECK_FALSE(models_bitwise(ma, mb));
}

TEST_CASE("zero noise steps trains bitwise like the baseline") {
  const DatasetBundle bundle = hand_bundle();
  TrainConfig rpn_cfg = base_config(41);
  rpn_cfg.mode = TrainMode::kRpn;
  rpn_cfg.rpn.steps = 0;
  rpn_cfg.rpn.epsilon = 0.4;
  CHECK(runs_identical(bundle, base_config(41), rpn_cfg));

  // With a single pass per batch the two update rules coincide as well.
  TrainConfig averaged = rpn_cfg;
  averaged.update_rule = rpn::UpdateRule::kAverage;
  CHECK(runs_identical(bundle, rpn_cfg, averaged));
}

TEST_CASE("zero chain slots trains bitwise like the plain adversarial mode") {
  const DatasetBundle bundle = hand_bundle();
  TrainConfig freelb = base_config(42);
  freelb.mode = TrainMode::kFreeLb;
  TrainConfig combo = base_config(42);
  combo.mode = TrainMode::kFreeLbRpn;
  combo.rpn.steps = 0;
  CHECK(runs_identical(bundle, freelb, combo));
}

TEST_CASE("an inert adversary trains bitwise like the baseline") {
  // One ascent step with zero init and zero step size perturbs nothing, so
  // the adversarial loop must collapse onto the plain path exactly.
  const DatasetBundle bundle = hand_bundle();
  TrainConfig inert = base_config(44);
  inert.mode = TrainMode::kFreeLb;
  inert.freelb.ascent_steps = 1;
  inert.freelb.init_range = 0.0;
  inert.freelb.alpha = 0.0;
  CHECK(runs_identical(bundle, base_config(44), inert));
}

TEST_CASE("zero augmented copies trains bitwise like the baseline") {
  const DatasetBundle bundle = hand_bundle();
  for (TrainMode mode : {TrainMode::kAeda, TrainMode::kEdaLite}) {
    TrainConfig aug = base_config(43);
    aug.mode = mode;
    aug.aug_copies = 0;
    CHECK(runs_identical(bundle, base_config(43), aug));
  }
}

TEST_CASE("batch loss is the mean of the per-pass losses") {
  const DatasetBundle bundle = hand_bundle();
  std::map<std::pair<Index, Index>, std::vector<double>> pass_losses;
  std::vector<double> batch_losses;
  std::vector<std::pair<Index, Index>> batch_keys;
  TrainHooks hooks;
  hooks.on_pass_loss = [&](Index epoch, Index batch, Index, double loss) {
    pass_losses[{epoch, batch}].push_back(loss);
  };
  hooks.on_batch_loss = [&](Index epoch, Index batch, double loss) {
    batch_losses.push_back(loss);
    batch_keys.emplace_back(epoch, batch);
  };

  const auto check_bookkeeping = [&](TrainConfig cfg, std::size_t expected_passes) {
    pass_losses.clear();
    batch_losses.clear();
    batch_keys.clear();
    TextCnnModel model(small_model(bundle.vocab.size()), RngStream(77));
    run_mode(bundle, cfg, model, &hooks);
    REQUIRE(!batch_losses.empty());
    for (std::size_t i = 0; i < batch_losses.size(); ++i) {
      const auto& losses = pass_losses.at(batch_keys[i]);
      REQUIRE(losses.size() == expected_passes);
      double sum = 0.0;
      for (double l : losses) sum += l;
      CHECK(batch_losses[i] ==
            doctest::Approx(sum / static_cast<double>(losses.size())).epsilon(1e-12));
    }
  };

  TrainConfig rpn_cfg = base_config(19);
  rpn_cfg.mode = TrainMode::kRpn;
  rpn_cfg.rpn.steps = 3;
  check_bookkeeping(rpn_cfg, 4);

  TrainConfig freelb_cfg = base_config(19);
  freelb_cfg.mode = TrainMode::kFreeLb;
  check_bookkeeping(freelb_cfg, 3);

  TrainConfig combo_cfg = base_config(19);
  combo_cfg.mode = TrainMode::kFreeLbRpn;
  combo_cfg.rpn.steps = 2;
  check_bookkeeping(combo_cfg, 9);
}

TEST_CASE("accumulating updates replays the manual schedule") {
  // Zero noise probability keeps every chain slot bitwise equal to the clean
  // batch, so a hand-rolled loop over the same streams must reproduce each
  // pass loss (computed after the previous inner update) and the final
  // parameters exactly.
  const DatasetBundle bundle = hand_bundle();
  const Index steps = 2;
  TrainConfig cfg = base_config(77);
  cfg.mode = TrainMode::kRpn;
  cfg.rpn.steps = steps;
  cfg.rpn.epsilon = 0.0;
  cfg.epochs = 2;

  std::vector<double> seen;
  TrainHooks hooks;
  hooks.on_pass_loss = [&](Index, Index, Index, double loss) { seen.push_back(loss); };
  TextCnnModel trained(small_model(bundle.vocab.size()), RngStream(31));
  run_mode(bundle, cfg, trained, &hooks);

  TextCnnModel replay(small_model(bundle.vocab.size()), RngStream(31));
  rpn::SgdState sgd;
  RngStream root(cfg.seed);
  const double scale = 1.0 / static_cast<double>(steps + 1);
  std::size_t cursor = 0;
  const Index n = bundle.train.size();
  for (Index epoch = 1; epoch <= cfg.epochs; ++epoch) {
    RngStream shuffle = root.derive("shuffle", static_cast<std::uint64_t>(epoch));
    const std::vector<Index> order = rpn::random_permutation(n, shuffle);
    for (Index begin = 0; begin < n; begin += cfg.batch_size) {
      const Index end = std::min(n, begin + cfg.batch_size);
      std::vector<TokenSequence> seqs;
      std::vector<int> labels;
      for (Index i = begin; i < end; ++i) {
        seqs.push_back(bundle.train.sequences[static_cast<std::size_t>(order[i])]);
        labels.push_back(seqs.back().label);
      }
      const EmbeddingBatch x0 = rpn::embed(seqs, replay.embedding());
      GradientSet acc;
      for (const auto& p : replay.parameters()) acc.params.push_back(Tensor::zeros(p.value->shape()));
      for (Index t = 0; t <= steps; ++t) {
        const auto fwd = rpn::forward(replay, x0, labels, nullptr);
        REQUIRE(cursor < seen.size());
        REQUIRE(fwd.loss == seen[cursor]);
        ++cursor;
        const GradientSet grads = rpn::backward(replay, fwd.cache);
        for (std::size_t i = 0; i < acc.params.size(); ++i) {
          if (i == 0 && t > 0) continue;
          acc.params[i].as_flat() += scale * grads.params[i].as_flat();
        }
        rpn::sgd_step(replay, sgd, acc, cfg.lr, cfg.momentum);
      }
    }
  }
  REQUIRE(cursor == seen.size());
  CHECK(models_bitwise(trained, replay));
}

TEST_CASE("adversarial batches apply one averaged update") {
  const DatasetBundle bundle = hand_bundle(16);
  TrainConfig cfg = base_config(55);
  cfg.mode = TrainMode::kFreeLb;
  cfg.epochs = 1;
  cfg.batch_size = 8;

  std::vector<std::vector<GradientSet>> per_batch_passes;
  std::vector<GradientSet> applied;
  std::vector<double> delta_norms;
  TrainHooks hooks;
  hooks.on_pass_grads = [&](Index, Index batch, Index, const GradientSet& g) {
    per_batch_passes.resize(static_cast<std::size_t>(batch) + 1);
    per_batch_passes[static_cast<std::size_t>(batch)].push_back(g);
  };
  hooks.on_applied_grads = [&](Index, Index, const GradientSet& g) { applied.push_back(g); };
  hooks.on_delta_norm = [&](double norm) { delta_norms.push_back(norm); };

  TextCnnModel model(small_model(bundle.vocab.size()), RngStream(77));
  const std::uint64_t backward_before = model.backward_calls();
  run_mode(bundle, cfg, model, &hooks);

  const std::size_t batches = 2;
  const std::size_t ascent = static_cast<std::size_t>(cfg.freelb.ascent_steps);
  REQUIRE(applied.size() == batches);
  REQUIRE(per_batch_passes.size() == batches);
  CHECK(model.backward_calls() - backward_before == batches * ascent);
  CHECK(delta_norms.size() == batches * ascent);
  for (double norm : delta_norms) CHECK(norm <= cfg.freelb.norm_bound + 1e-12);

  for (std::size_t b = 0; b < batches; ++b) {
    REQUIRE(per_batch_passes[b].size() == ascent);
    for (std::size_t i = 0; i < applied[b].params.size(); ++i) {
      Tensor mean = Tensor::zeros(applied[b].params[i].shape());
      for (const GradientSet& g : per_batch_passes[b])
        mean.as_flat() += g.params[i].as_flat() / static_cast<double>(ascent);
      CHECK(max_abs_diff(applied[b].params[i], mean) < 1e-12);
    }
  }
}

TEST_CASE("virtual passes leave the embedding gradient detached") {
  const DatasetBundle bundle = hand_bundle(8);
  TrainConfig cfg = base_config(66);
  cfg.mode = TrainMode::kRpn;
  cfg.rpn.steps = 2;
  cfg.rpn.epsilon = 0.5;
  cfg.epochs = 1;
  cfg.batch_size = 8;
  cfg.update_rule = rpn::UpdateRule::kAverage;

  std::vector<GradientSet> passes;
  std::vector<GradientSet> applied;
  TrainHooks hooks;
  hooks.on_pass_grads = [&](Index, Index, Index, const GradientSet& g) { passes.push_back(g); };
  hooks.on_applied_grads = [&](Index, Index, const GradientSet& g) { applied.push_back(g); };

  TextCnnModel model(small_model(bundle.vocab.size()), RngStream(77));
  run_mode(bundle, cfg, model, &hooks);
  REQUIRE(applied.size() == 1);
  REQUIRE(passes.size() == 3);

  // Virtual passes do scatter a (misattributed) embedding gradient of their
  // own; detachment must drop it, leaving exactly the scaled clean-pass part.
  CHECK(passes[1].params[0].as_flat().abs().maxCoeff() > 0.0);
  Tensor expected = passes[0].params[0];
  expected.as_flat() *= 1.0 / 3.0;
  CHECK(tensors_bitwise(applied[0].params[0], expected));

  // Every other parameter averages over all three passes.
  for (std::size_t i = 1; i < applied[0].params.size(); ++i) {
    Tensor mean = Tensor::zeros(applied[0].params[i].shape());
    for (const GradientSet& g : passes) mean.as_flat() += g.params[i].as_flat() / 3.0;
    CHECK(max_abs_diff(applied[0].params[i], mean) < 1e-12);
  }
}

TEST_CASE("flow routing matches finite differences through the chain") {
  // One batch, zero learning rate: the captured update equals the gradient of
  // J(V, theta) = mean_t loss(X_t) at the initial parameters, where the chain
  // X_t is a fixed value-independent select/permute map. Central differences
  // over every parameter entry provide the oracle; perturbing the embedding
  // re-embeds and re-chains, so the full route back through the noise steps
  // is exercised.
  DatasetBundle bundle;
  bundle.vocab = rpn::synth_vocabulary(12);
  bundle.num_classes = 2;
  const auto mk = [](std::vector<Index> ids, int label) {
    TokenSequence s;
    s.token_ids = std::move(ids);
    s.label = label;
    return s;
  };
  bundle.train.sequences = {mk({2, 3, 4, 5}, 0), mk({6, 7}, 1), mk({8, 9, 10}, 0),
                            mk({11, 2}, 1)};
  bundle.train.num_classes = 2;
  bundle.train.split = "train";
  bundle.dev = bundle.train;
  bundle.dev.split = "dev";
  bundle.test = bundle.train;
  bundle.test.split = "test";

  TextCnnConfig mc;
  mc.vocab_size = 12;
  mc.embed_dim = 3;
  mc.filter_widths = {2};
  mc.filters_per_width = 2;
  mc.num_classes = 2;
  mc.dropout = 0.0;

  const Index steps = 2;
  TrainConfig cfg = base_config(71);
  cfg.mode = TrainMode::kRpn;
  cfg.rpn.steps = steps;
  cfg.rpn.epsilon = 0.5;
  cfg.epochs = 1;
  cfg.batch_size = 8;
  cfg.lr = 0.0;
  cfg.update_rule = rpn::UpdateRule::kAverage;
  cfg.virtual_grad = rpn::VirtualGrad::kFlow;

  std::vector<GradientSet> applied;
  TrainHooks hooks;
  hooks.on_applied_grads = [&](Index, Index, const GradientSet& g) { applied.push_back(g); };
  TextCnnModel model(mc, RngStream(23));
  cfg.model = mc;
  rpn::train(model, bundle, cfg, &hooks);
  REQUIRE(applied.size() == 1);

  // Rebuild the exact batch the run saw: epoch 1, batch 0 of its streams.
  RngStream root(cfg.seed);
  RngStream shuffle = root.derive("shuffle", 1);
  const std::vector<Index> order = rpn::random_permutation(bundle.train.size(), shuffle);
  std::vector<TokenSequence> seqs;
  std::vector<int> labels;
  for (Index i : order) {
    seqs.push_back(bundle.train.sequences[static_cast<std::size_t>(i)]);
    labels.push_back(seqs.back().label);
  }
  rpn::RpnConfig chain_cfg = cfg.rpn;
  const auto objective = [&] {
    const EmbeddingBatch x0 = rpn::embed(seqs, model.embedding());
    RngStream rng = root.derive("rpn", 1, 0);
    const auto chain = rpn::rpn_augment(x0, chain_cfg, rng);
    double sum = rpn::forward(model, x0, labels, nullptr).loss;
    for (const auto& step : chain) sum += rpn::forward(model, step.x_next, labels, nullptr).loss;
    return sum / static_cast<double>(steps + 1);
  };

  auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& value = *params[i].value;
    for (Index e = 0; e < value.size(); ++e) {
      if (i == 0 && e < value.row_width()) continue;  // pinned padding row
      const double numeric = oracle::central_difference(objective, &value(e), 1e-5);
      const double analytic = applied[0].params[i](e);
      CAPTURE(i);
      CAPTURE(e);
      CHECK(oracle::gradients_close(analytic, numeric, 1e-4, 1e-7));
    }
  }

  // The routed embedding gradient really differs from the detached one.
  std::vector<GradientSet> detached;
  TrainHooks detach_hooks;
  detach_hooks.on_applied_grads = [&](Index, Index, const GradientSet& g) {
    detached.push_back(g);
  };
  TrainConfig detach_cfg = cfg;
  detach_cfg.virtual_grad = rpn::VirtualGrad::kDetach;
  TextCnnModel model2(mc, RngStream(23));
  rpn::train(model2, bundle, detach_cfg, &detach_hooks);
  REQUIRE(detached.size() == 1);
  CHECK(max_abs_diff(applied[0].params[0], detached[0].params[0]) > 1e-9);
}

TEST_CASE("token modes expand the training set offline") {
  const DatasetBundle bundle = hand_bundle(10, 30, 6);
  TrainConfig cfg = base_config(5);
  cfg.mode = TrainMode::kAeda;
  cfg.aug_copies = 2;
  cfg.aug_strength = 0.5;
  cfg.max_seq_len = 32;  // room for the inserted marks

  const LabeledDataset expanded =
      rpn::expand_token_aug(bundle.train, bundle.vocab, cfg, RngStream(8));
  REQUIRE(expanded.size() == 30);

  // Originals stay as an untouched prefix.
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(expanded.sequences[i].token_ids == bundle.train.sequences[i].token_ids);
    CHECK(expanded.sequences[i].label == bundle.train.sequences[i].label);
  }
  // Copies keep their source label and gain exactly floor(0.5 * len) marks;
  // the synthetic vocabulary has no punctuation, so every mark encodes to the
  // unknown id.
  for (std::size_t i = 10; i < 30; ++i) {
    const auto& src = bundle.train.sequences[(i - 10) % 10];
    const auto& copy = expanded.sequences[i];
    CHECK(copy.label == src.label);
    const std::size_t marks = src.token_ids.size() / 2;
    REQUIRE(copy.token_ids.size() == src.token_ids.size() + marks);
    std::size_t unknown = 0;
    for (Index id : copy.token_ids)
      if (id == 1) ++unknown;
    CHECK(unknown == marks);
  }

  // Swap copies keep the token multiset, delete copies keep a subsequence.
  TrainConfig swap_cfg = cfg;
  swap_cfg.mode = TrainMode::kEdaLite;
  swap_cfg.eda_op = rpn::EdaOp::kRandomSwap;
  swap_cfg.aug_copies = 1;
  const LabeledDataset swapped =
      rpn::expand_token_aug(bundle.train, bundle.vocab, swap_cfg, RngStream(8));
  REQUIRE(swapped.size() == 20);
  for (std::size_t i = 10; i < 20; ++i) {
    auto a = swapped.sequences[i].token_ids;
    auto b = bundle.train.sequences[i - 10].token_ids;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
  }

  TrainConfig del_cfg = swap_cfg;
  del_cfg.eda_op = rpn::EdaOp::kRandomDelete;
  const LabeledDataset deleted =
      rpn::expand_token_aug(bundle.train, bundle.vocab, del_cfg, RngStream(8));
  bool any_shorter = false;
  for (std::size_t i = 10; i < 20; ++i) {
    const auto& kept = deleted.sequences[i].token_ids;
    const auto& src = bundle.train.sequences[i - 10].token_ids;
    REQUIRE(!kept.empty());
    CHECK(kept.size() <= src.size());
    if (kept.size() < src.size()) any_shorter = true;
    // Subsequence check.
    std::size_t j = 0;
    for (Index id : src)
      if (j < kept.size() && kept[j] == id) ++j;
    CHECK(j == kept.size());
  }
  CHECK(any_shorter);

  // Wrong mode is rejected.
  TrainConfig wrong = base_config(5);
  wrong.mode = TrainMode::kRpn;
  CHECK_THROWS_AS(rpn::expand_token_aug(bundle.train, bundle.vocab, wrong, RngStream(8)),
                  rpn::ConfigError);
}

TEST_CASE("every mode learns the separable fixture") {
  const DatasetBundle bundle = rpn::synth_bundle(64, 40, 8, 2, 8, RngStream(11));
  REQUIRE(bundle.dev.size() > 0);

  TextCnnConfig mc;
  mc.vocab_size = bundle.vocab.size();
  mc.embed_dim = 16;
  mc.filter_widths = {2, 3};
  mc.filters_per_width = 8;
  mc.num_classes = 2;
  mc.dropout = 0.0;

  const auto learns = [&](TrainConfig cfg, Index epochs = 12) {
    cfg.seed = 300;
    cfg.lr = 0.15;
    cfg.momentum = 0.9;
    cfg.epochs = epochs;
    cfg.batch_size = 16;
    cfg.eval_every = epochs;
    cfg.max_seq_len = 8;
    cfg.model = mc;
    TextCnnModel model(mc, RngStream(21));
    rpn::train(model, bundle, cfg, nullptr);
    const auto train_eval = rpn::evaluate(model, bundle.train);
    const auto dev_eval = rpn::evaluate(model, bundle.dev);
    CAPTURE(train_mode_name(cfg.mode));
    CHECK(train_eval.accuracy >= 0.95);
    CHECK(dev_eval.accuracy >= 0.75);
  };

  TrainConfig cfg;
  cfg.mode = TrainMode::kBaseline;
  learns(cfg);

  cfg = TrainConfig();
  cfg.mode = TrainMode::kRpn;
  cfg.rpn.epsilon = 0.3;
  cfg.rpn.steps = 2;
  learns(cfg);

  cfg = TrainConfig();
  cfg.mode = TrainMode::kFreeLb;
  learns(cfg);

  // The combined mode averages over the most passes per batch and moves the
  // slowest, so it gets a longer budget.
  cfg = TrainConfig();
  cfg.mode = TrainMode::kFreeLbRpn;
  cfg.rpn.steps = 1;
  learns(cfg, 20);

  cfg = TrainConfig();
  cfg.mode = TrainMode::kAeda;
  cfg.aug_copies = 1;
  cfg.aug_strength = 0.3;
  learns(cfg);

  cfg = TrainConfig();
  cfg.mode = TrainMode::kEdaLite;
  cfg.eda_op = rpn::EdaOp::kRandomSwap;
  cfg.aug_copies = 1;
  cfg.aug_strength = 0.2;
  learns(cfg);
}

TEST_CASE("metric rows follow the evaluation cadence") {
  const DatasetBundle bundle = hand_bundle(10);
  TrainConfig cfg = base_config(3);
  cfg.epochs = 4;
  cfg.eval_every = 2;
  cfg.batch_size = 4;

  std::size_t batches_seen = 0;
  TrainHooks hooks;
  hooks.on_batch_loss = [&](Index, Index, double) { ++batches_seen; };
  TextCnnModel model(small_model(bundle.vocab.size()), RngStream(77));
  const TrainResult result = run_mode(bundle, cfg, model, &hooks);

  // 10 samples in batches of 4 keep the final partial batch.
  CHECK(batches_seen == 3 * 4);

  const auto& rows = result.metrics.records;
  REQUIRE(rows.size() == 5);
  CHECK(rows[0].epoch == 2);
  CHECK(rows[0].split == "train");
  CHECK(rows[1].epoch == 2);
  CHECK(rows[1].split == "dev");
  CHECK(rows[2].epoch == 4);
  CHECK(rows[2].split == "train");
  CHECK(rows[3].epoch == 4);
  CHECK(rows[3].split == "dev");
  CHECK(rows[4].epoch == 4);
  CHECK(rows[4].split == "test");
  for (std::size_t i = 1; i < rows.size(); ++i)
    CHECK(rows[i].wall_time_s >= rows[i - 1].wall_time_s);

  // Disabled wall clock pins the column to zero for byte-stable files.
  TrainConfig still = cfg;
  still.wall_clock = false;
  TextCnnModel model2(small_model(bundle.vocab.size()), RngStream(77));
  const TrainResult quiet = run_mode(bundle, still, model2);
  for (const auto& row : quiet.metrics.records) CHECK(row.wall_time_s == 0.0);

  // Zero epochs: only the final test row, parameters untouched.
  TrainConfig none = base_config(3);
  none.epochs = 0;
  TextCnnModel before(small_model(bundle.vocab.size()), RngStream(77));
  TextCnnModel after(small_model(bundle.vocab.size()), RngStream(77));
  const TrainResult empty_run = run_mode(bundle, none, after);
  REQUIRE(empty_run.metrics.records.size() == 1);
  CHECK(empty_run.metrics.records[0].split == "test");
  CHECK(models_bitwise(before, after));
}

TEST_CASE("metrics csv uses the canonical format") {
  MetricsLog log;
  log.records.push_back({1, "train", 0.5, 0.75, 1.5});
  log.records.push_back({2, "dev", 0.25, 0.875, 3.0});
  const auto path = std::filesystem::temp_directory_path() / "rpn_metrics_test.csv";
  rpn::write_metrics_csv(log, path);

  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "epoch,split,loss,accuracy,wall_time_s");
  REQUIRE(std::getline(in, line));
  CHECK(line == "1,train,0.5,0.75,1.5");
  REQUIRE(std::getline(in, line));
  CHECK(line == "2,dev,0.25,0.875,3");
  CHECK_FALSE(std::getline(in, line));
  std::filesystem::remove(path);

  CHECK_THROWS_AS(
      rpn::write_metrics_csv(log, std::filesystem::path("/nonexistent-dir/metrics.csv")),
      rpn::IoError);
}

TEST_CASE("training aborts on the first non-finite value") {
  const DatasetBundle bundle = hand_bundle(32);
  TrainConfig cfg = base_config(13);
  cfg.lr = 1e308;
  cfg.epochs = 3;
  try {
    TextCnnModel model(small_model(bundle.vocab.size()), RngStream(77));
    run_mode(bundle, cfg, model);
    FAIL("expected NumericError");
  } catch (const rpn::NumericError& e) {
    const std::string what = e.what();
    CHECK(what.find("batch") != std::string::npos);
  }
}

TEST_CASE("config parsing fills defaults and renders canonically") {
  KeyValueConfig kv = KeyValueConfig::from_lines({
      "mode=rpn",
      "seed=17",
      "# comment",
      "rpn.epsilon=0.2",
      "rpn.steps=5",
      "model.filter_widths=2,3,4",
      "update_rule=average",
  });
  const TrainConfig cfg = TrainConfig::from_config(kv);
  CHECK(cfg.mode == TrainMode::kRpn);
  CHECK(cfg.seed == 17);
  CHECK(cfg.rpn.epsilon == 0.2);
  CHECK(cfg.rpn.steps == 5);
  CHECK(cfg.update_rule == rpn::UpdateRule::kAverage);
  CHECK(cfg.lr == 1e-4);
  CHECK(cfg.model.filter_widths == std::vector<Index>{2, 3, 4});
  CHECK_NOTHROW(kv.reject_unknown_keys());

  const std::vector<std::string> lines = cfg.render();
  KeyValueConfig echo = KeyValueConfig::from_lines(lines);
  const TrainConfig round = TrainConfig::from_config(echo);
  CHECK(round.rpn.epsilon == cfg.rpn.epsilon);
  CHECK(round.lr == cfg.lr);
  CHECK(round.mode == cfg.mode);
  CHECK(round.render() == lines);

  // Unknown enum values and a missing seed are configuration errors.
  KeyValueConfig bad_rule = KeyValueConfig::from_lines({"seed=1", "update_rule=sometimes"});
  CHECK_THROWS_AS(TrainConfig::from_config(bad_rule), rpn::ConfigError);
  KeyValueConfig no_seed = KeyValueConfig::from_lines({"mode=baseline"});
  CHECK_THROWS_AS(TrainConfig::from_config(no_seed), rpn::ConfigError);
  KeyValueConfig stray = KeyValueConfig::from_lines({"seed=1", "rpn.epsilonn=0.3"});
  TrainConfig::from_config(stray);
  CHECK_THROWS_AS(stray.reject_unknown_keys(), rpn::ConfigError);

  // Routing virtual gradients needs the coupled shuffle.
  TrainConfig flow = TrainConfig();
  flow.mode = TrainMode::kRpn;
  flow.virtual_grad = rpn::VirtualGrad::kFlow;
  flow.rpn.coupled_shuffle = false;
  CHECK_THROWS_AS(flow.validate(), rpn::ConfigError);
}

TEST_CASE("entry points reject foreign modes") {
  const DatasetBundle bundle = hand_bundle(8);
  TrainConfig cfg = base_config(1);
  cfg.mode = TrainMode::kRpn;
  TextCnnModel model(small_model(bundle.vocab.size()), RngStream(77));
  CHECK_THROWS_AS(rpn::train_freelb(model, bundle, cfg), rpn::ConfigError);
  CHECK_THROWS_AS(rpn::train_token_aug(model, bundle, cfg), rpn::ConfigError);
  cfg.mode = TrainMode::kFreeLb;
  CHECK_THROWS_AS(rpn::train_rpn(model, bundle, cfg), rpn::ConfigError);
  CHECK_THROWS_AS(rpn::train_freelb_rpn(model, bundle, cfg), rpn::ConfigError);
}

TEST_CASE("evaluation is pure and chunking-stable") {
  const DatasetBundle bundle = hand_bundle(20);
  TextCnnModel model(small_model(bundle.vocab.size()), RngStream(77));

  const auto a = rpn::evaluate(model, bundle.train);
  const auto b = rpn::evaluate(model, bundle.train);
  CHECK(a.loss == b.loss);
  CHECK(a.accuracy == b.accuracy);

  const auto chunked = rpn::evaluate(model, bundle.train, 7);
  CHECK(std::abs(chunked.loss - a.loss) < 1e-12);
  CHECK(chunked.accuracy == a.accuracy);

  LabeledDataset empty;
  empty.split = "dev";
  CHECK_THROWS_AS(rpn::evaluate(model, empty), rpn::ConfigError);
  CHECK_THROWS_AS(rpn::evaluate(model, bundle.train, 0), rpn::ConfigError);
}
