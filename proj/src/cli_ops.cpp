#include "rpn/cli_ops.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "rpn/augment.hpp"
#include "rpn/bench.hpp"
#include "rpn/corpus.hpp"
#include "rpn/io.hpp"
#include "rpn/train.hpp"

namespace rpn {
namespace {

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const std::string& line : lines) out << line << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& body) {
  try {
    body();
    return kExitSuccess;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

TextCnnModel build_model(const TrainConfig& config, const DatasetBundle& data) {
  TextCnnConfig model_config = config.model;
  model_config.vocab_size = data.vocab.size();
  model_config.num_classes = data.num_classes;
  return TextCnnModel(model_config, RngStream(config.seed).derive("init"));
}

KeyValueConfig to_key_values(const std::vector<std::string>& lines) {
  return KeyValueConfig::from_lines(lines);
}

std::vector<std::string> resolved_echo(const TrainConfig& config, const DataSpec& data) {
  KeyValueConfig kv = to_key_values(config.render());
  for (const std::string& line : data.render()) kv.set_assignment(line);
  return kv.render();
}

}  // namespace

KeyValueConfig resolve_config(const CliInvocation& invocation) {
  KeyValueConfig kv;
  if (!invocation.config_path.empty()) kv = KeyValueConfig::from_file(invocation.config_path);
  for (const std::string& assignment : invocation.overrides) kv.set_assignment(assignment);
  return kv;
}

DataSpec DataSpec::from_config(const KeyValueConfig& kv) {
  DataSpec spec;
  spec.source = kv.get_string("data.source", spec.source);
  spec.manifest = kv.get_string("data.manifest", "");
  spec.vocab_cap = static_cast<Index>(kv.get_int("data.vocab_cap", spec.vocab_cap));

  spec.corpus_train = static_cast<Index>(kv.get_int("data.corpus.train", spec.corpus_train));
  spec.corpus_dev = static_cast<Index>(kv.get_int("data.corpus.dev", spec.corpus_dev));
  spec.corpus_test = static_cast<Index>(kv.get_int("data.corpus.test", spec.corpus_test));
  spec.corpus_label_noise = kv.get_double("data.corpus.label_noise", spec.corpus_label_noise);
  spec.corpus_seed =
      static_cast<std::uint64_t>(kv.get_int("data.corpus.seed", static_cast<std::int64_t>(spec.corpus_seed)));

  spec.synth_samples = static_cast<Index>(kv.get_int("data.synth.samples", spec.synth_samples));
  spec.synth_vocab = static_cast<Index>(kv.get_int("data.synth.vocab", spec.synth_vocab));
  spec.synth_seq_len = static_cast<Index>(kv.get_int("data.synth.seq_len", spec.synth_seq_len));
  spec.synth_classes = static_cast<int>(kv.get_int("data.synth.classes", spec.synth_classes));
  spec.synth_seed =
      static_cast<std::uint64_t>(kv.get_int("data.synth.seed", static_cast<std::int64_t>(spec.synth_seed)));

  if (spec.source != "corpus" && spec.source != "synth" && spec.source != "manifest")
    throw ConfigError("data.source must be corpus, synth or manifest, got '" + spec.source +
                      "'");
  if (spec.source == "manifest" && spec.manifest.empty())
    throw ConfigError("data.source=manifest needs data.manifest");
  if (spec.vocab_cap < 3)
    throw ConfigError("data.vocab_cap must be >= 3, got " + std::to_string(spec.vocab_cap));
  return spec;
}

DatasetBundle DataSpec::load(Index max_seq_len) const {
  if (source == "manifest") return load_bundle(manifest, vocab_cap, max_seq_len);
  if (source == "synth")
    return synth_bundle(synth_samples, synth_vocab, synth_seq_len, synth_classes, max_seq_len,
                        RngStream(synth_seed));
  CorpusConfig corpus;
  corpus.train_sentences = corpus_train;
  corpus.dev_sentences = corpus_dev;
  corpus.test_sentences = corpus_test;
  corpus.label_noise = corpus_label_noise;
  corpus.seed = corpus_seed;
  return bundle_from_corpus(make_sentiment_corpus(corpus), vocab_cap, max_seq_len);
}

std::vector<std::string> DataSpec::render() const {
  std::vector<std::string> lines;
  lines.push_back("data.source=" + source);
  if (source == "manifest") {
    lines.push_back("data.manifest=" + manifest.string());
    lines.push_back("data.vocab_cap=" + std::to_string(vocab_cap));
  } else if (source == "corpus") {
    lines.push_back("data.vocab_cap=" + std::to_string(vocab_cap));
    lines.push_back("data.corpus.train=" + std::to_string(corpus_train));
    lines.push_back("data.corpus.dev=" + std::to_string(corpus_dev));
    lines.push_back("data.corpus.test=" + std::to_string(corpus_test));
    lines.push_back("data.corpus.label_noise=" + format_double(corpus_label_noise));
    lines.push_back("data.corpus.seed=" + std::to_string(corpus_seed));
  } else {
    lines.push_back("data.synth.samples=" + std::to_string(synth_samples));
    lines.push_back("data.synth.vocab=" + std::to_string(synth_vocab));
    lines.push_back("data.synth.seq_len=" + std::to_string(synth_seq_len));
    lines.push_back("data.synth.classes=" + std::to_string(synth_classes));
    lines.push_back("data.synth.seed=" + std::to_string(synth_seed));
  }
  return lines;
}

int run_train(const CliInvocation& invocation, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const KeyValueConfig kv = resolve_config(invocation);
    const TrainConfig config = TrainConfig::from_config(kv);
    const DataSpec data_spec = DataSpec::from_config(kv);
    kv.reject_unknown_keys();
    config.validate();

    const DatasetBundle data = data_spec.load(config.max_seq_len);
    TextCnnModel model = build_model(config, data);
    const TrainResult result = train(model, data, config);

    ensure_directory(invocation.output_dir);
    write_metrics_csv(result.metrics, invocation.output_dir / "metrics.csv");
    write_checkpoint(invocation.output_dir / "checkpoint.bin", model, data.vocab,
                     to_key_values(config.render()));
    write_lines(invocation.output_dir / "resolved_config.txt",
                resolved_echo(config, data_spec));

    for (auto it = result.metrics.records.rbegin(); it != result.metrics.records.rend(); ++it)
      if (it->split == "test") {
        out << "test loss=" << format_double(it->loss)
            << " accuracy=" << format_double(it->accuracy) << '\n';
        break;
      }
    out << "artifacts in " << invocation.output_dir.string() << '\n';
  });
}

int run_eval(const CliInvocation& invocation, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const KeyValueConfig kv = resolve_config(invocation);
    const std::filesystem::path checkpoint_path = kv.require_string("checkpoint");
    const std::string split_name = kv.get_string("split", "test");
    const Index chunk_size = static_cast<Index>(kv.get_int("eval.chunk_size", 128));
    // Eval shares config files with train, so the whole train key family is
    // accepted; the checkpoint's stored geometry wins unless overridden.
    const TrainConfig train_keys = TrainConfig::from_config(kv);
    const bool explicit_seq_len = kv.has("max_seq_len");
    const DataSpec data_spec = DataSpec::from_config(kv);
    kv.reject_unknown_keys();
    if (split_name != "train" && split_name != "dev" && split_name != "test")
      throw ConfigError("split must be train, dev or test, got '" + split_name + "'");

    const Checkpoint checkpoint = read_checkpoint(checkpoint_path);
    const TextCnnModel model = restore_model(checkpoint);
    const Index max_seq_len =
        explicit_seq_len ? train_keys.max_seq_len
                         : static_cast<Index>(checkpoint.config.get_int("max_seq_len", 20));

    const DatasetBundle data = data_spec.load(max_seq_len);
    LabeledDataset split = data.split(split_name);
    encode_dataset(split, checkpoint.vocab, max_seq_len);

    const EvalResult result = evaluate(model, split, chunk_size);
    out << "split=" << split_name << " loss=" << format_double(result.loss)
        << " accuracy=" << format_double(result.accuracy) << '\n';
  });
}

int run_augment(const CliInvocation& invocation, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const KeyValueConfig kv = resolve_config(invocation);
    const std::filesystem::path input_path = kv.require_string("input");
    const TrainConfig config = TrainConfig::from_config(kv);
    kv.reject_unknown_keys();
    config.rpn.validate();

    const TensorDump dump = read_tensor_dump(input_path);
    EmbeddingBatch batch;
    batch.values = dump.tensor;

    RngStream chain = RngStream(config.seed).derive("rpn");
    const std::vector<RpnStepResult> steps = rpn_augment(batch, config.rpn, chain);

    ensure_directory(invocation.output_dir);
    std::vector<std::string> trace;
    for (std::size_t t = 0; t < steps.size(); ++t) {
      nlohmann::json record;
      record["step"] = t + 1;
      record["entries"] = steps[t].mask.size();
      record["mask_density"] = steps[t].mask_density();
      record["perm"] = steps[t].perm;
      trace.push_back(record.dump());
    }
    write_lines(invocation.output_dir / "trace.jsonl", trace);

    const Tensor& final_values = steps.empty() ? batch.values : steps.back().x_next.values;
    write_tensor_dump(invocation.output_dir / "augmented.bin", final_values);

    out << "steps=" << steps.size() << " entries=" << batch.values.size() << " wrote "
        << (invocation.output_dir / "augmented.bin").string() << '\n';
  });
}

int run_grid(const CliInvocation& invocation, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const KeyValueConfig kv = resolve_config(invocation);
    TrainConfig base = TrainConfig::from_config(kv);
    if (kv.has("mode") && base.mode != TrainMode::kRpn)
      throw ConfigError("grid searches rpn settings; mode must be rpn");
    base.mode = TrainMode::kRpn;

    std::vector<double> epsilons = kv.get_double_list("grid.epsilon", {0.1, 0.2, 0.5});
    std::vector<std::int64_t> steps = kv.get_int_list("grid.steps", {1, 3, 5});
    const DataSpec data_spec = DataSpec::from_config(kv);
    kv.reject_unknown_keys();
    if (epsilons.empty() || steps.empty()) throw ConfigError("grid axes must be non-empty");
    std::sort(epsilons.begin(), epsilons.end());
    epsilons.erase(std::unique(epsilons.begin(), epsilons.end()), epsilons.end());
    std::sort(steps.begin(), steps.end());
    steps.erase(std::unique(steps.begin(), steps.end()), steps.end());

    std::vector<TrainConfig> cells;
    RngStream root(base.seed);
    for (std::size_t i = 0; i < epsilons.size(); ++i)
      for (std::size_t j = 0; j < steps.size(); ++j) {
        TrainConfig cell = base;
        cell.rpn.epsilon = epsilons[i];
        cell.rpn.steps = static_cast<Index>(steps[j]);
        cell.seed = root.derive("grid", i, j).next_u64();
        cell.validate();
        cells.push_back(cell);
      }

    const DatasetBundle data = data_spec.load(base.max_seq_len);
    std::vector<double> accuracy;
    for (const TrainConfig& cell : cells) {
      TextCnnModel model = build_model(cell, data);
      train(model, data, cell);
      accuracy.push_back(evaluate(model, data.dev).accuracy);
    }

    // Cells run epsilon-major in ascending order, so keeping the first
    // maximum breaks ties toward smaller epsilon, then smaller step count.
    std::size_t best = 0;
    for (std::size_t c = 1; c < accuracy.size(); ++c)
      if (accuracy[c] > accuracy[best]) best = c;

    std::vector<std::string> csv = {"epsilon,steps,dev_accuracy,best"};
    for (std::size_t c = 0; c < cells.size(); ++c)
      csv.push_back(format_double(cells[c].rpn.epsilon) + "," +
                    std::to_string(cells[c].rpn.steps) + "," + format_double(accuracy[c]) +
                    "," + (c == best ? "1" : "0"));
    ensure_directory(invocation.output_dir);
    write_lines(invocation.output_dir / "grid_summary.csv", csv);

    out << "grid dev accuracy, rows epsilon, cols steps\n";
    out << "epsilon\\steps";
    for (const std::int64_t k : steps) out << '\t' << k;
    out << '\n';
    std::size_t c = 0;
    for (const double eps : epsilons) {
      out << format_double(eps);
      for (std::size_t j = 0; j < steps.size(); ++j) out << '\t' << format_double(accuracy[c++]);
      out << '\n';
    }
    out << "best epsilon=" << format_double(cells[best].rpn.epsilon)
        << " steps=" << cells[best].rpn.steps
        << " dev_accuracy=" << format_double(accuracy[best]) << '\n';
  });
}

int run_bench(const CliInvocation& invocation, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const KeyValueConfig kv = resolve_config(invocation);
    BenchConfig config;
    config.method = kv.get_string("bench.method", config.method);
    const std::vector<std::int64_t> sizes =
        kv.get_int_list("bench.sizes", {1000, 2000, 4000, 8000});
    config.dataset_sizes.assign(sizes.begin(), sizes.end());
    config.trials = static_cast<int>(kv.get_int("bench.trials", config.trials));
    config.k = static_cast<Index>(kv.get_int("bench.k", config.k));
    config.batch_size = static_cast<Index>(kv.get_int("bench.batch_size", config.batch_size));
    config.seq_len = static_cast<Index>(kv.get_int("bench.seq_len", config.seq_len));
    config.embed_dim = static_cast<Index>(kv.get_int("bench.embed_dim", config.embed_dim));
    config.seed = kv.require_u64("seed");
    kv.reject_unknown_keys();
    config.validate();

    const BenchReport report = bench_augment(config);
    ensure_directory(invocation.output_dir);
    write_bench_csv(report, invocation.output_dir / "bench.csv");
    out << render_bench_summary(report);
  });
}

int run_cli(const CliInvocation& invocation, std::ostream& out, std::ostream& err) {
  if (invocation.subcommand == "train") return run_train(invocation, out, err);
  if (invocation.subcommand == "eval") return run_eval(invocation, out, err);
  if (invocation.subcommand == "augment") return run_augment(invocation, out, err);
  if (invocation.subcommand == "grid") return run_grid(invocation, out, err);
  if (invocation.subcommand == "bench") return run_bench(invocation, out, err);
  err << "unknown subcommand '" << invocation.subcommand
      << "' (want train, eval, augment, grid or bench)\n";
  return kExitUsage;
}

}  // namespace rpn
