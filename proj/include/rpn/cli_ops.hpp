#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "rpn/config.hpp"
#include "rpn/dataset.hpp"

namespace rpn {

// Exit-code contract, stable for scripting.
inline constexpr int kExitSuccess = 0;
inline constexpr int kExitUsage = 2;    // bad flags, unknown keys, bad config
inline constexpr int kExitData = 3;     // missing or malformed files
inline constexpr int kExitNumeric = 4;  // non-finite training abort

struct CliInvocation {
  std::string subcommand;  // train | eval | augment | grid | bench
  std::filesystem::path config_path;   // optional key=value file
  std::vector<std::string> overrides;  // key=value, applied after the file
  std::filesystem::path output_dir = ".";
};

// File config plus overrides, later assignments winning.
KeyValueConfig resolve_config(const CliInvocation& invocation);

// Where the training data comes from. "corpus" generates the built-in
// sentence-polarity set, "synth" the separable fixture, "manifest" loads
// TSV splits from disk.
struct DataSpec {
  std::string source = "corpus";
  std::filesystem::path manifest;
  Index vocab_cap = 20000;

  Index corpus_train = 6000;
  Index corpus_dev = 800;
  Index corpus_test = 1800;
  double corpus_label_noise = 0.06;
  std::uint64_t corpus_seed = 2024;

  Index synth_samples = 512;
  Index synth_vocab = 64;
  Index synth_seq_len = 12;
  int synth_classes = 2;
  std::uint64_t synth_seed = 1;

  static DataSpec from_config(const KeyValueConfig& kv);
  DatasetBundle load(Index max_seq_len) const;
  std::vector<std::string> render() const;
};

// Subcommand bodies. Each validates its whole configuration before touching
// data, writes its artifacts under invocation.output_dir, and reports
// failures through the exit-code contract with a message on err.
int run_train(const CliInvocation& invocation, std::ostream& out, std::ostream& err);
int run_eval(const CliInvocation& invocation, std::ostream& out, std::ostream& err);
int run_augment(const CliInvocation& invocation, std::ostream& out, std::ostream& err);
int run_grid(const CliInvocation& invocation, std::ostream& out, std::ostream& err);
int run_bench(const CliInvocation& invocation, std::ostream& out, std::ostream& err);

// Dispatch on subcommand; unknown names are usage errors.
int run_cli(const CliInvocation& invocation, std::ostream& out, std::ostream& err);

}  // namespace rpn
