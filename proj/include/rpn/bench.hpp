#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rpn/errors.hpp"
#include "rpn/tensor.hpp"

namespace rpn {

// Ordinary least squares y = intercept + slope * x with a two-sided 95%
// confidence interval on the slope (Student t, df = points - 2).
struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double slope_ci_half_width = 0.0;
  double r_squared = 0.0;

  double ci_lo() const { return slope - slope_ci_half_width; }
  double ci_hi() const { return slope + slope_ci_half_width; }
  bool ci_contains_zero() const { return ci_lo() <= 0.0 && 0.0 <= ci_hi(); }
};

// Needs at least three points and non-constant x.
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

struct BenchConfig {
  std::string method = "rpn";  // rpn | aeda | eda_lite
  std::vector<Index> dataset_sizes;
  int trials = 5;  // first trial is warm-up and discarded; median of the rest
  Index k = 3;     // augmented copies per sample (token) / chain steps (rpn)
  Index batch_size = 64;
  Index seq_len = 20;
  Index embed_dim = 64;
  std::uint64_t seed = 42;

  void validate() const;
};

struct BenchSample {
  Index dataset_size = 0;
  // Augmentation work done before the epoch loop: the offline expansion pass
  // for token methods, stream setup only for the in-loop tensor method.
  double preprocess_time_s = 0.0;
  // Augmentation work done inside one epoch's batch loop.
  double per_epoch_time_s = 0.0;
  double per_batch_augment_time_us = 0.0;
};

struct BenchReport {
  std::string method;
  std::vector<BenchSample> samples;
  // Fits of the two time columns against dataset size. Computed when at
  // least three sizes were probed; otherwise left as quiet NaN.
  LinearFit preprocess_fit;
  LinearFit per_epoch_fit;

  void validate() const;  // times non-negative, sizes strictly increasing
};

BenchReport bench_augment(const BenchConfig& config);

// Median time of the in-loop augmentation work for one epoch of num_batches
// batches at the configured batch shape. Doubling num_batches at a fixed
// shape should double the result for the in-loop method.
double time_inloop_epoch(const BenchConfig& config, Index num_batches);

// One row per probed size: method,dataset_size,preprocess_time_s,
// per_epoch_time_s,per_batch_augment_time_us.
void write_bench_csv(const BenchReport& report, const std::filesystem::path& path);

// Human-readable table plus the two slope fits.
std::string render_bench_summary(const BenchReport& report);

}  // namespace rpn
