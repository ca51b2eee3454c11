#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "rpn/errors.hpp"

namespace rpn {

namespace detail {

// splitmix64 finalizer; bijective on u64.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

// Counter-based random stream. A stream is identified by (master seed,
// derivation path); identical identities replay identical sequences, so any
// unit of work that derives its own stream is reproducible regardless of
// scheduling. Derivation is cheap: streams are values, copy freely.
class RngStream {
 public:
  RngStream() : RngStream(0) {}
  explicit RngStream(std::uint64_t master_seed, std::uint64_t stream_id = 0)
      : key_(detail::mix64(detail::mix64(master_seed) ^ stream_id)) {}

  // Child stream keyed by an integer tag.
  RngStream derive(std::uint64_t tag) const {
    RngStream child;
    child.key_ = detail::mix64(key_ ^ detail::mix64(tag));
    return child;
  }

  // Child stream keyed by a purpose label, e.g. derive("dropout").
  RngStream derive(std::string_view purpose) const {
    return derive(detail::fnv1a64(purpose));
  }

  RngStream derive(std::string_view purpose, std::uint64_t a) const {
    return derive(purpose).derive(a);
  }

  RngStream derive(std::string_view purpose, std::uint64_t a, std::uint64_t b) const {
    return derive(purpose).derive(a).derive(b);
  }

  std::uint64_t next_u64() { return detail::mix64(key_ ^ detail::mix64(++counter_)); }

  // Uniform double in [0, 1), 53 usable bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // True with probability p. Exact at the endpoints: p=0 never, p=1 always.
  bool bernoulli(double p) {
    if (p < 0.0 || p > 1.0) {
      throw ConfigError("bernoulli probability " + std::to_string(p) + " outside [0,1]");
    }
    return next_unit() < p;
  }

  // Unbiased draw from [0, bound) by rejection.
  std::uint64_t next_below(std::uint64_t bound) {
    if (bound == 0) {
      throw ConfigError("next_below bound must be positive");
    }
    const std::uint64_t rem = (~bound + 1) % bound;  // 2^64 mod bound
    for (;;) {
      const std::uint64_t x = next_u64();
      if (x >= rem) {
        return x % bound;
      }
    }
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace rpn
