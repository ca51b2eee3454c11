#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "rpn/errors.hpp"
#include "rpn/rng.hpp"
#include "rpn/tensor.hpp"

namespace rpn {

template <typename Scalar>
void ensure_finite(const TensorT<Scalar>& t, std::string_view context) {
  if (!t.all_finite()) {
    throw NumericError("non-finite value in " + std::string(context));
  }
}

// Standard matrix product of two rank-2 tensors.
template <typename Scalar>
TensorT<Scalar> matmul(const TensorT<Scalar>& a, const TensorT<Scalar>& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw DimensionError("matmul requires rank-2 tensors, got " + shape_string(a.shape()) +
                         " and " + shape_string(b.shape()));
  }
  if (a.extent(1) != b.extent(0)) {
    throw DimensionError("matmul inner extents differ: " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  TensorT<Scalar> out({a.extent(0), b.extent(1)});
  out.as_matrix().noalias() = a.as_matrix() * b.as_matrix();
  ensure_finite(out, "matmul output");
  return out;
}

// Elementwise product; shapes must match exactly (no broadcasting).
template <typename Scalar>
TensorT<Scalar> hadamard(const TensorT<Scalar>& a, const TensorT<Scalar>& b) {
  if (!a.same_shape(b)) {
    throw DimensionError("hadamard shapes differ: " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
  TensorT<Scalar> out(a.shape());
  out.as_flat() = a.as_flat() * b.as_flat();
  ensure_finite(out, "hadamard output");
  return out;
}

template <typename Scalar>
Scalar frobenius_norm(const TensorT<Scalar>& a) {
  return a.as_flat().matrix().norm();
}

inline bool is_permutation(std::span<const Index> perm, Index n) {
  if (static_cast<Index>(perm.size()) != n) return false;
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (Index p : perm) {
    if (p < 0 || p >= n || seen[static_cast<std::size_t>(p)]) return false;
    seen[static_cast<std::size_t>(p)] = 1;
  }
  return true;
}

// Output row i is input row perm[i].
template <typename Scalar>
TensorT<Scalar> permute_rows(const TensorT<Scalar>& a, std::span<const Index> perm) {
  if (a.rank() != 2) {
    throw DimensionError("permute_rows requires rank-2, got " + shape_string(a.shape()));
  }
  const Index rows = a.extent(0);
  if (!is_permutation(perm, rows)) {
    throw PermutationError("index sequence is not a permutation of 0.." +
                           std::to_string(rows - 1));
  }
  TensorT<Scalar> out(a.shape());
  for (Index i = 0; i < rows; ++i) {
    out.as_matrix().row(i) = a.as_matrix().row(perm[static_cast<std::size_t>(i)]);
  }
  return out;
}

inline std::vector<Index> inverse_permutation(std::span<const Index> perm) {
  std::vector<Index> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    inv[static_cast<std::size_t>(perm[i])] = static_cast<Index>(i);
  }
  return inv;
}

// Fisher-Yates over the stream's own draws; std::shuffle is
// implementation-defined and would break cross-run determinism.
inline std::vector<Index> random_permutation(Index n, RngStream& rng) {
  std::vector<Index> perm(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  for (Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Index>(rng.next_below(static_cast<std::uint64_t>(i) + 1));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  return perm;
}

// 0/1 tensor with independent Bernoulli(epsilon) entries.
inline Tensor bernoulli_mask(std::vector<Index> shape, double epsilon, RngStream& rng) {
  if (epsilon < 0.0 || epsilon > 1.0) {
    throw ConfigError("mask probability " + std::to_string(epsilon) + " outside [0,1]");
  }
  Tensor mask(std::move(shape));
  double* p = mask.data();
  for (Index i = 0; i < mask.size(); ++i) {
    p[i] = rng.bernoulli(epsilon) ? 1.0 : 0.0;
  }
  return mask;
}

// Midpoint-recursive summation. Splitting at exactly n/2 at every level keeps
// the result invariant under list duplication (sum(v ++ v) == sum(v) + sum(v)
// bitwise) and tightens error growth to O(log n).
inline double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 2) {
    if (values.empty()) return 0.0;
    return values.size() == 1 ? values[0] : values[0] + values[1];
  }
  const std::size_t mid = values.size() / 2;
  return pairwise_sum(values.subspan(0, mid)) + pairwise_sum(values.subspan(mid));
}

inline double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return pairwise_sum(values) / static_cast<double>(values.size());
}

}  // namespace rpn
