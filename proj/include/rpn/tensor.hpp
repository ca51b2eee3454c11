#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "rpn/errors.hpp"

namespace rpn {

using Index = Eigen::Index;

inline std::string shape_string(const std::vector<Index>& shape) {
  std::string s = "(";
  for (std::size_t d = 0; d < shape.size(); ++d) {
    if (d) s += "x";
    s += std::to_string(shape[d]);
  }
  return s + ")";
}

// Dense rank-1..3 tensor with contiguous row-major storage. The last extent
// is the fastest-varying one, so a rank-3 (batch x seq x dim) tensor exposes
// its (batch*seq) word rows as an Eigen matrix view without copying.
template <typename Scalar>
class TensorT {
 public:
  using MatrixType = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using FlatArray = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  TensorT() = default;

  explicit TensorT(std::vector<Index> shape) : shape_(std::move(shape)) {
    validate_shape(shape_);
    data_.assign(static_cast<std::size_t>(count(shape_)), Scalar(0));
  }

  static TensorT zeros(std::vector<Index> shape) { return TensorT(std::move(shape)); }

  static TensorT constant(std::vector<Index> shape, Scalar value) {
    TensorT t(std::move(shape));
    t.as_flat().setConstant(value);
    return t;
  }

  static TensorT from_values(std::vector<Index> shape, std::vector<Scalar> values) {
    validate_shape(shape);
    if (count(shape) != static_cast<Index>(values.size())) {
      throw DimensionError("value count " + std::to_string(values.size()) +
                           " does not fill shape " + shape_string(shape));
    }
    TensorT t;
    t.shape_ = std::move(shape);
    t.data_ = std::move(values);
    return t;
  }

  Index rank() const { return static_cast<Index>(shape_.size()); }
  const std::vector<Index>& shape() const { return shape_; }
  Index extent(Index dim) const { return shape_.at(static_cast<std::size_t>(dim)); }
  Index size() const { return static_cast<Index>(data_.size()); }
  bool empty() const { return data_.empty(); }
  bool same_shape(const TensorT& other) const { return shape_ == other.shape_; }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Scalar& operator()(Index i) { return data_[static_cast<std::size_t>(i)]; }
  Scalar operator()(Index i) const { return data_[static_cast<std::size_t>(i)]; }

  Scalar& operator()(Index i, Index j) {
    return data_[static_cast<std::size_t>(i * shape_[1] + j)];
  }
  Scalar operator()(Index i, Index j) const {
    return data_[static_cast<std::size_t>(i * shape_[1] + j)];
  }

  Scalar& operator()(Index i, Index j, Index k) {
    return data_[static_cast<std::size_t>((i * shape_[1] + j) * shape_[2] + k)];
  }
  Scalar operator()(Index i, Index j, Index k) const {
    return data_[static_cast<std::size_t>((i * shape_[1] + j) * shape_[2] + k)];
  }

  // Number of word rows when the tensor is read as (rows x last extent).
  Index row_count() const { return rank() == 0 ? 0 : size() / shape_.back(); }
  Index row_width() const { return rank() == 0 ? 0 : shape_.back(); }

  // Rank-2 matrix view; throws on any other rank.
  Eigen::Map<MatrixType> as_matrix() {
    require_rank(2, "as_matrix");
    return {data_.data(), shape_[0], shape_[1]};
  }
  Eigen::Map<const MatrixType> as_matrix() const {
    require_rank(2, "as_matrix");
    return {data_.data(), shape_[0], shape_[1]};
  }

  // (rows x last extent) view for any rank >= 1.
  Eigen::Map<MatrixType> as_rows() {
    if (rank() < 1) throw DimensionError("as_rows on empty tensor");
    return {data_.data(), row_count(), row_width()};
  }
  Eigen::Map<const MatrixType> as_rows() const {
    if (rank() < 1) throw DimensionError("as_rows on empty tensor");
    return {data_.data(), row_count(), row_width()};
  }

  Eigen::Map<FlatArray> as_flat() { return {data_.data(), size()}; }
  Eigen::Map<const FlatArray> as_flat() const { return {data_.data(), size()}; }

  bool all_finite() const { return as_flat().isFinite().all(); }

  bool operator==(const TensorT& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

 private:
  static Index count(const std::vector<Index>& shape) {
    Index n = 1;
    for (Index e : shape) n *= e;
    return n;
  }

  static void validate_shape(const std::vector<Index>& shape) {
    if (shape.empty() || shape.size() > 3) {
      throw DimensionError("tensor rank must be 1..3, got " + std::to_string(shape.size()));
    }
    for (Index e : shape) {
      if (e <= 0) {
        throw DimensionError("tensor extents must be positive, got " + shape_string(shape));
      }
    }
  }

  void require_rank(Index r, const char* what) const {
    if (rank() != r) {
      throw DimensionError(std::string(what) + " requires rank " + std::to_string(r) +
                           ", tensor is " + shape_string(shape_));
    }
  }

  std::vector<Index> shape_;
  std::vector<Scalar> data_;
};

using Tensor = TensorT<double>;

}  // namespace rpn
