#pragma once

#include <Eigen/Dense>

#include <cassert>
#include <vector>

#include "detscale/errors.hpp"

namespace detscale {

using Index = Eigen::Index;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A preallocated row-major buffer that holds one (possibly ragged) block.
///
/// The buffer is sized once for the nominal block and never reallocated;
/// `reshape` only changes the logical extent, so swapping two tiles is a
/// pointer exchange and a ragged tail block reuses the same storage.
template <typename Scalar>
class Tile {
public:
  using Matrix = RowMatrix<Scalar>;
  using View = Eigen::Map<Matrix>;
  using ConstView = Eigen::Map<const Matrix>;

  Tile() = default;
  Tile(Index capacity_rows, Index capacity_cols)
      : buffer_(static_cast<std::size_t>(capacity_rows * capacity_cols)),
        rows_(capacity_rows),
        cols_(capacity_cols) {}

  void reshape(Index rows, Index cols) {
    if (rows < 1 || cols < 1 || static_cast<std::size_t>(rows * cols) > buffer_.size()) {
      throw DomainError("tile reshape exceeds preallocated capacity");
    }
    rows_ = rows;
    cols_ = cols;
  }

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index capacity() const { return static_cast<Index>(buffer_.size()); }
  Scalar* data() { return buffer_.data(); }
  const Scalar* data() const { return buffer_.data(); }

  View view() { return View(buffer_.data(), rows_, cols_); }
  ConstView view() const { return ConstView(buffer_.data(), rows_, cols_); }

  /// Deep copy of the logical contents of `other`.
  void assign(const Tile& other) {
    reshape(other.rows_, other.cols_);
    view() = other.view();
  }

  void swap(Tile& other) noexcept {
    buffer_.swap(other.buffer_);
    std::swap(rows_, other.rows_);
    std::swap(cols_, other.cols_);
  }

private:
  std::vector<Scalar> buffer_;
  Index rows_ = 0;
  Index cols_ = 0;
};

}  // namespace detscale
