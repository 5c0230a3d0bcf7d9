#pragma once

// Template definitions for block_store.hpp.

#include <type_traits>
#include <utility>

namespace detscale {

namespace detail {

template <typename Stored, typename Scalar>
void read_converted(const FileHandle& handle, std::uint64_t offset, Index count, Scalar* dest) {
  if constexpr (std::is_same_v<Stored, Scalar>) {
    handle.read_exact(offset, dest, static_cast<std::size_t>(count) * sizeof(Scalar));
  } else {
    std::vector<Stored> tmp(static_cast<std::size_t>(count));
    handle.read_exact(offset, tmp.data(), tmp.size() * sizeof(Stored));
    for (Index k = 0; k < count; ++k) dest[k] = static_cast<Scalar>(tmp[k]);
  }
}

template <typename Stored, typename Scalar>
void write_converted(const FileHandle& handle, std::uint64_t offset, Index count, const Scalar* src) {
  if constexpr (std::is_same_v<Stored, Scalar>) {
    handle.write_exact(offset, src, static_cast<std::size_t>(count) * sizeof(Scalar));
  } else {
    std::vector<Stored> tmp(static_cast<std::size_t>(count));
    for (Index k = 0; k < count; ++k) tmp[k] = static_cast<Stored>(src[k]);
    handle.write_exact(offset, tmp.data(), tmp.size() * sizeof(Stored));
  }
}

}  // namespace detail

template <typename Scalar>
void MatrixFile::read_rect(Index row0, Index rows, Index col0, Index cols, Scalar* dest,
                           Index ld) const {
  check_rect(row0, rows, col0, cols);
  for (Index r = 0; r < rows; ++r) {
    const auto offset = element_offset(row0 + r, col0);
    if (header_.dtype == Dtype::f64) {
      detail::read_converted<double>(handle_, offset, cols, dest + r * ld);
    } else {
      detail::read_converted<float>(handle_, offset, cols, dest + r * ld);
    }
  }
}

template <typename Scalar>
void MatrixFile::write_rect(Index row0, Index rows, Index col0, Index cols, const Scalar* src,
                            Index ld) {
  if (!writable_) throw IoError("matrix file opened read-only: " + path_.string());
  check_rect(row0, rows, col0, cols);
  for (Index r = 0; r < rows; ++r) {
    const auto offset = element_offset(row0 + r, col0);
    if (header_.dtype == Dtype::f64) {
      detail::write_converted<double>(handle_, offset, cols, src + r * ld);
    } else {
      detail::write_converted<float>(handle_, offset, cols, src + r * ld);
    }
  }
}

template <typename Derived>
MatrixFile write_matrix_file(const std::filesystem::path& path,
                             const Eigen::MatrixBase<Derived>& matrix, Dtype dtype,
                             Symmetry symmetry) {
  using Scalar = typename Derived::Scalar;
  if (matrix.rows() != matrix.cols()) throw DomainError("matrix file requires a square matrix");
  const RowMatrix<Scalar> rows = matrix;
  auto file = MatrixFile::create(path, rows.rows(), dtype, symmetry);
  file.write_rect(0, rows.rows(), 0, rows.cols(), rows.data(), rows.cols());
  return file;
}

template <typename Scalar>
RowMatrix<Scalar> read_matrix_file(const MatrixFile& file) {
  RowMatrix<Scalar> out(file.size(), file.size());
  file.read_rect(0, file.size(), 0, file.size(), out.data(), file.size());
  return out;
}

}  // namespace detscale
