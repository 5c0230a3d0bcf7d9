#pragma once

// Memory-budgeted log-determinants of on-disk matrices.
//
// The matrix is cut into an n_b x n_b grid. Stage k factors the resident
// diagonal block A, streams the k-th block row and column through two
// operand tiles (B, C) and folds the Schur complement updates into a fourth
// tile S, spilling updated blocks to a scratchpad. The input file is only
// ever read. Three variants are provided: LU (generic), LDL^T (symmetric)
// and Cholesky (SPD); the last two also return the log-determinants of all
// leading principal submatrices as a by-product.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "detscale/block_store.hpp"
#include "detscale/prefix_file.hpp"
#include "detscale/schedule.hpp"

namespace detscale {

/// Memory limit c in bytes for the resident tiles, at beta bytes per element.
struct Budget {
  std::uint64_t max_bytes = 0;
  int dtype_bytes = 8;
};

/// n_b from r = m sqrt(beta / c): 1 if r <= 1, 2 if r <= 2/sqrt(3),
/// else ceil(2r). Evaluated in exact integer arithmetic on r^2.
Index select_num_blocks(Index m, const Budget& budget);
BlockLayout select_blocking(Index m, const Budget& budget);

struct RunOptions {
  Budget budget{std::uint64_t{1} << 62, 8};
  /// Overrides the budget rule when positive.
  Index num_blocks = 0;
  std::filesystem::path scratch_dir = std::filesystem::temp_directory_path();
  std::optional<std::filesystem::path> prefix_out;
  /// Called for every Schur update as (stage, target block), in execution order.
  std::function<void(Index, BlockIndex)> on_update;
};

struct RunStats {
  Index num_blocks = 0;
  Index block_size = 0;
  std::uint64_t blocks_read = 0;
  std::uint64_t blocks_written = 0;
  /// Slots allocated in the scratchpad file.
  Index scratch_slots = 0;
  /// Distinct slots actually written.
  Index scratch_slots_used = 0;
  bool scratch_created = false;
  double wall_seconds = 0.0;
};

struct GenericResult {
  double logabsdet = 0.0;
  int sign = 1;
  RunStats stats;
};

struct SymmetricResult {
  /// perm[q] is the original (zero-based) index placed at position q.
  std::vector<Index> perm;
  std::vector<double> d;
  PrefixTrace prefix;
  RunStats stats;

  double logabsdet() const { return prefix.logabsdet.back(); }
  int sign() const { return prefix.sign.back(); }
};

struct SpdResult {
  /// diag(L) of M = L L^T.
  std::vector<double> diag;
  PrefixTrace prefix;
  RunStats stats;

  double logdet() const { return prefix.logabsdet.back(); }
};

/// LU with partial pivoting inside each diagonal block, no pivoting across
/// blocks. A singular diagonal block short-circuits to (-inf, 0).
template <typename Scalar>
GenericResult memdet_lu(const MatrixFile& file, const RunOptions& options);

/// LDL^T with 1x1 symmetric pivoting inside each diagonal block. The
/// permutation is block-local: stage k only permutes indices of block k.
template <typename Scalar>
SymmetricResult memdet_ldl(const MatrixFile& file, const RunOptions& options);

/// Cholesky; prefix l_q is the log-determinant of the leading q x q block.
template <typename Scalar>
SpdResult memdet_cholesky(const MatrixFile& file, const RunOptions& options);

// Dispatch on the file's stored precision.
GenericResult memdet_lu(const MatrixFile& file, const RunOptions& options);
SymmetricResult memdet_ldl(const MatrixFile& file, const RunOptions& options);
SpdResult memdet_cholesky(const MatrixFile& file, const RunOptions& options);

}  // namespace detscale
