#pragma once

// Reference estimators that MEMDET is compared against.

#include <cstdint>
#include <vector>

#include "detscale/block_store.hpp"

namespace detscale {

struct SlqConfig {
  Index lanczos_degree = 50;  // l
  Index samples = 64;         // s
  std::uint64_t seed = 1;
  bool reorthogonalize = true;
  /// Matrix-vector products stream an n_b x n_b block grid; n_b = 1 keeps
  /// the whole matrix resident after a single read.
  Index num_blocks = 1;
};

struct SlqResult {
  double logdet = 0.0;
  /// Per-probe quadrature values, in probe order; logdet = m * mean.
  std::vector<double> probe_estimates;
  std::uint64_t blocks_read = 0;
  Index matvecs = 0;
};

/// Stochastic Lanczos quadrature with Rademacher probes. Probe p draws from
/// a generator seeded by (seed, p), so any subset of probes is reproducible.
SlqResult slq_logdet(const MatrixFile& file, const SlqConfig& config);

struct BlockDiagonalResult {
  double logabsdet = 0.0;
  int sign = 1;
};

/// Sum of log|det| over the consecutive d x d diagonal blocks.
BlockDiagonalResult block_diagonal_logdet(const MatrixFile& file, Index d);

}  // namespace detscale
