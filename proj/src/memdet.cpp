#include "detscale/memdet.hpp"

#include <cmath>
#include <limits>

#include "detscale/cost_model.hpp"
#include "detscale/dense_kernels.hpp"

namespace detscale {

Index select_num_blocks(Index m, const Budget& budget) {
  if (m < 1) throw DomainError("matrix dimension must be positive");
  if (budget.dtype_bytes != 4 && budget.dtype_bytes != 8) {
    throw DomainError("element size must be 4 or 8 bytes");
  }
  if (budget.max_bytes < 3 * static_cast<std::uint64_t>(budget.dtype_bytes)) {
    throw DomainError("memory budget must hold at least three elements");
  }
  // r^2 = m^2 beta / c, compared without rounding.
  using Wide = unsigned __int128;
  const Wide need = static_cast<Wide>(m) * static_cast<Wide>(m) * static_cast<Wide>(budget.dtype_bytes);
  const Wide c = budget.max_bytes;
  if (need <= c) return 1;
  if (3 * need <= 4 * c) return 2;
  // Smallest n with n >= 2r, i.e. n^2 c >= 4 m^2 beta.
  auto n = static_cast<Index>(std::ceil(2.0 * std::sqrt(static_cast<double>(need) / static_cast<double>(c))));
  n = std::max<Index>(n, 1);
  while (n > 1 && static_cast<Wide>(n - 1) * static_cast<Wide>(n - 1) * c >= 4 * need) --n;
  while (static_cast<Wide>(n) * static_cast<Wide>(n) * c < 4 * need) ++n;
  return n;
}

BlockLayout select_blocking(Index m, const Budget& budget) {
  return BlockLayout::make(m, select_num_blocks(m, budget), budget.dtype_bytes);
}

namespace {

using Clock = std::chrono::steady_clock;

template <typename Scalar>
BlockLayout resolve_layout(const MatrixFile& file, const RunOptions& options) {
  constexpr int beta = static_cast<int>(sizeof(Scalar));
  if (options.num_blocks > 0) return BlockLayout::make(file.size(), options.num_blocks, beta);
  Budget budget = options.budget;
  budget.dtype_bytes = beta;
  return select_blocking(file.size(), budget);
}

template <typename Scalar>
RunStats collect_stats(const BlockStore<Scalar>& store, Clock::time_point start) {
  RunStats stats;
  stats.num_blocks = store.layout().num_blocks;
  stats.block_size = store.layout().block_size;
  stats.blocks_read = store.counters().blocks_read;
  stats.blocks_written = store.counters().blocks_written;
  stats.scratch_slots = store.scratch().capacity();
  stats.scratch_slots_used = store.scratch().used();
  stats.scratch_created = store.scratch().created();
  stats.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return stats;
}

void notify(const RunOptions& options, Index stage, BlockIndex block) {
  if (options.on_update) options.on_update(stage, block);
}

enum class SymmetricVariant { ldl, cholesky };

struct SymmetricFactors {
  std::vector<double> d;
  std::vector<Index> perm;
  RunStats stats;
};

// Shared driver for the LDL^T and Cholesky variants; they differ only in the
// diagonal-block factorization, the triangular solve and the D^{-1} scaling
// of the right operand.
template <typename Scalar, SymmetricVariant variant>
SymmetricFactors run_symmetric(const MatrixFile& file, const RunOptions& options) {
  constexpr bool ldl = variant == SymmetricVariant::ldl;
  const auto start = Clock::now();
  const auto layout = resolve_layout<Scalar>(file, options);
  const Index nb = layout.num_blocks;
  const Index b = layout.block_size;
  BlockStore<Scalar> store(file, layout, options.scratch_dir,
                           scratch_capacity(nb, MatrixCase::symmetric));

  Tile<Scalar> A(b, b), B, C, S;
  if (nb > 1) {
    B = Tile<Scalar>(b, b);
    C = Tile<Scalar>(b, b);
  }
  if (nb > 2) S = Tile<Scalar>(b, b);

  SymmetricFactors out;
  out.d.resize(static_cast<std::size_t>(layout.m));
  out.perm.resize(static_cast<std::size_t>(layout.m));

  store.read_block({0, 0}, A);
  for (Index k = 0; k < nb; ++k) {
    const Index offset = layout.offset(k);
    PivotVector pivots;
    Vector<Scalar> diag;
    if constexpr (ldl) {
      auto factor = ldl_inplace(A);
      pivots = std::move(factor.pivots);
      diag = std::move(factor.d);
    } else {
      diag = cholesky_inplace(A);
    }
    const auto local = ldl ? pivots.permutation() : std::vector<Index>{};
    for (Index q = 0; q < diag.size(); ++q) {
      const auto g = static_cast<std::size_t>(offset + q);
      out.d[g] = static_cast<double>(diag(q));
      out.perm[g] = offset + (ldl ? local[static_cast<std::size_t>(q)] : q);
    }
    if (k + 1 == nb) break;

    // T <- L^{-1} P^T T (LDL) or T <- L^{-1} T (Cholesky).
    auto solve = [&](Tile<Scalar>& T) {
      if constexpr (ldl) {
        pivots.template apply_transpose<Scalar>(T.view());
        solve_lower_inplace<Scalar>(A.view(), T.view(), true);
      } else {
        solve_lower_inplace<Scalar>(A.view(), T.view(), false);
      }
    };

    for (Index j = nb - 1; j >= k + 1; --j) {
      const bool even = (nb - 1 - j) % 2 == 0;
      Tile<Scalar>& right = even ? B : C;  // B*, holds row k, block column j
      Tile<Scalar>& other = even ? C : B;  // C* when it is not aliased to B*

      if (j == nb - 1) {
        store.read_block({k, j}, right);
        solve(right);
      }
      if constexpr (ldl) {
        other.assign(right);
        scale_rows_inverse<Scalar>(diag, right.view());
      }

      for (Index r = 0; r < j - k; ++r) {
        const Index i = r == 0 ? j : k + r;
        Tile<Scalar>* left = &other;
        if (i == j) {
          if constexpr (!ldl) left = &right;
        } else {
          store.read_block({k, i}, other);
          if (j == nb - 1) {
            solve(other);
            if (nb > 2 && i < j - 1) store.write_block_scratch({k, i}, other);
          }
        }
        notify(options, k, {i, j});
        if (i == k + 1 && j == k + 1) {
          store.read_block({i, j}, A);
          schur_update<Scalar>(A.view(), left->view(), right.view(), SchurForm::transposed);
        } else {
          store.read_block({i, j}, S);
          schur_update<Scalar>(S.view(), left->view(), right.view(), SchurForm::transposed);
          store.write_block_scratch({i, j}, S);
        }
      }
    }
  }
  out.stats = collect_stats(store, start);
  return out;
}

void maybe_write_prefix(const RunOptions& options, const PrefixTrace& prefix) {
  if (options.prefix_out) write_prefix_file(*options.prefix_out, prefix);
}

}  // namespace

template <typename Scalar>
GenericResult memdet_lu(const MatrixFile& file, const RunOptions& options) {
  const auto start = Clock::now();
  const auto layout = resolve_layout<Scalar>(file, options);
  const Index nb = layout.num_blocks;
  const Index b = layout.block_size;
  BlockStore<Scalar> store(file, layout, options.scratch_dir,
                           scratch_capacity(nb, MatrixCase::generic));

  Tile<Scalar> A(b, b), B, C, S;
  if (nb > 1) {
    B = Tile<Scalar>(b, b);
    C = Tile<Scalar>(b, b);
  }
  if (nb > 2) S = Tile<Scalar>(b, b);

  GenericResult result;
  store.read_block({0, 0}, A);
  for (Index k = 0; k < nb; ++k) {
    const auto lu = lu_inplace(A);
    if (lu.singular()) {
      result.logabsdet = -std::numeric_limits<double>::infinity();
      result.sign = 0;
      break;
    }
    result.logabsdet += lu.logabsdet;
    result.sign *= lu.sign;
    if (k + 1 == nb) break;

    for (Index i = nb - 1; i >= k + 1; --i) {
      // C holds M_ik^T, turned into (M_ik U^{-1})^T.
      store.read_block_transposed({i, k}, C);
      solve_upper_transposed_inplace<Scalar>(A.view(), C.view());

      const bool forward = (i - k) % 2 == 0;
      const Index j_start = forward ? k + 1 : nb - 1;
      const Index j_end = forward ? nb - 1 : k + 1;
      const Index step = forward ? 1 : -1;
      for (Index j = j_start;; j += step) {
        if (i == nb - 1 || j != j_start) {
          store.read_block({k, j}, B);
          if (i == nb - 1) {
            lu.pivots.template apply_transpose<Scalar>(B.view());
            solve_lower_inplace<Scalar>(A.view(), B.view(), true);
            if (nb - 1 - k > 2 || j != j_end) store.write_block_scratch({k, j}, B);
          }
        }
        notify(options, k, {i, j});
        if (i == k + 1 && j == k + 1) {
          store.read_block({i, j}, A);
          schur_update<Scalar>(A.view(), C.view(), B.view(), SchurForm::transposed);
        } else {
          store.read_block({i, j}, S);
          schur_update<Scalar>(S.view(), C.view(), B.view(), SchurForm::transposed);
          store.write_block_scratch({i, j}, S);
        }
        if (j == j_end) break;
      }
    }
  }
  result.stats = collect_stats(store, start);
  return result;
}

template <typename Scalar>
SymmetricResult memdet_ldl(const MatrixFile& file, const RunOptions& options) {
  auto factors = run_symmetric<Scalar, SymmetricVariant::ldl>(file, options);
  SymmetricResult result;
  result.prefix.logabsdet.resize(factors.d.size());
  result.prefix.sign.resize(factors.d.size());
  double ell = 0.0;
  int sigma = 1;
  for (std::size_t q = 0; q < factors.d.size(); ++q) {
    ell += std::log(std::abs(factors.d[q]));
    sigma *= factors.d[q] < 0.0 ? -1 : 1;
    result.prefix.logabsdet[q] = ell;
    result.prefix.sign[q] = sigma;
  }
  result.perm = std::move(factors.perm);
  result.d = std::move(factors.d);
  result.stats = factors.stats;
  maybe_write_prefix(options, result.prefix);
  return result;
}

template <typename Scalar>
SpdResult memdet_cholesky(const MatrixFile& file, const RunOptions& options) {
  auto factors = run_symmetric<Scalar, SymmetricVariant::cholesky>(file, options);
  SpdResult result;
  result.prefix.logabsdet.resize(factors.d.size());
  result.prefix.sign.assign(factors.d.size(), 1);
  double ell = 0.0;
  for (std::size_t q = 0; q < factors.d.size(); ++q) {
    ell += 2.0 * std::log(factors.d[q]);
    result.prefix.logabsdet[q] = ell;
  }
  result.diag = std::move(factors.d);
  result.stats = factors.stats;
  maybe_write_prefix(options, result.prefix);
  return result;
}

template GenericResult memdet_lu<float>(const MatrixFile&, const RunOptions&);
template GenericResult memdet_lu<double>(const MatrixFile&, const RunOptions&);
template SymmetricResult memdet_ldl<float>(const MatrixFile&, const RunOptions&);
template SymmetricResult memdet_ldl<double>(const MatrixFile&, const RunOptions&);
template SpdResult memdet_cholesky<float>(const MatrixFile&, const RunOptions&);
template SpdResult memdet_cholesky<double>(const MatrixFile&, const RunOptions&);

GenericResult memdet_lu(const MatrixFile& file, const RunOptions& options) {
  return file.dtype() == Dtype::f64 ? memdet_lu<double>(file, options)
                                    : memdet_lu<float>(file, options);
}

SymmetricResult memdet_ldl(const MatrixFile& file, const RunOptions& options) {
  return file.dtype() == Dtype::f64 ? memdet_ldl<double>(file, options)
                                    : memdet_ldl<float>(file, options);
}

SpdResult memdet_cholesky(const MatrixFile& file, const RunOptions& options) {
  return file.dtype() == Dtype::f64 ? memdet_cholesky<double>(file, options)
                                    : memdet_cholesky<float>(file, options);
}

}  // namespace detscale
