#include "detscale/baselines.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "detscale/dense_kernels.hpp"
#include "detscale/errors.hpp"

namespace detscale {

namespace {

// y = M x, streaming the block grid from disk on every product.
class StreamingOperator {
public:
  StreamingOperator(const MatrixFile& file, Index num_blocks)
      : file_(file), layout_(BlockLayout::make(file.size(), num_blocks, 8)) {
    if (layout_.num_blocks == 1) {
      resident_ = read_matrix_file<double>(file);
      ++blocks_read_;
    } else {
      tile_.resize(layout_.block_size, layout_.block_size);
    }
  }

  void apply(const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::VectorXd& y) {
    if (layout_.num_blocks == 1) {
      y.noalias() = resident_ * x;
      return;
    }
    y.setZero(layout_.m);
    for (Index i = 0; i < layout_.num_blocks; ++i) {
      const Index r0 = layout_.offset(i), rows = layout_.extent(i);
      for (Index j = 0; j < layout_.num_blocks; ++j) {
        const Index c0 = layout_.offset(j), cols = layout_.extent(j);
        file_.read_rect<double>(r0, rows, c0, cols, tile_.data(), tile_.cols());
        ++blocks_read_;
        y.segment(r0, rows).noalias() += tile_.topLeftCorner(rows, cols) * x.segment(c0, cols);
      }
    }
  }

  std::uint64_t blocks_read() const { return blocks_read_; }

private:
  const MatrixFile& file_;
  BlockLayout layout_;
  RowMatrix<double> resident_;
  RowMatrix<double> tile_;
  std::uint64_t blocks_read_ = 0;
};

}  // namespace

SlqResult slq_logdet(const MatrixFile& file, const SlqConfig& config) {
  if (config.lanczos_degree < 1 || config.samples < 1) throw DomainError("SLQ needs l >= 1 and s >= 1");
  const Index m = file.size();
  const Index l = std::min(config.lanczos_degree, m);
  StreamingOperator op(file, config.num_blocks);
  SlqResult result;

  Eigen::MatrixXd V(m, l);
  Eigen::VectorXd w(m), alpha(l), beta(l);
  double total = 0.0;
  for (Index probe = 0; probe < config.samples; ++probe) {
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                      static_cast<std::uint32_t>(probe), static_cast<std::uint32_t>(static_cast<std::uint64_t>(probe) >> 32)};
    std::mt19937_64 rng(seq);
    for (Index r = 0; r < m; ++r) V(r, 0) = (rng() & 1U) ? 1.0 : -1.0;
    V.col(0) /= std::sqrt(static_cast<double>(m));

    Index k = 0;
    double scale = 0.0;
    for (;;) {
      op.apply(V.col(k), w);
      ++result.matvecs;
      alpha(k) = V.col(k).dot(w);
      w -= alpha(k) * V.col(k);
      if (k > 0) w -= beta(k - 1) * V.col(k - 1);
      if (config.reorthogonalize) {
        for (Index t = 0; t <= k; ++t) w -= V.col(t).dot(w) * V.col(t);
      }
      scale = std::max(scale, std::abs(alpha(k)));
      ++k;
      if (k == l) break;
      const double b = w.norm();
      // Invariant subspace found: the quadrature on this probe is exact.
      if (b <= 1e-12 * scale) break;
      beta(k - 1) = b;
      V.col(k) = w / b;
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
    Eigen::VectorXd diag = alpha.head(k);
    Eigen::VectorXd sub = k > 1 ? Eigen::VectorXd(beta.head(k - 1)) : Eigen::VectorXd(0);
    eig.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    if (eig.info() != Eigen::Success) throw NumericalError("tridiagonal eigensolver failed");
    double estimate = 0.0;
    for (Index t = 0; t < k; ++t) {
      const double theta = eig.eigenvalues()(t);
      if (!(theta > 0.0)) throw NotSpdError("non-positive Ritz value; SLQ requires an SPD matrix");
      const double tau = eig.eigenvectors()(0, t);
      estimate += tau * tau * std::log(theta);
    }
    result.probe_estimates.push_back(estimate);
    total += estimate;
  }
  result.logdet = static_cast<double>(m) / static_cast<double>(config.samples) * total;
  result.blocks_read = op.blocks_read();
  return result;
}

BlockDiagonalResult block_diagonal_logdet(const MatrixFile& file, Index d) {
  const Index m = file.size();
  if (d < 1 || m % d != 0) throw DomainError("block size d must divide the matrix order");
  BlockDiagonalResult result;
  RowMatrix<double> block(d, d);
  for (Index i = 0; i < m / d; ++i) {
    file.read_rect<double>(i * d, d, i * d, d, block.data(), d);
    const LuResult lu = lu_inplace<double>(block);
    if (lu.singular()) {
      return {-std::numeric_limits<double>::infinity(), 0};
    }
    result.logabsdet += lu.logabsdet;
    result.sign *= lu.sign;
  }
  return result;
}

}  // namespace detscale
