#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "detscale/baselines.hpp"
#include "detscale/kernels_gen.hpp"
#include "detscale/memdet.hpp"
#include "oracles.hpp"

using namespace detscale;

TEST_CASE("SLQ is exact on multiples of the identity") {
  oracle::TempDir dir;
  const Index m = 50;
  const auto f = write_matrix_file(dir / "c.mat", Eigen::MatrixXd(3.7 * Eigen::MatrixXd::Identity(m, m)),
                                   Dtype::f64, Symmetry::spd);
  for (Index l : {1, 2, 10}) {
    for (Index s : {1, 3, 16}) {
      SlqConfig c;
      c.lanczos_degree = l;
      c.samples = s;
      const auto r = slq_logdet(f, c);
      CHECK(oracle::rel_err(r.logdet, m * std::log(3.7)) < 1e-14);
      CHECK(r.matvecs == s);  // breakdown after the first product
    }
  }
}

TEST_CASE("SLQ with few distinct eigenvalues is accurate and stream-invariant") {
  oracle::TempDir dir;
  const Index m = 256;
  Eigen::VectorXd lambda;
  Eigen::MatrixXd M = oracle::spectrum_matrix(m, 1.0, 10.0, 7, &lambda);
  // Collapse the spectrum onto 8 values so l = 10 quadrature is exact per probe.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M);
  Eigen::VectorXd w = eig.eigenvalues();
  for (Index i = 0; i < m; ++i) w(i) = 1.0 + std::floor((w(i) - 1.0) / 9.0 * 7.999);
  M = eig.eigenvectors() * w.asDiagonal() * eig.eigenvectors().transpose();
  M = (0.5 * (M + M.transpose())).eval();
  const double truth = w.array().log().sum();
  const auto f = write_matrix_file(dir / "a.mat", M, Dtype::f64, Symmetry::spd);

  SlqConfig c;
  c.lanczos_degree = 10;
  c.samples = 64;
  const auto r1 = slq_logdet(f, c);
  CHECK(oracle::rel_err(r1.logdet, truth) < 0.01);
  CHECK(r1.blocks_read == 1);

  c.num_blocks = 3;
  const auto r3 = slq_logdet(f, c);
  CHECK(std::abs(r3.logdet - r1.logdet) < 1e-10 * std::abs(truth));
  CHECK(r3.blocks_read == static_cast<std::uint64_t>(9 * r3.matvecs));

  // Averaging does not depend on probe order.
  auto probes = r1.probe_estimates;
  std::reverse(probes.begin(), probes.end());
  std::rotate(probes.begin(), probes.begin() + 17, probes.end());
  const double reordered = static_cast<double>(m) / c.samples * std::accumulate(probes.begin(), probes.end(), 0.0);
  CHECK(std::abs(reordered - r1.logdet) < 1e-12 * std::abs(r1.logdet));

  // A subset of probes reproduces the matching prefix of estimates.
  c.num_blocks = 1;
  c.samples = 5;
  const auto r5 = slq_logdet(f, c);
  for (std::size_t p = 0; p < 5; ++p) CHECK(r5.probe_estimates[p] == r1.probe_estimates[p]);
}

TEST_CASE("SLQ error shrinks as the probe count grows") {
  oracle::TempDir dir;
  const Index m = 512;
  Eigen::VectorXd lambda;
  const Eigen::MatrixXd M = oracle::spectrum_matrix(m, 1.0, 10.0, 11, &lambda);
  const double truth = lambda.array().log().sum();
  const auto f = write_matrix_file(dir / "a.mat", M, Dtype::f64, Symmetry::spd);
  double err[3] = {0, 0, 0};
  const Index counts[3] = {8, 32, 128};
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    for (int t = 0; t < 3; ++t) {
      SlqConfig c;
      c.lanczos_degree = 20;
      c.samples = counts[t];
      c.seed = seed;
      err[t] += std::abs(slq_logdet(f, c).logdet - truth) / 10.0;
    }
  }
  MESSAGE("mean abs error for s = 8, 32, 128: " << err[0] << ", " << err[1] << ", " << err[2]);
  CHECK(err[1] < err[0]);
  CHECK(err[2] < err[1]);
  for (int t = 0; t < 2; ++t) {
    const double ratio = err[t] / err[t + 1];
    CHECK(ratio >= 2.0 / 1.5);
    CHECK(ratio <= 2.0 * 1.5);
  }
}

TEST_CASE("SLQ rejects an indefinite matrix") {
  oracle::TempDir dir;
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(6, 6);
  M(3, 3) = -2.0;
  const auto f = write_matrix_file(dir / "a.mat", M, Dtype::f64, Symmetry::symmetric);
  SlqConfig c;
  c.lanczos_degree = 6;
  CHECK_THROWS_AS(slq_logdet(f, c), NotSpdError);
}

TEST_CASE("block-diagonal baseline is exact on block-diagonal input") {
  oracle::TempDir dir;
  const Index d = 4, n = 9;
  GenConfig g;
  g.kind = GenKind::gen_random;
  g.n = d;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n * d, n * d);
  for (Index i = 0; i < n; ++i) {
    g.seed = 100 + i;
    M.block(i * d, i * d, d, d) = gram_matrix(g);
  }
  const auto f = write_matrix_file(dir / "bd.mat", M, Dtype::f64, Symmetry::generic);
  const auto bd = block_diagonal_logdet(f, d);
  RunOptions o;
  o.scratch_dir = dir.path();
  o.num_blocks = 3;
  const auto full = memdet_lu(f, o);
  CHECK(bd.sign == full.sign);
  CHECK(std::abs(bd.logabsdet - full.logabsdet) <= 1e-12 * std::abs(full.logabsdet));

  const auto I = write_matrix_file(dir / "i.mat", Eigen::MatrixXd(Eigen::MatrixXd::Identity(12, 12)), Dtype::f64,
                                   Symmetry::spd);
  CHECK(block_diagonal_logdet(I, 3).logabsdet == 0.0);
  CHECK_THROWS_AS(block_diagonal_logdet(I, 5), DomainError);

  Eigen::MatrixXd Z = Eigen::MatrixXd::Identity(6, 6);
  Z(4, 4) = 0.0;
  const auto fz = write_matrix_file(dir / "z.mat", Z, Dtype::f64, Symmetry::generic);
  CHECK(std::isinf(block_diagonal_logdet(fz, 2).logabsdet));
}
