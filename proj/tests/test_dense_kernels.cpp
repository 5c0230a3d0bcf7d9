#include <doctest.h>

#include <random>

#include "detscale/dense_kernels.hpp"
#include "oracles.hpp"

using namespace detscale;

namespace {

RowMatrix<double> uniform(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  RowMatrix<double> M(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) M(r, c) = u(rng);
  }
  return M;
}

RowMatrix<double> spd(Index n, std::uint64_t seed) {
  const RowMatrix<double> G = uniform(n, n, seed);
  RowMatrix<double> M = G * G.transpose();
  M.diagonal().array() += static_cast<double>(n) / 4.0;
  return M;
}

}  // namespace

TEST_CASE("lu_inplace matches cofactor expansion and reconstructs P L U") {
  for (Index n : {1, 2, 3, 5, 7}) {
    const RowMatrix<double> M = uniform(n, n, 10 + n);
    RowMatrix<double> A = M;
    const LuResult lu = lu_inplace<double>(A);
    const long double det = oracle::cofactor_det(M.cast<long double>());
    CHECK(lu.sign == (det < 0 ? -1 : 1));
    CHECK(oracle::rel_err(lu.logabsdet, static_cast<double>(std::log(std::fabs(det)))) < 1e-12);

    RowMatrix<double> L = A.triangularView<Eigen::UnitLower>();
    RowMatrix<double> U = A.triangularView<Eigen::Upper>();
    RowMatrix<double> PtM = M;
    lu.pivots.apply_transpose<double>(PtM);
    CHECK((L * U - PtM).norm() < 1e-13 * M.norm());
  }
}

TEST_CASE("lu_inplace reports exact singularity") {
  RowMatrix<double> A(3, 3);
  A << 1, 2, 3, 2, 4, 6, 0, 0, 0;
  const auto lu = lu_inplace<double>(A);
  CHECK(lu.singular());
  CHECK(std::isinf(lu.logabsdet));
  CHECK(lu.logabsdet < 0);
}

TEST_CASE("pivot ties go to the lowest index") {
  RowMatrix<double> A(2, 2);
  A << 1, 0, -1, 1;
  const auto lu = lu_inplace<double>(A);
  CHECK(lu.pivots.swaps[0] == 0);
}

TEST_CASE("ldl_inplace reconstructs P^T M P and needs only the lower triangle") {
  std::mt19937_64 rng(4);
  for (Index n : {1, 2, 6, 17}) {
    RowMatrix<double> M = uniform(n, n, 20 + n);
    M = (M + M.transpose()).eval();
    M.diagonal().array() += 3.0 * static_cast<double>(n);
    for (Index i = 0; i < n; i += 2) M(i, i) = -M(i, i);
    RowMatrix<double> A = M;
    A.triangularView<Eigen::StrictlyUpper>().setConstant(std::nan(""));
    const auto f = ldl_inplace<double>(A);
    RowMatrix<double> L = A.triangularView<Eigen::UnitLower>();
    L.triangularView<Eigen::StrictlyUpper>().setZero();
    const RowMatrix<double> recon = L * f.d.asDiagonal() * L.transpose();
    const auto pi = f.pivots.permutation();
    RowMatrix<double> PMP(n, n);
    for (Index r = 0; r < n; ++r) {
      for (Index c = 0; c < n; ++c) PMP(r, c) = M(pi[r], pi[c]);
    }
    CHECK((recon - PMP).norm() < 1e-12 * M.norm());
    // Largest remaining diagonal magnitude goes first.
    CHECK(std::abs(f.d(0)) == doctest::Approx(M.diagonal().cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("ldl_inplace rejects a vanishing diagonal") {
  RowMatrix<double> A(2, 2);
  A << 0, 1, 1, 0;
  CHECK_THROWS_AS(ldl_inplace<double>(A), NumericalError);
  RowMatrix<double> Z = RowMatrix<double>::Zero(3, 3);
  CHECK_THROWS_AS(ldl_inplace<double>(Z), NumericalError);
}

TEST_CASE("cholesky_inplace matches Eigen LLT across panel boundaries") {
  for (Index n : {1, 5, 63, 64, 65, 150}) {
    const RowMatrix<double> M = spd(n, 30 + n);
    RowMatrix<double> A = M;
    const auto diag = cholesky_inplace<double>(A);
    Eigen::LLT<Eigen::MatrixXd> llt(M);
    const Eigen::MatrixXd Lref = llt.matrixL();
    RowMatrix<double> L = A.triangularView<Eigen::Lower>();
    CHECK((L - Lref).norm() < 1e-12 * Lref.norm());
    CHECK((diag - Lref.diagonal()).norm() < 1e-12 * Lref.diagonal().norm());
  }
}

TEST_CASE("cholesky_inplace names the failing leading minor") {
  RowMatrix<double> A = RowMatrix<double>::Identity(4, 4);
  A(2, 2) = -1.0;
  try {
    cholesky_inplace<double>(A);
    FAIL("expected NotSpdError");
  } catch (const NotSpdError& e) {
    CHECK(std::string(e.what()).find('3') != std::string::npos);
  }
}

TEST_CASE("triangular solves and Schur updates agree with dense algebra") {
  const Index n = 9;
  RowMatrix<double> L = uniform(n, n, 51).triangularView<Eigen::Lower>();
  L.diagonal().array() += 3.0;
  const RowMatrix<double> B0 = uniform(n, 4, 52);

  RowMatrix<double> B = B0;
  solve_lower_inplace<double>(L, B, false);
  CHECK((L * B - B0).norm() < 1e-13);

  RowMatrix<double> Lu = L;
  Lu.diagonal().setOnes();
  B = B0;
  solve_lower_inplace<double>(L, B, true);
  CHECK((Lu * B - B0).norm() < 1e-13);

  const RowMatrix<double> U = L.transpose();
  const RowMatrix<double> C0 = uniform(4, n, 53);
  RowMatrix<double> C = C0;
  solve_upper_right_inplace<double>(U, C);
  CHECK((C * U - C0).norm() < 1e-13);

  RowMatrix<double> Ct = C0.transpose();
  solve_upper_transposed_inplace<double>(U, Ct);
  CHECK((Ct.transpose() - C).norm() < 1e-13);

  RowMatrix<double> S = uniform(4, 4, 54);
  const RowMatrix<double> S0 = S;
  const RowMatrix<double> X = uniform(n, 4, 55), Y = uniform(n, 4, 56);
  schur_update<double>(S, X, Y, SchurForm::transposed);
  CHECK((S - (S0 - X.transpose() * Y)).norm() < 1e-14);
  S = S0;
  const RowMatrix<double> Xp = X.transpose();
  schur_update<double>(S, Xp, Y, SchurForm::plain);
  CHECK((S - (S0 - Xp * Y)).norm() < 1e-14);
  CHECK_THROWS_AS(schur_update<double>(S, Y, Xp, SchurForm::transposed), DomainError);

  RowMatrix<double> Z = RowMatrix<double>::Identity(3, 3);
  Z(1, 1) = 0.0;
  RowMatrix<double> rhs = RowMatrix<double>::Ones(3, 1);
  CHECK_THROWS_AS(solve_lower_inplace<double>(Z, rhs, false), NumericalError);
}

TEST_CASE("single precision kernels run on float tiles") {
  const RowMatrix<double> M = spd(20, 77);
  RowMatrix<float> A = M.cast<float>();
  const auto diag = cholesky_inplace<float>(A);
  const double logdet = 2.0 * diag.cast<double>().array().log().sum();
  CHECK(oracle::rel_err(logdet, oracle::eigen_logdet(M)) < 1e-5);
}
