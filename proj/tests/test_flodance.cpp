#include <doctest.h>

#include <cmath>

#include "detscale/flodance.hpp"
#include "oracles.hpp"

using namespace detscale;

namespace {

// L_n from the model itself, anchored at L_{n0}.
std::vector<double> synthetic_L(Index count, Index n0, double anchor, double c0, const std::vector<double>& nu) {
  FlodanceFit f;
  f.n0 = n0;
  f.anchor = anchor;
  f.c0 = c0;
  f.nu = nu;
  std::vector<double> L(static_cast<std::size_t>(count));
  for (Index n = 1; n <= count; ++n) L[n - 1] = predict(f, n).L_hat;
  return L;
}

}  // namespace

TEST_CASE("extract_L samples every d-th prefix entry") {
  std::vector<double> ell(20, 0.0);
  for (auto v : extract_L(ell, 1, 20)) CHECK(v == 0.0);

  for (std::size_t q = 0; q < ell.size(); ++q) ell[q] = static_cast<double>(q + 1) * std::log(3.0);
  const auto L = extract_L(ell, 2, 10);
  for (auto v : L) CHECK(v == doctest::Approx(2.0 * std::log(3.0)).epsilon(1e-15));
  CHECK_THROWS_AS(extract_L(ell, 2, 11), DomainError);
}

TEST_CASE("design matrix entries follow the log-factorial formulas") {
  std::vector<double> L(10, 1.5);
  const auto D = build_design(L, 1, 10, 1);
  CHECK(D.X.rows() == 9);
  CHECK(D.X.cols() == 3);
  CHECK(D.X(0, 0) == doctest::Approx(1.0));
  CHECK(D.X(0, 1) == doctest::Approx(-std::log(2.0)).epsilon(1e-15));
  CHECK(D.X(0, 2) == doctest::Approx(-0.5 * std::log(2.0)).epsilon(1e-15));
  CHECK(D.y.isZero(0.0));

  // Column 2 is -log(n!) / sqrt(n - 1); check against exact factorials.
  const auto E = build_design(std::vector<double>(20, 0.0), 1, 20, 0);
  double fact = 1.0;
  for (Index n = 2; n <= 20; ++n) {
    fact *= static_cast<double>(n);
    CHECK(E.X(n - 2, 1) == doctest::Approx(-std::log(fact) / std::sqrt(n - 1.0)).epsilon(1e-14));
  }
  CHECK_THROWS_AS(build_design(L, 1, 3, 1), DomainError);
  CHECK_THROWS_AS(build_design(L, 5, 5, 0), DomainError);
}

TEST_CASE("least squares recovers an exact linear model") {
  Eigen::MatrixXd X(6, 3);
  X << 1, 2, 3, 4, 5, 6, 7, 8, 10, 1, 0, 0, 0, 1, 0, 0, 0, 1e6;
  const Eigen::Vector3d beta(0.5, -2.0, 3e-6);
  const auto ls = solve_least_squares(X, X * beta);
  CHECK((ls.beta - beta).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(ls.sigma_hat < 1e-12);

  Eigen::MatrixXd R(4, 2);
  R << 1, 2, 2, 4, 3, 6, 4, 8;
  CHECK_THROWS_AS(solve_least_squares(R, Eigen::VectorXd::Ones(4)), NumericalError);
}

TEST_CASE("zero-noise q = 0 trace returns (c0, nu) = (2, 1)") {
  const auto L = synthetic_L(200, 1, 0.7, 2.0, {1.0});
  const auto fit = fit_flodance(L, 1, 200, 0);
  CHECK(fit.c0 == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(fit.nu[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(std::abs(predict(fit, 2000).L_hat - synthetic_L(2000, 1, 0.7, 2.0, {1.0}).back()) < 1e-10);
}

TEST_CASE("predictions reproduce fitted values in sample") {
  std::vector<double> L(120);
  for (Index n = 1; n <= 120; ++n) L[n - 1] = -0.3 * std::log(static_cast<double>(n)) + 0.01 * std::sin(n);
  const Index n0 = 10, q = 2;
  const auto fit = fit_flodance(L, n0, 120, q);
  const auto D = build_design(L, n0, 120, q);
  Eigen::VectorXd beta(q + 2);
  beta(0) = fit.c0;
  for (Index i = 0; i <= q; ++i) beta(i + 1) = fit.nu[i];
  const Eigen::VectorXd fitted = D.X * beta;
  for (Index r = 0; r < D.X.rows(); ++r) {
    const Index n = n0 + 1 + r;
    const double mapped = fit.anchor + fitted(r) * std::sqrt(n - 1.0) / static_cast<double>(n);
    CHECK(std::abs(predict(fit, n).L_hat - mapped) < 1e-12);
  }
}

TEST_CASE("shifting L by a constant shifts the prediction and leaves nu unchanged") {
  std::vector<double> L(150);
  for (Index n = 1; n <= 150; ++n) L[n - 1] = 1.0 / std::sqrt(static_cast<double>(n)) + 0.001 * std::cos(3.0 * n);
  auto shifted = L;
  for (auto& v : shifted) v += 4.25;
  const auto a = fit_flodance(L, 5, 150, 1);
  const auto b = fit_flodance(shifted, 5, 150, 1);
  CHECK(a.c0 == doctest::Approx(b.c0).epsilon(1e-9));
  for (std::size_t i = 0; i < a.nu.size(); ++i) CHECK(a.nu[i] == doctest::Approx(b.nu[i]).epsilon(1e-9));
  CHECK(predict(b, 1000).L_hat - predict(a, 1000).L_hat == doctest::Approx(4.25).epsilon(1e-12));
}

TEST_CASE("intervals invert the CLT scaling") {
  FlodanceFit f;
  f.anchor = 1.0;
  f.nu = {0.0};
  auto [lo, hi] = predict_interval(f, 50, 0.95);
  CHECK(lo == hi);
  f.sigma_hat = 1.0;
  std::tie(lo, hi) = predict_interval(f, 101, 0.95);
  CHECK((hi - lo) / 2.0 == doctest::Approx(1.959963984540054 * 10.0).epsilon(1e-12));
  const auto [lo2, hi2] = predict_interval(f, 401, 0.95);
  CHECK((hi2 - lo2) == doctest::Approx(2.0 * (hi - lo)).epsilon(1e-12));
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-14));
  CHECK(normal_quantile(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-12));
  CHECK_THROWS_AS(predict_interval(f, 10, 1.0), DomainError);
}

TEST_CASE("ratio trace of constructed power laws") {
  std::vector<double> ident(30, 0.0);
  for (double v : scaling_ratio_trace(ident, 3)) CHECK(v == 0.0);

  std::vector<double> ell(40);
  double acc = 0.0;
  for (Index q = 1; q <= 40; ++q) {
    acc -= std::log(static_cast<double>(q));
    ell[q - 1] = acc;
  }
  const auto r = scaling_ratio_trace(ell, 1);
  REQUIRE(r.size() == 39);
  for (Index n = 2; n <= 40; ++n) CHECK(r[n - 2] == doctest::Approx(-std::log(static_cast<double>(n))).epsilon(1e-13));
}

TEST_CASE("burn-in cross-validation ranks feasible anchors and penalizes a corrupted start") {
  auto L = synthetic_L(700, 1, 0.0, 1.5, {0.8, 0.2});
  for (Index n = 1; n <= 60; ++n) L[n - 1] += 5.0 / static_cast<double>(n);
  const auto scores = cross_validate_burn_in(L, 700, 1, 150);
  REQUIRE(scores.size() == 6);
  CHECK(scores.front().n0 != 1);
  for (std::size_t i = 1; i < scores.size(); ++i) CHECK(scores[i - 1].score <= scores[i].score);

  // n0 = 500 leaves too few rows before the held-out tail and is skipped.
  const auto fewer = cross_validate_burn_in(L, 700, 1, 198);
  for (const auto& s : fewer) CHECK(s.n0 != 500);
  CHECK_THROWS_AS(cross_validate_burn_in(L, 700, 1, 700), DomainError);
}
