#pragma once

// Factorial scaling-law fit of normalized log-determinants.
//
// With L_n = l_{nd} / n, the model predicts
//   L_n = L_{n0} + c0 (1 - 1/n) - sum_{i=1}^{q+1} nu_{i-1} n^{-i} log(n!)
// and is fitted as an ordinary least-squares problem on rows n0+1 .. ns.

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "detscale/tile.hpp"

namespace detscale {

/// L_j = l_{j d} / j for j = 1..ns; entry j-1 of the result. `ell` is
/// zero-based (entry q-1 holds l_q).
std::vector<double> extract_L(const std::vector<double>& ell, Index d, Index ns);

struct Design {
  Eigen::MatrixXd X;  // (ns - n0) x (q + 2)
  Eigen::VectorXd y;
};

/// `L` as returned by extract_L (entry j-1 is L_j).
Design build_design(const std::vector<double>& L, Index n0, Index ns, Index q);

struct LeastSquares {
  Eigen::VectorXd beta;
  Eigen::VectorXd residuals;
  double sigma_hat = 0.0;
};

/// Column-scaled, column-pivoted QR least squares. sigma_hat^2 is
/// RSS / (rows - cols), or 0 when the system is square.
LeastSquares solve_least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

struct FlodanceFit {
  Index n0 = 1;
  Index ns = 0;
  Index q = 0;
  double c0 = 0.0;
  std::vector<double> nu;  // nu_0 .. nu_q
  double anchor = 0.0;     // L_{n0}
  double sigma_hat = 0.0;
  Eigen::VectorXd residuals;
};

FlodanceFit fit_flodance(const std::vector<double>& L, Index n0, Index ns, Index q);

struct Prediction {
  double L_hat = 0.0;
  double logdet_hat = 0.0;  // n * L_hat
};

Prediction predict(const FlodanceFit& fit, Index n);

/// Two-sided interval on l_n at confidence `level`:
/// l_hat +/- z sigma_hat sqrt(n - 1).
std::pair<double, double> predict_interval(const FlodanceFit& fit, Index n, double level);

/// Standard normal quantile.
double normal_quantile(double p);

/// log(det K_n / det K_{n-1}) = l_{nd} - l_{(n-1)d} for n = 2 .. floor(len/d);
/// entry n-2 of the result.
std::vector<double> scaling_ratio_trace(const std::vector<double>& ell, Index d);

struct BurnInScore {
  Index n0 = 0;
  double score = 0.0;  // mean |L_hat_n - L_n| over the held-out tail
};

/// Fits on [n0, ns - holdout] for each candidate n0 and scores the
/// extrapolation over the last `holdout` points of [1, ns]. Candidates
/// without enough rows are skipped. Sorted best first.
std::vector<BurnInScore> cross_validate_burn_in(const std::vector<double>& L, Index ns, Index q,
                                                Index holdout,
                                                const std::vector<Index>& grid = {1, 50, 100, 200,
                                                                                  300, 500});

}  // namespace detscale
