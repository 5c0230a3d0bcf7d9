#include "detscale/flodance.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "detscale/errors.hpp"

namespace detscale {

std::vector<double> extract_L(const std::vector<double>& ell, Index d, Index ns) {
  if (d < 1 || ns < 1) throw DomainError("d and n_s must be positive");
  const auto need = static_cast<std::size_t>(ns * d);
  if (ell.size() < need) {
    throw DomainError("prefix has " + std::to_string(ell.size()) + " entries, need n_s * d = " +
                      std::to_string(need));
  }
  std::vector<double> L(static_cast<std::size_t>(ns));
  for (Index j = 1; j <= ns; ++j) {
    const double value = ell[static_cast<std::size_t>(j * d - 1)] / static_cast<double>(j);
    if (!std::isfinite(value)) throw DomainError("prefix value at j = " + std::to_string(j) + " is not finite");
    L[static_cast<std::size_t>(j - 1)] = value;
  }
  return L;
}

Design build_design(const std::vector<double>& L, Index n0, Index ns, Index q) {
  if (n0 < 1 || n0 >= ns) throw DomainError("need 1 <= n0 < ns");
  if (q < 0) throw DomainError("q must be non-negative");
  if (static_cast<Index>(L.size()) < ns) throw DomainError("L sequence shorter than ns");
  const Index rows = ns - n0;
  const Index cols = q + 2;
  if (rows < cols) {
    throw DomainError("window [" + std::to_string(n0) + ", " + std::to_string(ns) + "] gives " +
                      std::to_string(rows) + " rows, need at least q + 2 = " + std::to_string(cols));
  }
  Design design{Eigen::MatrixXd(rows, cols), Eigen::VectorXd(rows)};
  const double anchor = L[static_cast<std::size_t>(n0 - 1)];
  for (Index r = 0; r < rows; ++r) {
    const Index n = n0 + 1 + r;
    const double nd = static_cast<double>(n);
    const double root = std::sqrt(nd - 1.0);
    const double log_factorial = std::lgamma(nd + 1.0);
    design.y(r) = nd / root * (L[static_cast<std::size_t>(n - 1)] - anchor);
    design.X(r, 0) = root;
    for (Index i = 1; i <= q + 1; ++i) {
      design.X(r, i) = -std::pow(nd, static_cast<double>(1 - i)) * log_factorial / root;
    }
  }
  return design;
}

LeastSquares solve_least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() != y.size()) throw DomainError("design and response sizes differ");
  if (X.rows() < X.cols()) throw DomainError("fewer rows than columns");
  Eigen::VectorXd scale(X.cols());
  for (Index c = 0; c < X.cols(); ++c) {
    scale(c) = X.col(c).cwiseAbs().maxCoeff();
    if (!(scale(c) > 0.0) || !std::isfinite(scale(c))) {
      throw NumericalError("design column " + std::to_string(c) + " has max-abs scale " +
                           std::to_string(scale(c)));
    }
  }
  const Eigen::MatrixXd Xs = X * scale.cwiseInverse().asDiagonal();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xs);
  if (qr.rank() < X.cols()) {
    // The pivot order puts the dependent columns last.
    const Index culprit = qr.colsPermutation().indices()(X.cols() - 1);
    std::ostringstream msg;
    msg << "design matrix is rank deficient (rank " << qr.rank() << " of " << X.cols()
        << "); column " << culprit << " with scale " << scale(culprit) << " is dependent";
    throw NumericalError(msg.str());
  }
  LeastSquares out;
  out.beta = qr.solve(y).cwiseQuotient(scale);
  out.residuals = y - X * out.beta;
  const Index dof = X.rows() - X.cols();
  out.sigma_hat = dof > 0 ? std::sqrt(out.residuals.squaredNorm() / static_cast<double>(dof)) : 0.0;
  return out;
}

FlodanceFit fit_flodance(const std::vector<double>& L, Index n0, Index ns, Index q) {
  const Design design = build_design(L, n0, ns, q);
  const LeastSquares ls = solve_least_squares(design.X, design.y);
  FlodanceFit fit;
  fit.n0 = n0;
  fit.ns = ns;
  fit.q = q;
  fit.c0 = ls.beta(0);
  fit.nu.assign(ls.beta.data() + 1, ls.beta.data() + ls.beta.size());
  fit.anchor = L[static_cast<std::size_t>(n0 - 1)];
  fit.sigma_hat = ls.sigma_hat;
  fit.residuals = ls.residuals;
  return fit;
}

Prediction predict(const FlodanceFit& fit, Index n) {
  if (n < 1) throw DomainError("prediction size must be positive");
  const double nd = static_cast<double>(n);
  const double log_factorial = std::lgamma(nd + 1.0);
  double L = fit.anchor + fit.c0 * (1.0 - 1.0 / nd);
  for (std::size_t i = 1; i <= fit.nu.size(); ++i) {
    L -= fit.nu[i - 1] * std::pow(nd, -static_cast<double>(i)) * log_factorial;
  }
  return {L, nd * L};
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("quantile probability must lie in (0, 1)");
  // Acklam's rational approximation followed by one Halley step.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double low = 0.02425;
  double x;
  if (p < low) {
    const double t = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * t + c[1]) * t + c[2]) * t + c[3]) * t + c[4]) * t + c[5]) /
        ((((d[0] * t + d[1]) * t + d[2]) * t + d[3]) * t + 1.0);
  } else if (p <= 1.0 - low) {
    const double t = p - 0.5;
    const double r = t * t;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * t /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double t = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * t + c[1]) * t + c[2]) * t + c[3]) * t + c[4]) * t + c[5]) /
        ((((d[0] * t + d[1]) * t + d[2]) * t + d[3]) * t + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

std::pair<double, double> predict_interval(const FlodanceFit& fit, Index n, double level) {
  if (!(level > 0.0 && level < 1.0)) throw DomainError("interval level must lie in (0, 1)");
  const double center = predict(fit, n).logdet_hat;
  const double half = normal_quantile(0.5 + 0.5 * level) * fit.sigma_hat *
                      std::sqrt(static_cast<double>(n) - 1.0);
  return {center - half, center + half};
}

std::vector<double> scaling_ratio_trace(const std::vector<double>& ell, Index d) {
  if (d < 1) throw DomainError("d must be positive");
  const Index count = static_cast<Index>(ell.size()) / d;
  if (count < 2) throw DomainError("prefix must cover at least two data points");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count - 1));
  for (Index n = 2; n <= count; ++n) {
    out.push_back(ell[static_cast<std::size_t>(n * d - 1)] - ell[static_cast<std::size_t>((n - 1) * d - 1)]);
  }
  return out;
}

std::vector<BurnInScore> cross_validate_burn_in(const std::vector<double>& L, Index ns, Index q,
                                                Index holdout, const std::vector<Index>& grid) {
  if (holdout < 1 || holdout >= ns) throw DomainError("holdout must lie in [1, ns)");
  const Index fit_end = ns - holdout;
  std::vector<BurnInScore> scores;
  for (const Index n0 : grid) {
    if (n0 < 1 || fit_end - n0 < q + 2) continue;
    FlodanceFit fit;
    try {
      fit = fit_flodance(L, n0, fit_end, q);
    } catch (const NumericalError&) {
      continue;
    }
    double err = 0.0;
    for (Index n = fit_end + 1; n <= ns; ++n) {
      err += std::abs(predict(fit, n).L_hat - L[static_cast<std::size_t>(n - 1)]);
    }
    scores.push_back({n0, err / static_cast<double>(holdout)});
  }
  std::sort(scores.begin(), scores.end(),
            [](const BurnInScore& a, const BurnInScore& b) { return a.score < b.score; });
  return scores;
}

}  // namespace detscale
