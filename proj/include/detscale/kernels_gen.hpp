#pragma once

// Test-matrix generators: Matérn correlation with a linear model of
// coregionalization, an RBF kernel, and seeded random matrices.

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "detscale/block_store.hpp"

namespace detscale {

struct MaternParams {
  double alpha = 0.04;  // correlation scale
  double nu = 1.5;      // smoothness
};

void validate(const MaternParams& params);

/// Matérn correlation at distance r >= 0.
double matern_corr(double r, const MaternParams& params);
double matern_corr(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
                   const MaternParams& params);

/// Symmetric square root of an SPD matrix by spectral decomposition.
Eigen::MatrixXd spd_sqrt(const Eigen::MatrixXd& sigma);

enum class SigmaModel { wishart, identity };

struct LmcField {
  Eigen::MatrixXd points;  // n x p, one location per row
  std::vector<Eigen::MatrixXd> sigma;
  std::vector<Eigen::MatrixXd> sqrt_sigma;

  Index n() const { return points.rows(); }
  Index d() const { return sigma.empty() ? 0 : sigma.front().rows(); }

  /// Points uniform on [0,1]^p; Wishart-style sigma = A A^T + d I / 10 with
  /// A standard normal, or sigma = I.
  static LmcField sample(Index n, Index d, Index p, SigmaModel model, std::mt19937_64& rng);
};

/// sigma(x_i)^{1/2} sigma(x_j)^{1/2} rho(x_i, x_j); exactly sigma(x_i) when i == j.
Eigen::MatrixXd lmc_block(const LmcField& field, Index i, Index j, const MaternParams& params);

enum class GenKind { matern_lmc, rbf, spd_random, sym_random, gen_random };

GenKind parse_gen_kind(const std::string& name);
std::string to_string(GenKind kind);

struct GenConfig {
  GenKind kind = GenKind::matern_lmc;
  Index n = 0;  // data points (kernel kinds) or matrix order (random kinds)
  Index d = 1;
  Index p = 2;
  MaternParams params;
  SigmaModel sigma_model = SigmaModel::wishart;
  std::uint64_t seed = 1;
  double jitter = 0.0;  // added to the diagonal
  Dtype dtype = Dtype::f64;

  Index order() const;
  Symmetry symmetry() const;
};

/// In-memory generation. Symmetric kinds are bit-exactly symmetric.
RowMatrix<double> gram_matrix(const GenConfig& config);

/// Streams the matrix to `out` one block row at a time.
MatrixFile gen_gram(const GenConfig& config, const std::filesystem::path& out);

/// E(n) = K(n,n) - k^T K_{n-1}^{-1} k for the last index of a scalar Gram
/// matrix: the error of conditioning on the first n-1 points.
double gp_conditional_error(const Eigen::MatrixXd& K);

}  // namespace detscale
