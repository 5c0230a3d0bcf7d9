#include "detscale/kernels_gen.hpp"

#include <cmath>

#include "detscale/errors.hpp"

namespace detscale {

void validate(const MaternParams& params) {
  if (!(params.alpha > 0.0) || !std::isfinite(params.alpha)) throw DomainError("alpha must be positive");
  if (!(params.nu > 0.0) || !std::isfinite(params.nu)) throw DomainError("nu must be positive");
}

double matern_corr(double r, const MaternParams& params) {
  if (r < 1e-14 * params.alpha) return 1.0;
  const double nu = params.nu;
  if (nu == 0.5) return std::exp(-r / params.alpha);
  if (nu == 1.5) {
    const double z = std::sqrt(3.0) * r / params.alpha;
    return (1.0 + z) * std::exp(-z);
  }
  if (nu == 2.5) {
    const double z = std::sqrt(5.0) * r / params.alpha;
    return (1.0 + z + z * z / 3.0) * std::exp(-z);
  }
  const double z = std::sqrt(2.0 * nu) * r / params.alpha;
  // Evaluated in log space so z^nu and K_nu(z) do not overflow separately.
  const double log_rho = (1.0 - nu) * std::log(2.0) - std::lgamma(nu) + nu * std::log(z) +
                         std::log(std::cyl_bessel_k(nu, z));
  return std::min(1.0, std::exp(log_rho));
}

double matern_corr(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
                   const MaternParams& params) {
  return matern_corr((x - y).norm(), params);
}

Eigen::MatrixXd spd_sqrt(const Eigen::MatrixXd& sigma) {
  if (sigma.rows() != sigma.cols()) throw DomainError("spd_sqrt needs a square matrix");
  const Eigen::MatrixXd sym = 0.5 * (sigma + sigma.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed in spd_sqrt");
  const auto& w = eig.eigenvalues();
  if (w.size() > 0 && !(w.minCoeff() > 0.0)) {
    throw NotSpdError("spd_sqrt input is not positive definite (min eigenvalue " +
                      std::to_string(w.minCoeff()) + ")");
  }
  const Eigen::MatrixXd& V = eig.eigenvectors();
  Eigen::MatrixXd root = V * w.cwiseSqrt().asDiagonal() * V.transpose();
  return 0.5 * (root + root.transpose());
}

LmcField LmcField::sample(Index n, Index d, Index p, SigmaModel model, std::mt19937_64& rng) {
  if (n < 1 || d < 1 || p < 1) throw DomainError("n, d, p must be positive");
  LmcField field;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  field.points.resize(n, p);
  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < p; ++c) field.points(i, c) = unit(rng);
  }
  field.sigma.reserve(static_cast<std::size_t>(n));
  field.sqrt_sigma.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(d, d);
    Eigen::MatrixXd root = sigma;
    if (model == SigmaModel::wishart) {
      Eigen::MatrixXd A(d, d);
      for (Index r = 0; r < d; ++r) {
        for (Index c = 0; c < d; ++c) A(r, c) = normal(rng);
      }
      sigma = A * A.transpose() + Eigen::MatrixXd::Identity(d, d) * (static_cast<double>(d) / 10.0);
      sigma = 0.5 * (sigma + sigma.transpose()).eval();
      root = spd_sqrt(sigma);
    }
    field.sigma.push_back(std::move(sigma));
    field.sqrt_sigma.push_back(std::move(root));
  }
  return field;
}

Eigen::MatrixXd lmc_block(const LmcField& field, Index i, Index j, const MaternParams& params) {
  if (i == j) return field.sigma[static_cast<std::size_t>(i)];
  const double rho = matern_corr(field.points.row(i).transpose(), field.points.row(j).transpose(), params);
  return field.sqrt_sigma[static_cast<std::size_t>(i)] * field.sqrt_sigma[static_cast<std::size_t>(j)] * rho;
}

GenKind parse_gen_kind(const std::string& name) {
  if (name == "matern-lmc") return GenKind::matern_lmc;
  if (name == "rbf") return GenKind::rbf;
  if (name == "spd-random") return GenKind::spd_random;
  if (name == "sym-random") return GenKind::sym_random;
  if (name == "gen-random") return GenKind::gen_random;
  throw DomainError("unknown matrix kind '" + name + "'");
}

std::string to_string(GenKind kind) {
  switch (kind) {
    case GenKind::matern_lmc: return "matern-lmc";
    case GenKind::rbf: return "rbf";
    case GenKind::spd_random: return "spd-random";
    case GenKind::sym_random: return "sym-random";
    case GenKind::gen_random: return "gen-random";
  }
  return "unknown";
}

Index GenConfig::order() const {
  const bool kernel = kind == GenKind::matern_lmc || kind == GenKind::rbf;
  return kernel ? n * d : n;
}

Symmetry GenConfig::symmetry() const {
  switch (kind) {
    case GenKind::matern_lmc:
    case GenKind::rbf:
    case GenKind::spd_random: return Symmetry::spd;
    case GenKind::sym_random: return Symmetry::symmetric;
    case GenKind::gen_random: return Symmetry::generic;
  }
  return Symmetry::generic;
}

namespace {

bool is_kernel(GenKind kind) { return kind == GenKind::matern_lmc || kind == GenKind::rbf; }

void check(const GenConfig& config) {
  if (config.n < 1 || config.d < 1 || config.p < 1) throw DomainError("n, d, p must be positive");
  if (config.jitter < 0.0 || !std::isfinite(config.jitter)) throw DomainError("jitter must be non-negative");
  if (config.kind == GenKind::matern_lmc) validate(config.params);
  if (config.kind == GenKind::rbf && !(config.params.alpha >= 0.0)) {
    throw DomainError("rbf length scale must be non-negative");
  }
}

// Kernel matrices are produced one block row (d rows) at a time. Block (i,j)
// with i > j is the transpose of block (j,i) so the result is exactly
// symmetric.
class KernelStrips {
public:
  explicit KernelStrips(const GenConfig& config) : config_(config) {
    std::mt19937_64 rng(config.seed);
    const SigmaModel model = config.kind == GenKind::matern_lmc ? config.sigma_model : SigmaModel::identity;
    field_ = LmcField::sample(config.n, config.d, config.p, model, rng);
  }

  Eigen::MatrixXd block(Index i, Index j) const {
    if (config_.kind == GenKind::matern_lmc) return lmc_block(field_, i, j, config_.params);
    const Index d = config_.d;
    if (i == j) return Eigen::MatrixXd::Identity(d, d);
    const double alpha = config_.params.alpha;
    double rho = 0.0;
    if (alpha > 0.0) {
      const double r2 = (field_.points.row(i) - field_.points.row(j)).squaredNorm();
      rho = std::exp(-0.5 * r2 / (alpha * alpha));
    }
    return Eigen::MatrixXd::Identity(d, d) * rho;
  }

  void fill(Index i, Eigen::Ref<RowMatrix<double>> strip) const {
    const Index d = config_.d;
    for (Index j = 0; j < config_.n; ++j) {
      if (j < i) {
        strip.middleCols(j * d, d) = block(j, i).transpose();
      } else {
        strip.middleCols(j * d, d) = block(i, j);
      }
    }
    for (Index r = 0; r < d; ++r) strip(r, i * d + r) += config_.jitter;
  }

private:
  GenConfig config_;
  LmcField field_;
};

RowMatrix<double> random_matrix(const GenConfig& config) {
  const Index m = config.n;
  std::mt19937_64 rng(config.seed);
  RowMatrix<double> M(m, m);
  switch (config.kind) {
    case GenKind::spd_random: {
      std::normal_distribution<double> normal(0.0, 1.0);
      RowMatrix<double> G(m, m);
      for (Index r = 0; r < m; ++r) {
        for (Index c = 0; c < m; ++c) G(r, c) = normal(rng);
      }
      M.noalias() = G * G.transpose() / static_cast<double>(m);
      M = (0.5 * (M + M.transpose())).eval();
      M.diagonal().array() += 1.0;
      break;
    }
    case GenKind::sym_random: {
      std::uniform_real_distribution<double> unit(-1.0, 1.0);
      for (Index r = 0; r < m; ++r) {
        for (Index c = 0; c < r; ++c) {
          M(r, c) = unit(rng);
          M(c, r) = M(r, c);
        }
      }
      std::bernoulli_distribution coin(0.5);
      for (Index r = 0; r < m; ++r) {
        M(r, r) = 0.0;
        const double dominance = M.row(r).cwiseAbs().sum() + 1.0;
        M(r, r) = coin(rng) ? dominance : -dominance;
      }
      break;
    }
    case GenKind::gen_random: {
      std::uniform_real_distribution<double> unit(-1.0, 1.0);
      for (Index r = 0; r < m; ++r) {
        for (Index c = 0; c < m; ++c) M(r, c) = unit(rng);
      }
      break;
    }
    default: throw DomainError("not a random kind");
  }
  M.diagonal().array() += config.jitter;
  return M;
}

}  // namespace

RowMatrix<double> gram_matrix(const GenConfig& config) {
  check(config);
  if (!is_kernel(config.kind)) return random_matrix(config);
  const Index m = config.order();
  RowMatrix<double> M(m, m);
  KernelStrips strips(config);
  for (Index i = 0; i < config.n; ++i) strips.fill(i, M.middleRows(i * config.d, config.d));
  return M;
}

MatrixFile gen_gram(const GenConfig& config, const std::filesystem::path& out) {
  check(config);
  const Index m = config.order();
  MatrixFile file = MatrixFile::create(out, m, config.dtype, config.symmetry());
  if (!is_kernel(config.kind)) {
    const RowMatrix<double> M = random_matrix(config);
    file.write_rect<double>(0, m, 0, m, M.data(), m);
    return file;
  }
  KernelStrips strips(config);
  RowMatrix<double> strip(config.d, m);
  for (Index i = 0; i < config.n; ++i) {
    strips.fill(i, strip);
    file.write_rect<double>(i * config.d, config.d, 0, m, strip.data(), m);
  }
  return file;
}

double gp_conditional_error(const Eigen::MatrixXd& K) {
  if (K.rows() != K.cols() || K.rows() < 1) throw DomainError("gram matrix must be square and non-empty");
  const Index n = K.rows();
  if (n == 1) return K(0, 0);
  const Eigen::MatrixXd Kp = K.topLeftCorner(n - 1, n - 1);
  const Eigen::VectorXd k = K.col(n - 1).head(n - 1);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(Kp);
  if (!lu.isInvertible()) throw NumericalError("conditioning block K_{n-1} is singular");
  return K(n - 1, n - 1) - k.dot(lu.solve(k));
}

}  // namespace detscale
