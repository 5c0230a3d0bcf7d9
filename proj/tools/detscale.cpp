// detscale: command-line front end for the out-of-core log-determinant tools.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <unistd.h>

#include "detscale/baselines.hpp"
#include "detscale/cost_model.hpp"
#include "detscale/errors.hpp"
#include "detscale/flodance.hpp"
#include "detscale/kernels_gen.hpp"
#include "detscale/memdet.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace detscale;

namespace {

constexpr int kSchemaVersion = 1;

enum Exit { kOk = 0, kUsage = 2, kNumerical = 3, kIo = 4 };

std::uint64_t parse_size(const std::string& text) {
  if (text.empty()) throw DomainError("empty size");
  std::uint64_t unit = 1;
  std::string digits = text;
  switch (std::toupper(static_cast<unsigned char>(text.back()))) {
    case 'K': unit = 1ULL << 10; break;
    case 'M': unit = 1ULL << 20; break;
    case 'G': unit = 1ULL << 30; break;
    default: break;
  }
  if (unit != 1) digits.pop_back();
  std::size_t used = 0;
  unsigned long long value = 0;
  try {
    value = std::stoull(digits, &used);
  } catch (const std::exception&) {
    throw DomainError("invalid size '" + text + "'");
  }
  if (used != digits.size() || digits.empty()) throw DomainError("invalid size '" + text + "'");
  return value * unit;
}

fs::path default_scratch_dir() {
  if (const char* env = std::getenv("DETSCALE_SCRATCH_DIR"); env && *env) return env;
  return fs::temp_directory_path();
}

json envelope(const std::string& command) {
  json out;
  out["schema_version"] = kSchemaVersion;
  out["command"] = command;
  return out;
}

// Non-finite doubles have no JSON encoding; they become null.
json number(double value) { return std::isfinite(value) ? json(value) : json(nullptr); }

json rational(const Rational& r) { return r.is_integer() ? json(r.num()) : json(r.str()); }

void emit(const json& out, bool as_json) {
  if (as_json) {
    std::cout << out.dump() << '\n';
    return;
  }
  for (const auto& [key, value] : out.items()) {
    if (key == "schema_version") continue;
    std::cout << key << ": " << (value.is_string() ? value.get<std::string>() : value.dump()) << '\n';
  }
}

json stats_json(const RunStats& s) {
  return {{"n_b", s.num_blocks},
          {"b", s.block_size},
          {"blocks_read", s.blocks_read},
          {"blocks_written", s.blocks_written},
          {"scratch_slots", s.scratch_slots},
          {"scratch_slots_used", s.scratch_slots_used},
          {"wall_seconds", s.wall_seconds}};
}

void write_prefix_csv(const fs::path& path, const PrefixTrace& prefix) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot create '" + path.string() + "'");
  out.precision(17);
  out << "q,logabsdet,sign\n";
  for (std::size_t q = 0; q < prefix.size(); ++q) {
    out << q + 1 << ',' << prefix.logabsdet[q] << ',' << prefix.sign[q] << '\n';
  }
}

struct GenOptions {
  std::string kind = "matern-lmc";
  Index n = 0;
  Index d = 1;
  Index p = 2;
  double alpha = 0.04;
  double nu = 1.5;
  std::string sigma = "wishart";
  std::uint64_t seed = 1;
  double jitter = 0.0;
  std::string dtype = "f64";

  GenConfig config() const {
    GenConfig c;
    c.kind = parse_gen_kind(kind);
    c.n = n;
    c.d = d;
    c.p = p;
    c.params = {alpha, nu};
    if (sigma == "wishart") {
      c.sigma_model = SigmaModel::wishart;
    } else if (sigma == "identity") {
      c.sigma_model = SigmaModel::identity;
    } else {
      throw DomainError("sigma model must be wishart or identity");
    }
    c.seed = seed;
    c.jitter = jitter;
    if (dtype == "f64") {
      c.dtype = Dtype::f64;
    } else if (dtype == "f32") {
      c.dtype = Dtype::f32;
    } else {
      throw DomainError("dtype must be f64 or f32");
    }
    return c;
  }
};

void add_gen_options(CLI::App* cmd, GenOptions& o) {
  cmd->add_option("--kind", o.kind, "matern-lmc | rbf | spd-random | sym-random | gen-random")
      ->capture_default_str();
  cmd->add_option("--n", o.n, "data points (kernel kinds) or matrix order (random kinds)")->required();
  cmd->add_option("--d", o.d, "outputs per data point")->capture_default_str();
  cmd->add_option("--p", o.p, "input-space dimension")->capture_default_str();
  cmd->add_option("--alpha", o.alpha, "correlation scale")->capture_default_str();
  cmd->add_option("--nu", o.nu, "Matern smoothness")->capture_default_str();
  cmd->add_option("--sigma", o.sigma, "local covariance: wishart | identity")->capture_default_str();
  cmd->add_option("--seed", o.seed)->capture_default_str();
  cmd->add_option("--jitter", o.jitter, "added to the diagonal")->capture_default_str();
  cmd->add_option("--dtype", o.dtype, "f64 | f32")->capture_default_str();
}

struct MemdetOptions {
  std::string matrix_case = "auto";
  std::string max_mem;
  Index nb = 0;
  std::string scratch_dir;
  std::string prefix_out;
  std::string prefix_csv;

  RunOptions run(int dtype_bytes) const {
    RunOptions r;
    if (!max_mem.empty()) r.budget = {parse_size(max_mem), dtype_bytes};
    r.num_blocks = nb;
    r.scratch_dir = scratch_dir.empty() ? default_scratch_dir() : fs::path(scratch_dir);
    if (!prefix_out.empty()) r.prefix_out = prefix_out;
    return r;
  }
};

void add_memdet_options(CLI::App* cmd, MemdetOptions& o) {
  cmd->add_option("--case", o.matrix_case, "auto | gen | sym | spd (auto reads the file header)")
      ->capture_default_str();
  cmd->add_option("--max-mem", o.max_mem, "memory budget for resident tiles, K/M/G suffixes");
  cmd->add_option("--nb", o.nb, "number of block rows (overrides --max-mem)");
  cmd->add_option("--scratch-dir", o.scratch_dir, "scratchpad directory (default $DETSCALE_SCRATCH_DIR or temp)");
  cmd->add_option("--prefix-out", o.prefix_out, "binary sidecar with prefix log-determinants");
  cmd->add_option("--prefix-csv", o.prefix_csv, "CSV series of prefix log-determinants");
}

struct MemdetOutcome {
  json body;
  double logabsdet = 0.0;
  int sign = 1;
  std::optional<PrefixTrace> prefix;
};

MemdetOutcome run_memdet(const MatrixFile& file, const MemdetOptions& o) {
  std::string which = o.matrix_case;
  if (which == "auto") {
    switch (file.symmetry()) {
      case Symmetry::generic: which = "gen"; break;
      case Symmetry::symmetric: which = "sym"; break;
      case Symmetry::spd: which = "spd"; break;
    }
  }
  const RunOptions run = o.run(file.element_bytes());
  MemdetOutcome outcome;
  RunStats stats;
  if (which == "gen") {
    const auto r = memdet_lu(file, run);
    outcome.logabsdet = r.logabsdet;
    outcome.sign = r.sign;
    stats = r.stats;
  } else if (which == "sym") {
    auto r = memdet_ldl(file, run);
    outcome.logabsdet = r.logabsdet();
    outcome.sign = r.sign();
    outcome.prefix = std::move(r.prefix);
    stats = r.stats;
  } else if (which == "spd") {
    auto r = memdet_cholesky(file, run);
    outcome.logabsdet = r.logdet();
    outcome.sign = 1;
    outcome.prefix = std::move(r.prefix);
    stats = r.stats;
  } else {
    throw DomainError("case must be auto, gen, sym or spd");
  }
  if (!o.prefix_csv.empty()) {
    if (!outcome.prefix) throw DomainError("prefix output needs the sym or spd case");
    write_prefix_csv(o.prefix_csv, *outcome.prefix);
  }
  if (!o.prefix_out.empty() && !outcome.prefix) throw DomainError("prefix output needs the sym or spd case");
  outcome.body = {{"case", which},
                  {"m", file.size()},
                  {"logabsdet", number(outcome.logabsdet)},
                  {"sign", outcome.sign}};
  outcome.body.update(stats_json(stats));
  return outcome;
}

struct FlodanceOptions {
  std::string prefix;
  Index d = 1;
  Index n0 = 1;
  Index ns = 0;
  Index q = 0;
  Index predict = 0;
  std::optional<double> interval;
  std::string series_csv;
};

void add_flodance_fit_options(CLI::App* cmd, FlodanceOptions& o, bool need_ns) {
  cmd->add_option("--n0", o.n0, "burn-in anchor")->capture_default_str();
  auto* ns = cmd->add_option("--ns", o.ns, "end of the fit window");
  if (need_ns) ns->required();
  cmd->add_option("--q", o.q, "Laurent truncation order")->capture_default_str();
  cmd->add_option("--interval", o.interval, "confidence level of the prediction interval");
  cmd->add_option("--series-csv", o.series_csv, "CSV series of L_n, fitted L_n and log ratios");
}

json fit_json(const FlodanceFit& fit, Index n, const std::optional<double>& level) {
  const Prediction p = predict(fit, n);
  json out = {{"n0", fit.n0}, {"ns", fit.ns}, {"q", fit.q}, {"n", n},
              {"c0", fit.c0}, {"nu", fit.nu},  {"sigma_hat", fit.sigma_hat},
              {"L_hat", p.L_hat}, {"logdet_hat", p.logdet_hat}};
  // Residual diagnostics only; stationarity is not asserted.
  const Eigen::VectorXd& r = fit.residuals;
  if (r.size() > 0) {
    const double ss = r.squaredNorm();
    const double lag1 = r.size() > 1 && ss > 0.0 ? r.head(r.size() - 1).dot(r.tail(r.size() - 1)) / ss : 0.0;
    out["residuals"] = {{"count", r.size()},
                        {"rms", std::sqrt(ss / static_cast<double>(r.size()))},
                        {"max_abs", r.cwiseAbs().maxCoeff()},
                        {"lag1_autocorr", lag1}};
  }
  if (level) {
    const auto [lo, hi] = predict_interval(fit, n, *level);
    out["interval"] = {{"level", *level}, {"lower", lo}, {"upper", hi}};
  }
  return out;
}

void write_series_csv(const fs::path& path, const std::vector<double>& ell, Index d, const FlodanceFit& fit) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot create '" + path.string() + "'");
  out.precision(17);
  out << "n,L,L_hat,log_ratio\n";
  const Index count = static_cast<Index>(ell.size()) / d;
  const auto L = extract_L(ell, d, count);
  const auto ratios = count >= 2 ? scaling_ratio_trace(ell, d) : std::vector<double>{};
  for (Index n = 1; n <= count; ++n) {
    out << n << ',' << L[static_cast<std::size_t>(n - 1)] << ',' << predict(fit, n).L_hat << ',';
    if (n >= 2) out << ratios[static_cast<std::size_t>(n - 2)];
    out << '\n';
  }
}

int run_app(int argc, char** argv) {
  CLI::App app{"Out-of-core log-determinants, scaling-law extrapolation and baselines"};
  app.require_subcommand(1);
  bool as_json = false;
  app.add_flag("--json", as_json, "emit a single JSON object");

  // gen
  GenOptions gen;
  std::string gen_out;
  auto* gen_cmd = app.add_subcommand("gen", "generate a test matrix file");
  add_gen_options(gen_cmd, gen);
  gen_cmd->add_option("--out", gen_out, "output matrix file")->required();
  gen_cmd->add_flag("--json", as_json);

  // memdet
  MemdetOptions mem;
  std::string mem_in;
  auto* mem_cmd = app.add_subcommand("memdet", "exact log-determinant under a memory budget");
  mem_cmd->add_option("--in", mem_in, "input matrix file")->required();
  add_memdet_options(mem_cmd, mem);
  mem_cmd->add_flag("--json", as_json);

  // flodance
  FlodanceOptions flo;
  auto* flo_cmd = app.add_subcommand("flodance", "fit the scaling law to a prefix trace and extrapolate");
  flo_cmd->add_option("--prefix", flo.prefix, "prefix sidecar written by memdet")->required();
  flo_cmd->add_option("--d", flo.d, "outputs per data point")->capture_default_str();
  add_flodance_fit_options(flo_cmd, flo, true);
  flo_cmd->add_option("--predict", flo.predict, "data-point count to extrapolate to")->required();
  bool flo_cv = false;
  Index flo_holdout = 0;
  flo_cmd->add_flag("--cv", flo_cv, "score burn-in candidates {1,50,100,200,300,500} on a held-out tail");
  flo_cmd->add_option("--holdout", flo_holdout, "held-out tail length for --cv (default ns/5)");
  flo_cmd->add_flag("--json", as_json);

  // slq
  SlqConfig slq;
  std::string slq_in;
  auto* slq_cmd = app.add_subcommand("slq", "stochastic Lanczos quadrature estimate");
  slq_cmd->add_option("--in", slq_in)->required();
  slq_cmd->add_option("--lanczos", slq.lanczos_degree, "Lanczos degree l")->capture_default_str();
  slq_cmd->add_option("--samples", slq.samples, "probe count s")->capture_default_str();
  slq_cmd->add_option("--seed", slq.seed)->capture_default_str();
  slq_cmd->add_option("--nb", slq.num_blocks, "block grid streamed per product")->capture_default_str();
  slq_cmd->add_flag("--json", as_json);

  // blockdiag
  std::string bd_in;
  Index bd_d = 1;
  auto* bd_cmd = app.add_subcommand("blockdiag", "block-diagonal approximation");
  bd_cmd->add_option("--in", bd_in)->required();
  bd_cmd->add_option("--d", bd_d, "diagonal block size")->required();
  bd_cmd->add_flag("--json", as_json);

  // cost
  Index cost_m = 0, cost_nb = 0;
  std::string cost_case = "gen";
  auto* cost_cmd = app.add_subcommand("cost", "analytical FLOP and I/O counts");
  cost_cmd->add_option("--m", cost_m)->required();
  cost_cmd->add_option("--nb", cost_nb)->required();
  cost_cmd->add_option("--case", cost_case, "gen | sym")->capture_default_str();
  cost_cmd->add_flag("--json", as_json);

  // pipeline
  GenOptions pgen;
  MemdetOptions pmem;
  FlodanceOptions pflo;
  std::string p_matrix;
  bool p_keep = false;
  auto* pipe_cmd = app.add_subcommand("pipeline", "generate, factorize, fit and extrapolate in one run");
  add_gen_options(pipe_cmd, pgen);
  add_memdet_options(pipe_cmd, pmem);
  add_flodance_fit_options(pipe_cmd, pflo, true);
  pipe_cmd->add_option("--predict", pflo.predict, "data-point count to extrapolate to (default n)");
  pipe_cmd->add_option("--matrix", p_matrix, "where to write the generated matrix (default scratch dir)");
  pipe_cmd->add_flag("--keep", p_keep, "keep the generated matrix file");
  pipe_cmd->add_flag("--json", as_json);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  if (gen_cmd->parsed()) {
    const GenConfig config = gen.config();
    const MatrixFile file = gen_gram(config, gen_out);
    json out = envelope("gen");
    out.update({{"kind", to_string(config.kind)},
                {"m", file.size()},
                {"dtype", to_string(file.dtype())},
                {"symmetry", to_string(file.symmetry())},
                {"seed", config.seed},
                {"out", gen_out}});
    emit(out, as_json);
  } else if (mem_cmd->parsed()) {
    const MatrixFile file = MatrixFile::open(mem_in);
    const MemdetOutcome outcome = run_memdet(file, mem);
    json out = envelope("memdet");
    out.update(outcome.body);
    emit(out, as_json);
    if (outcome.sign == 0) {
      std::cerr << "detscale: matrix is singular\n";
      return kNumerical;
    }
  } else if (flo_cmd->parsed()) {
    const PrefixTrace prefix = read_prefix_file(flo.prefix);
    const auto L = extract_L(prefix.logabsdet, flo.d, flo.ns);
    json out = envelope("flodance");
    if (flo_cv) {
      const Index holdout = flo_holdout > 0 ? flo_holdout : std::max<Index>(1, flo.ns / 5);
      json scores = json::array();
      for (const auto& s : cross_validate_burn_in(L, flo.ns, flo.q, holdout)) {
        scores.push_back({{"n0", s.n0}, {"score", s.score}});
      }
      out["burn_in_scores"] = scores;
    }
    const FlodanceFit fit = fit_flodance(L, flo.n0, flo.ns, flo.q);
    out.update(fit_json(fit, flo.predict, flo.interval));
    if (!flo.series_csv.empty()) write_series_csv(flo.series_csv, prefix.logabsdet, flo.d, fit);
    emit(out, as_json);
  } else if (slq_cmd->parsed()) {
    const MatrixFile file = MatrixFile::open(slq_in);
    const SlqResult r = slq_logdet(file, slq);
    json out = envelope("slq");
    out.update({{"m", file.size()},
                {"lanczos", slq.lanczos_degree},
                {"samples", slq.samples},
                {"seed", slq.seed},
                {"logdet", number(r.logdet)},
                {"matvecs", r.matvecs},
                {"blocks_read", r.blocks_read}});
    emit(out, as_json);
  } else if (bd_cmd->parsed()) {
    const MatrixFile file = MatrixFile::open(bd_in);
    const BlockDiagonalResult r = block_diagonal_logdet(file, bd_d);
    json out = envelope("blockdiag");
    out.update({{"m", file.size()}, {"d", bd_d}, {"logabsdet", number(r.logabsdet)}, {"sign", r.sign}});
    emit(out, as_json);
  } else if (cost_cmd->parsed()) {
    MatrixCase mc;
    if (cost_case == "gen") {
      mc = MatrixCase::generic;
    } else if (cost_case == "sym") {
      mc = MatrixCase::symmetric;
    } else {
      throw DomainError("case must be gen or sym");
    }
    const CostBreakdown c = predicted_cost(cost_m, cost_nb, mc);
    auto op = [](const OperationCost& o) {
      return json{{"count", rational(o.count)}, {"flops_each", rational(o.flops_each)}, {"total", rational(o.total())}};
    };
    json out = envelope("cost");
    out.update({{"case", to_string(mc)},
                {"m", c.m},
                {"n_b", c.num_blocks},
                {"b", c.block_size},
                {"decomposition", op(c.decomposition)},
                {"lower_solve", op(c.lower_solve)},
                {"upper_solve", op(c.upper_solve)},
                {"full_multiply", op(c.full_multiply)},
                {"gramian_multiply", op(c.gramian_multiply)},
                {"total_flops", rational(c.total_flops)},
                {"blocks_read", c.blocks_read},
                {"blocks_written", c.blocks_written},
                {"memory_blocks", c.memory_blocks},
                {"scratch_slots", c.scratch_slots}});
    emit(out, as_json);
  } else if (pipe_cmd->parsed()) {
    const GenConfig config = pgen.config();
    const fs::path scratch = pmem.scratch_dir.empty() ? default_scratch_dir() : fs::path(pmem.scratch_dir);
    const fs::path matrix_path =
        p_matrix.empty() ? scratch / ("detscale-pipeline-" + std::to_string(::getpid()) + ".mat") : fs::path(p_matrix);
    const fs::path prefix_path = matrix_path.string() + ".prefix";
    struct Cleanup {
      std::vector<fs::path> paths;
      ~Cleanup() {
        std::error_code ec;
        for (const auto& p : paths) fs::remove(p, ec);
      }
    } cleanup;
    if (!p_keep) cleanup.paths = {matrix_path, prefix_path};

    const auto t0 = std::chrono::steady_clock::now();
    const MatrixFile file = gen_gram(config, matrix_path);
    const double gen_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (pmem.prefix_out.empty()) pmem.prefix_out = prefix_path.string();
    if (pmem.matrix_case == "auto" && file.symmetry() == Symmetry::generic) {
      throw DomainError("pipeline needs a symmetric matrix kind for prefix log-determinants");
    }
    const MemdetOutcome outcome = run_memdet(file, pmem);
    const bool kernel = config.kind == GenKind::matern_lmc || config.kind == GenKind::rbf;
    const Index d = kernel ? config.d : 1;
    const Index n_total = config.order() / d;
    const Index n_predict = pflo.predict > 0 ? pflo.predict : n_total;
    const auto L = extract_L(outcome.prefix->logabsdet, d, pflo.ns);
    const FlodanceFit fit = fit_flodance(L, pflo.n0, pflo.ns, pflo.q);
    if (!pflo.series_csv.empty()) write_series_csv(pflo.series_csv, outcome.prefix->logabsdet, d, fit);

    json out = envelope("pipeline");
    out["gen"] = {{"kind", to_string(config.kind)}, {"n", config.n}, {"d", config.d}, {"m", file.size()},
                  {"seed", config.seed}, {"wall_seconds", gen_seconds}};
    out["memdet"] = outcome.body;
    json flo_json = fit_json(fit, n_predict, pflo.interval);
    out["flodance"] = flo_json;
    if (n_predict <= n_total) {
      const double truth = outcome.prefix->logabsdet[static_cast<std::size_t>(n_predict * d - 1)];
      const double estimate = predict(fit, n_predict).logdet_hat;
      out["truth"] = truth;
      out["rel_error"] = truth == estimate ? 0.0 : std::abs(estimate - truth) / std::abs(truth);
    }
    emit(out, as_json);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_app(argc, argv);
  } catch (const DomainError& e) {
    std::cerr << "detscale: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericalError& e) {
    std::cerr << "detscale: numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const IoError& e) {
    std::cerr << "detscale: I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "detscale: I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "detscale: " << e.what() << '\n';
    return kUsage;
  }
}
