#pragma once

#include <cstdint>
#include <numeric>
#include <string>

#include "detscale/schedule.hpp"

namespace detscale {

/// Exact rational in lowest terms with a positive denominator. Products of
/// matrix dimensions stay well inside int64 for m up to about 10^5.
class Rational {
public:
  constexpr Rational() = default;
  constexpr Rational(std::int64_t num) : num_(num) {}  // NOLINT(implicit)
  Rational(std::int64_t num, std::int64_t den);

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }
  bool is_integer() const { return den_ == 1; }
  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }
  std::string str() const;

  friend Rational operator+(Rational a, Rational b);
  friend Rational operator-(Rational a, Rational b);
  friend Rational operator*(Rational a, Rational b);
  friend bool operator==(const Rational&, const Rational&) = default;

private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

/// How often an operation runs and what one run costs, in FMA FLOPs.
struct OperationCost {
  Rational count;
  Rational flops_each;
  Rational total() const { return count * flops_each; }
};

/// Analytical cost of one MEMDET run on an m x m matrix split into an
/// n_b x n_b grid of uniform blocks (n_b must divide m).
struct CostBreakdown {
  MatrixCase matrix_case = MatrixCase::generic;
  Index m = 0;
  Index num_blocks = 0;
  Index block_size = 0;

  OperationCost decomposition;
  OperationCost lower_solve;
  OperationCost upper_solve;  // generic only
  OperationCost full_multiply;
  OperationCost gramian_multiply;  // symmetric only
  Rational total_flops;

  std::int64_t blocks_read = 0;
  std::int64_t blocks_written = 0;
  std::int64_t memory_blocks = 0;
  std::int64_t scratch_slots = 0;
};

CostBreakdown predicted_cost(Index m, Index num_blocks, MatrixCase matrix_case);

/// m^3/3 - m^2/2 + m/6 (generic) or m^3/6 - m^2/4 + m/12 (symmetric).
Rational dense_factorization_flops(Index m, MatrixCase matrix_case);

std::int64_t predicted_blocks_read(Index num_blocks, MatrixCase matrix_case);
std::int64_t predicted_blocks_written(Index num_blocks, MatrixCase matrix_case);
/// Scratchpad slots that must be allocated on disk.
std::int64_t scratch_capacity(Index num_blocks, MatrixCase matrix_case);
/// Tiles resident in memory: A alone, then A, B, C, then A, B, C, S.
std::int64_t resident_tiles(Index num_blocks);

}  // namespace detscale
