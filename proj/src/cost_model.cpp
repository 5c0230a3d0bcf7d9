#include "detscale/cost_model.hpp"

#include <cstdlib>

namespace detscale {

Rational::Rational(std::int64_t num, std::int64_t den) {
  if (den == 0) throw DomainError("rational with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
  num_ = g == 0 ? 0 : num / g;
  den_ = g == 0 ? 1 : den / g;
}

std::string Rational::str() const {
  return den_ == 1 ? std::to_string(num_) : std::to_string(num_) + "/" + std::to_string(den_);
}

Rational operator+(Rational a, Rational b) {
  const std::int64_t g = std::gcd(a.den_, b.den_);
  return Rational(a.num_ * (b.den_ / g) + b.num_ * (a.den_ / g), a.den_ / g * b.den_);
}

Rational operator-(Rational a, Rational b) { return a + Rational(-b.num_, b.den_); }

Rational operator*(Rational a, Rational b) {
  const std::int64_t g1 = std::gcd(a.num_ < 0 ? -a.num_ : a.num_, b.den_);
  const std::int64_t g2 = std::gcd(b.num_ < 0 ? -b.num_ : b.num_, a.den_);
  const std::int64_t d1 = g1 == 0 ? 1 : g1;
  const std::int64_t d2 = g2 == 0 ? 1 : g2;
  return Rational((a.num_ / d1) * (b.num_ / d2), (a.den_ / d2) * (b.den_ / d1));
}

namespace {

// c3 x^3 + c2 x^2 + c1 x + c0
Rational cubic(std::int64_t x, Rational c3, Rational c2, Rational c1, Rational c0 = 0) {
  const Rational r(x);
  return c3 * r * r * r + c2 * r * r + c1 * r + c0;
}

std::int64_t as_integer(const Rational& r, const char* what) {
  if (!r.is_integer()) throw DomainError(std::string(what) + " is not an integer: " + r.str());
  return r.num();
}

}  // namespace

Rational dense_factorization_flops(Index m, MatrixCase matrix_case) {
  if (matrix_case == MatrixCase::generic) {
    return cubic(m, Rational(1, 3), Rational(-1, 2), Rational(1, 6));
  }
  return cubic(m, Rational(1, 6), Rational(-1, 4), Rational(1, 12));
}

std::int64_t predicted_blocks_read(Index nb, MatrixCase matrix_case) {
  if (matrix_case == MatrixCase::generic) {
    return as_integer(cubic(nb, Rational(2, 3), -1, Rational(4, 3)), "read count");
  }
  return as_integer(cubic(nb, Rational(1, 3), Rational(-1, 2), Rational(7, 6)), "read count");
}

std::int64_t predicted_blocks_written(Index nb, MatrixCase matrix_case) {
  if (nb <= 2) return 0;
  if (matrix_case == MatrixCase::generic) {
    return as_integer(cubic(nb, Rational(1, 3), 0, Rational(-4, 3), -1), "write count");
  }
  return as_integer(cubic(nb, Rational(1, 6), Rational(1, 2), Rational(-11, 3), 4), "write count");
}

std::int64_t scratch_capacity(Index nb, MatrixCase matrix_case) {
  if (nb <= 2) return 0;
  if (matrix_case == MatrixCase::generic) return nb * nb - nb - 1;
  return nb * (nb + 1) / 2 - 4;
}

std::int64_t resident_tiles(Index nb) {
  if (nb == 1) return 1;
  return nb == 2 ? 3 : 4;
}

CostBreakdown predicted_cost(Index m, Index nb, MatrixCase matrix_case) {
  if (m < 1 || nb < 1) throw DomainError("cost model needs m >= 1 and n_b >= 1");
  if (m % nb != 0) {
    throw DomainError("cost model is defined only when n_b divides m (m = " + std::to_string(m) +
                      ", n_b = " + std::to_string(nb) + ")");
  }
  CostBreakdown cost;
  cost.matrix_case = matrix_case;
  cost.m = m;
  cost.num_blocks = nb;
  const Index b = m / nb;
  cost.block_size = b;

  const Rational pairs = cubic(nb, 0, Rational(1, 2), Rational(-1, 2));
  const Rational solve_each = cubic(b, Rational(1, 2), Rational(-1, 2), 0);
  const Rational b3(b * b * b);

  cost.lower_solve = {pairs, solve_each};
  if (matrix_case == MatrixCase::generic) {
    cost.decomposition = {nb, cubic(b, Rational(1, 3), Rational(-1, 2), Rational(1, 6))};
    cost.upper_solve = {pairs, solve_each};
    cost.full_multiply = {cubic(nb, Rational(1, 3), Rational(-1, 2), Rational(1, 6)), b3};
    cost.gramian_multiply = {0, 0};
  } else {
    cost.decomposition = {nb, cubic(b, Rational(1, 6), Rational(-1, 4), Rational(1, 12))};
    cost.upper_solve = {0, 0};
    cost.full_multiply = {cubic(nb, Rational(1, 6), Rational(-1, 2), Rational(1, 3)), b3};
    cost.gramian_multiply = {pairs, b3 * Rational(1, 2)};
  }
  cost.total_flops = cost.decomposition.total() + cost.lower_solve.total() +
                     cost.upper_solve.total() + cost.full_multiply.total() +
                     cost.gramian_multiply.total();

  cost.blocks_read = predicted_blocks_read(nb, matrix_case);
  cost.blocks_written = predicted_blocks_written(nb, matrix_case);
  cost.memory_blocks = resident_tiles(nb);
  cost.scratch_slots = scratch_capacity(nb, matrix_case);
  return cost;
}

}  // namespace detscale
