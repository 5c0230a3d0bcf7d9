#include "detscale/schedule.hpp"

namespace detscale {

std::string to_string(MatrixCase matrix_case) {
  return matrix_case == MatrixCase::generic ? "generic" : "symmetric";
}

std::vector<ScheduleStep> schedule(Index num_blocks, MatrixCase matrix_case, Index stage) {
  if (num_blocks < 1 || stage < 0 || stage + 1 >= num_blocks) {
    throw DomainError("schedule requires 0 <= stage < num_blocks - 1");
  }
  const Index k = stage;
  const Index last = num_blocks - 1;
  std::vector<ScheduleStep> steps;

  if (matrix_case == MatrixCase::generic) {
    for (Index i = last; i >= k + 1; --i) {
      const bool forward = (i - k) % 2 == 0;
      const Index j_start = forward ? k + 1 : last;
      const Index j_end = forward ? last : k + 1;
      const Index step = forward ? 1 : -1;
      for (Index j = j_start;; j += step) {
        ScheduleStep s;
        s.block = {i, j};
        s.loads_left = j == j_start;
        s.loads_right = i == last || j != j_start;
        s.to_pivot = i == k + 1 && j == k + 1;
        steps.push_back(s);
        if (j == j_end) break;
      }
    }
    return steps;
  }

  for (Index j = last; j >= k + 1; --j) {
    // Row order: j itself, then k+1 .. j-1.
    for (Index r = 0; r < j - k; ++r) {
      const Index i = r == 0 ? j : k + r;
      ScheduleStep s;
      s.block = {i, j};
      s.loads_left = i != j;
      s.loads_right = j == last && i == j;
      s.to_pivot = i == k + 1 && j == k + 1;
      steps.push_back(s);
    }
  }
  return steps;
}

bool shares_operand(MatrixCase matrix_case, BlockIndex a, BlockIndex b) {
  if (matrix_case == MatrixCase::generic) return a.row == b.row || a.col == b.col;
  return a.row == b.row || a.row == b.col || a.col == b.row || a.col == b.col;
}

}  // namespace detscale
