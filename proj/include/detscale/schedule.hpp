#pragma once

#include <vector>

#include "detscale/block_store.hpp"

namespace detscale {

enum class MatrixCase { generic, symmetric };

std::string to_string(MatrixCase matrix_case);

/// One Schur-complement update in the stage-k processing order.
///
/// The left operand is the block indexed by the target's row (C, holding
/// M_ik or M_ki) and the right operand the block indexed by its column (B,
/// holding M_kj). `loads_left` / `loads_right` say whether the operand has
/// to be brought in from disk for this step or is already resident.
struct ScheduleStep {
  BlockIndex block;
  bool loads_left = false;
  bool loads_right = false;
  /// Target is M_{k+1,k+1}, which becomes the next stage's pivot block.
  bool to_pivot = false;
};

/// Inner-block order for stage k (zero-based, 0 <= k < num_blocks - 1).
///
/// Generic: rows bottom-up, columns snaking in alternating directions.
/// Symmetric: columns right-to-left; within column j the diagonal block
/// first, then rows k+1 .. j-1 (upper triangle only). Both orders visit
/// every inner block once, keep one operand resident between consecutive
/// steps and end at (k+1, k+1).
std::vector<ScheduleStep> schedule(Index num_blocks, MatrixCase matrix_case, Index stage);

/// True when the two blocks can be processed back to back while reusing a
/// resident operand: a shared row or column for generic matrices, a shared
/// graph vertex {i, j} for symmetric ones.
bool shares_operand(MatrixCase matrix_case, BlockIndex a, BlockIndex b);

}  // namespace detscale
