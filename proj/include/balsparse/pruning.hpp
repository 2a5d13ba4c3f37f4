#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "balsparse/format.hpp"

namespace balsparse {

/// Boolean keep-mask with the shape of the matrix it was derived from.
class PruneMask {
 public:
  PruneMask(std::size_t rows, std::size_t cols, bool keep = true) : rows_(rows), cols_(cols), keep_(rows * cols, keep) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  bool kept(std::size_t r, std::size_t c) const { return keep_[r * cols_ + c] != 0; }
  void set(std::size_t r, std::size_t c, bool keep) { keep_[r * cols_ + c] = keep ? 1 : 0; }

  std::size_t kept_count() const noexcept;
  double sparsity() const noexcept {
    return 1.0 - static_cast<double>(kept_count()) / static_cast<double>(rows_ * cols_);
  }

  /// True when every kept entry of this mask is also kept by `outer`.
  bool subset_of(const PruneMask& outer) const;

  /// Zeros the masked entries of `m` in place.
  template <typename T>
  void apply(Matrix<T>& m) const {
    auto values = m.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (keep_[i] == 0) values[i] = T{};
    }
  }

  friend bool operator==(const PruneMask&, const PruneMask&) = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<unsigned char> keep_;
};

enum class ScheduleShape { kCubic, kLinear };

/// Gradual sparsity trajectory from 0 at iteration 0 to `target_sparsity` at
/// `num_iterations`, with nonincreasing per-iteration increments.
struct PruneSchedule {
  double target_sparsity = 0.0;
  std::size_t num_iterations = 1;
  ScheduleShape shape = ScheduleShape::kCubic;
};

/// Throws kIterationOutOfRange when `iteration > num_iterations`.
double schedule_value(const PruneSchedule& schedule, std::size_t iteration);

/// Per-block survivor count for a requested sparsity: round(block_size * (1 - sparsity)).
std::size_t kept_per_block(std::size_t block_size, double sparsity);

struct BalancedStep {
  PruneMask mask;
  std::size_t k;
  double achieved_sparsity;
};

/// Splits each row into `block_num` equal blocks and keeps the k largest
/// magnitudes in every block; equal magnitudes favour the lower column.
/// With `prior`, only its survivors compete, so the result is a subset of it
/// (callers must not raise k above the survivors left in a block).
BalancedStep balanced_prune_step(const DenseMatrix& m, std::size_t block_num, double sparsity,
                                 const PruneMask* prior = nullptr);

/// Receives the masked matrix after each pruning step and returns the
/// retrained matrix. It must keep the shape and leave masked entries at zero.
using RetrainCallback = std::function<DenseMatrix(const DenseMatrix&, const PruneMask&)>;

struct BalancedPruneTrace {
  std::vector<PruneMask> masks;  // one per schedule iteration 1..n
};

/// Iterative balance-aware pruning along `schedule`. Each iteration masks via
/// `balanced_prune_step` (restricted to the current survivors), then calls
/// `retrain` when present. `trace`, if given, receives every mask.
BalancedSparseMatrix balanced_prune(const DenseMatrix& m, std::size_t block_num, const PruneSchedule& schedule,
                                    const RetrainCallback& retrain = {}, BalancedPruneTrace* trace = nullptr);

/// Global magnitude pruning: keeps ceil(rows*cols*(1-sparsity)) entries,
/// ties resolved by (row, col) ascending.
PruneMask random_prune(const DenseMatrix& m, double sparsity);

enum class TileCriterion { kMax, kMean };

/// Scores bh x bw tiles by max or mean |value| and keeps the top
/// ceil(tiles*(1-sparsity)) tiles whole. Ties keep the lower tile index.
PruneMask block_prune(const DenseMatrix& m, std::size_t bh, std::size_t bw, double sparsity,
                      TileCriterion criterion = TileCriterion::kMax);

enum class VectorAxis { kRow, kCol };

/// Masks the floor(n*sparsity) rows (or columns) with the lowest mean |value|.
PruneMask vector_prune(const DenseMatrix& m, double sparsity, VectorAxis axis);

}  // namespace balsparse
