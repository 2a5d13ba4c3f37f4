#include "balsparse/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace balsparse {

namespace {

// Tolerance for products such as 100 * (1 - 0.9) that land a hair above or
// below an integer.
constexpr double kCountSlack = 1e-9;

void require_sparsity(double sparsity) {
  if (!(sparsity >= 0.0 && sparsity < 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "sparsity must lie in [0, 1), got " + std::to_string(sparsity));
  }
}

std::size_t ceil_count(double x) { return static_cast<std::size_t>(std::ceil(x - kCountSlack)); }
std::size_t floor_count(double x) { return static_cast<std::size_t>(std::floor(x + kCountSlack)); }

// Indices of `scores` ordered by descending score, ascending index on ties.
std::vector<std::size_t> rank_descending(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

BalancedSparseMatrix encode_masked(const DenseMatrix& m, const PruneMask& mask, std::size_t block_size,
                                   std::size_t k) {
  const std::size_t block_num = m.cols() / block_size;
  std::vector<std::uint32_t> offsets;
  std::vector<float> values;
  offsets.reserve(m.rows() * block_num * k);
  values.reserve(m.rows() * block_num * k);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (mask.kept(r, c)) {
        offsets.push_back(static_cast<std::uint32_t>(c % block_size));
        values.push_back(m(r, c));
      }
    }
  }
  return {m.rows(), m.cols(), block_size, k, std::move(offsets), std::move(values)};
}

}  // namespace

std::size_t PruneMask::kept_count() const noexcept {
  return static_cast<std::size_t>(std::ranges::count(keep_, static_cast<unsigned char>(1)));
}

bool PruneMask::subset_of(const PruneMask& outer) const {
  if (rows_ != outer.rows_ || cols_ != outer.cols_) return false;
  for (std::size_t i = 0; i < keep_.size(); ++i) {
    if (keep_[i] != 0 && outer.keep_[i] == 0) return false;
  }
  return true;
}

double schedule_value(const PruneSchedule& schedule, std::size_t iteration) {
  if (schedule.num_iterations == 0) throw Error(ErrorKind::kInvalidArgument, "schedule needs at least one iteration");
  if (iteration > schedule.num_iterations) {
    throw Error(ErrorKind::kIterationOutOfRange, "iteration " + std::to_string(iteration) + " > " +
                                                     std::to_string(schedule.num_iterations));
  }
  const double progress = static_cast<double>(iteration) / static_cast<double>(schedule.num_iterations);
  switch (schedule.shape) {
    case ScheduleShape::kLinear:
      return schedule.target_sparsity * progress;
    case ScheduleShape::kCubic: {
      const double remaining = 1.0 - progress;
      return schedule.target_sparsity * (1.0 - remaining * remaining * remaining);
    }
  }
  return schedule.target_sparsity;
}

std::size_t kept_per_block(std::size_t block_size, double sparsity) {
  require_sparsity(sparsity);
  return static_cast<std::size_t>(std::llround(static_cast<double>(block_size) * (1.0 - sparsity)));
}

BalancedStep balanced_prune_step(const DenseMatrix& m, std::size_t block_num, double sparsity,
                                 const PruneMask* prior) {
  if (prior != nullptr && (prior->rows() != m.rows() || prior->cols() != m.cols())) {
    throw Error(ErrorKind::kDimensionMismatch, "survivor mask shape does not match the matrix");
  }
  require_sparsity(sparsity);
  if (block_num == 0 || m.cols() % block_num != 0) {
    throw Error(ErrorKind::kNonDivisibleColumns,
                "cols " + std::to_string(m.cols()) + " not divisible by block_num " + std::to_string(block_num));
  }
  const std::size_t block_size = m.cols() / block_num;
  const std::size_t k = kept_per_block(block_size, sparsity);
  PruneMask mask(m.rows(), m.cols(), false);
  std::vector<double> scores(block_size);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t b = 0; b < block_num; ++b) {
      const std::size_t base = b * block_size;
      for (std::size_t j = 0; j < block_size; ++j) {
        // Entries outside `prior` rank below every survivor.
        const bool alive = prior == nullptr || prior->kept(r, base + j);
        scores[j] = alive ? std::abs(static_cast<double>(m(r, base + j))) : -1.0;
      }
      const auto order = rank_descending(scores);
      for (std::size_t t = 0; t < k; ++t) mask.set(r, base + order[t], true);
    }
  }
  const double achieved = 1.0 - static_cast<double>(k) / static_cast<double>(block_size);
  return {std::move(mask), k, achieved};
}

BalancedSparseMatrix balanced_prune(const DenseMatrix& m, std::size_t block_num, const PruneSchedule& schedule,
                                    const RetrainCallback& retrain, BalancedPruneTrace* trace) {
  require_sparsity(schedule.target_sparsity);
  if (block_num == 0 || m.cols() % block_num != 0) {
    throw Error(ErrorKind::kNonDivisibleColumns,
                "cols " + std::to_string(m.cols()) + " not divisible by block_num " + std::to_string(block_num));
  }
  DenseMatrix current = m;
  PruneMask survivors(m.rows(), m.cols(), true);
  std::size_t k = m.cols() / block_num;
  for (std::size_t it = 1; it <= schedule.num_iterations; ++it) {
    auto step = balanced_prune_step(current, block_num, schedule_value(schedule, it), &survivors);
    survivors = std::move(step.mask);
    k = step.k;
    survivors.apply(current);
    if (retrain) {
      DenseMatrix updated = retrain(current, survivors);
      if (updated.rows() != current.rows() || updated.cols() != current.cols()) {
        throw Error(ErrorKind::kCallbackDimensionMismatch,
                    "retrain returned " + std::to_string(updated.rows()) + "x" + std::to_string(updated.cols()) +
                        ", expected " + std::to_string(current.rows()) + "x" + std::to_string(current.cols()));
      }
      for (std::size_t r = 0; r < updated.rows(); ++r) {
        for (std::size_t c = 0; c < updated.cols(); ++c) {
          if (!survivors.kept(r, c) && updated(r, c) != 0.0f) {
            throw Error(ErrorKind::kCallbackRevivedMaskedEntry,
                        "retrain wrote a nonzero at masked (" + std::to_string(r) + ", " + std::to_string(c) + ")");
          }
        }
      }
      current = std::move(updated);
    }
    if (trace != nullptr) trace->masks.push_back(survivors);
  }
  return encode_masked(current, survivors, m.cols() / block_num, k);
}

PruneMask random_prune(const DenseMatrix& m, double sparsity) {
  require_sparsity(sparsity);
  const auto values = m.values();
  std::vector<double> scores(values.size());
  std::ranges::transform(values, scores.begin(), [](float v) { return std::abs(static_cast<double>(v)); });
  const std::size_t keep = ceil_count(static_cast<double>(values.size()) * (1.0 - sparsity));
  const auto order = rank_descending(scores);
  PruneMask mask(m.rows(), m.cols(), false);
  for (std::size_t i = 0; i < keep; ++i) mask.set(order[i] / m.cols(), order[i] % m.cols(), true);
  return mask;
}

PruneMask block_prune(const DenseMatrix& m, std::size_t bh, std::size_t bw, double sparsity,
                      TileCriterion criterion) {
  require_sparsity(sparsity);
  if (bh == 0 || bw == 0 || m.rows() % bh != 0 || m.cols() % bw != 0) {
    throw Error(ErrorKind::kNonDivisibleDims, std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                                                  " not divisible into " + std::to_string(bh) + "x" +
                                                  std::to_string(bw) + " tiles");
  }
  const std::size_t tile_rows = m.rows() / bh;
  const std::size_t tile_cols = m.cols() / bw;
  std::vector<double> scores(tile_rows * tile_cols, 0.0);
  for (std::size_t tr = 0; tr < tile_rows; ++tr) {
    for (std::size_t tc = 0; tc < tile_cols; ++tc) {
      double score = 0.0;
      for (std::size_t r = tr * bh; r < (tr + 1) * bh; ++r) {
        for (std::size_t c = tc * bw; c < (tc + 1) * bw; ++c) {
          const double a = std::abs(static_cast<double>(m(r, c)));
          score = criterion == TileCriterion::kMax ? std::max(score, a) : score + a;
        }
      }
      if (criterion == TileCriterion::kMean) score /= static_cast<double>(bh * bw);
      scores[tr * tile_cols + tc] = score;
    }
  }
  const std::size_t keep = ceil_count(static_cast<double>(scores.size()) * (1.0 - sparsity));
  const auto order = rank_descending(scores);
  PruneMask mask(m.rows(), m.cols(), false);
  for (std::size_t i = 0; i < keep; ++i) {
    const std::size_t tr = order[i] / tile_cols;
    const std::size_t tc = order[i] % tile_cols;
    for (std::size_t r = tr * bh; r < (tr + 1) * bh; ++r) {
      for (std::size_t c = tc * bw; c < (tc + 1) * bw; ++c) mask.set(r, c, true);
    }
  }
  return mask;
}

PruneMask vector_prune(const DenseMatrix& m, double sparsity, VectorAxis axis) {
  require_sparsity(sparsity);
  const bool by_row = axis == VectorAxis::kRow;
  const std::size_t n = by_row ? m.rows() : m.cols();
  const std::size_t len = by_row ? m.cols() : m.rows();
  std::vector<double> scores(n, 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) scores[by_row ? r : c] += std::abs(static_cast<double>(m(r, c)));
  }
  for (auto& s : scores) s /= static_cast<double>(len);
  const std::size_t drop = floor_count(static_cast<double>(n) * sparsity);
  const auto order = rank_descending(scores);
  PruneMask mask(m.rows(), m.cols(), true);
  for (std::size_t i = n - drop; i < n; ++i) {
    for (std::size_t j = 0; j < len; ++j) {
      if (by_row) {
        mask.set(order[i], j, false);
      } else {
        mask.set(j, order[i], false);
      }
    }
  }
  return mask;
}

}  // namespace balsparse
