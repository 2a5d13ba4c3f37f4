#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "balsparse/pruning.hpp"
#include "balsparse/theory.hpp"
#include "balsparse/trainer.hpp"

namespace balsparse {

inline constexpr std::size_t kDefaultBlockNum = 32;

struct PruneFileOptions {
  trainer::PatternKind pattern = trainer::PatternKind::kBalanced;
  double sparsity = 0.9;
  std::size_t block_num = kDefaultBlockNum;  // balanced
  std::size_t tile_rows = 4;                 // block
  std::size_t tile_cols = 4;                 // block
  TileCriterion tile_criterion = TileCriterion::kMax;
  VectorAxis vector_axis = VectorAxis::kRow;
  ScheduleShape schedule = ScheduleShape::kCubic;
  std::size_t iterations = 1;  // balanced
  /// Zero-pad columns up to a multiple of block_num instead of failing.
  bool pad = false;
};

struct PruneReport {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t padded_cols = 0;  // equals cols unless padding was applied
  std::optional<std::size_t> block_size;  // balanced output only
  std::optional<std::size_t> k;
  double achieved_sparsity = 0.0;
};

/// Loads a dense or balanced `.bsm` file, prunes it and writes the result:
/// a balanced container for the balanced pattern, a dense container
/// otherwise. Errors propagate as `balsparse::Error`.
PruneReport prune_file(const std::filesystem::path& input, const std::filesystem::path& output,
                       const PruneFileOptions& options);

void print(std::ostream& out, const PruneReport& report);

struct TheoryCheckReport {
  theory::TheoryConfig config;
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  theory::DistortionStats random;
  theory::DistortionStats balanced;
  double predicted_random = 0.0;  // 0 when nothing is pruned
  double predicted_balanced = 0.0;
  double predicted_ratio = 1.0;
  double empirical_ratio = 1.0;
  bool random_mean_ok = false;    // |mean| <= 3 standard errors
  bool balanced_mean_ok = false;
  bool ratio_ok = false;          // within 10% of the predicted ratio
  std::optional<theory::ScaleDiagnostic> scale;

  bool passed() const noexcept { return random_mean_ok && balanced_mean_ok && ratio_ok; }
};

inline constexpr double kMeanToleranceSe = 3.0;
inline constexpr double kRatioTolerance = 0.10;

/// Runs the Monte Carlo oracle and compares it against the closed forms.
/// The sigma_x scaling diagnostic runs whenever something is pruned.
TheoryCheckReport theory_check(const theory::TheoryConfig& config, std::size_t trials, std::uint64_t seed,
                               std::size_t workers = 1);

void print(std::ostream& out, const TheoryCheckReport& report);

}  // namespace balsparse
