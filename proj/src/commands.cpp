#include "balsparse/commands.hpp"

#include <cmath>
#include <tuple>
#include <ostream>

#include "balsparse/error.hpp"
#include "balsparse/format.hpp"

namespace balsparse {

PruneReport prune_file(const std::filesystem::path& input, const std::filesystem::path& output,
                       const PruneFileOptions& options) {
  DenseMatrix m = load_as_dense(input);
  PruneReport report;
  report.rows = m.rows();
  report.cols = m.cols();
  if (options.pattern == trainer::PatternKind::kBalanced && options.pad && options.block_num != 0) {
    m = pad_columns(m, options.block_num);
  }
  report.padded_cols = m.cols();

  switch (options.pattern) {
    case trainer::PatternKind::kBalanced: {
      const PruneSchedule schedule{options.sparsity, options.iterations, options.schedule};
      const auto pruned = balanced_prune(m, options.block_num, schedule);
      report.block_size = pruned.block_size();
      report.k = pruned.k();
      report.achieved_sparsity = pruned.sparsity();
      save(pruned, output);
      return report;
    }
    case trainer::PatternKind::kRandom:
      random_prune(m, options.sparsity).apply(m);
      break;
    case trainer::PatternKind::kBlock:
      block_prune(m, options.tile_rows, options.tile_cols, options.sparsity, options.tile_criterion).apply(m);
      break;
    case trainer::PatternKind::kVector:
      vector_prune(m, options.sparsity, options.vector_axis).apply(m);
      break;
  }
  std::size_t zeros = 0;
  for (const float v : m.values()) zeros += v == 0.0f ? 1 : 0;
  report.achieved_sparsity = static_cast<double>(zeros) / static_cast<double>(m.size());
  save(m, output);
  return report;
}

void print(std::ostream& out, const PruneReport& report) {
  out << "rows " << report.rows << "\ncols " << report.cols << '\n';
  if (report.padded_cols != report.cols) out << "padded cols " << report.padded_cols << '\n';
  if (report.block_size) {
    out << "block size " << *report.block_size << "\nblocks per row " << report.padded_cols / *report.block_size
        << "\nk " << *report.k << '\n';
  }
  out << "achieved sparsity " << report.achieved_sparsity << '\n';
}

TheoryCheckReport theory_check(const theory::TheoryConfig& config, std::size_t trials, std::uint64_t seed,
                               std::size_t workers) {
  using theory::Pattern;
  config.validate();
  TheoryCheckReport report;
  report.config = config;
  report.trials = trials;
  report.seed = seed;
  std::tie(report.random, report.balanced) = theory::monte_carlo_distortion(config, trials, seed, workers);
  report.random_mean_ok = std::abs(report.random.mean) <= kMeanToleranceSe * report.random.std_error();
  report.balanced_mean_ok = std::abs(report.balanced.mean) <= kMeanToleranceSe * report.balanced.std_error();
  if (config.r1() == 0) {
    // Nothing pruned: Z is identically zero and both closed forms vanish.
    report.ratio_ok = report.random.variance == 0.0 && report.balanced.variance == 0.0;
    return report;
  }
  report.predicted_random = theory::predicted_variance(config, Pattern::kRandom);
  report.predicted_balanced = theory::predicted_variance(config, Pattern::kBalanced);
  report.predicted_ratio = report.predicted_balanced / report.predicted_random;
  report.empirical_ratio = report.balanced.variance / report.random.variance;
  report.ratio_ok = std::abs(report.empirical_ratio - report.predicted_ratio) <= kRatioTolerance * report.predicted_ratio;
  report.scale = theory::diagnose_sigma_x_scaling(config, trials, seed, workers);
  return report;
}

void print(std::ostream& out, const TheoryCheckReport& r) {
  const auto verdict = [](bool ok) { return ok ? "PASS" : "FAIL"; };
  const auto& c = r.config;
  out << "config M=" << c.M << " N=" << c.N << " K=" << c.K << " sigma_w=" << c.sigma_w << " sigma_x=" << c.sigma_x
      << " sparsity=" << c.sparsity << " trials=" << r.trials << " seed=" << r.seed << '\n';
  out << "pruned r1=" << c.r1() << " r2=" << c.r2() << (c.r2_integral() ? "" : " (not integral)") << '\n';
  for (const auto* s : {&r.random, &r.balanced}) {
    const bool ok = s == &r.random ? r.random_mean_ok : r.balanced_mean_ok;
    const double predicted = s == &r.random ? r.predicted_random : r.predicted_balanced;
    out << theory::to_string(s->pattern) << ": mean " << s->mean << " (predicted 0, se " << s->std_error() << ") "
        << verdict(ok) << "; variance " << s->variance << " (predicted " << predicted << ")\n";
  }
  out << "variance ratio balanced/random: empirical " << r.empirical_ratio << ", predicted " << r.predicted_ratio
      << ", tolerance " << kRatioTolerance * 100 << "% " << verdict(r.ratio_ok) << '\n';
  if (r.scale) {
    out << "sigma_x power: closed form " << r.scale->formula_exponent << ", oracle " << r.scale->empirical_exponent
        << "; empirical/predicted variance scale random " << r.scale->random_scale << ", balanced "
        << r.scale->balanced_scale << '\n';
  }
  out << "overall " << verdict(r.passed()) << '\n';
}

}  // namespace balsparse
