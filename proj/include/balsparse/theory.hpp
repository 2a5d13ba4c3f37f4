#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <utility>

#include "balsparse/random.hpp"

namespace balsparse::theory {

/// Fully connected layer Y = W X with W ~ N(0, sigma_w^2)^{M x N} and
/// X ~ N(0, sigma_x^2)^N, pruned at `sparsity`; balanced pruning splits each
/// row into K blocks.
struct TheoryConfig {
  std::size_t M = 16;
  std::size_t N = 256;
  std::size_t K = 8;
  double sigma_w = 1.0;
  double sigma_x = 1.0;
  double sparsity = 0.9;

  /// Throws kInvalidConfig.
  void validate() const;

  std::size_t total() const noexcept { return M * N; }
  std::size_t mk() const noexcept { return M * K; }
  std::size_t block_size() const noexcept { return N / K; }
  /// Pruned count under the global pattern, round(M*N*sparsity).
  std::size_t r1() const noexcept;
  /// Pruned count per block implied by r1 = M*K*r2; may be fractional.
  double r2() const noexcept { return static_cast<double>(r1()) / static_cast<double>(mk()); }
  bool r2_integral() const noexcept { return r1() % mk() == 0; }
};

enum class Pattern { kRandom, kBalanced };

std::string_view to_string(Pattern pattern);

double normal_pdf(double x);
double normal_cdf(double x);

/// Standard normal quantile. Throws kProbabilityOutOfRange unless 0 < p < 1.
double gaussian_quantile(double p);

/// H(k) = k(MN-k) / ((MN)^3 f(F^-1(k/MN))^2) with f, F of N(0, sigma_w^2).
/// Throws kKOutOfRange unless 1 <= k < MN.
double eval_H(std::size_t k, const TheoryConfig& cfg);

struct HSums {
  double plain = 0.0;      // sum of H(i)
  double quantized = 0.0;  // sum of H(ceil(i / MK) * MK)
};

/// Both sums over i in [first, last].
HSums h_sums(const TheoryConfig& cfg, std::size_t first, std::size_t last);

/// True when H is nondecreasing over integer k in [first, last].
bool h_nondecreasing(const TheoryConfig& cfg, std::size_t first, std::size_t last);

/// Closed-form variance of z: (sigma_x / r1) * sum over i = 1..r1
/// of H(i) (random) or H(ceil(i/MK)*MK) (balanced).
double predicted_variance(const TheoryConfig& cfg, Pattern pattern);

/// Both patterns predict a zero mean.
inline double predicted_mean(const TheoryConfig&, Pattern) { return 0.0; }

/// The characteristic-function form: predicted_variance * (1 + t^2)^(-1/2).
double eval_characteristic_function(const TheoryConfig& cfg, Pattern pattern, double t);

struct DistortionStats {
  Pattern pattern = Pattern::kRandom;
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  std::size_t samples = 0;

  double std_error() const noexcept;
};

/// Per trial: draw W and X, prune W globally (random_prune) and per block
/// (balanced_prune_step with K blocks), and record every entry of
/// Z = (W_pruned - W) X. Trial t draws from its own stream keyed by
/// (seed, t), so results do not depend on `workers`.
std::pair<DistortionStats, DistortionStats> monte_carlo_distortion(const TheoryConfig& cfg, std::size_t trials,
                                                                   std::uint64_t seed, std::size_t workers = 1);

/// Compares the closed-form variance with the Monte Carlo oracle.
struct ScaleDiagnostic {
  double predicted_ratio = 0.0;     // balanced / random from predicted_variance
  double empirical_ratio = 0.0;     // balanced / random from the oracle
  double formula_exponent = 1.0;    // power of sigma_x in predicted_variance
  double empirical_exponent = 0.0;  // log2 of the variance gain when sigma_x doubles
  double random_scale = 0.0;        // empirical / predicted variance
  double balanced_scale = 0.0;
};

/// Runs the oracle at sigma_x and 2 sigma_x with the same seed.
ScaleDiagnostic diagnose_sigma_x_scaling(const TheoryConfig& cfg, std::size_t trials, std::uint64_t seed,
                                         std::size_t workers = 1);

}  // namespace balsparse::theory
