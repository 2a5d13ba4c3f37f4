#include "balsparse/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>
#include <vector>

#include "balsparse/error.hpp"
#include "balsparse/format.hpp"
#include "balsparse/pruning.hpp"

namespace balsparse::theory {

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;
const double kSqrt2Pi = std::sqrt(2.0 * std::numbers::pi);

// Rational approximation (Acklam) for the lower half, p in (0, 0.5], refined
// with one Halley step against the erfc-based CDF.
double lower_quantile(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01, -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  const double e = normal_cdf(x) - p;
  const double u = e * kSqrt2Pi * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

}  // namespace

void TheoryConfig::validate() const {
  const auto fail = [](const std::string& why) { throw Error(ErrorKind::kInvalidConfig, why); };
  if (M == 0 || N == 0 || K == 0) fail("M, N and K must be at least 1");
  if (N % K != 0) fail("N=" + std::to_string(N) + " is not divisible by K=" + std::to_string(K));
  if (!(sigma_w > 0.0) || !(sigma_x > 0.0)) fail("sigma_w and sigma_x must be positive");
  if (!(sparsity >= 0.0 && sparsity < 1.0)) fail("sparsity must lie in [0, 1)");
}

std::size_t TheoryConfig::r1() const noexcept {
  return static_cast<std::size_t>(std::llround(static_cast<double>(total()) * sparsity));
}

std::string_view to_string(Pattern pattern) { return pattern == Pattern::kRandom ? "random" : "balanced"; }

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / kSqrt2Pi; }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double gaussian_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw Error(ErrorKind::kProbabilityOutOfRange, "quantile needs 0 < p < 1, got " + std::to_string(p));
  }
  // 1 - p is exact for p >= 0.5, which keeps the two halves antisymmetric.
  return p <= 0.5 ? lower_quantile(p) : -lower_quantile(1.0 - p);
}

double eval_H(std::size_t k, const TheoryConfig& cfg) {
  const std::size_t total = cfg.total();
  if (k < 1 || k >= total) {
    throw Error(ErrorKind::kKOutOfRange, "H(k) needs 1 <= k < " + std::to_string(total) + ", got " + std::to_string(k));
  }
  const double mn = static_cast<double>(total);
  const double kd = static_cast<double>(k);
  // f(F^-1(p)) for N(0, sigma_w^2) is phi(Phi^-1(p)) / sigma_w.
  const double density = normal_pdf(gaussian_quantile(kd / mn)) / cfg.sigma_w;
  return kd * (mn - kd) / (mn * mn * mn * density * density);
}

HSums h_sums(const TheoryConfig& cfg, std::size_t first, std::size_t last) {
  const std::size_t mk = cfg.mk();
  HSums sums;
  for (std::size_t i = first; i <= last; ++i) {
    sums.plain += eval_H(i, cfg);
    sums.quantized += eval_H((i + mk - 1) / mk * mk, cfg);
  }
  return sums;
}

bool h_nondecreasing(const TheoryConfig& cfg, std::size_t first, std::size_t last) {
  double previous = eval_H(first, cfg);
  for (std::size_t k = first + 1; k <= last; ++k) {
    const double current = eval_H(k, cfg);
    if (current < previous) return false;
    previous = current;
  }
  return true;
}

double predicted_variance(const TheoryConfig& cfg, Pattern pattern) {
  cfg.validate();
  const std::size_t r1 = cfg.r1();
  if (r1 < 1) throw Error(ErrorKind::kInvalidConfig, "no pruned elements (r1 = 0)");
  const std::size_t top = (r1 + cfg.mk() - 1) / cfg.mk() * cfg.mk();
  if (top >= cfg.total()) {
    throw Error(ErrorKind::kInvalidConfig, "quantized index " + std::to_string(top) + " reaches M*N");
  }
  const HSums sums = h_sums(cfg, 1, r1);
  const double sum = pattern == Pattern::kRandom ? sums.plain : sums.quantized;
  return cfg.sigma_x / static_cast<double>(r1) * sum;
}

double eval_characteristic_function(const TheoryConfig& cfg, Pattern pattern, double t) {
  return predicted_variance(cfg, pattern) / std::sqrt(1.0 + t * t);
}

double DistortionStats::std_error() const noexcept {
  return samples == 0 ? 0.0 : std::sqrt(variance / static_cast<double>(samples));
}

// ---------------------------------------------------------------------------

namespace {

struct TrialOutput {
  std::vector<double> random;
  std::vector<double> balanced;
};

TrialOutput run_trial(const TheoryConfig& cfg, std::uint64_t seed, std::size_t trial) {
  CounterRng rng(seed, trial);
  std::vector<float> w(cfg.total());
  for (auto& v : w) v = static_cast<float>(cfg.sigma_w * rng.normal());
  std::vector<double> x(cfg.N);
  for (auto& v : x) v = cfg.sigma_x * rng.normal();
  const DenseMatrix weights(cfg.M, cfg.N, std::move(w));

  const auto distortion = [&](const PruneMask& mask) {
    std::vector<double> z(cfg.M, 0.0);
    for (std::size_t r = 0; r < cfg.M; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < cfg.N; ++c) {
        if (!mask.kept(r, c)) acc -= static_cast<double>(weights(r, c)) * x[c];
      }
      z[r] = acc;
    }
    return z;
  };
  return {distortion(random_prune(weights, cfg.sparsity)),
          distortion(balanced_prune_step(weights, cfg.K, cfg.sparsity).mask)};
}

DistortionStats summarize(Pattern pattern, const std::vector<TrialOutput>& outputs) {
  DistortionStats stats;
  stats.pattern = pattern;
  double sum = 0.0;
  for (const auto& out : outputs) {
    for (const double z : pattern == Pattern::kRandom ? out.random : out.balanced) {
      sum += z;
      ++stats.samples;
    }
  }
  stats.mean = sum / static_cast<double>(stats.samples);
  double sq = 0.0;
  for (const auto& out : outputs) {
    for (const double z : pattern == Pattern::kRandom ? out.random : out.balanced) {
      sq += (z - stats.mean) * (z - stats.mean);
    }
  }
  stats.variance = stats.samples > 1 ? sq / static_cast<double>(stats.samples - 1) : 0.0;
  return stats;
}

}  // namespace

std::pair<DistortionStats, DistortionStats> monte_carlo_distortion(const TheoryConfig& cfg, std::size_t trials,
                                                                   std::uint64_t seed, std::size_t workers) {
  cfg.validate();
  if (trials == 0) throw Error(ErrorKind::kInvalidConfig, "trials must be at least 1");
  std::vector<TrialOutput> outputs(trials);
  workers = std::clamp<std::size_t>(workers, 1, trials);
  {
    std::vector<std::jthread> threads;
    for (std::size_t w = 0; w < workers; ++w) {
      threads.emplace_back([&, w] {
        for (std::size_t t = w; t < trials; t += workers) outputs[t] = run_trial(cfg, seed, t);
      });
    }
  }
  return {summarize(Pattern::kRandom, outputs), summarize(Pattern::kBalanced, outputs)};
}

ScaleDiagnostic diagnose_sigma_x_scaling(const TheoryConfig& cfg, std::size_t trials, std::uint64_t seed,
                                         std::size_t workers) {
  cfg.validate();
  TheoryConfig doubled = cfg;
  doubled.sigma_x = 2.0 * cfg.sigma_x;
  const auto [random, balanced] = monte_carlo_distortion(cfg, trials, seed, workers);
  const auto [random2, balanced2] = monte_carlo_distortion(doubled, trials, seed, workers);
  ScaleDiagnostic d;
  d.predicted_ratio = predicted_variance(cfg, Pattern::kBalanced) / predicted_variance(cfg, Pattern::kRandom);
  d.empirical_ratio = balanced.variance / random.variance;
  d.empirical_exponent = std::log2(random2.variance / random.variance);
  d.random_scale = random.variance / predicted_variance(cfg, Pattern::kRandom);
  d.balanced_scale = balanced.variance / predicted_variance(cfg, Pattern::kBalanced);
  return d;
}

}  // namespace balsparse::theory
