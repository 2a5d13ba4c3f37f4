#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace balsparse {

inline constexpr double kDefaultOverheadUs = 10.0;

/// i_time = (d_time - o_time) * (1 - sparsity) + o_time.
/// Throws kInvalidTimes unless d_time > o_time >= 0 and 0 <= sparsity <= 1.
double ideal_time(double d_time, double o_time, double sparsity);

/// One timed kernel in one sweep cell. Missing values (a failed timing, or an
/// ideal time that is undefined because the dense time does not exceed the
/// overhead) are empty.
struct BenchRecord {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t batch = 1;
  double sparsity = 0.0;
  std::string pattern;  // dense | csr | balanced
  std::optional<double> measured_time_us;
  std::optional<double> ideal_time_us;
  std::size_t repeats = 0;

  friend bool operator==(const BenchRecord&, const BenchRecord&) = default;
};

void write_bench_csv(std::ostream& out, const std::vector<BenchRecord>& records);
/// Throws kFormatViolation on a wrong header or malformed row.
std::vector<BenchRecord> read_bench_csv(std::istream& in);

struct BenchOptions {
  std::vector<std::size_t> sizes = {1024, 2048, 4096};  // square matrices
  std::vector<double> sparsities = {0.5, 0.75, 0.9};
  std::size_t batch = 1;
  std::size_t repeats = 5;
  std::size_t warmup = 2;
  std::size_t block_num = 32;
  std::size_t workers = 1;
  double o_time_us = kDefaultOverheadUs;
  std::uint64_t seed = 1;
};

/// For every (size, sparsity) cell: builds a seeded random balanced matrix
/// and times gemv_dense, spmv_csr and spmv_balanced (spmm_balanced when
/// batch > 1) as the median over `repeats` after `warmup` untimed runs.
/// Rows come out in sweep order: size, then sparsity, then dense, csr,
/// balanced. Throws kInvalidArgument when repeats < 3, a list is empty or a
/// size is not divisible by block_num.
std::vector<BenchRecord> bench(const BenchOptions& options);

}  // namespace balsparse
