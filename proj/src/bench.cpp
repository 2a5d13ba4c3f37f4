#include "balsparse/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>

#include "balsparse/error.hpp"
#include "balsparse/format.hpp"
#include "balsparse/kernels.hpp"
#include "balsparse/pruning.hpp"
#include "balsparse/random.hpp"

namespace balsparse {

namespace {

constexpr const char* kHeader = "rows,cols,batch,sparsity,pattern,measured_time_us,ideal_time_us,repeats";

// Shortest text that reads back to the same double.
std::string format_double(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string format_optional(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

double median(std::vector<double> samples) {
  std::ranges::sort(samples);
  const std::size_t n = samples.size();
  return n % 2 == 1 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
}

std::optional<double> time_median_us(const std::function<void()>& run, std::size_t warmup, std::size_t repeats) {
  try {
    for (std::size_t i = 0; i < warmup; ++i) run();
    std::vector<double> samples;
    samples.reserve(repeats);
    for (std::size_t i = 0; i < repeats; ++i) {
      const auto start = std::chrono::steady_clock::now();
      run();
      const auto stop = std::chrono::steady_clock::now();
      samples.push_back(std::chrono::duration<double, std::micro>(stop - start).count());
    }
    return median(std::move(samples));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

// Keeps results observable so the timed calls are not optimized away.
volatile float g_sink = 0.0f;

}  // namespace

double ideal_time(double d_time, double o_time, double sparsity) {
  if (!(o_time >= 0.0) || !(d_time > o_time)) {
    throw Error(ErrorKind::kInvalidTimes,
                "need d_time > o_time >= 0, got d_time=" + std::to_string(d_time) + " o_time=" + std::to_string(o_time));
  }
  if (!(sparsity >= 0.0 && sparsity <= 1.0)) {
    throw Error(ErrorKind::kInvalidTimes, "sparsity must lie in [0, 1], got " + std::to_string(sparsity));
  }
  return (d_time - o_time) * (1.0 - sparsity) + o_time;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRecord>& records) {
  out << kHeader << '\n';
  for (const auto& r : records) {
    out << r.rows << ',' << r.cols << ',' << r.batch << ',' << format_double(r.sparsity) << ',' << r.pattern << ','
        << format_optional(r.measured_time_us) << ',' << format_optional(r.ideal_time_us) << ',' << r.repeats << '\n';
  }
}

std::vector<BenchRecord> read_bench_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kHeader) {
    throw Error(ErrorKind::kFormatViolation, "bench CSV must start with header \"" + std::string(kHeader) + "\"");
  }
  std::vector<BenchRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (fields.size() != 8) {
      throw Error(ErrorKind::kFormatViolation,
                  "line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) + " fields, expected 8");
    }
    try {
      const auto opt = [](const std::string& s) { return s.empty() ? std::nullopt : std::optional<double>(std::stod(s)); };
      records.push_back({std::stoul(fields[0]), std::stoul(fields[1]), std::stoul(fields[2]), std::stod(fields[3]),
                         fields[4], opt(fields[5]), opt(fields[6]), std::stoul(fields[7])});
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::kFormatViolation, "line " + std::to_string(line_no) + " is malformed: " + line);
    }
  }
  return records;
}

std::vector<BenchRecord> bench(const BenchOptions& options) {
  if (options.repeats < 3) throw Error(ErrorKind::kInvalidArgument, "repeats must be at least 3");
  if (options.sizes.empty() || options.sparsities.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "bench needs at least one size and one sparsity");
  }
  if (options.batch == 0) throw Error(ErrorKind::kInvalidArgument, "batch must be at least 1");
  for (const std::size_t n : options.sizes) {
    if (n == 0 || options.block_num == 0 || n % options.block_num != 0) {
      throw Error(ErrorKind::kInvalidArgument,
                  "size " + std::to_string(n) + " is not divisible by block_num " + std::to_string(options.block_num));
    }
  }
  std::vector<BenchRecord> records;
  std::uint64_t stream = 0;
  for (const std::size_t n : options.sizes) {
    for (const double s : options.sparsities) {
      CounterRng rng(options.seed, stream++);
      DenseMatrix dense(n, n);
      for (auto& v : dense.values()) v = static_cast<float>(rng.normal());
      balanced_prune_step(dense, options.block_num, s).mask.apply(dense);
      const auto balanced = encode_balanced(dense, n / options.block_num);
      const auto csr = CsrMatrix::from_dense(dense);
      DenseMatrix x(n, options.batch);
      for (auto& v : x.values()) v = static_cast<float>(rng.normal());
      const auto xt = x.transposed();  // row b holds input column b

      const auto per_column = [&](auto&& kernel) {
        return [&, kernel] {
          for (std::size_t b = 0; b < options.batch; ++b) g_sink = g_sink + kernel(xt.row(b))[0];
        };
      };
      const auto dense_time = time_median_us(
          per_column([&](std::span<const float> v) { return gemv_dense(dense, v, options.workers); }), options.warmup,
          options.repeats);
      const auto csr_time = time_median_us(
          per_column([&](std::span<const float> v) { return spmv_csr(csr, v, options.workers); }), options.warmup,
          options.repeats);
      std::function<void()> balanced_run;
      if (options.batch == 1) {
        balanced_run = per_column([&](std::span<const float> v) { return spmv_balanced(balanced, v, options.workers); });
      } else {
        balanced_run = [&] { g_sink = g_sink + spmm_balanced(balanced, x, options.workers)(0, 0); };
      }
      const auto balanced_time = time_median_us(balanced_run, options.warmup, options.repeats);

      std::optional<double> ideal;
      if (dense_time && *dense_time > options.o_time_us) ideal = ideal_time(*dense_time, options.o_time_us, s);
      for (const auto& [name, t] : {std::pair{"dense", dense_time}, {"csr", csr_time}, {"balanced", balanced_time}}) {
        records.push_back({n, n, options.batch, s, name, t, ideal, options.repeats});
      }
    }
  }
  return records;
}

}  // namespace balsparse
