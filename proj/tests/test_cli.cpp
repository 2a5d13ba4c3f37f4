#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "balsparse/bench.hpp"
#include "balsparse/commands.hpp"
#include "balsparse/error.hpp"
#include "balsparse/format.hpp"
#include "balsparse/random.hpp"
#include "balsparse/viz.hpp"

namespace bs = balsparse;
namespace fs = std::filesystem;

namespace {

bs::ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const bs::Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no balsparse::Error thrown";
  return bs::ErrorKind::kInvalidArgument;
}

bs::DenseMatrix gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  bs::DenseMatrix m(rows, cols);
  bs::CounterRng rng(seed, 0);
  for (auto& v : m.values()) v = static_cast<float>(rng.normal());
  return m;
}

std::string read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class Files : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           (std::string("bsm_cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

}  // namespace

TEST(IdealTime, Examples) {
  EXPECT_EQ(bs::ideal_time(100.0, 10.0, 0.0), 100.0);
  EXPECT_EQ(bs::ideal_time(100.0, 10.0, 1.0), 10.0);
  EXPECT_NEAR(bs::ideal_time(100.0, 10.0, 0.9), 19.0, 1e-12);
  EXPECT_EQ(bs::ideal_time(50.0, bs::kDefaultOverheadUs, 1.0), 10.0);
}

TEST(IdealTime, Collinear) {
  const double d = 873.25;
  const double o = 12.5;
  const double s0 = 0.1, s1 = 0.55, s2 = 0.95;
  const double y0 = bs::ideal_time(d, o, s0), y1 = bs::ideal_time(d, o, s1), y2 = bs::ideal_time(d, o, s2);
  EXPECT_NEAR((y1 - y0) / (s1 - s0), -(d - o), 1e-9);
  EXPECT_NEAR((y2 - y1) / (s2 - s1), -(d - o), 1e-9);
}

TEST(IdealTime, InvalidTimes) {
  EXPECT_EQ(kind_of([] { bs::ideal_time(10.0, 10.0, 0.5); }), bs::ErrorKind::kInvalidTimes);
  EXPECT_EQ(kind_of([] { bs::ideal_time(10.0, -1.0, 0.5); }), bs::ErrorKind::kInvalidTimes);
  EXPECT_EQ(kind_of([] { bs::ideal_time(100.0, 10.0, 1.5); }), bs::ErrorKind::kInvalidTimes);
}

TEST(BenchCsv, RoundTrip) {
  std::vector<bs::BenchRecord> records = {
      {1024, 1024, 1, 0.9, "balanced", 123.456789, 19.1, 5},
      {2048, 2048, 8, 0.96875, "csr", std::nullopt, std::nullopt, 3},
      {64, 64, 1, 0.1 + 0.2, "dense", 1.0 / 3.0, 0.1, 7},
  };
  std::stringstream buf;
  bs::write_bench_csv(buf, records);
  const std::string text = buf.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "rows,cols,batch,sparsity,pattern,measured_time_us,ideal_time_us,repeats");
  EXPECT_EQ(bs::read_bench_csv(buf), records);
}

TEST(BenchCsv, RejectsMalformed) {
  std::istringstream wrong_header("a,b\n");
  EXPECT_EQ(kind_of([&] { bs::read_bench_csv(wrong_header); }), bs::ErrorKind::kFormatViolation);
  std::istringstream short_row("rows,cols,batch,sparsity,pattern,measured_time_us,ideal_time_us,repeats\n1,2,3\n");
  EXPECT_EQ(kind_of([&] { bs::read_bench_csv(short_row); }), bs::ErrorKind::kFormatViolation);
  std::istringstream bad_number(
      "rows,cols,batch,sparsity,pattern,measured_time_us,ideal_time_us,repeats\nx,2,1,0.5,csr,1,1,3\n");
  EXPECT_EQ(kind_of([&] { bs::read_bench_csv(bad_number); }), bs::ErrorKind::kFormatViolation);
}

TEST(Bench, SweepOrderAndInvariants) {
  bs::BenchOptions options;
  options.sizes = {64, 128};
  options.sparsities = {0.0, 0.75};
  options.repeats = 3;
  options.warmup = 1;
  const auto records = bs::bench(options);
  ASSERT_EQ(records.size(), 12u);
  const char* patterns[] = {"dense", "csr", "balanced"};
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    EXPECT_EQ(r.rows, i < 6 ? 64u : 128u);
    EXPECT_EQ(r.sparsity, (i / 3) % 2 == 0 ? 0.0 : 0.75);
    EXPECT_EQ(r.pattern, patterns[i % 3]);
    EXPECT_EQ(r.repeats, 3u);
    ASSERT_TRUE(r.measured_time_us.has_value());
    EXPECT_GT(*r.measured_time_us, 0.0);
    if (r.ideal_time_us) EXPECT_GE(*r.ideal_time_us, options.o_time_us);
  }
}

TEST(Bench, RejectsBadOptions) {
  bs::BenchOptions options;
  options.sizes = {64};
  options.repeats = 2;
  EXPECT_EQ(kind_of([&] { bs::bench(options); }), bs::ErrorKind::kInvalidArgument);
  options.repeats = 3;
  options.sizes = {100};
  EXPECT_EQ(kind_of([&] { bs::bench(options); }), bs::ErrorKind::kInvalidArgument);
  options.sizes = {};
  EXPECT_EQ(kind_of([&] { bs::bench(options); }), bs::ErrorKind::kInvalidArgument);
}

TEST_F(Files, PruneDefaultsToThirtyTwoBlocks) {
  bs::save(gaussian(16, 1024, 1), dir_ / "in.bsm");
  bs::PruneFileOptions options;
  EXPECT_EQ(options.block_num, 32u);
  options.sparsity = 0.9;
  const auto report = bs::prune_file(dir_ / "in.bsm", dir_ / "out.bsm", options);
  EXPECT_EQ(report.block_size, 32u);
  EXPECT_EQ(report.k, 3u);
  const auto m = bs::load_balanced(dir_ / "out.bsm");
  EXPECT_EQ(m.k(), 3u);
  EXPECT_TRUE(bs::validate(m).empty());
  std::ostringstream text;
  bs::print(text, report);
  EXPECT_NE(text.str().find("k 3"), std::string::npos);
}

TEST_F(Files, PruneNonDivisibleNeedsPad) {
  bs::save(gaussian(4, 1000, 2), dir_ / "in.bsm");
  bs::PruneFileOptions options;
  try {
    bs::prune_file(dir_ / "in.bsm", dir_ / "out.bsm", options);
    FAIL();
  } catch (const bs::Error& e) {
    EXPECT_EQ(e.kind(), bs::ErrorKind::kNonDivisibleColumns);
    EXPECT_NE(std::string(e.what()).find("1000"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("32"), std::string::npos);
  }
  options.pad = true;
  const auto report = bs::prune_file(dir_ / "in.bsm", dir_ / "out.bsm", options);
  EXPECT_EQ(report.padded_cols, 1024u);
  EXPECT_EQ(bs::load_balanced(dir_ / "out.bsm").cols(), 1024u);
}

TEST_F(Files, PruneOtherPatternsWriteDense) {
  const auto input = gaussian(8, 16, 3);
  bs::save(input, dir_ / "in.bsm");
  for (auto pattern : {bs::trainer::PatternKind::kRandom, bs::trainer::PatternKind::kBlock,
                       bs::trainer::PatternKind::kVector}) {
    bs::PruneFileOptions options;
    options.pattern = pattern;
    options.sparsity = 0.5;
    const auto report = bs::prune_file(dir_ / "in.bsm", dir_ / "out.bsm", options);
    EXPECT_FALSE(bs::is_balanced_file(dir_ / "out.bsm"));
    EXPECT_DOUBLE_EQ(report.achieved_sparsity, 0.5);
    const auto out = bs::load_dense(dir_ / "out.bsm");
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (out.values()[i] != 0.0f) EXPECT_EQ(out.values()[i], input.values()[i]);
    }
  }
}

TEST(TheoryCheck, ZeroSparsityPassesTrivially) {
  bs::theory::TheoryConfig cfg;
  cfg.sparsity = 0.0;
  const auto report = bs::theory_check(cfg, 10, 7);
  EXPECT_TRUE(report.passed());
  EXPECT_EQ(report.random.variance, 0.0);
  EXPECT_EQ(report.balanced.mean, 0.0);
  EXPECT_FALSE(report.scale.has_value());
}

TEST(TheoryCheck, SingleBlockSingleRowPredictionsCoincide) {
  bs::theory::TheoryConfig cfg;
  cfg.M = 1;
  cfg.N = 64;
  cfg.K = 1;
  cfg.sparsity = 0.75;
  const auto report = bs::theory_check(cfg, 50, 7);
  EXPECT_EQ(report.predicted_random, report.predicted_balanced);
  EXPECT_EQ(report.predicted_ratio, 1.0);
  EXPECT_EQ(report.empirical_ratio, 1.0);
  EXPECT_TRUE(report.ratio_ok);
}

TEST(TheoryCheck, ReportIsConsistent) {
  bs::theory::TheoryConfig cfg;
  cfg.M = 8;
  cfg.N = 64;
  cfg.K = 4;
  cfg.sparsity = 0.75;
  const auto report = bs::theory_check(cfg, 100, 7);
  EXPECT_TRUE(report.random_mean_ok);
  EXPECT_TRUE(report.balanced_mean_ok);
  EXPECT_DOUBLE_EQ(report.empirical_ratio, report.balanced.variance / report.random.variance);
  EXPECT_EQ(report.ratio_ok,
            std::abs(report.empirical_ratio - report.predicted_ratio) <= 0.1 * report.predicted_ratio);
  ASSERT_TRUE(report.scale.has_value());
  std::ostringstream text;
  bs::print(text, report);
  EXPECT_NE(text.str().find("sigma_x power"), std::string::npos);
  EXPECT_NE(text.str().find(report.passed() ? "overall PASS" : "overall FAIL"), std::string::npos);
}

TEST(TheoryCheck, InvalidConfig) {
  bs::theory::TheoryConfig cfg;
  cfg.N = 100;
  EXPECT_EQ(kind_of([&] { bs::theory_check(cfg, 10, 1); }), bs::ErrorKind::kInvalidConfig);
}

TEST(WeightMap, DenseIsFullyDark) {
  bs::DenseMatrix m(2, 3, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(bs::weight_map_text(m), "###\n###\n");
  const auto pgm = bs::weight_map_pgm(m);
  EXPECT_EQ(pgm.substr(0, 11), "P5\n3 2\n255\n");
  EXPECT_TRUE(std::all_of(pgm.begin() + 11, pgm.end(), [](char c) { return c == 0; }));
}

TEST(WeightMap, MarksKeptEntriesPerBlock) {
  bs::DenseMatrix m(1, 16, {0, 1, 0, 2, 3, 0, 0, 4, 0, 0, 5, 6, 7, 0, 8, 0});
  EXPECT_EQ(bs::weight_map_text(m, 4), ".#.#|#..#|..##|#.#.\n");
}

TEST_F(Files, RenderIsDeterministic) {
  bs::DenseMatrix m = gaussian(8, 32, 4);
  bs::balanced_prune_step(m, 4, 0.75).mask.apply(m);
  bs::save(bs::encode_balanced(m, 8), dir_ / "m.bsm");
  bs::render_weight_map(dir_ / "m.bsm", dir_ / "a.pgm", bs::MapFormat::kPgm);
  bs::render_weight_map(dir_ / "m.bsm", dir_ / "b.pgm", bs::MapFormat::kPgm);
  EXPECT_EQ(read_all(dir_ / "a.pgm"), read_all(dir_ / "b.pgm"));
  EXPECT_EQ(read_all(dir_ / "a.pgm"), bs::weight_map_pgm(m));
  bs::render_weight_map(dir_ / "m.bsm", dir_ / "m.txt", bs::MapFormat::kText);
  const auto text = read_all(dir_ / "m.txt");
  EXPECT_EQ(text, bs::weight_map_text(m, 8));
  EXPECT_EQ(std::count(text.begin(), text.end(), '#'), 8 * 4 * 2);
}

TEST_F(Files, RenderIoFailure) {
  EXPECT_EQ(kind_of([&] { bs::render_weight_map(dir_ / "missing.bsm", dir_ / "x.txt", bs::MapFormat::kText); }),
            bs::ErrorKind::kIoFailure);
  bs::save(bs::DenseMatrix(1, 1, {1.0f}), dir_ / "m.bsm");
  EXPECT_EQ(
      kind_of([&] { bs::render_weight_map(dir_ / "m.bsm", dir_ / "no" / "dir" / "x.txt", bs::MapFormat::kText); }),
      bs::ErrorKind::kIoFailure);
}
