#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include "balsparse/error.hpp"
#include "balsparse/format.hpp"
#include "balsparse/kernels.hpp"
#include "balsparse/pruning.hpp"

namespace bs = balsparse;

namespace {

bs::DenseMatrix gaussian(std::mt19937& rng, std::size_t rows, std::size_t cols) {
  bs::DenseMatrix m(rows, cols);
  std::normal_distribution<float> dist(0.0f, 1.0f);
  for (auto& v : m.values()) v = dist(rng);
  return m;
}

std::vector<float> gaussian_vector(std::mt19937& rng, std::size_t n) {
  std::vector<float> x(n);
  std::normal_distribution<float> dist(0.0f, 1.0f);
  for (auto& v : x) v = dist(rng);
  return x;
}

bs::BalancedSparseMatrix random_balanced(std::mt19937& rng, std::size_t rows, std::size_t cols, std::size_t block_num,
                                         double sparsity) {
  auto m = gaussian(rng, rows, cols);
  bs::balanced_prune_step(m, block_num, sparsity).mask.apply(m);
  return bs::encode_balanced(m, cols / block_num);
}

// Double-precision reference product.
std::vector<double> reference(const bs::DenseMatrix& m, const std::vector<float>& x) {
  std::vector<double> y(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) y[r] += static_cast<double>(m(r, c)) * x[c];
  }
  return y;
}

void expect_close(const std::vector<float>& got, const std::vector<double>& want) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    EXPECT_NEAR(got[i], want[i], 1e-7 + 1e-5 * std::abs(want[i])) << i;
  }
}

bs::ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const bs::Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no balsparse::Error thrown";
  return bs::ErrorKind::kInvalidArgument;
}

}  // namespace

TEST(SpmvBalanced, ZeroKGivesZeros) {
  bs::BalancedSparseMatrix m(3, 8, 4, 0, {}, {});
  std::vector<float> x(8, 1.0f);
  EXPECT_EQ(bs::spmv_balanced(m, x), std::vector<float>(3, 0.0f));
}

TEST(SpmvBalanced, HandExample) {
  auto m = bs::encode_balanced(bs::DenseMatrix(1, 8, {0, 2.0f, 0, 0, 0, 0, -1.0f, 0}), 4);
  std::vector<float> x = {1, 2, 3, 4, 5, 6, 7, 8};
  EXPECT_EQ(bs::spmv_balanced(m, x), std::vector<float>{-3.0f});
}

TEST(SpmvBalanced, MatchesDenseOracle) {
  std::mt19937 rng(3);
  auto m = random_balanced(rng, 64, 256, 8, 0.75);
  auto x = gaussian_vector(rng, 256);
  expect_close(bs::spmv_balanced(m, x), reference(bs::decode_to_dense(m), x));
}

TEST(SpmvBalanced, WorkerCountDoesNotChangeBits) {
  std::mt19937 rng(4);
  auto m = random_balanced(rng, 37, 96, 3, 0.5);
  auto x = gaussian_vector(rng, 96);
  const auto one = bs::spmv_balanced(m, x, 1);
  for (std::size_t w : {2u, 3u, 8u, 64u}) EXPECT_EQ(bs::spmv_balanced(m, x, w), one) << w;
}

TEST(SpmvBalanced, LengthMismatch) {
  bs::BalancedSparseMatrix m(1, 8, 4, 0, {}, {});
  std::vector<float> x(7);
  EXPECT_EQ(kind_of([&] { bs::spmv_balanced(m, x); }), bs::ErrorKind::kDimensionMismatch);
}

TEST(SpmmBalanced, BatchOneEqualsSpmv) {
  std::mt19937 rng(5);
  auto m = random_balanced(rng, 16, 64, 4, 0.5);
  auto x = gaussian_vector(rng, 64);
  auto y = bs::spmm_balanced(m, bs::DenseMatrix(64, 1, x));
  EXPECT_EQ(std::vector<float>(y.values().begin(), y.values().end()), bs::spmv_balanced(m, x));
}

TEST(SpmmBalanced, IdentityRecoversMatrix) {
  std::mt19937 rng(6);
  auto m = random_balanced(rng, 8, 32, 4, 0.75);
  bs::DenseMatrix eye(32, 32);
  for (std::size_t i = 0; i < 32; ++i) eye(i, i) = 1.0f;
  EXPECT_EQ(bs::spmm_balanced(m, eye), bs::decode_to_dense(m));
}

TEST(SpmmBalanced, BitMatchesLoopedSpmv) {
  std::mt19937 rng(7);
  auto m = random_balanced(rng, 33, 128, 8, 0.875);
  auto x = gaussian(rng, 128, 8);
  auto y = bs::spmm_balanced(m, x, 3);
  for (std::size_t b = 0; b < 8; ++b) {
    std::vector<float> col(128);
    for (std::size_t i = 0; i < 128; ++i) col[i] = x(i, b);
    const auto ref = bs::spmv_balanced(m, col);
    for (std::size_t r = 0; r < 33; ++r) EXPECT_EQ(y(r, b), ref[r]);
  }
}

TEST(SpmmBalanced, ShapeMismatch) {
  bs::BalancedSparseMatrix m(1, 8, 4, 0, {}, {});
  EXPECT_EQ(kind_of([&] { bs::spmm_balanced(m, bs::DenseMatrix(7, 2)); }), bs::ErrorKind::kDimensionMismatch);
}

TEST(GemvDense, Examples) {
  bs::DenseMatrix eye(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  std::vector<float> x = {1.5f, -2.0f, 3.25f};
  EXPECT_EQ(bs::gemv_dense(eye, x), x);
  EXPECT_EQ(bs::gemv_dense(bs::DenseMatrix(2, 3), x), std::vector<float>(2, 0.0f));
  std::vector<float> ones = {1, 1};
  EXPECT_EQ(bs::gemv_dense(bs::DenseMatrix(2, 2, {1, 2, 3, 4}), ones), (std::vector<float>{3, 7}));
  EXPECT_EQ(kind_of([&] { bs::gemv_dense(eye, ones); }), bs::ErrorKind::kDimensionMismatch);
}

TEST(SpmvCsr, Examples) {
  auto d = bs::DenseMatrix(3, 4, {0, 0, 0, 0, 1, 0, 2, 0, 0, 0, 0, 0});
  std::vector<float> x = {1, 2, 3, 4};
  EXPECT_EQ(bs::spmv_csr(bs::CsrMatrix::from_dense(d), x), (std::vector<float>{0, 7, 0}));
  auto single = bs::DenseMatrix(1, 8, {0, 2.0f, 0, 0, 0, 0, -1.0f, 0});
  std::vector<float> iota = {1, 2, 3, 4, 5, 6, 7, 8};
  EXPECT_EQ(bs::spmv_csr(bs::CsrMatrix::from_dense(single), iota), std::vector<float>{-3.0f});
  std::vector<float> short_x(3);
  EXPECT_EQ(kind_of([&] { bs::spmv_csr(bs::CsrMatrix::from_dense(d), short_x); }),
            bs::ErrorKind::kDimensionMismatch);
}

TEST(SpmvCsr, RandomNinetyPercent) {
  std::mt19937 rng(8);
  auto d = gaussian(rng, 100, 120);
  bs::random_prune(d, 0.9).apply(d);
  auto x = gaussian_vector(rng, 120);
  expect_close(bs::spmv_csr(bs::CsrMatrix::from_dense(d), x, 4), reference(d, x));
  expect_close(bs::gemv_dense(d, x, 4), reference(d, x));
}

TEST(BankModel, FourBlockGroup) {
  std::vector<float> x(16);
  std::iota(x.begin(), x.end(), 0.0f);
  auto rv = bs::rearrange_block_major(x, 4, 32);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(rv.layout.bank(i), i / 4);
  EXPECT_EQ(bs::bank_conflict_factor({{0, 4, 9, 13}}, rv.layout), 1u);
  EXPECT_EQ(bs::bank_conflict_factor({{0, 1, 2, 3}}, rv.layout), 4u);
  for (std::size_t i = 0; i < 16; ++i) {
    EXPECT_EQ(rv.address[i], (i % 4) * 32 + i / 4);
    EXPECT_EQ(rv.storage[rv.address[i]], x[i]);
  }
}

TEST(BankModel, SingleBlockSerializes) {
  std::vector<float> x(8, 1.0f);
  auto rv = bs::rearrange_block_major(x, 8, 32);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(rv.layout.bank(i), 0u);
  EXPECT_EQ(bs::bank_conflict_factor({{1, 5}}, rv.layout), 2u);
  EXPECT_EQ(bs::bank_conflict_factor({{3}}, rv.layout), 1u);
}

TEST(BankModel, Errors) {
  std::vector<float> x(33);
  EXPECT_EQ(kind_of([&] { bs::rearrange_block_major(x, 1, 32); }), bs::ErrorKind::kTooManyBlocksForBanks);
  EXPECT_EQ(kind_of([&] { bs::rearrange_block_major(x, 2, 32); }), bs::ErrorKind::kNonDivisibleLength);
  auto layout = bs::BankLayout::interleaved(8, 4);
  EXPECT_EQ(kind_of([&] { bs::bank_conflict_factor({}, layout); }), bs::ErrorKind::kInvalidArgument);
}

TEST(BankModel, InterleavedLayoutConflictsOnBlockStride) {
  // Without rearrangement, a block stride that is a multiple of the bank
  // count puts every lane in the same bank.
  auto layout = bs::BankLayout::interleaved(128, 32);
  EXPECT_EQ(bs::bank_conflict_factor({{0, 32, 64, 96}}, layout), 4u);
  EXPECT_EQ(bs::bank_conflict_factor({{0, 33, 66, 99}}, layout), 1u);
}

TEST(AccessTrace, FourLaneShape) {
  std::mt19937 rng(9);
  auto m = random_balanced(rng, 3, 16, 4, 0.5);
  auto trace = bs::kernel_access_trace(m);
  ASSERT_EQ(trace.size(), 3u * 2u);
  for (const auto& g : trace) EXPECT_EQ(g.indices.size(), 4u);
}

TEST(AccessTrace, EmptyForZeroK) {
  bs::BalancedSparseMatrix m(4, 16, 4, 0, {}, {});
  EXPECT_TRUE(bs::kernel_access_trace(m).empty());
}

TEST(AccessTrace, CoversStoredPositionsOnce) {
  std::mt19937 rng(10);
  auto m = random_balanced(rng, 5, 48, 6, 0.75);
  auto trace = bs::kernel_access_trace(m);
  std::vector<std::size_t> traced;
  for (const auto& g : trace) traced.insert(traced.end(), g.indices.begin(), g.indices.end());
  auto csr = bs::CsrMatrix::from_dense(bs::decode_to_dense(m));
  // Each group belongs to one row; cols repeat across rows, so compare per row.
  std::size_t gi = 0;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    std::vector<std::size_t> got;
    for (std::size_t t = 0; t < m.k(); ++t, ++gi) {
      got.insert(got.end(), trace[gi].indices.begin(), trace[gi].indices.end());
    }
    std::ranges::sort(got);
    std::vector<std::size_t> want(csr.col_indices().begin() + csr.row_offsets()[r],
                                  csr.col_indices().begin() + csr.row_offsets()[r + 1]);
    EXPECT_EQ(got, want) << r;
  }
  EXPECT_EQ(traced.size(), m.nnz());
}

TEST(AccessTrace, ConflictFreeUnderRearrangement) {
  std::mt19937 rng(11);
  for (std::size_t block_num : {1u, 2u, 8u, 32u}) {
    auto m = random_balanced(rng, 6, block_num * 8, block_num, 0.5);
    std::vector<float> x(m.cols());
    auto rv = bs::rearrange_block_major(x, m.block_size());
    for (const auto& g : bs::kernel_access_trace(m)) EXPECT_EQ(bs::bank_conflict_factor(g, rv.layout), 1u);
  }
}
