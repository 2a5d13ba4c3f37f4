#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "balsparse/format.hpp"

namespace balsparse {

// All kernels accumulate in double and round once per output element. Rows
// are split into contiguous chunks across `workers` threads; every output
// element is produced by exactly one thread in a fixed order, so results do
// not depend on the worker count.

/// y = m * x. Each block is one lane: the lane sums its k products, and lane
/// sums are added in ascending block order.
std::vector<float> spmv_balanced(const BalancedSparseMatrix& m, std::span<const float> x, std::size_t workers = 1);

/// Y = m * X with X of shape cols x batch. Column b of Y is bit-identical to
/// spmv_balanced(m, column b of X).
DenseMatrix spmm_balanced(const BalancedSparseMatrix& m, const DenseMatrix& x, std::size_t workers = 1);

std::vector<float> gemv_dense(const DenseMatrix& m, std::span<const float> x, std::size_t workers = 1);

std::vector<float> spmv_csr(const CsrMatrix& m, std::span<const float> x, std::size_t workers = 1);

// ---------------------------------------------------------------------------
// Shared-memory bank model
// ---------------------------------------------------------------------------

inline constexpr std::size_t kDefaultNumBanks = 32;

/// Maps each element of the (original, unpermuted) vector to a bank.
class BankLayout {
 public:
  BankLayout(std::size_t num_banks, std::vector<std::uint32_t> bank_of_element);

  /// Word-interleaved placement of an unpermuted vector: bank = index mod banks.
  static BankLayout interleaved(std::size_t length, std::size_t num_banks = kDefaultNumBanks);

  std::size_t num_banks() const noexcept { return num_banks_; }
  std::size_t size() const noexcept { return bank_of_element_.size(); }
  std::uint32_t bank(std::size_t element) const { return bank_of_element_.at(element); }

 private:
  std::size_t num_banks_;
  std::vector<std::uint32_t> bank_of_element_;
};

/// Element indices read in the same cycle, one per active lane.
struct AccessGroup {
  std::vector<std::size_t> indices;
};

struct RearrangedVector {
  /// Shared-memory image: element `o` of block `j` sits at word address
  /// `o * num_banks + j`. Unused words are zero.
  std::vector<float> storage;
  /// Word address of every original element.
  std::vector<std::size_t> address;
  BankLayout layout;
};

/// Block-major rearrangement: every element of block j lands in bank j.
/// Throws kNonDivisibleLength or kTooManyBlocksForBanks.
RearrangedVector rearrange_block_major(std::span<const float> x, std::size_t block_size,
                                       std::size_t num_banks = kDefaultNumBanks);

/// Largest number of group elements that fall in one bank (1 = conflict-free).
std::size_t bank_conflict_factor(const AccessGroup& group, const BankLayout& layout);

/// Lockstep access sequence of the lane-per-block kernel: for each row and
/// step t < k, lane j reads element j*block_size + offset[t] of block j.
/// Produces rows * k groups.
std::vector<AccessGroup> kernel_access_trace(const BalancedSparseMatrix& m);

}  // namespace balsparse
