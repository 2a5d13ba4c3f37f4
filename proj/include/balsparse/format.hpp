#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "balsparse/error.hpp"

namespace balsparse {

/// Row-major dense matrix. The library's weight matrices use `float`; the
/// trainer keeps its parameters in `Matrix<double>`.
template <typename T>
class Matrix {
 public:
  using value_type = T;

  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols) : Matrix(rows, cols, std::vector<T>(rows * cols, T{})) {}

  Matrix(std::size_t rows, std::size_t cols, std::vector<T> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (rows_ == 0 || cols_ == 0) {
      throw Error(ErrorKind::kInvalidArgument, "matrix dimensions must be at least 1x1");
    }
    if (values_.size() != rows_ * cols_) {
      throw Error(ErrorKind::kInvalidArgument,
                  "expected " + std::to_string(rows_ * cols_) + " values, got " + std::to_string(values_.size()));
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }

  T& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }

  template <typename U>
  Matrix<U> cast() const {
    return Matrix<U>(rows_, cols_, std::vector<U>(values_.begin(), values_.end()));
  }

  Matrix transposed() const {
    Matrix out(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r) {
      for (std::size_t c = 0; c < cols_; ++c) out(c, r) = (*this)(r, c);
    }
    return out;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> values_;
};

using DenseMatrix = Matrix<float>;

/// Appends zero columns so that `cols` becomes a multiple of `multiple`.
DenseMatrix pad_columns(const DenseMatrix& dense, std::size_t multiple);

// ---------------------------------------------------------------------------
// Balanced sparse matrix
// ---------------------------------------------------------------------------

enum class ViolationKind {
  kZeroDimension,
  kNonDivisibleColumns,
  kKExceedsBlockSize,
  kBlockCountMismatch,
  kUnbalancedBlock,
  kValueCountMismatch,
  kOffsetOutOfRange,
  kDuplicateOffset,
  kUnsortedOffsets,
};

std::string_view to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  std::size_t row = 0;
  std::size_t block = 0;
  std::string detail;
};

/// Unvalidated block-list form: one entry list per (row, block), ordered
/// row-major then block-major. This is what `validate` inspects, and what
/// callers build when they assemble a matrix by hand.
struct BalancedSparseDraft {
  struct Block {
    std::vector<std::uint32_t> offsets;
    std::vector<float> values;
  };

  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t block_size = 0;
  std::size_t k = 0;
  std::vector<Block> blocks;
};

std::vector<Violation> validate(const BalancedSparseDraft& draft);

/// Each row is cut into `cols / block_size` blocks; every block stores exactly
/// `k` (local offset, value) pairs with strictly increasing offsets.
///
/// Storage is flat: entry `t` of block `b` in row `r` lives at
/// `((r * blocks_per_row) + b) * k + t`. Instances always satisfy the
/// invariants; the constructors throw `ErrorKind::kInvalidMatrix` otherwise.
class BalancedSparseMatrix {
 public:
  BalancedSparseMatrix(std::size_t rows, std::size_t cols, std::size_t block_size, std::size_t k,
                       std::vector<std::uint32_t> offsets, std::vector<float> values);

  explicit BalancedSparseMatrix(const BalancedSparseDraft& draft);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t block_size() const noexcept { return block_size_; }
  std::size_t k() const noexcept { return k_; }
  std::size_t blocks_per_row() const noexcept { return cols_ / block_size_; }
  std::size_t nnz() const noexcept { return values_.size(); }
  double sparsity() const noexcept { return 1.0 - static_cast<double>(k_) / static_cast<double>(block_size_); }

  std::span<const std::uint32_t> offsets() const noexcept { return offsets_; }
  std::span<const float> values() const noexcept { return values_; }

  std::span<const std::uint32_t> block_offsets(std::size_t row, std::size_t block) const {
    return offsets().subspan(entry_index(row, block), k_);
  }
  std::span<const float> block_values(std::size_t row, std::size_t block) const {
    return values().subspan(entry_index(row, block), k_);
  }

  BalancedSparseDraft to_draft() const;

  friend bool operator==(const BalancedSparseMatrix&, const BalancedSparseMatrix&) = default;

 private:
  std::size_t entry_index(std::size_t row, std::size_t block) const noexcept {
    return (row * blocks_per_row() + block) * k_;
  }

  std::size_t rows_;
  std::size_t cols_;
  std::size_t block_size_;
  std::size_t k_;
  std::vector<std::uint32_t> offsets_;
  std::vector<float> values_;
};

inline std::vector<Violation> validate(const BalancedSparseMatrix& m) { return validate(m.to_draft()); }

/// Converts a dense matrix whose blocks already hold equal nonzero counts.
/// Throws kNonDivisibleColumns or kUnbalancedPattern.
BalancedSparseMatrix encode_balanced(const DenseMatrix& dense, std::size_t block_size);

DenseMatrix decode_to_dense(const BalancedSparseMatrix& m);

// ---------------------------------------------------------------------------
// CSR
// ---------------------------------------------------------------------------

class CsrMatrix {
 public:
  CsrMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_offsets,
            std::vector<std::uint32_t> col_indices, std::vector<float> values);

  static CsrMatrix from_dense(const DenseMatrix& dense);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }
  std::span<const std::size_t> row_offsets() const noexcept { return row_offsets_; }
  std::span<const std::uint32_t> col_indices() const noexcept { return col_indices_; }
  std::span<const float> values() const noexcept { return values_; }

  DenseMatrix to_dense() const;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<std::size_t> row_offsets_;
  std::vector<std::uint32_t> col_indices_;
  std::vector<float> values_;
};

// ---------------------------------------------------------------------------
// On-disk container
//
//   magic[4] | u32 rows | u32 cols | u32 block_size | u32 k
//   | u16 offsets (row, block, ascending) | f32 values (same order)
//
// All integers and floats little-endian. "BSM1" holds a balanced sparse
// matrix; "BSD1" holds a dense matrix with block_size = k = cols.
// ---------------------------------------------------------------------------

inline constexpr std::string_view kBalancedMagic = "BSM1";
inline constexpr std::string_view kDenseMagic = "BSD1";

std::string serialize(const BalancedSparseMatrix& m);
std::string serialize(const DenseMatrix& m);
BalancedSparseMatrix deserialize_balanced(std::string_view bytes);
DenseMatrix deserialize_dense(std::string_view bytes);

void save(const BalancedSparseMatrix& m, const std::filesystem::path& path);
void save(const DenseMatrix& m, const std::filesystem::path& path);
BalancedSparseMatrix load_balanced(const std::filesystem::path& path);
DenseMatrix load_dense(const std::filesystem::path& path);

/// Reads either container; balanced files are decoded.
DenseMatrix load_as_dense(const std::filesystem::path& path);

/// True when the file starts with the balanced magic.
bool is_balanced_file(const std::filesystem::path& path);

}  // namespace balsparse
