#include "balsparse/format.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace balsparse {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kNonDivisibleColumns: return "NonDivisibleColumns";
    case ErrorKind::kNonDivisibleDims: return "NonDivisibleDims";
    case ErrorKind::kUnbalancedPattern: return "UnbalancedPattern";
    case ErrorKind::kInvalidMatrix: return "InvalidMatrix";
    case ErrorKind::kIoFailure: return "IoFailure";
    case ErrorKind::kFormatViolation: return "FormatViolation";
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
    case ErrorKind::kDimensionMismatch: return "DimensionMismatch";
    case ErrorKind::kCallbackDimensionMismatch: return "CallbackDimensionMismatch";
    case ErrorKind::kCallbackRevivedMaskedEntry: return "CallbackRevivedMaskedEntry";
    case ErrorKind::kIterationOutOfRange: return "IterationOutOfRange";
    case ErrorKind::kTooManyBlocksForBanks: return "TooManyBlocksForBanks";
    case ErrorKind::kNonDivisibleLength: return "NonDivisibleLength";
    case ErrorKind::kProbabilityOutOfRange: return "ProbabilityOutOfRange";
    case ErrorKind::kKOutOfRange: return "KOutOfRange";
    case ErrorKind::kInvalidConfig: return "InvalidConfig";
    case ErrorKind::kDivergenceDetected: return "DivergenceDetected";
    case ErrorKind::kReferenceModelMissing: return "ReferenceModelMissing";
    case ErrorKind::kShapeMismatch: return "ShapeMismatch";
    case ErrorKind::kInvalidTimes: return "InvalidTimes";
  }
  return "Unknown";
}

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::kZeroDimension: return "ZeroDimension";
    case ViolationKind::kNonDivisibleColumns: return "NonDivisibleColumns";
    case ViolationKind::kKExceedsBlockSize: return "KExceedsBlockSize";
    case ViolationKind::kBlockCountMismatch: return "BlockCountMismatch";
    case ViolationKind::kUnbalancedBlock: return "UnbalancedBlock";
    case ViolationKind::kValueCountMismatch: return "ValueCountMismatch";
    case ViolationKind::kOffsetOutOfRange: return "OffsetOutOfRange";
    case ViolationKind::kDuplicateOffset: return "DuplicateOffset";
    case ViolationKind::kUnsortedOffsets: return "UnsortedOffsets";
  }
  return "Unknown";
}

DenseMatrix pad_columns(const DenseMatrix& dense, std::size_t multiple) {
  if (multiple == 0) throw Error(ErrorKind::kInvalidArgument, "padding multiple must be positive");
  const std::size_t padded = (dense.cols() + multiple - 1) / multiple * multiple;
  DenseMatrix out(dense.rows(), padded);
  for (std::size_t r = 0; r < dense.rows(); ++r) {
    std::ranges::copy(dense.row(r), out.row(r).begin());
  }
  return out;
}

namespace {

// Offsets must lie in [0, block_size) and strictly increase. Reports at most
// one violation per block.
void check_block_offsets(std::span<const std::uint32_t> offsets, std::size_t block_size, std::size_t row,
                         std::size_t block, std::vector<Violation>& out) {
  for (std::size_t t = 0; t < offsets.size(); ++t) {
    if (offsets[t] >= block_size) {
      out.push_back({ViolationKind::kOffsetOutOfRange, row, block,
                     "offset " + std::to_string(offsets[t]) + " >= block_size " + std::to_string(block_size)});
      return;
    }
    if (t > 0 && offsets[t] == offsets[t - 1]) {
      out.push_back({ViolationKind::kDuplicateOffset, row, block, "offset " + std::to_string(offsets[t]) + " repeated"});
      return;
    }
    if (t > 0 && offsets[t] < offsets[t - 1]) {
      out.push_back({ViolationKind::kUnsortedOffsets, row, block,
                     "offset " + std::to_string(offsets[t]) + " follows " + std::to_string(offsets[t - 1])});
      return;
    }
  }
}

// Shape-level checks shared by the draft and flat forms. Returns false when
// per-block inspection would be meaningless.
bool check_shape(std::size_t rows, std::size_t cols, std::size_t block_size, std::size_t k,
                 std::vector<Violation>& out) {
  if (rows == 0 || cols == 0 || block_size == 0) {
    out.push_back({ViolationKind::kZeroDimension, 0, 0,
                   "rows=" + std::to_string(rows) + " cols=" + std::to_string(cols) +
                       " block_size=" + std::to_string(block_size)});
    return false;
  }
  if (cols % block_size != 0) {
    out.push_back({ViolationKind::kNonDivisibleColumns, 0, 0,
                   "cols " + std::to_string(cols) + " not divisible by block_size " + std::to_string(block_size)});
    return false;
  }
  if (k > block_size) {
    out.push_back({ViolationKind::kKExceedsBlockSize, 0, 0,
                   "k " + std::to_string(k) + " > block_size " + std::to_string(block_size)});
    return false;
  }
  return true;
}

[[noreturn]] void throw_violations(const std::vector<Violation>& violations) {
  std::ostringstream msg;
  msg << violations.size() << " invariant violation(s); first: " << to_string(violations.front().kind) << " at (row "
      << violations.front().row << ", block " << violations.front().block << "): " << violations.front().detail;
  throw Error(ErrorKind::kInvalidMatrix, msg.str());
}

}  // namespace

std::vector<Violation> validate(const BalancedSparseDraft& draft) {
  std::vector<Violation> out;
  if (!check_shape(draft.rows, draft.cols, draft.block_size, draft.k, out)) return out;
  const std::size_t per_row = draft.cols / draft.block_size;
  if (draft.blocks.size() != draft.rows * per_row) {
    out.push_back({ViolationKind::kBlockCountMismatch, 0, 0,
                   "expected " + std::to_string(draft.rows * per_row) + " blocks, got " +
                       std::to_string(draft.blocks.size())});
    return out;
  }
  for (std::size_t i = 0; i < draft.blocks.size(); ++i) {
    const auto& block = draft.blocks[i];
    const std::size_t row = i / per_row;
    const std::size_t b = i % per_row;
    if (block.offsets.size() != draft.k) {
      out.push_back({ViolationKind::kUnbalancedBlock, row, b,
                     "holds " + std::to_string(block.offsets.size()) + " entries, expected k=" + std::to_string(draft.k)});
    }
    if (block.values.size() != block.offsets.size()) {
      out.push_back({ViolationKind::kValueCountMismatch, row, b,
                     std::to_string(block.values.size()) + " values for " + std::to_string(block.offsets.size()) +
                         " offsets"});
    }
    check_block_offsets(block.offsets, draft.block_size, row, b, out);
  }
  return out;
}

BalancedSparseMatrix::BalancedSparseMatrix(std::size_t rows, std::size_t cols, std::size_t block_size, std::size_t k,
                                           std::vector<std::uint32_t> offsets, std::vector<float> values)
    : rows_(rows),
      cols_(cols),
      block_size_(block_size),
      k_(k),
      offsets_(std::move(offsets)),
      values_(std::move(values)) {
  std::vector<Violation> violations;
  if (check_shape(rows_, cols_, block_size_, k_, violations)) {
    const std::size_t expected = rows_ * blocks_per_row() * k_;
    if (offsets_.size() != expected) {
      violations.push_back({ViolationKind::kUnbalancedBlock, 0, 0,
                            "flat storage holds " + std::to_string(offsets_.size()) + " offsets, expected " +
                                std::to_string(expected)});
    } else if (values_.size() != expected) {
      violations.push_back({ViolationKind::kValueCountMismatch, 0, 0,
                            "flat storage holds " + std::to_string(values_.size()) + " values, expected " +
                                std::to_string(expected)});
    } else {
      for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t b = 0; b < blocks_per_row(); ++b) {
          check_block_offsets(block_offsets(r, b), block_size_, r, b, violations);
        }
      }
    }
  }
  if (!violations.empty()) throw_violations(violations);
}

BalancedSparseMatrix::BalancedSparseMatrix(const BalancedSparseDraft& draft)
    : rows_(draft.rows), cols_(draft.cols), block_size_(draft.block_size), k_(draft.k) {
  const auto violations = validate(draft);
  if (!violations.empty()) throw_violations(violations);
  offsets_.reserve(draft.blocks.size() * k_);
  values_.reserve(draft.blocks.size() * k_);
  for (const auto& block : draft.blocks) {
    offsets_.insert(offsets_.end(), block.offsets.begin(), block.offsets.end());
    values_.insert(values_.end(), block.values.begin(), block.values.end());
  }
}

BalancedSparseDraft BalancedSparseMatrix::to_draft() const {
  BalancedSparseDraft draft{rows_, cols_, block_size_, k_, {}};
  draft.blocks.reserve(rows_ * blocks_per_row());
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t b = 0; b < blocks_per_row(); ++b) {
      const auto offs = block_offsets(r, b);
      const auto vals = block_values(r, b);
      draft.blocks.push_back({{offs.begin(), offs.end()}, {vals.begin(), vals.end()}});
    }
  }
  return draft;
}

BalancedSparseMatrix encode_balanced(const DenseMatrix& dense, std::size_t block_size) {
  if (block_size == 0 || dense.cols() % block_size != 0) {
    throw Error(ErrorKind::kNonDivisibleColumns, "cols " + std::to_string(dense.cols()) +
                                                     " not divisible by block_size " + std::to_string(block_size));
  }
  const std::size_t per_row = dense.cols() / block_size;
  const auto count_nonzeros = [&](std::size_t r, std::size_t b) {
    const auto block = dense.row(r).subspan(b * block_size, block_size);
    return static_cast<std::size_t>(std::ranges::count_if(block, [](float v) { return v != 0.0f; }));
  };

  const std::size_t k = count_nonzeros(0, 0);
  std::vector<std::uint32_t> offsets;
  std::vector<float> values;
  offsets.reserve(dense.rows() * per_row * k);
  values.reserve(dense.rows() * per_row * k);
  for (std::size_t r = 0; r < dense.rows(); ++r) {
    for (std::size_t b = 0; b < per_row; ++b) {
      const std::size_t count = count_nonzeros(r, b);
      if (count != k) {
        throw Error(ErrorKind::kUnbalancedPattern, "block (row " + std::to_string(r) + ", block " + std::to_string(b) +
                                                       ") holds " + std::to_string(count) +
                                                       " nonzeros, first block holds " + std::to_string(k));
      }
      const auto block = dense.row(r).subspan(b * block_size, block_size);
      for (std::size_t j = 0; j < block_size; ++j) {
        if (block[j] != 0.0f) {
          offsets.push_back(static_cast<std::uint32_t>(j));
          values.push_back(block[j]);
        }
      }
    }
  }
  return {dense.rows(), dense.cols(), block_size, k, std::move(offsets), std::move(values)};
}

DenseMatrix decode_to_dense(const BalancedSparseMatrix& m) {
  DenseMatrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t b = 0; b < m.blocks_per_row(); ++b) {
      const auto offs = m.block_offsets(r, b);
      const auto vals = m.block_values(r, b);
      for (std::size_t t = 0; t < m.k(); ++t) row[b * m.block_size() + offs[t]] = vals[t];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

CsrMatrix::CsrMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_offsets,
                     std::vector<std::uint32_t> col_indices, std::vector<float> values)
    : rows_(rows),
      cols_(cols),
      row_offsets_(std::move(row_offsets)),
      col_indices_(std::move(col_indices)),
      values_(std::move(values)) {
  if (rows_ == 0 || cols_ == 0) throw Error(ErrorKind::kInvalidMatrix, "CSR dimensions must be at least 1x1");
  if (row_offsets_.size() != rows_ + 1 || row_offsets_.front() != 0 || row_offsets_.back() != col_indices_.size() ||
      col_indices_.size() != values_.size()) {
    throw Error(ErrorKind::kInvalidMatrix, "CSR array lengths are inconsistent");
  }
  for (std::size_t r = 0; r < rows_; ++r) {
    if (row_offsets_[r] > row_offsets_[r + 1]) {
      throw Error(ErrorKind::kInvalidMatrix, "row_offsets decrease at row " + std::to_string(r));
    }
    for (std::size_t i = row_offsets_[r]; i < row_offsets_[r + 1]; ++i) {
      if (col_indices_[i] >= cols_ || (i > row_offsets_[r] && col_indices_[i] <= col_indices_[i - 1])) {
        throw Error(ErrorKind::kInvalidMatrix, "column indices out of range or unsorted in row " + std::to_string(r));
      }
    }
  }
}

CsrMatrix CsrMatrix::from_dense(const DenseMatrix& dense) {
  std::vector<std::size_t> row_offsets{0};
  std::vector<std::uint32_t> cols;
  std::vector<float> values;
  for (std::size_t r = 0; r < dense.rows(); ++r) {
    const auto row = dense.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (row[c] != 0.0f) {
        cols.push_back(static_cast<std::uint32_t>(c));
        values.push_back(row[c]);
      }
    }
    row_offsets.push_back(cols.size());
  }
  return {dense.rows(), dense.cols(), std::move(row_offsets), std::move(cols), std::move(values)};
}

DenseMatrix CsrMatrix::to_dense() const {
  DenseMatrix out(rows_, cols_);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t i = row_offsets_[r]; i < row_offsets_[r + 1]; ++i) out(r, col_indices_[i]) = values_[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

constexpr std::size_t kHeaderBytes = 4 + 4 * 4;

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFFu));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<char>((v >> shift) & 0xFFu));
}

std::uint32_t get_u32(std::string_view bytes, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
  return v;
}

std::uint16_t get_u16(std::string_view bytes, std::size_t pos) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(bytes[pos]) |
                                    (static_cast<unsigned char>(bytes[pos + 1]) << 8));
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xFFFFFFFFu) throw Error(ErrorKind::kFormatViolation, std::string(what) + " does not fit in u32");
  return static_cast<std::uint32_t>(v);
}

std::string encode_container(std::string_view magic, std::size_t rows, std::size_t cols, std::size_t block_size,
                             std::size_t k, std::span<const std::uint32_t> offsets, std::span<const float> values) {
  if (block_size > 0x10000u) {
    throw Error(ErrorKind::kFormatViolation,
                "block_size " + std::to_string(block_size) + " exceeds the u16 offset range of the container");
  }
  std::string out;
  out.reserve(kHeaderBytes + offsets.size() * 2 + values.size() * 4);
  out.append(magic);
  put_u32(out, checked_u32(rows, "rows"));
  put_u32(out, checked_u32(cols, "cols"));
  put_u32(out, checked_u32(block_size, "block_size"));
  put_u32(out, checked_u32(k, "k"));
  for (const auto off : offsets) put_u16(out, static_cast<std::uint16_t>(off));
  for (const float v : values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

struct Container {
  std::size_t rows, cols, block_size, k;
  std::vector<std::uint32_t> offsets;
  std::vector<float> values;
};

Container decode_container(std::string_view bytes, std::string_view magic) {
  if (bytes.size() < kHeaderBytes) {
    throw Error(ErrorKind::kFormatViolation, "header truncated: expected " + std::to_string(kHeaderBytes) +
                                                 " bytes, got " + std::to_string(bytes.size()));
  }
  if (bytes.substr(0, 4) != magic) {
    throw Error(ErrorKind::kFormatViolation, "bad magic, expected \"" + std::string(magic) + "\"");
  }
  Container c{get_u32(bytes, 4), get_u32(bytes, 8), get_u32(bytes, 12), get_u32(bytes, 16), {}, {}};
  if (c.rows == 0 || c.cols == 0 || c.block_size == 0 || c.cols % c.block_size != 0 || c.k > c.block_size) {
    throw Error(ErrorKind::kFormatViolation, "inconsistent header: rows=" + std::to_string(c.rows) +
                                                 " cols=" + std::to_string(c.cols) +
                                                 " block_size=" + std::to_string(c.block_size) + " k=" + std::to_string(c.k));
  }
  const std::size_t count = c.rows * (c.cols / c.block_size) * c.k;
  const std::size_t expected = kHeaderBytes + count * 2 + count * 4;
  if (bytes.size() != expected) {
    throw Error(ErrorKind::kFormatViolation, "payload length mismatch: expected " + std::to_string(expected) +
                                                 " bytes, got " + std::to_string(bytes.size()));
  }
  c.offsets.resize(count);
  c.values.resize(count);
  std::size_t pos = kHeaderBytes;
  for (std::size_t i = 0; i < count; ++i, pos += 2) c.offsets[i] = get_u16(bytes, pos);
  for (std::size_t i = 0; i < count; ++i, pos += 4) c.values[i] = std::bit_cast<float>(get_u32(bytes, pos));
  return c;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIoFailure, "cannot open " + path.string() + " for reading");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorKind::kIoFailure, "read error on " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIoFailure, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::kIoFailure, "write error on " + path.string());
}

}  // namespace

std::string serialize(const BalancedSparseMatrix& m) {
  return encode_container(kBalancedMagic, m.rows(), m.cols(), m.block_size(), m.k(), m.offsets(), m.values());
}

std::string serialize(const DenseMatrix& m) {
  std::vector<std::uint32_t> offsets(m.size());
  for (std::size_t i = 0; i < offsets.size(); ++i) offsets[i] = static_cast<std::uint32_t>(i % m.cols());
  return encode_container(kDenseMagic, m.rows(), m.cols(), m.cols(), m.cols(), offsets, m.values());
}

BalancedSparseMatrix deserialize_balanced(std::string_view bytes) {
  auto c = decode_container(bytes, kBalancedMagic);
  try {
    return {c.rows, c.cols, c.block_size, c.k, std::move(c.offsets), std::move(c.values)};
  } catch (const Error& e) {
    throw Error(ErrorKind::kFormatViolation, std::string("loaded matrix fails validation: ") + e.what());
  }
}

DenseMatrix deserialize_dense(std::string_view bytes) {
  auto c = decode_container(bytes, kDenseMagic);
  if (c.block_size != c.cols || c.k != c.cols) {
    throw Error(ErrorKind::kFormatViolation, "dense container requires block_size = k = cols");
  }
  for (std::size_t i = 0; i < c.offsets.size(); ++i) {
    if (c.offsets[i] != i % c.cols) {
      throw Error(ErrorKind::kFormatViolation, "dense container offset " + std::to_string(i) + " out of sequence");
    }
  }
  return {c.rows, c.cols, std::move(c.values)};
}

void save(const BalancedSparseMatrix& m, const std::filesystem::path& path) { write_file(path, serialize(m)); }
void save(const DenseMatrix& m, const std::filesystem::path& path) { write_file(path, serialize(m)); }
BalancedSparseMatrix load_balanced(const std::filesystem::path& path) { return deserialize_balanced(read_file(path)); }
DenseMatrix load_dense(const std::filesystem::path& path) { return deserialize_dense(read_file(path)); }

bool is_balanced_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIoFailure, "cannot open " + path.string() + " for reading");
  char magic[4] = {};
  in.read(magic, 4);
  return in.gcount() == 4 && std::string_view(magic, 4) == kBalancedMagic;
}

DenseMatrix load_as_dense(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() >= 4 && std::string_view(bytes).substr(0, 4) == kBalancedMagic) {
    return decode_to_dense(deserialize_balanced(bytes));
  }
  return deserialize_dense(bytes);
}

}  // namespace balsparse
