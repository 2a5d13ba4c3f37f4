#include "balsparse/kernels.hpp"

#include <algorithm>
#include <thread>

namespace balsparse {

namespace {

// Runs fn(begin, end) over contiguous row ranges on up to `workers` threads.
template <typename Fn>
void for_row_chunks(std::size_t rows, std::size_t workers, Fn&& fn) {
  workers = std::clamp<std::size_t>(workers, 1, rows);
  if (workers == 1) {
    fn(std::size_t{0}, rows);
    return;
  }
  const std::size_t chunk = (rows + workers - 1) / workers;
  std::vector<std::jthread> threads;
  threads.reserve(workers);
  for (std::size_t begin = 0; begin < rows; begin += chunk) {
    threads.emplace_back([&fn, begin, end = std::min(rows, begin + chunk)] { fn(begin, end); });
  }
}

void require_length(std::size_t got, std::size_t expected, const char* what) {
  if (got != expected) {
    throw Error(ErrorKind::kDimensionMismatch,
                std::string(what) + " has length " + std::to_string(got) + ", expected " + std::to_string(expected));
  }
}

// One output element of the balanced kernel; shared by spmv and spmm so the
// two agree bit for bit. Lane partial sums are independent, so four lanes
// accumulate side by side; they are still added to the total in lane order.
template <typename XAt>
float balanced_row(const BalancedSparseMatrix& m, std::size_t r, XAt&& x_at) {
  const std::size_t k = m.k();
  const std::size_t block_size = m.block_size();
  const std::size_t lanes = m.blocks_per_row();
  const std::uint32_t* offsets = m.offsets().data() + r * lanes * k;
  const float* values = m.values().data() + r * lanes * k;
  const auto term = [&](std::size_t lane, std::size_t t) {
    const std::size_t i = lane * k + t;
    return static_cast<double>(values[i]) * static_cast<double>(x_at(lane * block_size + offsets[i]));
  };
  double acc = 0.0;
  std::size_t lane = 0;
  for (; lane + 4 <= lanes; lane += 4) {
    double p0 = 0.0, p1 = 0.0, p2 = 0.0, p3 = 0.0;
    for (std::size_t t = 0; t < k; ++t) {
      p0 += term(lane, t);
      p1 += term(lane + 1, t);
      p2 += term(lane + 2, t);
      p3 += term(lane + 3, t);
    }
    acc += p0;
    acc += p1;
    acc += p2;
    acc += p3;
  }
  for (; lane < lanes; ++lane) {
    double partial = 0.0;
    for (std::size_t t = 0; t < k; ++t) partial += term(lane, t);
    acc += partial;
  }
  return static_cast<float>(acc);
}

}  // namespace

std::vector<float> spmv_balanced(const BalancedSparseMatrix& m, std::span<const float> x, std::size_t workers) {
  require_length(x.size(), m.cols(), "x");
  std::vector<float> y(m.rows(), 0.0f);
  for_row_chunks(m.rows(), workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) y[r] = balanced_row(m, r, [&](std::size_t i) { return x[i]; });
  });
  return y;
}

DenseMatrix spmm_balanced(const BalancedSparseMatrix& m, const DenseMatrix& x, std::size_t workers) {
  require_length(x.rows(), m.cols(), "X row count");
  const std::size_t batch = x.cols();
  DenseMatrix y(m.rows(), batch);
  for_row_chunks(m.rows(), workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      for (std::size_t b = 0; b < batch; ++b) {
        y(r, b) = balanced_row(m, r, [&](std::size_t i) { return x(i, b); });
      }
    }
  });
  return y;
}

std::vector<float> gemv_dense(const DenseMatrix& m, std::span<const float> x, std::size_t workers) {
  require_length(x.size(), m.cols(), "x");
  std::vector<float> y(m.rows(), 0.0f);
  for_row_chunks(m.rows(), workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      const auto row = m.row(r);
      double acc = 0.0;
      for (std::size_t c = 0; c < row.size(); ++c) acc += static_cast<double>(row[c]) * static_cast<double>(x[c]);
      y[r] = static_cast<float>(acc);
    }
  });
  return y;
}

std::vector<float> spmv_csr(const CsrMatrix& m, std::span<const float> x, std::size_t workers) {
  require_length(x.size(), m.cols(), "x");
  std::vector<float> y(m.rows(), 0.0f);
  const auto offsets = m.row_offsets();
  const auto cols = m.col_indices();
  const auto values = m.values();
  for_row_chunks(m.rows(), workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      double acc = 0.0;
      for (std::size_t i = offsets[r]; i < offsets[r + 1]; ++i) {
        acc += static_cast<double>(values[i]) * static_cast<double>(x[cols[i]]);
      }
      y[r] = static_cast<float>(acc);
    }
  });
  return y;
}

// ---------------------------------------------------------------------------

BankLayout::BankLayout(std::size_t num_banks, std::vector<std::uint32_t> bank_of_element)
    : num_banks_(num_banks), bank_of_element_(std::move(bank_of_element)) {
  if (num_banks_ == 0) throw Error(ErrorKind::kInvalidArgument, "num_banks must be positive");
  for (std::size_t i = 0; i < bank_of_element_.size(); ++i) {
    if (bank_of_element_[i] >= num_banks_) {
      throw Error(ErrorKind::kInvalidArgument, "element " + std::to_string(i) + " placed in bank " +
                                                   std::to_string(bank_of_element_[i]) + " >= " +
                                                   std::to_string(num_banks_));
    }
  }
}

BankLayout BankLayout::interleaved(std::size_t length, std::size_t num_banks) {
  if (num_banks == 0) throw Error(ErrorKind::kInvalidArgument, "num_banks must be positive");
  std::vector<std::uint32_t> banks(length);
  for (std::size_t i = 0; i < length; ++i) banks[i] = static_cast<std::uint32_t>(i % num_banks);
  return {num_banks, std::move(banks)};
}

RearrangedVector rearrange_block_major(std::span<const float> x, std::size_t block_size, std::size_t num_banks) {
  if (num_banks == 0) throw Error(ErrorKind::kInvalidArgument, "num_banks must be positive");
  if (block_size == 0 || x.size() % block_size != 0) {
    throw Error(ErrorKind::kNonDivisibleLength, "length " + std::to_string(x.size()) +
                                                    " not divisible by block_size " + std::to_string(block_size));
  }
  const std::size_t blocks = x.size() / block_size;
  if (blocks > num_banks) {
    throw Error(ErrorKind::kTooManyBlocksForBanks,
                std::to_string(blocks) + " blocks exceed " + std::to_string(num_banks) + " banks");
  }
  std::vector<float> storage(block_size * num_banks, 0.0f);
  std::vector<std::size_t> address(x.size());
  std::vector<std::uint32_t> banks(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t block = i / block_size;
    const std::size_t offset = i % block_size;
    address[i] = offset * num_banks + block;
    storage[address[i]] = x[i];
    banks[i] = static_cast<std::uint32_t>(address[i] % num_banks);
  }
  return {std::move(storage), std::move(address), BankLayout(num_banks, std::move(banks))};
}

std::size_t bank_conflict_factor(const AccessGroup& group, const BankLayout& layout) {
  if (group.indices.empty()) throw Error(ErrorKind::kInvalidArgument, "access group is empty");
  std::vector<std::size_t> per_bank(layout.num_banks(), 0);
  std::size_t worst = 0;
  for (const auto i : group.indices) worst = std::max(worst, ++per_bank[layout.bank(i)]);
  return worst;
}

std::vector<AccessGroup> kernel_access_trace(const BalancedSparseMatrix& m) {
  std::vector<AccessGroup> trace;
  trace.reserve(m.rows() * m.k());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t t = 0; t < m.k(); ++t) {
      AccessGroup group;
      group.indices.reserve(m.blocks_per_row());
      for (std::size_t b = 0; b < m.blocks_per_row(); ++b) {
        group.indices.push_back(b * m.block_size() + m.block_offsets(r, b)[t]);
      }
      trace.push_back(std::move(group));
    }
  }
  return trace;
}

}  // namespace balsparse
