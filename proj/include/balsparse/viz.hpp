#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

#include "balsparse/format.hpp"

namespace balsparse {

enum class MapFormat { kText, kPgm };

/// Text map: one line per row, '#' for nonzero and '.' for zero, with '|'
/// between blocks when `block_size` is nonzero.
std::string weight_map_text(const DenseMatrix& m, std::size_t block_size = 0);

/// Binary PGM (P5), one pixel per entry: nonzero 0 (dark), zero 255.
std::string weight_map_pgm(const DenseMatrix& m);

/// Reads a `.bsm` file (either container) and writes its weight map.
/// Balanced files mark their own blocks in text mode; dense files use
/// `block_size` (0 for none). Throws kIoFailure when a file cannot be read
/// or written.
void render_weight_map(const std::filesystem::path& matrix_path, const std::filesystem::path& output_path,
                       MapFormat format, std::size_t block_size = 0);

}  // namespace balsparse
