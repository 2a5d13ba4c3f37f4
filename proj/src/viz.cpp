#include "balsparse/viz.hpp"

#include <fstream>

#include "balsparse/error.hpp"

namespace balsparse {

std::string weight_map_text(const DenseMatrix& m, std::size_t block_size) {
  std::string out;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (block_size != 0 && c != 0 && c % block_size == 0) out += '|';
      out += m(r, c) != 0.0f ? '#' : '.';
    }
    out += '\n';
  }
  return out;
}

std::string weight_map_pgm(const DenseMatrix& m) {
  std::string out = "P5\n" + std::to_string(m.cols()) + " " + std::to_string(m.rows()) + "\n255\n";
  for (const float v : m.values()) out += static_cast<char>(v != 0.0f ? 0 : 255);
  return out;
}

void render_weight_map(const std::filesystem::path& matrix_path, const std::filesystem::path& output_path,
                       MapFormat format, std::size_t block_size) {
  std::string image;
  if (is_balanced_file(matrix_path)) {
    const auto m = load_balanced(matrix_path);
    const auto dense = decode_to_dense(m);
    image = format == MapFormat::kText ? weight_map_text(dense, m.block_size()) : weight_map_pgm(dense);
  } else {
    const auto dense = load_dense(matrix_path);
    image = format == MapFormat::kText ? weight_map_text(dense, block_size) : weight_map_pgm(dense);
  }
  std::ofstream out(output_path, std::ios::binary);
  out.write(image.data(), static_cast<std::streamsize>(image.size()));
  if (!out) throw Error(ErrorKind::kIoFailure, "cannot write " + output_path.string());
}

}  // namespace balsparse
