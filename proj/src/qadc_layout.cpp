#include <algorithm>
#include <stdexcept>

#include "qadc/qadc.hpp"

namespace qadc {

namespace {

void check_block_args(std::size_t m, std::size_t in_size, std::size_t out_size) {
  if (m == 0 || m % 2 != 0) throw std::invalid_argument("transposed layout requires even m");
  const std::size_t bytes = m / 2 * kBlockCodes;
  if (in_size != bytes || out_size != bytes) {
    throw std::invalid_argument("transposed layout: block size mismatch");
  }
}

}  // namespace

void transpose_block(std::span<const std::uint8_t> codes, std::size_t m,
                     std::span<std::uint8_t> out) {
  check_block_args(m, codes.size(), out.size());
  const std::size_t rows = m / 2;
  for (std::size_t l = 0; l < kBlockCodes; ++l) {
    for (std::size_t j = 0; j < rows; ++j) out[j * kBlockCodes + l] = codes[l * rows + j];
  }
}

void untranspose_block(std::span<const std::uint8_t> block, std::size_t m,
                       std::span<std::uint8_t> out) {
  check_block_args(m, block.size(), out.size());
  const std::size_t rows = m / 2;
  for (std::size_t l = 0; l < kBlockCodes; ++l) {
    for (std::size_t j = 0; j < rows; ++j) out[l * rows + j] = block[j * kBlockCodes + l];
  }
}

TransposedList transpose_list(std::span<const std::uint8_t> codes,
                              std::span<const std::uint64_t> ids, std::size_t m) {
  if (m == 0 || m % 2 != 0) throw std::invalid_argument("transposed layout requires even m");
  const std::size_t code_size = m / 2;
  if (codes.size() != ids.size() * code_size) {
    throw std::invalid_argument("transpose_list: codes and ids disagree");
  }
  TransposedList out;
  out.m = m;
  out.size = ids.size();
  const std::size_t blocks = (ids.size() + kBlockCodes - 1) / kBlockCodes;
  out.ids.assign(blocks * kBlockCodes, kInvalidId);
  std::ranges::copy(ids, out.ids.begin());
  out.blocks.resize(blocks * out.block_bytes());

  std::vector<std::uint8_t> staging(out.block_bytes());
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t first = b * kBlockCodes;
    const std::size_t valid = std::min(kBlockCodes, ids.size() - first);
    // Padding codes point every sub-index at entry 15.
    std::ranges::fill(staging, std::uint8_t{0xFF});
    std::copy_n(codes.begin() + static_cast<std::ptrdiff_t>(first * code_size),
                valid * code_size, staging.begin());
    transpose_block(staging, m, {out.blocks.data() + b * out.block_bytes(), out.block_bytes()});
  }
  return out;
}

InvertedList untranspose_list(const TransposedList& list) {
  const std::size_t code_size = list.m / 2;
  InvertedList out;
  out.ids.assign(list.ids.begin(), list.ids.begin() + static_cast<std::ptrdiff_t>(list.size));
  out.codes.resize(list.size * code_size);
  std::vector<std::uint8_t> staging(list.block_bytes());
  for (std::size_t b = 0; b < list.block_count(); ++b) {
    untranspose_block(list.block(b), list.m, staging);
    const std::size_t first = b * kBlockCodes;
    const std::size_t valid = std::min(kBlockCodes, list.size - std::min(list.size, first));
    std::copy_n(staging.begin(), valid * code_size,
                out.codes.begin() + static_cast<std::ptrdiff_t>(first * code_size));
  }
  return out;
}

}  // namespace qadc
