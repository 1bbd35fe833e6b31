#include <algorithm>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "kernels_x86.hpp"
#include "qadc/qadc.hpp"

namespace qadc {

namespace {

inline std::uint8_t saturating_add(std::uint8_t a, std::uint8_t b) {
  const unsigned sum = static_cast<unsigned>(a) + b;
  return static_cast<std::uint8_t>(sum > 255 ? 255 : sum);
}

void scan_blocks_scalar(const std::uint8_t* blocks, std::size_t block_count, std::size_t m,
                        const std::uint8_t* tables, std::uint8_t* out) {
  const std::size_t rows = m / 2;
  for (std::size_t b = 0; b < block_count; ++b) {
    const std::uint8_t* blk = blocks + b * rows * kBlockCodes;
    std::uint8_t* acc = out + b * kBlockCodes;
    std::fill_n(acc, kBlockCodes, std::uint8_t{0});
    for (std::size_t r = 0; r < rows; ++r) {
      const std::uint8_t* row = blk + r * kBlockCodes;
      const std::uint8_t* lo = tables + 32 * r;
      const std::uint8_t* hi = lo + 16;
      for (std::size_t l = 0; l < kBlockCodes; ++l) {
        acc[l] = saturating_add(acc[l], lo[row[l] & 0x0F]);
        acc[l] = saturating_add(acc[l], hi[row[l] >> 4]);
      }
    }
  }
}

void check_tables(std::size_t bytes, const QuantizedTables& qt) {
  if (qt.m == 0 || qt.m % 2 != 0 || qt.values.size() != qt.m * 16) {
    throw std::invalid_argument("quantized tables must hold an even number m of 16-entry tables");
  }
  if (bytes != qt.m / 2 * kBlockCodes) {
    throw std::invalid_argument("block size does not match the quantized tables");
  }
}

}  // namespace

std::string_view kernel_name(KernelKind kind) {
  switch (kind) {
    case KernelKind::scalar: return "scalar";
    case KernelKind::sse128: return "128";
    case KernelKind::avx256: return "256";
  }
  return "unknown";
}

bool kernel_available(KernelKind kind) {
  switch (kind) {
    case KernelKind::scalar: return true;
    case KernelKind::sse128: return detail::cpu_supports_ssse3();
    case KernelKind::avx256: return detail::cpu_supports_avx2();
  }
  return false;
}

KernelKind best_kernel() {
  if (kernel_available(KernelKind::avx256)) return KernelKind::avx256;
  if (kernel_available(KernelKind::sse128)) return KernelKind::sse128;
  return KernelKind::scalar;
}

KernelKind parse_kernel(std::string_view name) {
  if (name == "scalar") return KernelKind::scalar;
  if (name == "128" || name == "sse" || name == "ssse3") return KernelKind::sse128;
  if (name == "256" || name == "avx2") return KernelKind::avx256;
  throw std::invalid_argument("unknown kernel '" + std::string(name) +
                              "' (expected scalar, 128 or 256)");
}

KernelKind default_kernel() {
  const char* pinned = std::getenv("QADC_KERNEL");
  if (pinned == nullptr || *pinned == '\0') return best_kernel();
  const KernelKind kind = parse_kernel(pinned);
  if (!kernel_available(kind)) {
    throw std::runtime_error("QADC_KERNEL=" + std::string(pinned) +
                             " is not supported on this CPU");
  }
  return kind;
}

void scan_blocks(KernelKind kind, const std::uint8_t* blocks, std::size_t block_count,
                 const QuantizedTables& qt, std::uint8_t* out) {
  if (block_count == 0) return;
  if (!kernel_available(kind)) kind = KernelKind::scalar;
  switch (kind) {
    case KernelKind::avx256:
      return detail::scan_blocks_avx256(blocks, block_count, qt.m, qt.values.data(), out);
    case KernelKind::sse128:
      return detail::scan_blocks_sse128(blocks, block_count, qt.m, qt.values.data(), out);
    case KernelKind::scalar:
      return scan_blocks_scalar(blocks, block_count, qt.m, qt.values.data(), out);
  }
}

LaneDistances scan_block_scalar(std::span<const std::uint8_t> block, const QuantizedTables& qt) {
  check_tables(block.size(), qt);
  LaneDistances out{};
  scan_blocks_scalar(block.data(), 1, qt.m, qt.values.data(), out.data());
  return out;
}

LaneDistances scan_block_simd(std::span<const std::uint8_t> block, const QuantizedTables& qt,
                              KernelKind kind) {
  check_tables(block.size(), qt);
  LaneDistances out{};
  scan_blocks(kind, block.data(), 1, qt, out.data());
  return out;
}

}  // namespace qadc
