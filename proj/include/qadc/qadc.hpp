#pragma once

// Quick ADC: 4-bit sub-codes in block-transposed lists, lookup tables
// quantized to 8 bits, and 16-lane in-register shuffle scans.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "qadc/adc.hpp"

namespace qadc {

inline constexpr std::size_t kBlockCodes = 16;
/// Largest quantized table entry; entries span 127 bins plus the overflow bin.
inline constexpr std::uint8_t kMaxTableEntry = 127;

/// Inverted list stored as blocks of 16 codes. A block holds m/2 rows of 16
/// bytes; byte l of row j packs sub-codes 2j (low nibble) and 2j+1 (high
/// nibble) of code l. The last block is padded with all-0xF codes whose id is
/// kInvalidId.
struct TransposedList {
  std::size_t m = 0;
  std::size_t size = 0;  // valid codes
  std::vector<std::uint8_t> blocks;
  std::vector<std::uint64_t> ids;  // block_count() * 16 entries

  std::size_t block_bytes() const { return m / 2 * kBlockCodes; }
  std::size_t block_count() const { return ids.size() / kBlockCodes; }
  std::span<const std::uint8_t> block(std::size_t i) const {
    return {blocks.data() + i * block_bytes(), block_bytes()};
  }
  /// Sub-code j of the code at position `index` (0 <= index < ids.size()).
  std::uint32_t subcode(std::size_t index, std::size_t j) const {
    const std::uint8_t byte =
        blocks[(index / kBlockCodes) * block_bytes() + (j / 2) * kBlockCodes + index % kBlockCodes];
    return (j & 1) ? (byte >> 4) : (byte & 0x0F);
  }

  bool operator==(const TransposedList&) const = default;
};

/// `codes` holds 16 packed 4-bit codes (16 * m/2 bytes); `out` receives the
/// m/2 x 16 transposed block.
void transpose_block(std::span<const std::uint8_t> codes, std::size_t m,
                     std::span<std::uint8_t> out);
void untranspose_block(std::span<const std::uint8_t> block, std::size_t m,
                       std::span<std::uint8_t> out);

/// `codes` are packed 4-bit codes (m/2 bytes each) in list order.
TransposedList transpose_list(std::span<const std::uint8_t> codes,
                              std::span<const std::uint64_t> ids, std::size_t m);
/// Valid codes back in standard layout.
InvertedList untranspose_list(const TransposedList& list);

/// 8-bit lookup tables: table j entry i = min(127, floor((D^j[i] - keep_min[j]) / delta)).
/// A lane sum q dequantizes to qmin + (q + 0.5) * delta.
struct QuantizedTables {
  std::size_t m = 0;
  std::vector<std::uint8_t> values;  // m * 16
  std::vector<float> keep_min;       // per-table minima
  float qmin = 0.0f;
  float qmax = 0.0f;
  float delta = 0.0f;

  std::span<const std::uint8_t> table(std::size_t j) const { return {values.data() + j * 16, 16}; }
  float dequantize(unsigned lane) const {
    return qmin + (static_cast<float>(lane) + 0.5f) * delta;
  }
};

/// Sum over tables of each table's minimum: the smallest ADC distance any
/// code can have, used as qmin.
float tables_qmin(const LookupTables& tables);

/// Requires 16-entry tables and qmax >= qmin.
QuantizedTables quantize_tables(const LookupTables& tables, float qmin, float qmax);
/// Same, reusing the buffers of `out`.
void quantize_tables(const LookupTables& tables, float qmin, float qmax, QuantizedTables& out);

struct QmaxSource {
  const TransposedList* list = nullptr;
  const LookupTables* tables = nullptr;
};

/// Float ADC over the first min(init, available) valid codes of the sources
/// (in order) with a heap of size R; returns the heap's largest distance.
/// With no candidates at all, returns the sum of per-table maxima of the first
/// source.
float find_qmax(std::span<const QmaxSource> sources, std::size_t R, std::size_t init);
float find_qmax(const TransposedList& list, const LookupTables& tables, std::size_t R,
                std::size_t init);

enum class KernelKind { scalar, sse128, avx256 };

std::string_view kernel_name(KernelKind kind);
bool kernel_available(KernelKind kind);
/// Widest kernel the CPU supports.
KernelKind best_kernel();
/// Kernel pinned by QADC_KERNEL (scalar | 128 | 256), else best_kernel().
/// Throws if the variable names an unknown or unavailable kernel.
KernelKind default_kernel();
KernelKind parse_kernel(std::string_view name);

using LaneDistances = std::array<std::uint8_t, kBlockCodes>;

/// Reference kernel: lane l = saturating (at 255) byte sum over rows j of
/// table 2j at the low nibble then table 2j+1 at the high nibble.
LaneDistances scan_block_scalar(std::span<const std::uint8_t> block, const QuantizedTables& qt);

/// Shuffle-based kernel; bit-exact with scan_block_scalar. Falls back to the
/// scalar kernel when `kind` is not available.
LaneDistances scan_block_simd(std::span<const std::uint8_t> block, const QuantizedTables& qt,
                              KernelKind kind = best_kernel());

/// Computes lane distances for `block_count` consecutive blocks into `out`
/// (16 bytes per block).
void scan_blocks(KernelKind kind, const std::uint8_t* blocks, std::size_t block_count,
                 const QuantizedTables& qt, std::uint8_t* out);

/// Quick ADC scan of one list. Lanes whose quantized distance does not exceed
/// the heap's threshold (expressed in this list's quantized domain) are offered
/// to the heap with their dequantized distance; padding lanes are skipped and
/// saturated lanes are never admitted once the heap is full.
void qadc_scan(const TransposedList& list, const QuantizedTables& qt, NeighborHeap& heap,
               KernelKind kind = default_kernel());

}  // namespace qadc
