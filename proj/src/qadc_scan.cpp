#include <array>
#include <stdexcept>

#include "qadc/qadc.hpp"

#if defined(__AVX2__)
#include <immintrin.h>
#elif defined(__SSE2__)
#include <emmintrin.h>
#endif

namespace qadc {

namespace {

constexpr std::size_t kChunkBlocks = 64;

// Lanes <= strict always beat the heap's worst entry. Lanes == tie equal it
// in distance and win only on a lower id.
struct Admission {
  int strict = 255;
  int tie = -1;
  std::uint64_t tie_id = 0;

  // Largest lane value that may be admitted, or -1.
  int bound() const { return tie >= 0 ? tie : strict; }
};

class LaneThreshold {
 public:
  explicit LaneThreshold(const QuantizedTables& qt) : qt_(qt) {}

  float dequantized(unsigned lane) const { return qt_.dequantize(lane); }

  int guess(float limit) const {
    if (!(qt_.delta > 0.0f)) return limit >= qt_.qmin ? 254 : -1;
    const float lane = (limit - qt_.qmin) / qt_.delta - 0.5f;
    if (!(lane >= 0.0f)) return lane > -1.0f ? 0 : -1;
    return lane >= 254.0f ? 254 : static_cast<int>(lane);
  }

  Admission compute(const NeighborHeap& heap) const {
    if (!heap.full()) return {};
    const auto& worst = heap.worst();
    // Dequantized values are non-decreasing; find the last lane <= worst in [0, 254].
    int found = guess(worst.distance);
    while (found < 254 && dequantized(found + 1) <= worst.distance) ++found;
    while (found >= 0 && dequantized(found) > worst.distance) --found;
    if (found >= 0 && dequantized(found) == worst.distance) {
      return {found - 1, found, worst.id};
    }
    return {found, -1, 0};
  }

 private:
  const QuantizedTables& qt_;
};

// Bit l set when lane l <= threshold (threshold in [0, 255]).
inline unsigned le_mask(const std::uint8_t* lanes, int threshold) {
#if defined(__SSE2__)
  const __m128i v = _mm_loadu_si128(reinterpret_cast<const __m128i*>(lanes));
  const __m128i t = _mm_set1_epi8(static_cast<char>(threshold));
  const __m128i le = _mm_cmpeq_epi8(_mm_min_epu8(v, t), v);
  return static_cast<unsigned>(_mm_movemask_epi8(le));
#else
  unsigned mask = 0;
  for (unsigned l = 0; l < kBlockCodes; ++l) {
    if (lanes[l] <= threshold) mask |= 1u << l;
  }
  return mask;
#endif
}

// Bit l set when lane l of two consecutive blocks is <= bound.
inline std::uint32_t pair_mask(const std::uint8_t* lanes, int bound) {
#if defined(__AVX2__)
  const __m256i v = _mm256_load_si256(reinterpret_cast<const __m256i*>(lanes));
  const __m256i t = _mm256_set1_epi8(static_cast<char>(bound));
  return static_cast<std::uint32_t>(_mm256_movemask_epi8(_mm256_cmpeq_epi8(_mm256_min_epu8(v, t), v)));
#else
  return le_mask(lanes, bound) | (le_mask(lanes + kBlockCodes, bound) << kBlockCodes);
#endif
}

inline bool admits(const Admission& adm, unsigned lane, std::uint64_t id) {
  return static_cast<int>(lane) <= adm.strict || (static_cast<int>(lane) == adm.tie && id < adm.tie_id);
}

}  // namespace

void qadc_scan(const TransposedList& list, const QuantizedTables& qt, NeighborHeap& heap,
               KernelKind kind) {
  if (list.m != qt.m) throw std::invalid_argument("qadc_scan: tables do not match list");
  const std::size_t blocks = list.block_count();
  if (blocks == 0) return;
  if (qt.m % 2 != 0 || qt.values.size() != qt.m * 16) {
    throw std::invalid_argument("qadc_scan: malformed quantized tables");
  }

  const LaneThreshold thresholds(qt);
  Admission adm = thresholds.compute(heap);
  if (adm.bound() < 0) return;

  // Two chunks in flight: the kernel fills the next chunk while the ids
  // prefetched for the current one arrive.
  alignas(64) std::uint8_t lanes[2][kChunkBlocks * kBlockCodes];
  std::uint16_t candidates[kChunkBlocks * kBlockCodes];
  std::size_t found = 0;

  auto run_kernel = [&](std::size_t start, std::uint8_t* out) {
    const std::size_t count = std::min(kChunkBlocks, blocks - start);
    scan_blocks(kind, list.blocks.data() + start * list.block_bytes(), count, qt, out);
  };
  // Lanes passing the current bound, with their ids prefetched.
  auto collect = [&](std::size_t start, const std::uint8_t* in) {
    const int bound = adm.bound();
    const std::uint64_t* ids = list.ids.data() + start * kBlockCodes;
    const std::size_t valid = std::min(kChunkBlocks, blocks - start) * kBlockCodes;
    found = 0;
    for (std::size_t base = 0; base < valid; base += 2 * kBlockCodes) {
      std::uint32_t mask = pair_mask(in + base, bound);
      if (valid - base < 2 * kBlockCodes) mask &= (1u << (valid - base)) - 1;
      while (mask != 0) {
        const auto pos = static_cast<std::uint16_t>(base + __builtin_ctz(mask));
        mask &= mask - 1;
        __builtin_prefetch(ids + pos);
        candidates[found++] = pos;
      }
    }
  };

  run_kernel(0, lanes[0]);
  collect(0, lanes[0]);
  for (std::size_t start = 0, cur = 0; start < blocks; start += kChunkBlocks, cur ^= 1) {
    const std::size_t next = start + kChunkBlocks;
    if (next < blocks) run_kernel(next, lanes[cur ^ 1]);

    // Replay candidates in list order against the current admission.
    const std::uint8_t* in = lanes[cur];
    const std::uint64_t* ids = list.ids.data() + start * kBlockCodes;
    for (std::size_t c = 0; c < found; ++c) {
      const std::uint16_t pos = candidates[c];
      const unsigned lane = in[pos];
      const std::uint64_t id = ids[pos];
      if (id == kInvalidId || !admits(adm, lane, id)) continue;
      if (heap.push(id, thresholds.dequantized(lane))) {
        adm = thresholds.compute(heap);
        if (adm.bound() < 0) return;
      }
    }
    if (next < blocks) collect(next, lanes[cur ^ 1]);
  }
}

}  // namespace qadc
