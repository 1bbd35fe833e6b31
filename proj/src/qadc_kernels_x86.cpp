#include "kernels_x86.hpp"

#if defined(__x86_64__) || defined(__i386__)

#include <immintrin.h>

namespace qadc::detail {

bool cpu_supports_ssse3() { return __builtin_cpu_supports("ssse3"); }
bool cpu_supports_avx2() { return __builtin_cpu_supports("avx2"); }

namespace {

// One row: look up the low nibbles in table `lo`, the high nibbles in `hi`,
// and accumulate with unsigned saturation.
__attribute__((target("ssse3"))) inline __m128i lookup_add_row(__m128i acc, __m128i comps,
                                                                __m128i lo, __m128i hi) {
  const __m128i mask = _mm_set1_epi8(0x0F);
  const __m128i first = _mm_and_si128(comps, mask);
  acc = _mm_adds_epu8(acc, _mm_shuffle_epi8(lo, first));
  const __m128i second = _mm_and_si128(_mm_srli_epi16(comps, 4), mask);
  return _mm_adds_epu8(acc, _mm_shuffle_epi8(hi, second));
}

template <std::size_t M>
__attribute__((target("ssse3"))) void sse_fixed(const std::uint8_t* blocks,
                                                std::size_t block_count,
                                                const std::uint8_t* tables,
                                                std::uint8_t* out) {
  constexpr std::size_t kRows = M / 2;
  __m128i t[M];
  for (std::size_t j = 0; j < M; ++j) {
    t[j] = _mm_loadu_si128(reinterpret_cast<const __m128i*>(tables + 16 * j));
  }
  for (std::size_t b = 0; b < block_count; ++b) {
    const std::uint8_t* blk = blocks + b * kRows * 16;
    __m128i acc = _mm_setzero_si128();
    for (std::size_t r = 0; r < kRows; ++r) {
      const __m128i comps = _mm_loadu_si128(reinterpret_cast<const __m128i*>(blk + 16 * r));
      acc = lookup_add_row(acc, comps, t[2 * r], t[2 * r + 1]);
    }
    _mm_storeu_si128(reinterpret_cast<__m128i*>(out + 16 * b), acc);
  }
}

__attribute__((target("ssse3"))) void sse_dynamic(const std::uint8_t* blocks,
                                                  std::size_t block_count, std::size_t m,
                                                  const std::uint8_t* tables,
                                                  std::uint8_t* out) {
  const std::size_t rows = m / 2;
  for (std::size_t b = 0; b < block_count; ++b) {
    const std::uint8_t* blk = blocks + b * rows * 16;
    __m128i acc = _mm_setzero_si128();
    for (std::size_t r = 0; r < rows; ++r) {
      const __m128i comps = _mm_loadu_si128(reinterpret_cast<const __m128i*>(blk + 16 * r));
      const __m128i lo = _mm_loadu_si128(reinterpret_cast<const __m128i*>(tables + 32 * r));
      const __m128i hi = _mm_loadu_si128(reinterpret_cast<const __m128i*>(tables + 32 * r + 16));
      acc = lookup_add_row(acc, comps, lo, hi);
    }
    _mm_storeu_si128(reinterpret_cast<__m128i*>(out + 16 * b), acc);
  }
}

// Two rows per iteration, one in each 128-bit lane. Lane 0 of the table
// registers holds the tables of row 2p, lane 1 those of row 2p+1. Saturating
// byte addition of non-negative values is min(255, sum) whatever the order, so
// combining the two lanes at the end matches the row-by-row reference.
__attribute__((target("avx2"))) inline __m256i lookup_add_pair(__m256i acc, __m256i comps,
                                                               __m256i lo, __m256i hi) {
  const __m256i mask = _mm256_set1_epi8(0x0F);
  const __m256i first = _mm256_and_si256(comps, mask);
  acc = _mm256_adds_epu8(acc, _mm256_shuffle_epi8(lo, first));
  const __m256i second = _mm256_and_si256(_mm256_srli_epi16(comps, 4), mask);
  return _mm256_adds_epu8(acc, _mm256_shuffle_epi8(hi, second));
}

__attribute__((target("avx2"))) inline __m256i pair_tables(const std::uint8_t* tables,
                                                           std::size_t row, bool high) {
  const std::size_t off = high ? 16 : 0;
  const __m128i lane0 =
      _mm_loadu_si128(reinterpret_cast<const __m128i*>(tables + 32 * row + off));
  const __m128i lane1 =
      _mm_loadu_si128(reinterpret_cast<const __m128i*>(tables + 32 * (row + 1) + off));
  return _mm256_set_m128i(lane1, lane0);
}

__attribute__((target("avx2"))) inline __m128i fold_lanes(__m256i acc) {
  return _mm_adds_epu8(_mm256_castsi256_si128(acc), _mm256_extracti128_si256(acc, 1));
}

template <std::size_t M>
__attribute__((target("avx2"))) void avx_fixed(const std::uint8_t* blocks,
                                               std::size_t block_count,
                                               const std::uint8_t* tables,
                                               std::uint8_t* out) {
  constexpr std::size_t kRows = M / 2;
  constexpr std::size_t kPairs = kRows / 2;
  __m256i lo[kPairs];
  __m256i hi[kPairs];
  for (std::size_t p = 0; p < kPairs; ++p) {
    lo[p] = pair_tables(tables, 2 * p, false);
    hi[p] = pair_tables(tables, 2 * p, true);
  }
  for (std::size_t b = 0; b < block_count; ++b) {
    const std::uint8_t* blk = blocks + b * kRows * 16;
    __m256i acc = _mm256_setzero_si256();
    for (std::size_t p = 0; p < kPairs; ++p) {
      const __m256i comps = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(blk + 32 * p));
      acc = lookup_add_pair(acc, comps, lo[p], hi[p]);
    }
    _mm_storeu_si128(reinterpret_cast<__m128i*>(out + 16 * b), fold_lanes(acc));
  }
}

__attribute__((target("avx2"))) void avx_dynamic(const std::uint8_t* blocks,
                                                 std::size_t block_count, std::size_t m,
                                                 const std::uint8_t* tables,
                                                 std::uint8_t* out) {
  const std::size_t rows = m / 2;
  const std::size_t pairs = rows / 2;
  for (std::size_t b = 0; b < block_count; ++b) {
    const std::uint8_t* blk = blocks + b * rows * 16;
    __m256i acc = _mm256_setzero_si256();
    for (std::size_t p = 0; p < pairs; ++p) {
      const __m256i comps = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(blk + 32 * p));
      acc = lookup_add_pair(acc, comps, pair_tables(tables, 2 * p, false),
                            pair_tables(tables, 2 * p, true));
    }
    __m128i folded = fold_lanes(acc);
    if (rows % 2 != 0) {
      const std::size_t r = rows - 1;
      const __m128i comps = _mm_loadu_si128(reinterpret_cast<const __m128i*>(blk + 16 * r));
      const __m128i tlo = _mm_loadu_si128(reinterpret_cast<const __m128i*>(tables + 32 * r));
      const __m128i thi =
          _mm_loadu_si128(reinterpret_cast<const __m128i*>(tables + 32 * r + 16));
      folded = lookup_add_row(folded, comps, tlo, thi);
    }
    _mm_storeu_si128(reinterpret_cast<__m128i*>(out + 16 * b), folded);
  }
}

}  // namespace

void scan_blocks_sse128(const std::uint8_t* blocks, std::size_t block_count, std::size_t m,
                        const std::uint8_t* tables, std::uint8_t* out) {
  switch (m) {
    case 8: return sse_fixed<8>(blocks, block_count, tables, out);
    case 16: return sse_fixed<16>(blocks, block_count, tables, out);
    case 32: return sse_fixed<32>(blocks, block_count, tables, out);
    default: return sse_dynamic(blocks, block_count, m, tables, out);
  }
}

void scan_blocks_avx256(const std::uint8_t* blocks, std::size_t block_count, std::size_t m,
                        const std::uint8_t* tables, std::uint8_t* out) {
  switch (m) {
    case 8: return avx_fixed<8>(blocks, block_count, tables, out);
    case 16: return avx_fixed<16>(blocks, block_count, tables, out);
    case 32: return avx_fixed<32>(blocks, block_count, tables, out);
    default: return avx_dynamic(blocks, block_count, m, tables, out);
  }
}

}  // namespace qadc::detail

#else

namespace qadc::detail {

bool cpu_supports_ssse3() { return false; }
bool cpu_supports_avx2() { return false; }
void scan_blocks_sse128(const std::uint8_t*, std::size_t, std::size_t, const std::uint8_t*,
                        std::uint8_t*) {}
void scan_blocks_avx256(const std::uint8_t*, std::size_t, std::size_t, const std::uint8_t*,
                        std::uint8_t*) {}

}  // namespace qadc::detail

#endif
