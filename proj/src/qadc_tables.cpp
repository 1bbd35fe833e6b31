#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qadc/qadc.hpp"

#if defined(__AVX__)
#include <immintrin.h>
#endif

namespace qadc {

float tables_qmin(const LookupTables& tables) {
  float qmin = 0.0f;
  for (std::size_t j = 0; j < tables.m; ++j) {
    const float* t = tables.values.data() + j * tables.k;
    float lo = t[0];
    for (std::size_t i = 1; i < tables.k; ++i) lo = std::min(lo, t[i]);
    qmin += lo;
  }
  return qmin;
}

void quantize_tables(const LookupTables& tables, float qmin, float qmax, QuantizedTables& qt) {
  if (tables.k != 16) throw std::invalid_argument("quantize_tables: tables must have 16 entries");
  if (!(qmax >= qmin)) throw std::invalid_argument("quantize_tables: qmax < qmin");
  qt.m = tables.m;
  qt.qmin = qmin;
  qt.qmax = qmax;
  qt.delta = (qmax - qmin) / static_cast<float>(kMaxTableEntry);
  qt.values.resize(tables.m * 16);
  qt.keep_min.resize(tables.m);
  const double delta = qt.delta;
  for (std::size_t j = 0; j < tables.m; ++j) {
    const float* t = tables.values.data() + j * 16;
    float lo = t[0];
    for (std::size_t i = 1; i < 16; ++i) lo = std::min(lo, t[i]);
    qt.keep_min[j] = lo;
    std::uint8_t* out = qt.values.data() + j * 16;
    if (delta > 0.0) {
      // Offsets are >= 0, so truncation after the clamp is the floor.
#if defined(__AVX__)
      const __m256d vlo = _mm256_set1_pd(lo), vdelta = _mm256_set1_pd(delta),
                    vcap = _mm256_set1_pd(kMaxTableEntry);
      __m128i part[4];
      for (int i = 0; i < 4; ++i) {
        const __m256d v = _mm256_cvtps_pd(_mm_loadu_ps(t + 4 * i));
        const __m256d q = _mm256_min_pd(_mm256_div_pd(_mm256_sub_pd(v, vlo), vdelta), vcap);
        part[i] = _mm256_cvttpd_epi32(q);
      }
      const __m128i lo16 = _mm_packs_epi32(part[0], part[1]), hi16 = _mm_packs_epi32(part[2], part[3]);
      _mm_storeu_si128(reinterpret_cast<__m128i*>(out), _mm_packus_epi16(lo16, hi16));
#else
      for (std::size_t i = 0; i < 16; ++i) {
        const double q = (static_cast<double>(t[i]) - lo) / delta;
        out[i] = static_cast<std::uint8_t>(static_cast<int>(q < kMaxTableEntry ? q : kMaxTableEntry));
      }
#endif
    } else {
      for (std::size_t i = 0; i < 16; ++i) out[i] = t[i] > lo ? kMaxTableEntry : 0;
    }
  }
}

QuantizedTables quantize_tables(const LookupTables& tables, float qmin, float qmax) {
  QuantizedTables qt;
  quantize_tables(tables, qmin, qmax, qt);
  return qt;
}

float find_qmax(std::span<const QmaxSource> sources, std::size_t R, std::size_t init) {
  if (R == 0 || init == 0) throw std::invalid_argument("find_qmax: R and init must be >= 1");
  std::vector<Neighbor> seen;
  seen.reserve(init);
  std::size_t scanned = 0;
  for (const auto& src : sources) {
    const auto& list = *src.list;
    const auto& tables = *src.tables;
    if (tables.k != 16 || tables.m != list.m) {
      throw std::invalid_argument("find_qmax: tables do not match list");
    }
    const std::size_t rows = list.m / 2;
    const float* t = tables.values.data();
    for (std::size_t blk = 0; blk < list.block_count() && scanned < init; ++blk) {
      const std::uint8_t* block = list.blocks.data() + blk * list.block_bytes();
      const std::uint64_t* ids = list.ids.data() + blk * kBlockCodes;
      for (std::size_t l = 0; l < kBlockCodes && scanned < init; ++l) {
        if (ids[l] == kInvalidId) continue;
        float d = 0.0f;
        for (std::size_t r = 0; r < rows; ++r) {
          const std::uint8_t byte = block[r * kBlockCodes + l];
          d += t[(2 * r) * 16 + (byte & 0x0F)];
          d += t[(2 * r + 1) * 16 + (byte >> 4)];
        }
        seen.push_back({ids[l], d});
        ++scanned;
      }
    }
    if (scanned >= init) break;
  }
  if (scanned > 0) {
    // The R-th best seen so far, or the worst when fewer were seen.
    const auto nth = seen.begin() + static_cast<std::ptrdiff_t>(std::min(R, seen.size()) - 1);
    std::nth_element(seen.begin(), nth, seen.end(), ranks_before);
    return nth->distance;
  }
  if (sources.empty()) return 0.0f;
  const auto& tables = *sources.front().tables;
  float bound = 0.0f;
  for (std::size_t j = 0; j < tables.m; ++j) bound += *std::ranges::max_element(tables.table(j));
  return bound;
}

float find_qmax(const TransposedList& list, const LookupTables& tables, std::size_t R,
                std::size_t init) {
  const QmaxSource src{&list, &tables};
  return find_qmax(std::span<const QmaxSource>(&src, 1), R, init);
}

}  // namespace qadc
