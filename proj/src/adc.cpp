#include "qadc/adc.hpp"

#include <algorithm>
#include <stdexcept>

namespace qadc {

NeighborHeap::NeighborHeap(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("NeighborHeap: capacity must be positive");
  entries_.reserve(capacity);
}

bool NeighborHeap::push(std::uint64_t id, float distance) {
  const Neighbor candidate{id, distance};
  if (entries_.size() < capacity_) {
    entries_.push_back(candidate);
    std::push_heap(entries_.begin(), entries_.end(), ranks_before);
    return true;
  }
  if (!ranks_before(candidate, entries_.front())) return false;
  // Replace the root and sift it down; the child pick is kept branch-free.
  const std::size_t n = entries_.size();
  Neighbor* e = entries_.data();
  std::size_t hole = 0;
  for (;;) {
    std::size_t child = 2 * hole + 1;
    if (child + 1 < n) {
      child += static_cast<std::size_t>(ranks_before(e[child], e[child + 1]));
    } else if (child >= n) {
      break;
    }
    if (!ranks_before(candidate, e[child])) break;
    e[hole] = e[child];
    hole = child;
  }
  e[hole] = candidate;
  return true;
}

Neighbor NeighborHeap::pop() {
  if (entries_.empty()) throw std::out_of_range("NeighborHeap::pop on empty heap");
  std::pop_heap(entries_.begin(), entries_.end(), ranks_before);
  const Neighbor out = entries_.back();
  entries_.pop_back();
  return out;
}

std::vector<Neighbor> NeighborHeap::sorted() const {
  std::vector<Neighbor> out = entries_;
  std::sort_heap(out.begin(), out.end(), ranks_before);
  return out;
}

namespace {

float table_entry(const float* a, const float* b, std::size_t n) {
  float lanes[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (int l = 0; l < 8; ++l) {
      const float diff = a[i + l] - b[i + l];
      lanes[l] += diff * diff;
    }
  }
  float acc = 0.0f;
  for (; i < n; ++i) {
    const float diff = a[i] - b[i];
    acc += diff * diff;
  }
  for (float l : lanes) acc += l;
  return acc;
}

template <std::size_t Bits>
std::uint32_t read_subcode(const std::uint8_t* code, std::size_t j) {
  if constexpr (Bits == 4) {
    return (code[j / 2] >> (4 * (j & 1))) & 0x0F;
  } else if constexpr (Bits == 8) {
    return code[j];
  } else {
    return static_cast<std::uint32_t>(code[2 * j]) |
           (static_cast<std::uint32_t>(code[2 * j + 1]) << 8);
  }
}

template <std::size_t Bits, std::size_t M>
void scan_fixed(const InvertedList& list, const LookupTables& tables, NeighborHeap& heap) {
  constexpr std::size_t kK = std::size_t{1} << Bits;
  constexpr std::size_t kCodeSize = (M * Bits + 7) / 8;
  const float* t = tables.values.data();
  const std::uint8_t* code = list.codes.data();
  float threshold = heap.threshold();
  for (std::size_t i = 0; i < list.ids.size(); ++i, code += kCodeSize) {
    float d = 0.0f;
    for (std::size_t j = 0; j < M; ++j) d += t[j * kK + read_subcode<Bits>(code, j)];
    if (d > threshold) continue;
    if (heap.push(list.ids[i], d)) threshold = heap.threshold();
  }
}

template <std::size_t Bits>
void scan_dynamic(const InvertedList& list, const LookupTables& tables, NeighborHeap& heap) {
  const std::size_t m = tables.m;
  constexpr std::size_t kK = std::size_t{1} << Bits;
  const std::size_t code_size = (m * Bits + 7) / 8;
  const float* t = tables.values.data();
  const std::uint8_t* code = list.codes.data();
  float threshold = heap.threshold();
  for (std::size_t i = 0; i < list.ids.size(); ++i, code += code_size) {
    float d = 0.0f;
    for (std::size_t j = 0; j < m; ++j) d += t[j * kK + read_subcode<Bits>(code, j)];
    if (d > threshold) continue;
    if (heap.push(list.ids[i], d)) threshold = heap.threshold();
  }
}

template <std::size_t Bits>
void scan_bits(const InvertedList& list, const LookupTables& tables, NeighborHeap& heap) {
  switch (tables.m) {
    case 4: return scan_fixed<Bits, 4>(list, tables, heap);
    case 8: return scan_fixed<Bits, 8>(list, tables, heap);
    case 16: return scan_fixed<Bits, 16>(list, tables, heap);
    case 32: return scan_fixed<Bits, 32>(list, tables, heap);
    default: return scan_dynamic<Bits>(list, tables, heap);
  }
}

}  // namespace

void compute_tables(const ProductQuantizer& pq, std::span<const float> rotated_query,
                    LookupTables& out) {
  if (rotated_query.size() != pq.d()) {
    throw std::invalid_argument("compute_tables: dimension mismatch");
  }
  const std::size_t m = pq.m();
  const std::size_t k = pq.k();
  const std::size_t ds = pq.dsub();
  out.m = m;
  out.k = k;
  out.values.resize(m * k);
  for (std::size_t j = 0; j < m; ++j) {
    const float* sub = rotated_query.data() + j * ds;
    const float* centroids = pq.codebook(j).centroids.data();
    float* table = out.values.data() + j * k;
    for (std::size_t i = 0; i < k; ++i) table[i] = table_entry(sub, centroids + i * ds, ds);
  }
}

LookupTables compute_tables(const ProductQuantizer& pq, std::span<const float> rotated_query) {
  LookupTables out;
  compute_tables(pq, rotated_query, out);
  return out;
}

float adc_distance(std::span<const std::uint8_t> code, const LookupTables& tables) {
  const std::size_t m = tables.m;
  float d = 0.0f;
  switch (tables.k) {
    case 16:
      if (code.size() != (m + 1) / 2) break;
      for (std::size_t j = 0; j < m; ++j) d += tables.values[j * 16 + read_subcode<4>(code.data(), j)];
      return d;
    case 256:
      if (code.size() != m) break;
      for (std::size_t j = 0; j < m; ++j) d += tables.values[j * 256 + code[j]];
      return d;
    case 65536:
      if (code.size() != 2 * m) break;
      for (std::size_t j = 0; j < m; ++j) {
        d += tables.values[j * 65536 + read_subcode<16>(code.data(), j)];
      }
      return d;
    default:
      throw std::invalid_argument("adc_distance: unsupported table size");
  }
  throw std::invalid_argument("adc_distance: code size does not match tables");
}

void scan_list(const InvertedList& list, const LookupTables& tables, NeighborHeap& heap) {
  if (list.ids.empty()) return;
  switch (tables.k) {
    case 16: return scan_bits<4>(list, tables, heap);
    case 256: return scan_bits<8>(list, tables, heap);
    case 65536: return scan_bits<16>(list, tables, heap);
    default: throw std::invalid_argument("scan_list: unsupported table size");
  }
}

}  // namespace qadc
