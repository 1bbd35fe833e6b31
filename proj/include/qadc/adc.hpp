#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "qadc/pq.hpp"

namespace qadc {

/// Id of padding slots in block-transposed lists.
inline constexpr std::uint64_t kInvalidId = std::numeric_limits<std::uint64_t>::max();

/// m tables of k squared distances each: entry (j, i) = |y'^j - C^j[i]|^2.
struct LookupTables {
  std::size_t m = 0;
  std::size_t k = 0;
  std::vector<float> values;

  std::span<const float> table(std::size_t j) const { return {values.data() + j * k, k}; }
  std::span<float> table(std::size_t j) { return {values.data() + j * k, k}; }
};

struct Neighbor {
  std::uint64_t id = 0;
  float distance = 0.0f;

  bool operator==(const Neighbor&) const = default;
};

/// Strict ordering used everywhere results are ranked: by distance, then id.
inline bool ranks_before(const Neighbor& a, const Neighbor& b) {
  return (a.distance < b.distance) | ((a.distance == b.distance) & (a.id < b.id));
}

/// Bounded max-heap keeping the `capacity` best neighbors seen so far.
class NeighborHeap {
 public:
  explicit NeighborHeap(std::size_t capacity);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  bool full() const { return entries_.size() == capacity_; }

  /// Current worst retained neighbor. Requires !empty().
  const Neighbor& worst() const { return entries_.front(); }

  /// Distance a candidate must not exceed to be considered (infinity until full).
  float threshold() const {
    return full() ? entries_.front().distance : std::numeric_limits<float>::infinity();
  }

  /// Inserts if there is room or the candidate ranks before the worst entry.
  bool push(std::uint64_t id, float distance);

  /// Removes and returns the worst entry.
  Neighbor pop();

  /// Entries in ascending rank order.
  std::vector<Neighbor> sorted() const;

  void clear() { entries_.clear(); }

 private:
  std::size_t capacity_;
  std::vector<Neighbor> entries_;
};

/// Squared-distance tables for an already rotated (residual) query.
LookupTables compute_tables(const ProductQuantizer& pq, std::span<const float> rotated_query);
void compute_tables(const ProductQuantizer& pq, std::span<const float> rotated_query,
                    LookupTables& out);

/// Sum of m table entries selected by the packed code, j ascending.
float adc_distance(std::span<const std::uint8_t> code, const LookupTables& tables);

/// Standard-layout inverted list: code i occupies bytes [i*code_size, (i+1)*code_size).
struct InvertedList {
  std::vector<std::uint64_t> ids;
  std::vector<std::uint8_t> codes;

  std::size_t size() const { return ids.size(); }
  bool operator==(const InvertedList&) const = default;
};

/// Offers every code of the list to the heap.
void scan_list(const InvertedList& list, const LookupTables& tables, NeighborHeap& heap);

}  // namespace qadc
