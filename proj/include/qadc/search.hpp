#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "qadc/adc.hpp"
#include "qadc/ivf.hpp"
#include "qadc/pq.hpp"
#include "qadc/qadc.hpp"

namespace qadc {

enum class Method { adc, qadc };

std::string_view method_name(Method method);
Method parse_method(std::string_view name);

struct SearchParams {
  std::size_t R = 100;
  std::size_t ma = 1;
  /// Codes scanned with float tables to set qmax (Quick ADC only).
  std::size_t init = 200;
  Method method = Method::adc;
  KernelKind kernel = default_kernel();
};

/// Wall time of each search step, in milliseconds.
struct PhaseTimings {
  double index_ms = 0.0;
  double tables_ms = 0.0;
  double scan_ms = 0.0;
  double total_ms = 0.0;

  PhaseTimings& operator+=(const PhaseTimings& other) {
    index_ms += other.index_ms;
    tables_ms += other.tables_ms;
    scan_ms += other.scan_ms;
    total_ms += other.total_ms;
    return *this;
  }
};

struct SearchResult {
  std::vector<Neighbor> neighbors;  // ascending (distance, id)
  PhaseTimings timings;

  std::vector<std::uint64_t> ids() const;
};

/// Index -> Tables -> Scan over a shared, immutable model and index. search()
/// is const and keeps its scratch state local, so one Searcher can serve
/// several threads.
class Searcher {
 public:
  Searcher(const ProductQuantizer& pq, const IvfIndex& index);

  SearchResult search(std::span<const float> query, const SearchParams& params) const;

  const ProductQuantizer& quantizer() const { return *pq_; }
  const IvfIndex& index() const { return *index_; }

 private:
  const ProductQuantizer* pq_;
  const IvfIndex* index_;
  std::vector<float> rotated_coarse_;  // R c for every coarse centroid
};

}  // namespace qadc
