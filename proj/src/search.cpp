#include "qadc/search.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>
#include <string>

namespace qadc {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point from, Clock::time_point to) {
  return std::chrono::duration<double, std::milli>(to - from).count();
}

}  // namespace

std::string_view method_name(Method method) {
  return method == Method::adc ? "adc" : "qadc";
}

Method parse_method(std::string_view name) {
  if (name == "adc") return Method::adc;
  if (name == "qadc") return Method::qadc;
  throw std::invalid_argument("unknown method '" + std::string(name) + "' (expected adc or qadc)");
}

std::vector<std::uint64_t> SearchResult::ids() const {
  std::vector<std::uint64_t> out;
  out.reserve(neighbors.size());
  for (const auto& n : neighbors) out.push_back(n.id);
  return out;
}

Searcher::Searcher(const ProductQuantizer& pq, const IvfIndex& index) : pq_(&pq), index_(&index) {
  if (pq.d() != index.d || pq.m() != index.m || pq.code_size() != index.code_size) {
    throw std::invalid_argument("Searcher: model and index disagree");
  }
  if (index.coarse) {
    const auto& coarse = *index.coarse;
    rotated_coarse_.resize(coarse.k * coarse.dim);
    for (std::size_t c = 0; c < coarse.k; ++c) {
      pq.rotate(coarse.centroid(c), {rotated_coarse_.data() + c * coarse.dim, coarse.dim});
    }
  }
}

SearchResult Searcher::search(std::span<const float> query, const SearchParams& params) const {
  const auto& pq = *pq_;
  const auto& index = *index_;
  if (query.size() != pq.d()) throw std::invalid_argument("search: dimension mismatch");
  if (params.R == 0) throw std::invalid_argument("search: R must be positive");
  if (params.method == Method::qadc && index.layout != Layout::transposed16) {
    throw std::invalid_argument("search: Quick ADC needs a transposed16 index with b = 4");
  }
  if (params.method == Method::adc && index.layout != Layout::standard) {
    throw std::invalid_argument("search: ADC needs a standard-layout index");
  }

  SearchResult result;
  const auto t0 = Clock::now();

  // Index
  std::vector<std::uint32_t> cells;
  if (index.exhaustive()) {
    if (params.ma != 1) throw std::invalid_argument("search: exhaustive index requires ma = 1");
    cells = {0};
  } else {
    cells = nearest_cells(*index.coarse, query, params.ma);
  }
  const auto t1 = Clock::now();

  // Tables
  const std::size_t d = pq.d();
  const auto rotated = pq.rotate(query);
  std::vector<LookupTables> tables(cells.size());
  std::vector<float> residual(d);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (index.exhaustive()) {
      compute_tables(pq, rotated, tables[i]);
    } else {
      const float* c = rotated_coarse_.data() + cells[i] * d;
      for (std::size_t j = 0; j < d; ++j) residual[j] = rotated[j] - c[j];
      compute_tables(pq, residual, tables[i]);
    }
  }
  const auto t2 = Clock::now();

  // Scan
  NeighborHeap heap(params.R);
  if (params.method == Method::adc) {
    for (std::size_t i = 0; i < cells.size(); ++i) scan_list(index.lists[cells[i]], tables[i], heap);
  } else {
    std::vector<QmaxSource> sources(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) sources[i] = {&index.tlists[cells[i]], &tables[i]};
    const float qmax = find_qmax(sources, params.R, params.init);
    QuantizedTables qt;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const float qmin = tables_qmin(tables[i]);
      quantize_tables(tables[i], qmin, std::max(qmax, qmin), qt);
      qadc_scan(index.tlists[cells[i]], qt, heap, params.kernel);
    }
  }
  result.neighbors = heap.sorted();
  const auto t3 = Clock::now();

  result.timings.index_ms = elapsed_ms(t0, t1);
  result.timings.tables_ms = elapsed_ms(t1, t2);
  result.timings.scan_ms = elapsed_ms(t2, t3);
  result.timings.total_ms = elapsed_ms(t0, t3);
  return result;
}

}  // namespace qadc
