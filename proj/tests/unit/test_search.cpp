#include "doctest.h"
#include "oracles.hpp"
#include "qadc/search.hpp"

using namespace qadc;

namespace {

struct World {
  Dataset learn;
  Dataset base;
  Dataset queries;
  Codebook coarse;
  ProductQuantizer pq;
};

World make_world(std::size_t K, std::size_t m, std::size_t b, bool opq, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  World w;
  std::normal_distribution<float> g(0.0f, 1.0f);
  const auto centers = oracle::random_floats(rng, 40 * 16, 0.0f, 20.0f);
  auto draw = [&](std::size_t n) {
    Dataset ds(16, n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = rng() % 40;
      for (std::size_t j = 0; j < 16; ++j) ds.row(i)[j] = centers[c * 16 + j] + g(rng);
    }
    return ds;
  };
  w.learn = draw(3000);
  w.base = draw(2500);
  w.queries = draw(20);
  Dataset train_set = w.learn;
  if (K > 0) {
    w.coarse = train_coarse(w.learn, K, {6, 3});
    train_set = compute_residuals(w.coarse, w.learn);
  }
  const PqTrainParams p{m, b, 5, 4};
  w.pq = opq ? train_opq(train_set, {p, 3, 2}) : train_pq(train_set, p);
  return w;
}

/// Float tables for each probed cell, built from the rotated residual.
std::vector<std::pair<std::uint32_t, LookupTables>> cell_tables(const World& w, const IvfIndex& index,
                                                                std::span<const float> q,
                                                                std::size_t ma) {
  std::vector<std::pair<std::uint32_t, LookupTables>> out;
  const auto rq = w.pq.rotate(q);
  if (index.exhaustive()) {
    out.push_back({0, compute_tables(w.pq, rq)});
    return out;
  }
  std::vector<std::pair<double, std::uint32_t>> order;
  for (std::uint32_t c = 0; c < w.coarse.k; ++c) order.push_back({oracle::squared_l2(q, w.coarse.centroid(c)), c});
  std::sort(order.begin(), order.end());
  for (std::size_t i = 0; i < ma; ++i) {
    const auto rc = w.pq.rotate(w.coarse.centroid(order[i].second));
    std::vector<float> res(rq.size());
    for (std::size_t j = 0; j < res.size(); ++j) res[j] = rq[j] - rc[j];
    out.push_back({order[i].second, compute_tables(w.pq, res)});
  }
  return out;
}

std::vector<std::pair<float, std::uint64_t>> adc_oracle(const World& w, const IvfIndex& index,
                                                        std::span<const float> q, std::size_t ma,
                                                        std::size_t R) {
  std::vector<std::pair<float, std::uint64_t>> all;
  const std::size_t cs = w.pq.code_size();
  for (const auto& [cell, tables] : cell_tables(w, index, q, ma)) {
    const auto& list = index.lists[cell];
    for (std::size_t i = 0; i < list.size(); ++i) {
      float acc = 0.0f;
      for (std::size_t j = 0; j < w.pq.m(); ++j) {
        acc += tables.table(j)[oracle::subcode(list.codes.data() + i * cs, j, w.pq.b())];
      }
      all.push_back({acc, list.ids[i]});
    }
  }
  return oracle::top_r(all, R);
}

/// Replays the Quick ADC admission rule code by code in list order.
std::vector<Neighbor> qadc_replay(const World& w, const IvfIndex& index, std::span<const float> q,
                                  std::size_t ma, std::size_t R, std::size_t init) {
  const auto cells = cell_tables(w, index, q, ma);
  std::vector<QmaxSource> sources;
  for (const auto& [cell, tables] : cells) sources.push_back({&index.tlists[cell], &tables});
  const float qmax = find_qmax(sources, R, init);
  NeighborHeap heap(R);
  for (const auto& [cell, tables] : cells) {
    const float qmin = tables_qmin(tables);
    const auto qt = quantize_tables(tables, qmin, std::max(qmin, qmax));
    const auto std_list = untranspose_list(index.tlists[cell]);
    for (std::size_t i = 0; i < std_list.size(); ++i) {
      const auto lane = oracle::quantized_distance(std_list.codes.data() + i * w.pq.code_size(),
                                                   w.pq.m(), qt.values);
      if (heap.full() && lane == 255) continue;
      heap.push(std_list.ids[i], qt.dequantize(lane));
    }
  }
  return heap.sorted();
}

void check_ranked(const std::vector<Neighbor>& got,
                  const std::vector<std::pair<float, std::uint64_t>>& want) {
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i].id == want[i].second);
    CHECK(got[i].distance == want[i].first);
  }
}

}  // namespace

TEST_CASE("method names") {
  CHECK(parse_method("adc") == Method::adc);
  CHECK(parse_method("qadc") == Method::qadc);
  CHECK(method_name(Method::qadc) == "qadc");
  CHECK_THROWS_AS(parse_method("pq"), std::invalid_argument);
}

TEST_CASE("exhaustive ADC search ranks like the oracle") {
  for (std::size_t b : {4u, 8u}) {
    const auto w = make_world(0, 8, b, b == 8, 50 + b);
    const auto index = build_exhaustive(w.pq, w.base, Layout::standard);
    const Searcher s(w.pq, index);
    for (std::size_t qi = 0; qi < w.queries.count; ++qi) {
      SearchParams p;
      p.R = 10;
      const auto res = s.search(w.queries.row(qi), p);
      check_ranked(res.neighbors, adc_oracle(w, index, w.queries.row(qi), 1, 10));
    }
  }
}

TEST_CASE("a database vector finds itself") {
  const auto w = make_world(0, 8, 8, false, 51);
  const auto index = build_exhaustive(w.pq, w.base, Layout::standard);
  const Searcher s(w.pq, index);
  SearchParams p;
  p.R = 1;
  for (std::size_t id : {0u, 17u, 2499u}) {
    const auto res = s.search(w.base.row(id), p);
    const auto want = adc_oracle(w, index, w.base.row(id), 1, 2);
    // Only meaningful when its own code is strictly closest.
    const auto self = w.pq.encode(w.base.row(id));
    const auto tables = compute_tables(w.pq, w.base.row(id));
    if (want[0].second == id && want[1].first > want[0].first) {
      CHECK(res.neighbors[0].id == id);
    }
    CHECK(res.neighbors[0].distance <= adc_distance(self, tables));
  }
}

TEST_CASE("IVF ADC with ma = K covers every list") {
  const auto w = make_world(12, 8, 8, true, 52);
  const auto index = build_index(w.pq, w.coarse, w.base, Layout::standard);
  const Searcher s(w.pq, index);
  SearchParams p;
  p.R = 50;
  for (std::size_t ma : {1u, 3u, 12u}) {
    p.ma = ma;
    for (std::size_t qi = 0; qi < w.queries.count; ++qi) {
      const auto res = s.search(w.queries.row(qi), p);
      check_ranked(res.neighbors, adc_oracle(w, index, w.queries.row(qi), ma, 50));
      if (ma == 12) CHECK(res.neighbors.size() == 50);
    }
  }
}

TEST_CASE("ADC distances approximate the distance to the reconstruction") {
  const auto w = make_world(12, 8, 8, true, 53);
  const auto index = build_index(w.pq, w.coarse, w.base, Layout::standard);
  const Searcher s(w.pq, index);
  SearchParams p;
  p.R = 5;
  p.ma = 12;
  const auto q = w.queries.row(0);
  for (const auto& nb : s.search(q, p).neighbors) {
    const auto cell = assign(w.coarse, w.base.row(nb.id)).index;
    const auto res = compute_residuals(w.coarse, w.base.prefix(nb.id + 1));
    auto rec = w.pq.decode(w.pq.encode(res.row(nb.id)));
    for (std::size_t j = 0; j < rec.size(); ++j) rec[j] += w.coarse.centroid(cell)[j];
    CHECK(oracle::rel_close(nb.distance, oracle::squared_l2(q, rec), 1e-3, 1e-3));
  }
}

TEST_CASE("Quick ADC search replays the admission rule") {
  for (bool ivf : {false, true}) {
    const auto w = make_world(ivf ? 10 : 0, 8, 4, ivf, 54);
    const auto index = ivf ? build_index(w.pq, w.coarse, w.base, Layout::transposed16)
                           : build_exhaustive(w.pq, w.base, Layout::transposed16);
    const Searcher s(w.pq, index);
    for (auto kind : {KernelKind::scalar, KernelKind::sse128, KernelKind::avx256}) {
      if (!kernel_available(kind)) continue;
      SearchParams p;
      p.method = Method::qadc;
      p.kernel = kind;
      p.R = 20;
      p.init = 50;
      p.ma = ivf ? 4 : 1;
      for (std::size_t qi = 0; qi < w.queries.count; ++qi) {
        const auto res = s.search(w.queries.row(qi), p);
        CHECK(res.neighbors == qadc_replay(w, index, w.queries.row(qi), p.ma, p.R, p.init));
      }
    }
  }
}

TEST_CASE("results are ordered and timings consistent") {
  const auto w = make_world(8, 8, 4, false, 55);
  const auto index = build_index(w.pq, w.coarse, w.base, Layout::transposed16);
  const Searcher s(w.pq, index);
  SearchParams p;
  p.method = Method::qadc;
  p.ma = 3;
  const auto res = s.search(w.queries.row(1), p);
  CHECK(std::is_sorted(res.neighbors.begin(), res.neighbors.end(), ranks_before));
  CHECK(res.ids().size() == res.neighbors.size());
  const auto& t = res.timings;
  CHECK(t.index_ms >= 0.0);
  CHECK(t.tables_ms >= 0.0);
  CHECK(t.scan_ms >= 0.0);
  CHECK(t.total_ms == doctest::Approx(t.index_ms + t.tables_ms + t.scan_ms));
}

TEST_CASE("search errors") {
  const auto w = make_world(8, 8, 4, false, 56);
  const auto standard = build_index(w.pq, w.coarse, w.base, Layout::standard);
  const auto transposed = standard.with_layout(Layout::transposed16);
  const Searcher ss(w.pq, standard), st(w.pq, transposed);
  SearchParams p;
  p.method = Method::qadc;
  CHECK_THROWS_AS(ss.search(w.queries.row(0), p), std::invalid_argument);
  p.method = Method::adc;
  CHECK_THROWS_AS(st.search(w.queries.row(0), p), std::invalid_argument);
  CHECK_THROWS_AS(ss.search(std::vector<float>(5), p), std::invalid_argument);
  p.R = 0;
  CHECK_THROWS_AS(ss.search(w.queries.row(0), p), std::invalid_argument);
  p.R = 10;
  p.ma = 9;
  CHECK_THROWS_AS(ss.search(w.queries.row(0), p), std::invalid_argument);

  const auto ex = build_exhaustive(w.pq, w.base, Layout::standard);
  const Searcher se(w.pq, ex);
  p.ma = 2;
  CHECK_THROWS_AS(se.search(w.queries.row(0), p), std::invalid_argument);

  const auto other = make_world(0, 4, 4, false, 57);
  CHECK_THROWS_AS(Searcher(other.pq, standard), std::invalid_argument);
}
