#include "doctest.h"
#include "oracles.hpp"
#include "qadc/adc.hpp"

using namespace qadc;

namespace {

InvertedList random_list(std::mt19937_64& rng, std::size_t n, std::size_t code_size) {
  InvertedList list;
  for (std::size_t i = 0; i < n; ++i) list.ids.push_back(i * 3 + 1);
  list.codes.resize(n * code_size);
  for (auto& c : list.codes) c = static_cast<std::uint8_t>(rng());
  return list;
}

LookupTables random_tables(std::mt19937_64& rng, std::size_t m, std::size_t k) {
  return {m, k, oracle::random_floats(rng, m * k, 0.0f, 100.0f)};
}

/// Sum of selected entries read through the bitwise oracle.
float oracle_adc(const std::uint8_t* code, const LookupTables& t, std::size_t b) {
  float acc = 0.0f;
  for (std::size_t j = 0; j < t.m; ++j) acc += t.table(j)[oracle::subcode(code, j, b)];
  return acc;
}

}  // namespace

TEST_CASE("table entries") {
  // d = 2, m = 2: one-dimensional sub-spaces.
  std::vector<Codebook> cbs{{2, 1, {1, 7}}, {2, 1, {0, 3}}};
  std::vector<Codebook> full;
  for (auto& cb : cbs) {
    Codebook wide{16, 1, std::vector<float>(16, 50.0f)};
    wide.centroids[0] = cb.centroids[0];
    wide.centroids[1] = cb.centroids[1];
    full.push_back(wide);
  }
  const ProductQuantizer pq(2, 2, 4, full);
  const std::vector<float> y{3, 3};
  const auto t = compute_tables(pq, y);
  CHECK(t.m == 2);
  CHECK(t.k == 16);
  CHECK(t.table(0)[0] == 4.0f);
  CHECK(t.table(0)[1] == 16.0f);
  CHECK(t.table(1)[1] == 0.0f);
}

TEST_CASE("tables match a naive double loop") {
  std::mt19937_64 rng(30);
  const Dataset learn(32, oracle::random_floats(rng, 32 * 600));
  const auto pq = train_pq(learn, {8, 8, 2, 1});
  const auto y = oracle::random_floats(rng, 32);
  LookupTables t;
  compute_tables(pq, y, t);
  for (std::size_t j = 0; j < 8; ++j) {
    for (std::size_t i = 0; i < 256; ++i) {
      const double want = oracle::squared_l2(std::span(y).subspan(j * 4, 4), pq.codebook(j).centroid(i));
      CHECK(oracle::rel_close(t.table(j)[i], want, 1e-4));
    }
  }
  CHECK_THROWS_AS(compute_tables(pq, std::vector<float>(31)), std::invalid_argument);
}

TEST_CASE("adc distance examples") {
  LookupTables zero{4, 16, std::vector<float>(64, 0.0f)};
  const std::vector<std::uint8_t> code{0x21, 0x43};
  CHECK(adc_distance(code, zero) == 0.0f);

  LookupTables two{2, 16, std::vector<float>(32, 9.0f)};
  two.table(0)[3] = 1.5f;
  two.table(1)[7] = 2.5f;
  CHECK(adc_distance(std::vector<std::uint8_t>{0x73}, two) == 4.0f);
  CHECK_THROWS_AS(adc_distance(std::vector<std::uint8_t>{0x73, 0x00}, two), std::invalid_argument);
}

TEST_CASE("adc equals the distance to the decoded vector") {
  std::mt19937_64 rng(31);
  const Dataset learn(16, oracle::random_floats(rng, 16 * 1000));
  for (std::size_t b : {4u, 8u}) {
    const auto pq = train_pq(learn, {4, b, 3, 1});
    for (int t = 0; t < 50; ++t) {
      const auto y = oracle::random_floats(rng, 16);
      const auto x = oracle::random_floats(rng, 16);
      const auto code = pq.encode(x);
      const auto tables = compute_tables(pq, y);
      const auto rec = pq.decode(code);
      CHECK(oracle::rel_close(adc_distance(code, tables), oracle::squared_l2(y, rec), 1e-4));
    }
  }
}

TEST_CASE("adc follows the packed layout for every width") {
  std::mt19937_64 rng(32);
  for (std::size_t b : {4u, 8u, 16u}) {
    for (std::size_t m : {2u, 3u, 6u, 8u, 16u}) {
      if (b == 4 && m % 2 != 0) continue;
      const std::size_t code_size = m * b / 8;
      const auto tables = random_tables(rng, m, std::size_t{1} << b);
      const auto list = random_list(rng, 64, code_size);
      for (std::size_t i = 0; i < 64; ++i) {
        const std::uint8_t* code = list.codes.data() + i * code_size;
        CHECK(adc_distance({code, code_size}, tables) == oracle_adc(code, tables, b));
      }
    }
  }
}

TEST_CASE("heap keeps the best entries in rank order") {
  NeighborHeap heap(3);
  CHECK(heap.threshold() == std::numeric_limits<float>::infinity());
  heap.push(1, 5.0f);
  heap.push(2, 1.0f);
  heap.push(3, 3.0f);
  CHECK(heap.full());
  CHECK(heap.threshold() == 5.0f);
  CHECK_FALSE(heap.push(4, 6.0f));
  CHECK_FALSE(heap.push(9, 5.0f));
  CHECK(heap.push(0, 5.0f));
  CHECK(heap.worst() == Neighbor{0, 5.0f});
  const auto s = heap.sorted();
  CHECK(s == std::vector<Neighbor>{{2, 1.0f}, {3, 3.0f}, {0, 5.0f}});
  CHECK(heap.pop() == Neighbor{0, 5.0f});
  CHECK(heap.pop() == Neighbor{3, 3.0f});
  CHECK_THROWS_AS(NeighborHeap(0), std::invalid_argument);
  heap.clear();
  CHECK_THROWS_AS(heap.pop(), std::out_of_range);
}

TEST_CASE("heap agrees with sort for random streams") {
  std::mt19937_64 rng(33);
  for (std::size_t n = 0; n <= 64; ++n) {
    for (std::size_t cap : {1u, 2u, 5u, 16u, 100u}) {
      NeighborHeap heap(cap);
      std::vector<std::pair<float, std::uint64_t>> all;
      for (std::size_t i = 0; i < n; ++i) {
        // Few distinct distances so ties are common.
        const float d = static_cast<float>(rng() % 8);
        const std::uint64_t id = rng() % 1000;
        heap.push(id, d);
        all.push_back({d, id});
      }
      const auto want = oracle::top_r(all, cap);
      const auto got = heap.sorted();
      REQUIRE(got.size() == want.size());
      for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].distance == want[i].first);
        CHECK(got[i].id == want[i].second);
      }
      float prev = std::numeric_limits<float>::infinity();
      while (!heap.empty()) {
        const auto w = heap.pop();
        CHECK(w.distance <= prev);
        prev = w.distance;
      }
    }
  }
}

TEST_CASE("scan_list ranks like a full sort") {
  std::mt19937_64 rng(34);
  for (std::size_t b : {4u, 8u, 16u}) {
    const std::size_t m = b == 16 ? 4 : 8;
    const std::size_t code_size = m * b / 8;
    const auto tables = random_tables(rng, m, std::size_t{1} << b);
    const auto list = random_list(rng, 10000, code_size);
    std::vector<std::pair<float, std::uint64_t>> all;
    for (std::size_t i = 0; i < list.size(); ++i) {
      all.push_back({oracle_adc(list.codes.data() + i * code_size, tables, b), list.ids[i]});
    }
    for (std::size_t r : {1u, 10u, 100u}) {
      NeighborHeap heap(r);
      scan_list(list, tables, heap);
      const auto want = oracle::top_r(all, r);
      const auto got = heap.sorted();
      REQUIRE(got.size() == r);
      for (std::size_t i = 0; i < r; ++i) {
        CHECK(got[i].id == want[i].second);
        CHECK(got[i].distance == want[i].first);
      }
    }
  }
}

TEST_CASE("scan_list edge sizes") {
  std::mt19937_64 rng(35);
  const auto tables = random_tables(rng, 4, 256);
  NeighborHeap heap(10);
  scan_list(InvertedList{}, tables, heap);
  CHECK(heap.empty());
  const auto list = random_list(rng, 7, 4);
  scan_list(list, tables, heap);
  CHECK(heap.size() == 7);
}

TEST_CASE("scaling tables keeps the ranking") {
  std::mt19937_64 rng(36);
  auto tables = random_tables(rng, 8, 256);
  const auto list = random_list(rng, 2000, 8);
  NeighborHeap a(50), b(50);
  scan_list(list, tables, a);
  for (auto& v : tables.values) v *= 4.0f;
  scan_list(list, tables, b);
  const auto sa = a.sorted(), sb = b.sorted();
  for (std::size_t i = 0; i < 50; ++i) CHECK(sa[i].id == sb[i].id);
}
