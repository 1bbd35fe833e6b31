#include "doctest.h"
#include "oracles.hpp"
#include "qadc/bench.hpp"
#include "qadc/synthetic.hpp"

using namespace qadc;

namespace {

GroundTruth gt_of(std::vector<std::vector<std::int32_t>> rows) {
  GroundTruth gt;
  gt.count = rows.size();
  gt.depth = rows.empty() ? 0 : rows[0].size();
  for (auto& r : rows) gt.ids.insert(gt.ids.end(), r.begin(), r.end());
  return gt;
}

SyntheticParams tiny() {
  SyntheticParams p;
  p.dim = 16;
  p.base = 1500;
  p.learn = 1200;
  p.queries = 25;
  p.clusters = 10;
  p.rank = 4;
  p.center_scale = 20.0f;
  p.factor_scale = 8.0f;
  p.noise = 3.0f;
  p.gt_depth = 20;
  p.seed = 5;
  return p;
}

BenchConfig tiny_config() {
  BenchConfig c;
  c.m = 4;
  c.b = 4;
  c.K = 8;
  c.ma = 3;
  c.R = 10;
  c.init = 30;
  c.kmeans_iters = 4;
  c.opq_iters = 2;
  return c;
}

}  // namespace

TEST_CASE("recall examples") {
  const auto gt = gt_of({{4, 1, 2}, {7, 8, 9}});
  CHECK(recall_at({{4, 5, 6}, {7, 0, 0}}, gt, 1) == 1.0);
  CHECK(recall_at({{5, 6, 1}, {1, 2, 3}}, gt, 3) == 0.0);
  CHECK(recall_at({{5, 4, 6}, {1, 2, 3}}, gt, 1) == 0.0);
  CHECK(recall_at({{5, 4, 6}, {1, 2, 3}}, gt, 2) == 0.5);
  // The full ground-truth list in any order finds the nearest neighbor.
  CHECK(recall_at({{2, 1, 4}, {9, 8, 7}}, gt, 3) == 1.0);
  CHECK(recall_at({}, gt, 1) == 0.0);
}

TEST_CASE("recall errors") {
  const auto gt = gt_of({{1}});
  CHECK_THROWS_AS(recall_at({{1}}, gt, 0), std::invalid_argument);
  CHECK_THROWS_AS(recall_at({{1, 2}}, gt, 3), std::invalid_argument);
  CHECK_THROWS_AS(recall_at({{1}}, GroundTruth{}, 1), std::invalid_argument);
  CHECK_THROWS_AS(recall_at({{1}, {2}}, gt, 1), std::invalid_argument);
}

TEST_CASE("exact ground truth matches a brute-force sort") {
  std::mt19937_64 rng(60);
  Dataset base(8, oracle::random_floats(rng, 8 * 300));
  std::copy_n(base.row(3).begin(), 8, base.row(200).begin());  // exact duplicate
  Dataset queries(8, oracle::random_floats(rng, 8 * 10));
  std::copy_n(base.row(3).begin(), 8, queries.row(0).begin());
  const auto gt = exact_groundtruth(base, queries, 5);
  CHECK(gt.depth == 5);
  CHECK(gt.row(0)[0] == 3);
  CHECK(gt.row(0)[1] == 200);
  for (std::size_t q = 0; q < queries.count; ++q) {
    std::vector<std::pair<double, std::uint64_t>> all;
    for (std::size_t i = 0; i < base.count; ++i) all.push_back({oracle::squared_l2(queries.row(q), base.row(i)), i});
    const auto want = oracle::top_r(all, 5);
    for (std::size_t i = 0; i < 5; ++i) CHECK(gt.row(q)[i] == static_cast<std::int32_t>(want[i].second));
  }
  CHECK(exact_groundtruth(base.prefix(3), queries, 5).depth == 3);
}

TEST_CASE("config validation and labels") {
  BenchConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.label() == "PQ 16x4 QADC");
  c.opq = true;
  c.method = Method::adc;
  c.m = 8;
  c.b = 8;
  CHECK(c.label() == "OPQ 8x8 ADC");
  CHECK_NOTHROW(c.validate());

  auto bad = [](auto edit) {
    BenchConfig x;
    edit(x);
    return x;
  };
  CHECK_THROWS_AS(bad([](BenchConfig& x) { x.b = 8; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](BenchConfig& x) { x.m = 7; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](BenchConfig& x) { x.R = 0; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](BenchConfig& x) { x.repeats = 0; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](BenchConfig& x) { x.ma = 300; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](BenchConfig& x) { x.b = 5; x.method = Method::adc; }).validate(),
                  std::invalid_argument);
}

TEST_CASE("synthetic data") {
  const auto a = generate_synthetic(tiny());
  const auto b = generate_synthetic(tiny());
  CHECK(a.base.data == b.base.data);
  CHECK(a.queries.data == b.queries.data);
  CHECK(a.groundtruth.ids == b.groundtruth.ids);
  CHECK(a.base.count == 1500);
  CHECK(a.learn.count == 1200);
  CHECK(a.groundtruth.count == 25);
  CHECK(a.groundtruth.depth == 20);
  for (float v : a.base.data) {
    CHECK(v >= 0.0f);
    CHECK(v <= 255.0f);
    CHECK(v == std::round(v));
  }
  auto p = tiny();
  p.base = 0;
  CHECK_THROWS_AS(generate_synthetic(p), std::invalid_argument);
}

TEST_CASE("run_bench is deterministic and reports what was asked") {
  const auto data = generate_synthetic(tiny());
  for (bool opq : {false, true}) {
    for (Method method : {Method::adc, Method::qadc}) {
      auto c = tiny_config();
      c.opq = opq;
      c.method = method;
      const auto r1 = run_bench(c, data);
      const auto r2 = run_bench(c, data);
      CHECK(r1.label == c.label());
      CHECK(r1.queries == 25);
      CHECK(r1.repeats == 1);
      CHECK(r1.recall_at == r2.recall_at);
      CHECK(r1.recall_at.count(1) == 1);
      CHECK(r1.recall_at.count(10) == 1);
      CHECK(r1.recall_at.count(100) == 0);
      CHECK(r1.recall_at.at(10) >= r1.recall_at.at(1));
      CHECK(r1.recall_at.at(10) > 0.3);
      CHECK(r1.total.stddev_ms == 0.0);
      CHECK(r1.total.mean_ms >= r1.scan.mean_ms);
    }
  }
}

TEST_CASE("repeats report a spread and results come back in query order") {
  const auto data = generate_synthetic(tiny());
  auto c = tiny_config();
  c.K = 0;
  c.method = Method::adc;
  const auto model = prepare_model(c, data);
  CHECK(model.index.exhaustive());
  CHECK(model.index.layout == Layout::standard);
  const Searcher s(model.pq, model.index);
  SearchParams p;
  p.R = 10;
  std::vector<std::vector<std::uint64_t>> ranked;
  const auto rep = evaluate(s, data.queries, data.groundtruth, p, 3, "x", &ranked);
  CHECK(rep.repeats == 3);
  CHECK(rep.total.stddev_ms >= 0.0);
  REQUIRE(ranked.size() == 25);
  CHECK(ranked[4] == s.search(data.queries.row(4), p).ids());
  CHECK_THROWS_AS(evaluate(s, data.queries, data.groundtruth, p, 0, "x"), std::invalid_argument);
}

TEST_CASE("sweep") {
  const auto data = generate_synthetic(tiny());
  auto c = tiny_config();
  CHECK(sweep_configs(c, {}, data).empty());
  const auto out = sweep_configs(c, {{4, 4}, {2, 8}}, data);
  REQUIRE(out.size() == 2);
  CHECK(out[0].label == "PQ 4x4 ADC");
  CHECK(out[1].label == "PQ 2x8 ADC");
}

TEST_CASE("report formats") {
  BenchReport r;
  r.label = "PQ 16x4 QADC";
  r.queries = 1000;
  r.repeats = 3;
  r.recall_at = {{1, 0.25}, {10, 0.5}, {100, 0.875}};
  r.index = {0.125, 0.0};
  r.tables = {0.0625, 0.001};
  r.scan = {1.5, 0.25};
  r.total = {1.6875, 0.3};
  CHECK(parse_json_line(to_json_line(r)) == r);
  CHECK(to_json_line(r).find('\n') == std::string::npos);

  const auto header = format_table_header();
  const auto pos = [&](const char* s) { return header.find(s); };
  CHECK(pos("Config") < pos("R@100"));
  CHECK(pos("R@100") < pos("Index"));
  CHECK(pos("Index") < pos("Tables"));
  CHECK(pos("Tables") < pos("Scan"));
  CHECK(pos("Scan") < pos("Total"));
  const auto row = format_table_row(r);
  CHECK(row.find("PQ 16x4 QADC") == 0);
  CHECK(row.find("0.875") != std::string::npos);
  CHECK(row.find("1.5000±0.2500") != std::string::npos);
}

TEST_CASE("files on disk") {
  oracle::TempDir dir;
  const auto data = generate_synthetic(tiny());
  write_bvecs(dir / "base.bvecs", data.base);
  write_fvecs(dir / "learn.fvecs", data.learn);
  write_fvecs(dir / "query.fvecs", data.queries);
  write_ivecs(dir / "gt.ivecs", data.groundtruth);
  BenchConfig c = tiny_config();
  c.base_path = (dir / "base.bvecs").string();
  c.learn_path = (dir / "learn.fvecs").string();
  c.query_path = (dir / "query.fvecs").string();
  c.query_limit = 10;
  auto loaded = load_bench_data(c);
  CHECK(loaded.base.data == data.base.data);
  CHECK(loaded.queries.count == 10);
  CHECK(loaded.groundtruth.depth == std::min<std::size_t>(100, data.base.count));
  CHECK(loaded.groundtruth.row(3)[0] == data.groundtruth.row(3)[0]);

  c.groundtruth_path = (dir / "gt.ivecs").string();
  loaded = load_bench_data(c);
  CHECK(loaded.groundtruth.count == 10);
  CHECK(loaded.groundtruth.depth == 20);
  CHECK(run_bench(c).queries == 10);

  c.query_path.clear();
  CHECK_THROWS_AS(load_bench_data(c), std::invalid_argument);
}
