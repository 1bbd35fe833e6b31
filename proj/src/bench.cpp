#include "qadc/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace qadc {

namespace {

bool is_bvecs(const std::string& path) {
  return path.size() >= 6 && path.compare(path.size() - 6, 6, ".bvecs") == 0;
}

Dataset read_vectors(const std::string& path, std::size_t limit) {
  const std::optional<std::size_t> lim = limit == 0 ? std::nullopt : std::optional(limit);
  return is_bvecs(path) ? read_bvecs(path, lim) : read_fvecs(path, lim);
}

PhaseStat summarize(const std::vector<double>& samples) {
  PhaseStat s;
  if (samples.empty()) return s;
  const double n = static_cast<double>(samples.size());
  s.mean_ms = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double var = 0.0;
  for (double v : samples) var += (v - s.mean_ms) * (v - s.mean_ms);
  s.stddev_ms = samples.size() > 1 ? std::sqrt(var / n) : 0.0;
  return s;
}

nlohmann::json stat_json(const PhaseStat& s) {
  return {{"mean", s.mean_ms}, {"stddev", s.stddev_ms}};
}

PhaseStat stat_from_json(const nlohmann::json& j) {
  return {j.at("mean").get<double>(), j.at("stddev").get<double>()};
}

}  // namespace

void BenchConfig::validate() const {
  if (m == 0 || R == 0 || repeats == 0 || init == 0 || kmeans_iters == 0) {
    throw std::invalid_argument("bench: m, R, init, repeats and kmeans_iters must be positive");
  }
  if (b != 4 && b != 8 && b != 16) throw std::invalid_argument("bench: b must be 4, 8 or 16");
  if (K > 0 && (ma == 0 || ma > K)) throw std::invalid_argument("bench: ma must be in [1, K]");
  if (method == Method::qadc && b != 4) {
    throw std::invalid_argument("bench: Quick ADC requires b = 4");
  }
  if (method == Method::qadc && m % 2 != 0) {
    throw std::invalid_argument("bench: Quick ADC requires an even m");
  }
}

std::string BenchConfig::label() const {
  std::string out = opq ? "OPQ " : "PQ ";
  out += std::to_string(m) + "x" + std::to_string(b) + " ";
  out += method == Method::adc ? "ADC" : "QADC";
  return out;
}

double recall_at(const std::vector<std::vector<std::uint64_t>>& results, const GroundTruth& gt,
                 std::size_t r) {
  if (gt.depth == 0 || gt.count < results.size()) {
    throw std::invalid_argument("recall_at: missing ground truth");
  }
  if (r == 0) throw std::invalid_argument("recall_at: r must be positive");
  std::size_t depth = 0;
  for (const auto& row : results) depth = std::max(depth, row.size());
  if (!results.empty() && r > depth) {
    throw std::invalid_argument("recall_at: r exceeds result depth");
  }
  if (results.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t q = 0; q < results.size(); ++q) {
    const auto truth = static_cast<std::uint64_t>(gt.row(q)[0]);
    const auto& row = results[q];
    const auto end = row.begin() + static_cast<std::ptrdiff_t>(std::min(r, row.size()));
    if (std::find(row.begin(), end, truth) != end) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(results.size());
}

GroundTruth exact_groundtruth(const Dataset& base, const Dataset& queries, std::size_t depth) {
  if (base.dim != queries.dim) throw std::invalid_argument("groundtruth: dimension mismatch");
  depth = std::min(depth, base.count);
  GroundTruth gt;
  gt.count = queries.count;
  gt.depth = depth;
  gt.ids.reserve(queries.count * depth);
  std::vector<float> dist(base.count);
  std::vector<std::int32_t> order(base.count);
  for (std::size_t q = 0; q < queries.count; ++q) {
    for (std::size_t i = 0; i < base.count; ++i) dist[i] = squared_l2(queries.row(q), base.row(i));
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(depth), order.end(),
                      [&](std::int32_t a, std::int32_t b) {
                        return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
                      });
    gt.ids.insert(gt.ids.end(), order.begin(), order.begin() + static_cast<std::ptrdiff_t>(depth));
  }
  return gt;
}

BenchData load_bench_data(const BenchConfig& config) {
  if (config.base_path.empty() || config.learn_path.empty() || config.query_path.empty()) {
    throw std::invalid_argument("bench: base, learn and query paths are required");
  }
  BenchData data;
  data.base = read_vectors(config.base_path, config.base_limit);
  data.learn = read_vectors(config.learn_path, config.learn_limit);
  data.queries = read_vectors(config.query_path, config.query_limit);
  if (config.groundtruth_path.empty()) {
    data.groundtruth = exact_groundtruth(data.base, data.queries, 100);
  } else {
    data.groundtruth = read_ivecs(config.groundtruth_path,
                                  config.query_limit == 0 ? std::nullopt
                                                          : std::optional(config.query_limit));
  }
  if (data.groundtruth.count < data.queries.count) {
    throw std::invalid_argument("bench: fewer ground-truth rows than queries");
  }
  return data;
}

TrainedModel prepare_model(const BenchConfig& config, const BenchData& data) {
  config.validate();
  const KMeansParams kp{config.kmeans_iters, config.seed};
  const PqTrainParams pp{config.m, config.b, config.kmeans_iters, config.seed};
  const Layout layout = config.method == Method::qadc ? Layout::transposed16 : Layout::standard;

  std::optional<Codebook> coarse;
  if (config.K > 0) coarse = train_coarse(data.learn, config.K, kp);
  const Dataset train_set = coarse ? compute_residuals(*coarse, data.learn) : data.learn;

  ProductQuantizer pq = config.opq ? train_opq(train_set, {pp, config.opq_iters})
                                   : train_pq(train_set, pp);
  IvfIndex index = coarse ? build_index(pq, *coarse, data.base, layout)
                          : build_exhaustive(pq, data.base, layout);
  return {std::move(pq), std::move(index)};
}

BenchReport evaluate(const Searcher& searcher, const Dataset& queries, const GroundTruth& gt,
                     const SearchParams& params, std::size_t repeats, std::string label,
                     std::vector<std::vector<std::uint64_t>>* results) {
  if (repeats == 0) throw std::invalid_argument("evaluate: repeats must be positive");
  BenchReport report;
  report.label = std::move(label);
  report.queries = queries.count;
  report.repeats = repeats;

  std::vector<std::vector<std::uint64_t>> ranked(queries.count);
  std::vector<double> index_ms, tables_ms, scan_ms, total_ms;
  for (std::size_t rep = 0; rep < repeats; ++rep) {
    PhaseTimings sum;
    for (std::size_t q = 0; q < queries.count; ++q) {
      auto res = searcher.search(queries.row(q), params);
      sum += res.timings;
      if (rep == 0) ranked[q] = res.ids();
    }
    const double n = std::max<double>(1.0, static_cast<double>(queries.count));
    index_ms.push_back(sum.index_ms / n);
    tables_ms.push_back(sum.tables_ms / n);
    scan_ms.push_back(sum.scan_ms / n);
    total_ms.push_back(sum.total_ms / n);
  }
  report.index = summarize(index_ms);
  report.tables = summarize(tables_ms);
  report.scan = summarize(scan_ms);
  report.total = summarize(total_ms);
  for (std::size_t r : {1, 10, 100}) {
    if (r <= params.R && queries.count > 0) report.recall_at[r] = recall_at(ranked, gt, r);
  }
  if (results != nullptr) *results = std::move(ranked);
  return report;
}

BenchReport run_bench(const BenchConfig& config, const BenchData& data) {
  const auto model = prepare_model(config, data);
  const Searcher searcher(model.pq, model.index);
  SearchParams params;
  params.R = config.R;
  params.ma = config.K > 0 ? config.ma : 1;
  params.init = config.init;
  params.method = config.method;
  params.kernel = config.kernel;
  return evaluate(searcher, data.queries, data.groundtruth, params, config.repeats,
                  config.label());
}

BenchReport run_bench(const BenchConfig& config) {
  config.validate();
  return run_bench(config, load_bench_data(config));
}

std::vector<BenchReport> sweep_configs(const BenchConfig& config,
                                       const std::vector<std::pair<std::size_t, std::size_t>>& shapes,
                                       const BenchData& data) {
  std::vector<BenchReport> out;
  for (auto [m, b] : shapes) {
    BenchConfig c = config;
    c.m = m;
    c.b = b;
    c.K = 0;
    c.method = Method::adc;
    out.push_back(run_bench(c, data));
  }
  return out;
}

std::string format_table_header() {
  char line[160];
  std::snprintf(line, sizeof(line), "%-16s %7s %16s %16s %16s %16s", "Config", "R@100",
                "Index (ms)", "Tables (ms)", "Scan (ms)", "Total (ms)");
  return line;
}

std::string format_table_row(const BenchReport& report) {
  double recall = 0.0;
  if (!report.recall_at.empty()) recall = report.recall_at.rbegin()->second;
  auto cell = [](const PhaseStat& s) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f±%.4f", s.mean_ms, s.stddev_ms);
    return std::string(buf);
  };
  char line[200];
  std::snprintf(line, sizeof(line), "%-16s %7.3f %16s %16s %16s %16s", report.label.c_str(), recall,
                cell(report.index).c_str(), cell(report.tables).c_str(), cell(report.scan).c_str(),
                cell(report.total).c_str());
  return line;
}

std::string to_json_line(const BenchReport& report) {
  nlohmann::json recall = nlohmann::json::object();
  for (const auto& [r, v] : report.recall_at) recall[std::to_string(r)] = v;
  const nlohmann::json j = {
      {"label", report.label},        {"queries", report.queries},
      {"repeats", report.repeats},    {"recall_at", recall},
      {"index_ms", stat_json(report.index)},   {"tables_ms", stat_json(report.tables)},
      {"scan_ms", stat_json(report.scan)},     {"total_ms", stat_json(report.total)},
  };
  return j.dump();
}

BenchReport parse_json_line(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  BenchReport report;
  report.label = j.at("label").get<std::string>();
  report.queries = j.at("queries").get<std::size_t>();
  report.repeats = j.at("repeats").get<std::size_t>();
  for (const auto& [key, value] : j.at("recall_at").items()) {
    report.recall_at[std::stoul(key)] = value.get<double>();
  }
  report.index = stat_from_json(j.at("index_ms"));
  report.tables = stat_from_json(j.at("tables_ms"));
  report.scan = stat_from_json(j.at("scan_ms"));
  report.total = stat_from_json(j.at("total_ms"));
  return report;
}

}  // namespace qadc
