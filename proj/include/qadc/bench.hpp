#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "qadc/ivf.hpp"
#include "qadc/pq.hpp"
#include "qadc/search.hpp"
#include "qadc/vecio.hpp"

namespace qadc {

struct BenchConfig {
  std::string base_path;
  std::string learn_path;
  std::string query_path;
  std::string groundtruth_path;

  std::size_t m = 16;
  std::size_t b = 4;
  bool opq = false;
  /// Coarse cells; 0 selects exhaustive search.
  std::size_t K = 256;
  std::size_t ma = 24;
  std::size_t R = 100;
  std::size_t init = 200;
  Method method = Method::qadc;
  std::uint64_t seed = 1234;
  std::size_t repeats = 1;
  KernelKind kernel = default_kernel();

  /// 0 loads every vector.
  std::size_t base_limit = 0;
  std::size_t learn_limit = 0;
  std::size_t query_limit = 1000;

  std::size_t kmeans_iters = 25;
  std::size_t opq_iters = 20;

  /// Throws std::invalid_argument on non-positive counts or qadc with b != 4.
  void validate() const;
  /// E.g. "OPQ 16x4 QADC".
  std::string label() const;
};

struct BenchData {
  Dataset base;
  Dataset learn;
  Dataset queries;
  GroundTruth groundtruth;
};

struct PhaseStat {
  double mean_ms = 0.0;
  double stddev_ms = 0.0;

  bool operator==(const PhaseStat&) const = default;
};

struct BenchReport {
  std::string label;
  std::size_t queries = 0;
  std::size_t repeats = 0;
  /// Recall@R' for R' in {1, 10, 100} (those not exceeding R).
  std::map<std::size_t, double> recall_at;
  PhaseStat index;
  PhaseStat tables;
  PhaseStat scan;
  PhaseStat total;

  bool operator==(const BenchReport&) const = default;
};

struct TrainedModel {
  ProductQuantizer pq;
  IvfIndex index;
};

/// Fraction of queries whose true nearest neighbor (ground-truth rank 0) is
/// among the first `r` returned ids.
double recall_at(const std::vector<std::vector<std::uint64_t>>& results, const GroundTruth& gt,
                 std::size_t r);

/// Exact nearest neighbors by brute force (squared L2, ties by lower id).
GroundTruth exact_groundtruth(const Dataset& base, const Dataset& queries, std::size_t depth);

BenchData load_bench_data(const BenchConfig& config);

/// Trains the (O)PQ model and builds the index the config describes. With an
/// IVF, the quantizer is trained on learning-set residuals.
TrainedModel prepare_model(const BenchConfig& config, const BenchData& data);

/// Runs every query sequentially, `repeats` times, and aggregates recall and
/// per-phase timing (mean/stddev over repeats of the per-query mean).
BenchReport evaluate(const Searcher& searcher, const Dataset& queries, const GroundTruth& gt,
                     const SearchParams& params, std::size_t repeats, std::string label,
                     std::vector<std::vector<std::uint64_t>>* results = nullptr);

BenchReport run_bench(const BenchConfig& config, const BenchData& data);
BenchReport run_bench(const BenchConfig& config);

/// Exhaustive float-ADC runs for each m x b (e.g. {16,4}, {8,8}, {4,16}).
std::vector<BenchReport> sweep_configs(const BenchConfig& config,
                                       const std::vector<std::pair<std::size_t, std::size_t>>& shapes,
                                       const BenchData& data);

std::string format_table_header();
std::string format_table_row(const BenchReport& report);

/// One JSON object per line with explicit keys.
std::string to_json_line(const BenchReport& report);
BenchReport parse_json_line(const std::string& line);

}  // namespace qadc
