// qadc: train, build, query and benchmark PQ / Quick ADC indexes.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "qadc/bench.hpp"
#include "qadc/ivf.hpp"
#include "qadc/pq.hpp"
#include "qadc/search.hpp"
#include "qadc/synthetic.hpp"
#include "qadc/vecio.hpp"

namespace {

using namespace qadc;

Dataset read_any(const std::string& path, std::size_t limit = 0) {
  const std::optional<std::size_t> lim = limit == 0 ? std::nullopt : std::optional(limit);
  if (path.size() >= 6 && path.compare(path.size() - 6, 6, ".bvecs") == 0) {
    return read_bvecs(path, lim);
  }
  return read_fvecs(path, lim);
}

std::vector<std::pair<std::size_t, std::size_t>> parse_shapes(const std::string& text) {
  std::vector<std::pair<std::size_t, std::size_t>> shapes;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto x = item.find('x');
    if (x == std::string::npos) throw std::invalid_argument("bad shape '" + item + "' (want MxB)");
    shapes.emplace_back(std::stoul(item.substr(0, x)), std::stoul(item.substr(x + 1)));
  }
  if (shapes.empty()) throw std::invalid_argument("no shapes given");
  return shapes;
}

void emit(const std::vector<BenchReport>& reports, const std::string& report_path) {
  std::cout << format_table_header() << '\n';
  for (const auto& r : reports) std::cout << format_table_row(r) << '\n';
  for (const auto& r : reports) {
    for (const auto& [depth, value] : r.recall_at) {
      std::printf("%s R@%zu = %.4f\n", r.label.c_str(), depth, value);
    }
  }
  if (!report_path.empty()) {
    std::ofstream out(report_path, std::ios::app);
    if (!out) throw std::runtime_error("cannot open " + report_path);
    for (const auto& r : reports) out << to_json_line(r) << '\n';
  }
}

void add_bench_options(CLI::App* cmd, BenchConfig& cfg, std::string& method, std::string& kernel) {
  cmd->add_option("--base", cfg.base_path, "Base vectors (.fvecs or .bvecs)")->required();
  cmd->add_option("--learn", cfg.learn_path, "Learning vectors")->required();
  cmd->add_option("--queries", cfg.query_path, "Query vectors")->required();
  cmd->add_option("--groundtruth", cfg.groundtruth_path,
                  "Ground truth (.ivecs); computed by brute force when omitted");
  cmd->add_option("--m", cfg.m, "Sub-quantizers")->capture_default_str();
  cmd->add_option("--b", cfg.b, "Bits per sub-quantizer (4, 8 or 16)")->capture_default_str();
  cmd->add_flag("--opq", cfg.opq, "Learn an OPQ rotation");
  cmd->add_option("--K", cfg.K, "Coarse cells, 0 for exhaustive search")->capture_default_str();
  cmd->add_option("--ma", cfg.ma, "Cells probed per query")->capture_default_str();
  cmd->add_option("--R", cfg.R, "Neighbors returned")->capture_default_str();
  cmd->add_option("--init", cfg.init, "Codes scanned to set qmax")->capture_default_str();
  cmd->add_option("--method", method, "adc or qadc")->capture_default_str();
  cmd->add_option("--kernel", kernel, "scalar, 128 or 256 (default: QADC_KERNEL or best)");
  cmd->add_option("--seed", cfg.seed, "Training seed")->capture_default_str();
  cmd->add_option("--repeats", cfg.repeats, "Passes over the query set")->capture_default_str();
  cmd->add_option("--base-limit", cfg.base_limit, "Read at most this many base vectors");
  cmd->add_option("--learn-limit", cfg.learn_limit, "Read at most this many learning vectors");
  cmd->add_option("--query-limit", cfg.query_limit, "Use the first N queries")
      ->capture_default_str();
  cmd->add_option("--iters", cfg.kmeans_iters, "k-means iterations")->capture_default_str();
  cmd->add_option("--opq-iters", cfg.opq_iters, "OPQ alternations")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Product quantization search with Quick ADC"};
  app.set_config("--config", "", "TOML/INI file with option values");
  app.require_subcommand(1);

  // train
  std::string learn_path, model_path, coarse_path;
  std::size_t learn_limit = 0;
  PqTrainParams pq_params;
  bool opq = false;
  std::size_t opq_iters = 20, K = 0;
  auto* train = app.add_subcommand("train", "Train a (O)PQ model, optionally on IVF residuals");
  train->add_option("--learn", learn_path, "Learning vectors")->required();
  train->add_option("--learn-limit", learn_limit, "Read at most this many vectors");
  train->add_option("--model", model_path, "Output model file")->required();
  train->add_option("--m", pq_params.m, "Sub-quantizers")->capture_default_str();
  train->add_option("--b", pq_params.b, "Bits per sub-quantizer")->capture_default_str();
  train->add_option("--iters", pq_params.iters, "k-means iterations")->capture_default_str();
  train->add_option("--seed", pq_params.seed, "Seed")->capture_default_str();
  train->add_flag("--opq", opq, "Learn an OPQ rotation");
  train->add_option("--opq-iters", opq_iters, "OPQ alternations")->capture_default_str();
  train->add_option("--K", K, "Coarse cells; trains the PQ on residuals when > 0");
  train->add_option("--coarse", coarse_path, "Output coarse centroids (.fvecs), needed with --K");

  // build
  std::string base_path, index_path, layout_name = "standard";
  std::size_t base_limit = 0;
  auto* build = app.add_subcommand("build", "Encode a base set into an index");
  build->add_option("--model", model_path, "Model file")->required();
  build->add_option("--base", base_path, "Base vectors")->required();
  build->add_option("--base-limit", base_limit, "Read at most this many vectors");
  build->add_option("--coarse", coarse_path, "Coarse centroids (.fvecs); exhaustive if omitted");
  build->add_option("--layout", layout_name, "standard or transposed16")->capture_default_str();
  build->add_option("--index", index_path, "Output index file")->required();

  // query
  std::string query_path, gt_path, out_path, method_name_opt = "adc", kernel_opt;
  std::size_t query_limit = 0;
  SearchParams sp;
  auto* query = app.add_subcommand("query", "Search an index and write result ids");
  query->add_option("--model", model_path, "Model file")->required();
  query->add_option("--index", index_path, "Index file")->required();
  query->add_option("--queries", query_path, "Query vectors")->required();
  query->add_option("--query-limit", query_limit, "Use the first N queries");
  query->add_option("--groundtruth", gt_path, "Ground truth (.ivecs) for recall");
  query->add_option("--out", out_path, "Result ids (.ivecs)");
  query->add_option("--R", sp.R, "Neighbors returned")->capture_default_str();
  query->add_option("--ma", sp.ma, "Cells probed")->capture_default_str();
  query->add_option("--init", sp.init, "Codes scanned to set qmax")->capture_default_str();
  query->add_option("--method", method_name_opt, "adc or qadc")->capture_default_str();
  query->add_option("--kernel", kernel_opt, "scalar, 128 or 256");

  // bench
  BenchConfig cfg;
  std::string bench_method = "qadc", bench_kernel, report_path;
  auto* bench = app.add_subcommand("bench", "Train, build and time one configuration");
  add_bench_options(bench, cfg, bench_method, bench_kernel);
  bench->add_option("--report", report_path, "Append JSON lines to this file");

  // sweep
  std::string shapes = "16x4,8x8,4x16";
  auto* sweep = app.add_subcommand("sweep", "Exhaustive float ADC for several m x b shapes");
  add_bench_options(sweep, cfg, bench_method, bench_kernel);
  sweep->add_option("--shapes", shapes, "Comma-separated MxB list")->capture_default_str();
  sweep->add_option("--report", report_path, "Append JSON lines to this file");

  // gen
  SyntheticParams syn;
  std::string prefix;
  auto* gen = app.add_subcommand("gen", "Write a synthetic SIFT-like dataset");
  gen->add_option("--prefix", prefix, "Output prefix for _base/_learn/_query/_groundtruth")
      ->required();
  gen->add_option("--base", syn.base, "Base vectors")->capture_default_str();
  gen->add_option("--learn", syn.learn, "Learning vectors")->capture_default_str();
  gen->add_option("--queries", syn.queries, "Queries")->capture_default_str();
  gen->add_option("--dim", syn.dim, "Dimension")->capture_default_str();
  gen->add_option("--clusters", syn.clusters, "Latent clusters")->capture_default_str();
  gen->add_option("--noise", syn.noise, "Isotropic noise scale")->capture_default_str();
  gen->add_option("--rank", syn.rank, "Rank of per-cluster variation")->capture_default_str();
  gen->add_option("--factor-scale", syn.factor_scale, "Scale of per-cluster variation")
      ->capture_default_str();
  gen->add_option("--center-scale", syn.center_scale, "Mean cluster center coordinate")
      ->capture_default_str();
  gen->add_option("--seed", syn.seed, "Seed")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      const Dataset learn = read_any(learn_path, learn_limit);
      Dataset train_set = learn;
      if (K > 0) {
        if (coarse_path.empty()) throw std::invalid_argument("--K needs --coarse");
        const auto coarse = train_coarse(learn, K, {pq_params.iters, pq_params.seed});
        write_fvecs(coarse_path, Dataset(coarse.dim, coarse.centroids));
        train_set = compute_residuals(coarse, learn);
      }
      if (opq) {
        auto res = train_opq_detailed(train_set, {pq_params, opq_iters});
        save_model(res.quantizer, model_path);
        std::printf("OPQ error %.4f after %zu alternations\n",
                    res.errors.empty() ? 0.0 : res.errors.back(), res.errors.size());
      } else {
        const auto pq = train_pq(train_set, pq_params);
        save_model(pq, model_path);
        std::printf("PQ error %.4f\n", reconstruction_error(pq, train_set));
      }
    } else if (*build) {
      const auto pq = load_model(model_path);
      const Dataset base = read_any(base_path, base_limit);
      const Layout layout = layout_name == "standard"       ? Layout::standard
                            : layout_name == "transposed16" ? Layout::transposed16
                                                            : throw std::invalid_argument(
                                                                  "unknown layout " + layout_name);
      IvfIndex index;
      if (coarse_path.empty()) {
        index = build_exhaustive(pq, base, layout);
      } else {
        const Dataset c = read_fvecs(coarse_path);
        index = build_index(pq, Codebook{c.count, c.dim, c.data}, base, layout);
      }
      save_index(index, index_path);
      std::printf("indexed %zu vectors in %zu lists\n", index.size(), index.list_count());
    } else if (*query) {
      const auto pq = load_model(model_path);
      const auto index = load_index(index_path);
      const Dataset queries = read_any(query_path, query_limit);
      sp.method = parse_method(method_name_opt);
      if (!kernel_opt.empty()) sp.kernel = parse_kernel(kernel_opt);
      const Searcher searcher(pq, index);
      GroundTruth gt;
      if (!gt_path.empty()) {
        gt = read_ivecs(gt_path, query_limit == 0 ? std::nullopt : std::optional(query_limit));
      } else {
        gt.count = queries.count;
        gt.depth = 1;
        gt.ids.assign(queries.count, 0);
      }
      std::vector<std::vector<std::uint64_t>> ranked;
      const auto report = evaluate(searcher, queries, gt, sp, 1, std::string(method_name(sp.method)),
                                   &ranked);
      std::cout << format_table_header() << '\n' << format_table_row(report) << '\n';
      if (!out_path.empty()) {
        GroundTruth out;
        out.count = ranked.size();
        out.depth = sp.R;
        for (const auto& row : ranked) {
          for (std::size_t i = 0; i < sp.R; ++i) {
            out.ids.push_back(i < row.size() ? static_cast<std::int32_t>(row[i]) : -1);
          }
        }
        write_ivecs(out_path, out);
      }
    } else if (*bench || *sweep) {
      cfg.method = parse_method(bench_method);
      if (!bench_kernel.empty()) cfg.kernel = parse_kernel(bench_kernel);
      cfg.validate();
      const auto data = load_bench_data(cfg);
      std::vector<BenchReport> reports;
      if (*bench) {
        reports.push_back(run_bench(cfg, data));
      } else {
        reports = sweep_configs(cfg, parse_shapes(shapes), data);
      }
      emit(reports, report_path);
    } else if (*gen) {
      const auto data = generate_synthetic(syn);
      write_fvecs(prefix + "_base.fvecs", data.base);
      write_fvecs(prefix + "_learn.fvecs", data.learn);
      write_fvecs(prefix + "_query.fvecs", data.queries);
      write_ivecs(prefix + "_groundtruth.ivecs", data.groundtruth);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "qadc: %s\n", e.what());
    return 1;
  }
  return 0;
}
