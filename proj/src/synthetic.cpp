#include "qadc/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

namespace qadc {

namespace {

struct Model {
  std::size_t dim;
  std::size_t rank;
  std::vector<float> centers;  // clusters x dim
  std::vector<float> factors;  // clusters x rank x dim
};

void sample(const Model& model, const SyntheticParams& p, std::mt19937_64& rng, Dataset& out) {
  std::uniform_int_distribution<std::size_t> pick(0, p.clusters - 1);
  std::normal_distribution<float> gauss(0.0f, 1.0f);
  std::vector<float> z(model.rank);
  for (std::size_t i = 0; i < out.count; ++i) {
    const std::size_t c = pick(rng);
    for (auto& v : z) v = gauss(rng);
    auto row = out.row(i);
    const float* center = model.centers.data() + c * model.dim;
    const float* basis = model.factors.data() + c * model.rank * model.dim;
    for (std::size_t j = 0; j < model.dim; ++j) {
      float v = center[j] + p.noise * gauss(rng);
      for (std::size_t r = 0; r < model.rank; ++r) v += z[r] * basis[r * model.dim + j];
      row[j] = std::clamp(std::round(v), 0.0f, 255.0f);
    }
  }
}

}  // namespace

BenchData generate_synthetic(const SyntheticParams& p) {
  if (p.dim == 0 || p.base == 0 || p.learn == 0 || p.clusters == 0) {
    throw std::invalid_argument("synthetic: sizes must be positive");
  }
  std::mt19937_64 rng(p.seed);
  std::exponential_distribution<float> expo(1.0f / p.center_scale);
  std::normal_distribution<float> gauss(0.0f, 1.0f);

  Model model{p.dim, p.rank, std::vector<float>(p.clusters * p.dim),
              std::vector<float>(p.clusters * p.rank * p.dim)};
  for (auto& v : model.centers) v = expo(rng);
  const float scale = p.rank > 0 ? p.factor_scale / std::sqrt(static_cast<float>(p.rank)) : 0.0f;
  for (auto& v : model.factors) v = scale * gauss(rng);

  BenchData data;
  data.base = Dataset(p.dim, p.base);
  data.learn = Dataset(p.dim, p.learn);
  data.queries = Dataset(p.dim, p.queries);
  sample(model, p, rng, data.base);
  sample(model, p, rng, data.learn);
  sample(model, p, rng, data.queries);
  data.groundtruth = exact_groundtruth(data.base, data.queries, p.gt_depth);
  return data;
}

}  // namespace qadc
