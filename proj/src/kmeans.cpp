#include "qadc/kmeans.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <utility>

namespace qadc {

float squared_l2(std::span<const float> a, std::span<const float> b) {
  float acc = 0.0f;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const float diff = a[i] - b[i];
    acc += diff * diff;
  }
  return acc;
}

Assignment assign(const Codebook& codebook, std::span<const float> vector) {
  if (vector.size() != codebook.dim) {
    throw std::invalid_argument("assign: dimension mismatch");
  }
  Assignment best{0, std::numeric_limits<float>::infinity()};
  for (std::size_t i = 0; i < codebook.k; ++i) {
    const float d = squared_l2(vector, codebook.centroid(i));
    if (d < best.distance) best = {static_cast<std::uint32_t>(i), d};
  }
  return best;
}

namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMatrix>;

// Below this many multiply-adds per point the direct loop is faster than GEMM.
constexpr std::size_t kGemmMinWork = 2048;

void check_points(PointsView points, std::size_t k) {
  if (k == 0) throw std::invalid_argument("k-means: k must be positive");
  if (points.dim == 0) throw std::invalid_argument("k-means: dim must be positive");
  if (points.count < k) {
    throw std::invalid_argument("k-means: fewer points than centroids");
  }
}

Codebook seed_plus_plus(PointsView points, std::size_t k, std::uint64_t seed) {
  constexpr std::size_t kBlock = 256;
  const std::size_t n = points.count;
  const std::size_t dim = points.dim;
  Codebook cb{k, dim, std::vector<float>(k * dim)};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);

  // Dimension-major copy so distance updates vectorize across points.
  std::vector<float> xt(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j) xt[j * n + i] = points.data[i * dim + j];
  }
  const std::size_t nblocks = (n + kBlock - 1) / kBlock;
  std::vector<float> weight(n, std::numeric_limits<float>::infinity());
  std::vector<double> block_sum(nblocks);
  alignas(64) float acc[kBlock];

  // Lowers every weight to its distance from `c` and refreshes the block sums.
  auto absorb = [&](std::span<const float> c) {
    for (std::size_t blk = 0; blk < nblocks; ++blk) {
      const std::size_t lo = blk * kBlock;
      const std::size_t len = std::min(kBlock, n - lo);
      std::fill_n(acc, len, 0.0f);
      for (std::size_t j = 0; j < dim; ++j) {
        const float cj = c[j];
        const float* col = xt.data() + j * n + lo;
        for (std::size_t i = 0; i < len; ++i) {
          const float d = col[i] - cj;
          acc[i] += d * d;
        }
      }
      float* w = weight.data() + lo;
      for (std::size_t i = 0; i < len; ++i) w[i] = std::min(w[i], acc[i]);
      block_sum[blk] = static_cast<double>(
          Eigen::Map<const Eigen::VectorXf>(w, static_cast<Eigen::Index>(len)).sum());
    }
  };

  std::size_t chosen = pick(rng);
  std::ranges::copy(points.row(chosen), cb.centroid(0).begin());
  absorb(cb.centroid(0));

  for (std::size_t c = 1; c < k; ++c) {
    const double total = std::accumulate(block_sum.begin(), block_sum.end(), 0.0);
    chosen = points.count;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      std::size_t blk = 0;
      while (blk + 1 < nblocks && target >= block_sum[blk]) target -= block_sum[blk++];
      const std::size_t lo = blk * kBlock;
      const std::size_t hi = std::min(n, lo + kBlock);
      double running = 0.0;
      for (std::size_t i = lo; i < hi; ++i) {
        running += weight[i];
        if (running > target && weight[i] > 0.0f) {
          chosen = i;
          break;
        }
      }
      // Rounding can leave the target past the last positive weight.
      if (chosen == points.count) {
        for (std::size_t i = points.count; i-- > 0;) {
          if (weight[i] > 0.0f) {
            chosen = i;
            break;
          }
        }
      }
    }
    if (chosen == points.count) chosen = pick(rng);
    auto centroid = cb.centroid(c);
    std::ranges::copy(points.row(chosen), centroid.begin());
    absorb(centroid);
  }
  return cb;
}

// One Lloyd update from fixed assignments. Empty clusters take the points
// farthest from their current centroid.
void update_centroids(PointsView points, std::span<const Assignment> assignments,
                      Codebook& cb) {
  std::vector<double> sums(cb.k * cb.dim, 0.0);
  std::vector<std::size_t> counts(cb.k, 0);
  for (std::size_t i = 0; i < points.count; ++i) {
    const auto c = assignments[i].index;
    ++counts[c];
    auto row = points.row(i);
    double* s = sums.data() + c * cb.dim;
    for (std::size_t j = 0; j < cb.dim; ++j) s[j] += row[j];
  }

  std::vector<std::size_t> empty;
  for (std::size_t c = 0; c < cb.k; ++c) {
    if (counts[c] == 0) {
      empty.push_back(c);
      continue;
    }
    auto centroid = cb.centroid(c);
    const double* s = sums.data() + c * cb.dim;
    for (std::size_t j = 0; j < cb.dim; ++j) {
      centroid[j] = static_cast<float>(s[j] / static_cast<double>(counts[c]));
    }
  }
  if (empty.empty()) return;

  std::vector<std::size_t> order(points.count);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t take = std::min(empty.size(), points.count);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take),
                    order.end(), [&](std::size_t a, std::size_t b) {
                      if (assignments[a].distance != assignments[b].distance) {
                        return assignments[a].distance > assignments[b].distance;
                      }
                      return a < b;
                    });
  for (std::size_t e = 0; e < take; ++e) {
    std::ranges::copy(points.row(order[e]), cb.centroid(empty[e]).begin());
  }
}

std::vector<double> lloyd(PointsView points, Codebook& cb, std::size_t iters) {
  std::vector<double> errors;
  errors.reserve(iters);
  for (std::size_t it = 0; it < iters; ++it) {
    const auto assignments = assign_all(cb, points);
    double err = 0.0;
    for (const auto& a : assignments) err += a.distance;
    errors.push_back(err / static_cast<double>(points.count));
    update_centroids(points, assignments, cb);
  }
  return errors;
}

}  // namespace

std::vector<Assignment> assign_all(const Codebook& codebook, PointsView points) {
  if (points.dim != codebook.dim) {
    throw std::invalid_argument("assign_all: dimension mismatch");
  }
  std::vector<Assignment> out(points.count);
  if (points.count == 0) return out;
  const std::size_t k = codebook.k;
  const std::size_t dim = codebook.dim;

  if (k * dim < kGemmMinWork) {
    for (std::size_t i = 0; i < points.count; ++i) out[i] = assign(codebook, points.row(i));
    return out;
  }

  // Approximate distances via |x|^2 + |c|^2 - 2 x.c, then an exact recheck of
  // every centroid within twice the worst-case rounding error of the minimum.
  // Centroids are processed in tiles so each product stays in cache.
  ConstRowMap centroids(codebook.centroids.data(), static_cast<Eigen::Index>(k),
                        static_cast<Eigen::Index>(dim));
  const Eigen::VectorXf cnorm = centroids.rowwise().squaredNorm();
  const float cmax = std::sqrt(cnorm.maxCoeff());
  const float unit = std::numeric_limits<float>::epsilon() * 0.5f;
  const float error_scale = 4.0f * static_cast<float>(dim + 4) * unit;

  const std::size_t tile = std::min<std::size_t>(k, 1024);
  const std::size_t chunk = 128;
  RowMatrix dots;
  std::vector<float> best(chunk), margin(chunk);
  std::vector<std::vector<std::pair<float, std::uint32_t>>> candidates(chunk);
  for (std::size_t start = 0; start < points.count; start += chunk) {
    const std::size_t rows = std::min(chunk, points.count - start);
    ConstRowMap block(points.data + start * dim, static_cast<Eigen::Index>(rows),
                      static_cast<Eigen::Index>(dim));
    for (std::size_t r = 0; r < rows; ++r) {
      const float xlen = block.row(static_cast<Eigen::Index>(r)).norm();
      margin[r] = 2.0f * error_scale * (xlen + cmax) * (xlen + cmax);
      best[r] = std::numeric_limits<float>::infinity();
      candidates[r].clear();
    }
    for (std::size_t t0 = 0; t0 < k; t0 += tile) {
      const std::size_t width = std::min(tile, k - t0);
      dots.noalias() = block * centroids.middleRows(static_cast<Eigen::Index>(t0),
                                                    static_cast<Eigen::Index>(width))
                                   .transpose();
      for (std::size_t r = 0; r < rows; ++r) {
        const float* drow = dots.data() + r * width;
        const float* cn = cnorm.data() + t0;
        float b = best[r];
        // The running minimum only decreases, so this keeps a superset of the
        // final candidates.
        for (std::size_t i = 0; i < width; ++i) {
          const float approx = cn[i] - 2.0f * drow[i];
          if (approx <= b + margin[r]) {
            b = std::min(b, approx);
            candidates[r].emplace_back(approx, static_cast<std::uint32_t>(t0 + i));
          }
        }
        best[r] = b;
      }
    }
    for (std::size_t r = 0; r < rows; ++r) {
      auto x = points.row(start + r);
      const float limit = best[r] + margin[r];
      Assignment a{0, std::numeric_limits<float>::infinity()};
      // Candidates are in ascending index order, so strict < keeps the lowest.
      for (const auto& [approx, i] : candidates[r]) {
        if (approx > limit) continue;
        const float d = squared_l2(x, codebook.centroid(i));
        if (d < a.distance) a = {i, d};
      }
      out[start + r] = a;
    }
  }
  return out;
}

KMeansResult train_kmeans(PointsView points, std::size_t k, const KMeansParams& params) {
  check_points(points, k);
  if (params.iters == 0) throw std::invalid_argument("k-means: iters must be >= 1");
  KMeansResult result;
  result.codebook = seed_plus_plus(points, k, params.seed);
  result.errors = lloyd(points, result.codebook, params.iters);
  return result;
}

KMeansResult refine_kmeans(PointsView points, Codebook initial, std::size_t iters) {
  check_points(points, initial.k);
  if (points.dim != initial.dim) {
    throw std::invalid_argument("refine_kmeans: dimension mismatch");
  }
  KMeansResult result;
  result.codebook = std::move(initial);
  result.errors = lloyd(points, result.codebook, iters);
  return result;
}

}  // namespace qadc
