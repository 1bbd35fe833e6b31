#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace qadc {

/// k centroids of dimension `dim`, row-major.
struct Codebook {
  std::size_t k = 0;
  std::size_t dim = 0;
  std::vector<float> centroids;

  std::span<const float> centroid(std::size_t i) const {
    return {centroids.data() + i * dim, dim};
  }
  std::span<float> centroid(std::size_t i) { return {centroids.data() + i * dim, dim}; }

  bool operator==(const Codebook&) const = default;
};

/// Read-only view over `count` row-major points of dimension `dim`.
struct PointsView {
  const float* data = nullptr;
  std::size_t count = 0;
  std::size_t dim = 0;

  std::span<const float> row(std::size_t i) const { return {data + i * dim, dim}; }
};

struct Assignment {
  std::uint32_t index = 0;
  float distance = 0.0f;  // squared L2
};

struct KMeansParams {
  std::size_t iters = 25;
  std::uint64_t seed = 1234;
};

struct KMeansResult {
  Codebook codebook;
  /// Mean squared quantization error measured at the assignment step of
  /// each Lloyd iteration (non-increasing).
  std::vector<double> errors;
};

/// Squared L2 distance, accumulated left to right in float.
float squared_l2(std::span<const float> a, std::span<const float> b);

/// Nearest centroid; ties go to the lowest index.
Assignment assign(const Codebook& codebook, std::span<const float> vector);

/// Batched `assign`. Produces exactly the same result as calling `assign` on
/// every point, using a GEMM prefilter for large codebooks.
std::vector<Assignment> assign_all(const Codebook& codebook, PointsView points);

/// Lloyd's k-means with k-means++ seeding.
KMeansResult train_kmeans(PointsView points, std::size_t k, const KMeansParams& params);

/// Runs `iters` further Lloyd iterations starting from `initial`.
KMeansResult refine_kmeans(PointsView points, Codebook initial, std::size_t iters);

inline Codebook train(PointsView points, std::size_t k, const KMeansParams& params) {
  return train_kmeans(points, k, params).codebook;
}

}  // namespace qadc
