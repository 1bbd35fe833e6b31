#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qadc {

/// Thrown when a vector file is malformed (truncated record, inconsistent
/// dimension, negative or zero dimension prefix).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Row-major set of `count` vectors of dimension `dim`.
struct Dataset {
  std::size_t dim = 0;
  std::size_t count = 0;
  std::vector<float> data;

  Dataset() = default;
  Dataset(std::size_t dim, std::size_t count)
      : dim(dim), count(count), data(dim * count) {}
  Dataset(std::size_t dim, std::vector<float> values);

  std::span<const float> row(std::size_t i) const {
    return {data.data() + i * dim, dim};
  }
  std::span<float> row(std::size_t i) { return {data.data() + i * dim, dim}; }

  /// First `n` vectors (or all of them if n >= count).
  Dataset prefix(std::size_t n) const;
};

/// Ground-truth neighbor ids, `depth` per query.
struct GroundTruth {
  std::size_t count = 0;
  std::size_t depth = 0;
  std::vector<std::int32_t> ids;

  std::span<const std::int32_t> row(std::size_t i) const {
    return {ids.data() + i * depth, depth};
  }
};

Dataset read_fvecs(const std::filesystem::path& path,
                   std::optional<std::size_t> limit = std::nullopt);
Dataset read_bvecs(const std::filesystem::path& path,
                   std::optional<std::size_t> limit = std::nullopt);
GroundTruth read_ivecs(const std::filesystem::path& path,
                       std::optional<std::size_t> limit = std::nullopt);

void write_fvecs(const std::filesystem::path& path, const Dataset& dataset);
/// Values are rounded and clamped to [0, 255].
void write_bvecs(const std::filesystem::path& path, const Dataset& dataset);
void write_ivecs(const std::filesystem::path& path, const GroundTruth& gt);

}  // namespace qadc
