#include "qadc/vecio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "byteio.hpp"

namespace qadc {

Dataset::Dataset(std::size_t dim, std::vector<float> values)
    : dim(dim), count(0), data(std::move(values)) {
  if (dim == 0) throw std::invalid_argument("Dataset: dim must be positive");
  if (data.size() % dim != 0) {
    throw std::invalid_argument("Dataset: value count is not a multiple of dim");
  }
  count = data.size() / dim;
}

Dataset Dataset::prefix(std::size_t n) const {
  n = std::min(n, count);
  Dataset out;
  out.dim = dim;
  out.count = n;
  out.data.assign(data.begin(), data.begin() + static_cast<std::ptrdiff_t>(n * dim));
  return out;
}

namespace {

std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot create " + path.string());
  return out;
}

// Walks `[int32 dim][T x dim]` records, appending each converted payload to
// `out`. Returns (dim, records read).
template <typename T, typename Sink>
std::pair<std::size_t, std::size_t> read_records(const std::filesystem::path& path,
                                                 std::optional<std::size_t> limit,
                                                 Sink&& sink) {
  auto in = open_for_read(path);
  const std::size_t max_records =
      limit.value_or(std::numeric_limits<std::size_t>::max());
  std::size_t dim = 0;
  std::size_t n = 0;
  std::vector<T> payload;
  while (n < max_records) {
    std::int32_t header = 0;
    in.read(reinterpret_cast<char*>(&header), sizeof(header));
    if (in.gcount() == 0) break;
    if (in.gcount() != sizeof(header)) {
      throw FormatError(path.string() + ": truncated record header");
    }
    detail::to_little_endian(std::span<std::int32_t>(&header, 1));
    if (header <= 0) {
      throw FormatError(path.string() + ": non-positive dimension prefix");
    }
    const auto record_dim = static_cast<std::size_t>(header);
    if (n == 0) {
      dim = record_dim;
      payload.resize(dim);
    } else if (record_dim != dim) {
      throw FormatError(path.string() + ": inconsistent dimension in record " +
                        std::to_string(n));
    }
    if (!detail::read_le(in, std::span<T>(payload))) {
      throw FormatError(path.string() + ": truncated record " + std::to_string(n));
    }
    sink(std::span<const T>(payload));
    ++n;
  }
  return {dim, n};
}

template <typename T, typename Source>
void write_records(const std::filesystem::path& path, std::size_t dim,
                   std::size_t count, Source&& source) {
  auto out = open_for_write(path);
  const auto header = static_cast<std::int32_t>(dim);
  std::vector<T> payload(dim);
  for (std::size_t i = 0; i < count; ++i) {
    source(i, std::span<T>(payload));
    detail::write_le(out, header);
    detail::write_le(out, std::span<const T>(payload));
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

Dataset read_fvecs(const std::filesystem::path& path,
                   std::optional<std::size_t> limit) {
  Dataset ds;
  auto [dim, n] = read_records<float>(path, limit, [&](std::span<const float> v) {
    ds.data.insert(ds.data.end(), v.begin(), v.end());
  });
  ds.dim = dim;
  ds.count = n;
  return ds;
}

Dataset read_bvecs(const std::filesystem::path& path,
                   std::optional<std::size_t> limit) {
  Dataset ds;
  auto [dim, n] =
      read_records<std::uint8_t>(path, limit, [&](std::span<const std::uint8_t> v) {
        for (auto byte : v) ds.data.push_back(static_cast<float>(byte));
      });
  ds.dim = dim;
  ds.count = n;
  return ds;
}

GroundTruth read_ivecs(const std::filesystem::path& path,
                       std::optional<std::size_t> limit) {
  GroundTruth gt;
  auto [depth, n] =
      read_records<std::int32_t>(path, limit, [&](std::span<const std::int32_t> v) {
        gt.ids.insert(gt.ids.end(), v.begin(), v.end());
      });
  gt.depth = depth;
  gt.count = n;
  return gt;
}

void write_fvecs(const std::filesystem::path& path, const Dataset& dataset) {
  write_records<float>(path, dataset.dim, dataset.count,
                       [&](std::size_t i, std::span<float> out) {
                         std::ranges::copy(dataset.row(i), out.begin());
                       });
}

void write_bvecs(const std::filesystem::path& path, const Dataset& dataset) {
  write_records<std::uint8_t>(
      path, dataset.dim, dataset.count, [&](std::size_t i, std::span<std::uint8_t> out) {
        auto row = dataset.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) {
          out[j] = static_cast<std::uint8_t>(std::clamp(std::lround(row[j]), 0L, 255L));
        }
      });
}

void write_ivecs(const std::filesystem::path& path, const GroundTruth& gt) {
  write_records<std::int32_t>(path, gt.depth, gt.count,
                              [&](std::size_t i, std::span<std::int32_t> out) {
                                std::ranges::copy(gt.row(i), out.begin());
                              });
}

}  // namespace qadc
