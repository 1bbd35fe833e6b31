#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "qadc/adc.hpp"
#include "qadc/kmeans.hpp"
#include "qadc/pq.hpp"
#include "qadc/qadc.hpp"
#include "qadc/vecio.hpp"

namespace qadc {

enum class Layout : std::uint32_t { standard = 0, transposed16 = 1 };

/// Inverted file of PQ codes. With a coarse quantizer, code i of cell c
/// encodes the residual x - coarse[c]; without one (exhaustive database) a
/// single list holds codes of the raw vectors.
struct IvfIndex {
  std::size_t d = 0;
  std::size_t m = 0;
  std::size_t code_size = 0;
  std::optional<Codebook> coarse;
  Layout layout = Layout::standard;
  std::vector<InvertedList> lists;     // used when layout == standard
  std::vector<TransposedList> tlists;  // used when layout == transposed16

  bool exhaustive() const { return !coarse.has_value(); }
  std::size_t list_count() const {
    return layout == Layout::standard ? lists.size() : tlists.size();
  }
  std::size_t list_size(std::size_t c) const {
    return layout == Layout::standard ? lists[c].size() : tlists[c].size;
  }
  /// Number of indexed vectors (padding excluded).
  std::size_t size() const;

  /// Same codes in the requested layout (transposed16 requires 4-bit codes).
  IvfIndex with_layout(Layout target) const;

  bool operator==(const IvfIndex&) const = default;
};

/// Cells to scan for one query and the query residual for each.
struct ProbeSet {
  std::vector<std::uint32_t> cells;
  std::vector<std::vector<float>> residual_queries;
};

Codebook train_coarse(const Dataset& learning_set, std::size_t K, const KMeansParams& params);

/// x - coarse[nearest cell] for every row.
Dataset compute_residuals(const Codebook& coarse, const Dataset& data);

/// Assigns each base vector to its nearest coarse cell and stores the PQ code
/// of its residual in that cell's list, in base order.
IvfIndex build_index(const ProductQuantizer& pq, const Codebook& coarse, const Dataset& base,
                     Layout layout);

/// Trains a K-cell coarse quantizer on `learning_set`, then builds.
IvfIndex build_index(const ProductQuantizer& pq, std::size_t K, const Dataset& learning_set,
                     const Dataset& base, const KMeansParams& params, Layout layout);

/// Single list of raw-vector codes (no coarse quantizer).
IvfIndex build_exhaustive(const ProductQuantizer& pq, const Dataset& base, Layout layout);

/// The `ma` nearest cells, ordered by (squared distance, cell id).
std::vector<std::uint32_t> nearest_cells(const Codebook& coarse, std::span<const float> query,
                                         std::size_t ma);

ProbeSet probe(const IvfIndex& index, std::span<const float> query, std::size_t ma);

void save_index(const IvfIndex& index, const std::filesystem::path& path);
IvfIndex load_index(const std::filesystem::path& path);

}  // namespace qadc
