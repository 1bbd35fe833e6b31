#include "qadc/ivf.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "byteio.hpp"

namespace qadc {

namespace {

constexpr char kIndexMagic[4] = {'Q', 'I', 'V', 'F'};
constexpr std::uint32_t kIndexVersion = 1;

IvfIndex empty_index(const ProductQuantizer& pq, std::size_t lists, Layout layout) {
  if (layout == Layout::transposed16 && (pq.b() != 4 || pq.m() % 2 != 0)) {
    throw std::invalid_argument("transposed16 layout requires b = 4 and even m");
  }
  IvfIndex index;
  index.d = pq.d();
  index.m = pq.m();
  index.code_size = pq.code_size();
  index.layout = Layout::standard;
  index.lists.resize(lists);
  return index;
}

}  // namespace

std::size_t IvfIndex::size() const {
  std::size_t n = 0;
  for (std::size_t c = 0; c < list_count(); ++c) n += list_size(c);
  return n;
}

IvfIndex IvfIndex::with_layout(Layout target) const {
  IvfIndex out;
  out.d = d;
  out.m = m;
  out.code_size = code_size;
  out.coarse = coarse;
  out.layout = target;
  if (target == layout) {
    out.lists = lists;
    out.tlists = tlists;
    return out;
  }
  if (target == Layout::transposed16) {
    if (code_size * 2 != m || m % 2 != 0) {
      throw std::invalid_argument("transposed16 layout requires 4-bit codes and even m");
    }
    out.tlists.reserve(lists.size());
    for (const auto& list : lists) out.tlists.push_back(transpose_list(list.codes, list.ids, m));
  } else {
    out.lists.reserve(tlists.size());
    for (const auto& tlist : tlists) out.lists.push_back(untranspose_list(tlist));
  }
  return out;
}

Codebook train_coarse(const Dataset& learning_set, std::size_t K, const KMeansParams& params) {
  return train(PointsView{learning_set.data.data(), learning_set.count, learning_set.dim}, K,
               params);
}

Dataset compute_residuals(const Codebook& coarse, const Dataset& data) {
  if (data.dim != coarse.dim) throw std::invalid_argument("residuals: dimension mismatch");
  const auto cells =
      assign_all(coarse, PointsView{data.data.data(), data.count, data.dim});
  Dataset out(data.dim, data.count);
  for (std::size_t i = 0; i < data.count; ++i) {
    auto x = data.row(i);
    auto c = coarse.centroid(cells[i].index);
    auto r = out.row(i);
    for (std::size_t j = 0; j < data.dim; ++j) r[j] = x[j] - c[j];
  }
  return out;
}

IvfIndex build_index(const ProductQuantizer& pq, const Codebook& coarse, const Dataset& base,
                     Layout layout) {
  if (base.dim != pq.d() || coarse.dim != pq.d()) {
    throw std::invalid_argument("build_index: dimension mismatch");
  }
  if (coarse.k > base.count) {
    throw std::invalid_argument("build_index: more coarse cells than base vectors");
  }
  IvfIndex index = empty_index(pq, coarse.k, layout);
  index.coarse = coarse;

  const auto cells = assign_all(coarse, PointsView{base.data.data(), base.count, base.dim});
  Dataset residuals(base.dim, base.count);
  for (std::size_t i = 0; i < base.count; ++i) {
    auto x = base.row(i);
    auto c = coarse.centroid(cells[i].index);
    auto r = residuals.row(i);
    for (std::size_t j = 0; j < base.dim; ++j) r[j] = x[j] - c[j];
  }
  const auto codes = pq.encode_all(residuals);
  const std::size_t cs = pq.code_size();
  for (std::size_t i = 0; i < base.count; ++i) {
    auto& list = index.lists[cells[i].index];
    list.ids.push_back(i);
    list.codes.insert(list.codes.end(), codes.begin() + static_cast<std::ptrdiff_t>(i * cs),
                      codes.begin() + static_cast<std::ptrdiff_t>((i + 1) * cs));
  }
  return layout == Layout::standard ? index : index.with_layout(layout);
}

IvfIndex build_index(const ProductQuantizer& pq, std::size_t K, const Dataset& learning_set,
                     const Dataset& base, const KMeansParams& params, Layout layout) {
  if (K > base.count) {
    throw std::invalid_argument("build_index: more coarse cells than base vectors");
  }
  return build_index(pq, train_coarse(learning_set, K, params), base, layout);
}

IvfIndex build_exhaustive(const ProductQuantizer& pq, const Dataset& base, Layout layout) {
  if (base.dim != pq.d()) throw std::invalid_argument("build_exhaustive: dimension mismatch");
  IvfIndex index = empty_index(pq, 1, layout);
  auto& list = index.lists.front();
  list.ids.resize(base.count);
  std::iota(list.ids.begin(), list.ids.end(), std::uint64_t{0});
  list.codes = pq.encode_all(base);
  return layout == Layout::standard ? index : index.with_layout(layout);
}

std::vector<std::uint32_t> nearest_cells(const Codebook& coarse, std::span<const float> query,
                                         std::size_t ma) {
  if (query.size() != coarse.dim) throw std::invalid_argument("probe: dimension mismatch");
  if (ma == 0 || ma > coarse.k) throw std::invalid_argument("probe: ma must be in [1, K]");
  std::vector<float> dist(coarse.k);
  for (std::size_t c = 0; c < coarse.k; ++c) dist[c] = squared_l2(query, coarse.centroid(c));
  std::vector<std::uint32_t> order(coarse.k);
  std::iota(order.begin(), order.end(), 0u);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(ma), order.end(),
                    [&](std::uint32_t a, std::uint32_t b) {
                      return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
                    });
  order.resize(ma);
  return order;
}

ProbeSet probe(const IvfIndex& index, std::span<const float> query, std::size_t ma) {
  if (query.size() != index.d) throw std::invalid_argument("probe: dimension mismatch");
  ProbeSet out;
  if (index.exhaustive()) {
    if (ma != 1) throw std::invalid_argument("probe: exhaustive index has a single list");
    out.cells = {0};
    out.residual_queries.emplace_back(query.begin(), query.end());
    return out;
  }
  out.cells = nearest_cells(*index.coarse, query, ma);
  for (auto c : out.cells) {
    auto centroid = index.coarse->centroid(c);
    std::vector<float> r(index.d);
    for (std::size_t j = 0; j < index.d; ++j) r[j] = query[j] - centroid[j];
    out.residual_queries.push_back(std::move(r));
  }
  return out;
}

void save_index(const IvfIndex& index, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot create " + path.string());
  out.write(kIndexMagic, sizeof(kIndexMagic));
  detail::write_le(out, kIndexVersion);
  detail::write_le(out, static_cast<std::uint32_t>(index.d));
  detail::write_le(out, static_cast<std::uint32_t>(index.coarse ? index.coarse->k : 0));
  detail::write_le(out, static_cast<std::uint32_t>(index.layout));
  detail::write_le(out, static_cast<std::uint32_t>(index.m));
  detail::write_le(out, static_cast<std::uint32_t>(index.code_size));
  if (index.coarse) detail::write_le(out, std::span<const float>(index.coarse->centroids));
  for (std::size_t c = 0; c < index.list_count(); ++c) {
    if (index.layout == Layout::standard) {
      const auto& list = index.lists[c];
      detail::write_le(out, static_cast<std::uint64_t>(list.size()));
      detail::write_le(out, static_cast<std::uint64_t>(list.size()));
      detail::write_le(out, std::span<const std::uint64_t>(list.ids));
      detail::write_le(out, std::span<const std::uint8_t>(list.codes));
    } else {
      const auto& list = index.tlists[c];
      detail::write_le(out, static_cast<std::uint64_t>(list.size));
      detail::write_le(out, static_cast<std::uint64_t>(list.ids.size()));
      detail::write_le(out, std::span<const std::uint64_t>(list.ids));
      detail::write_le(out, std::span<const std::uint8_t>(list.blocks));
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

IvfIndex load_index(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[4] = {};
  in.read(magic, sizeof(magic));
  if (in.gcount() != sizeof(magic) || std::memcmp(magic, kIndexMagic, 4) != 0) {
    throw FormatError(path.string() + ": not an index file");
  }
  const auto version = detail::read_le_or_throw<std::uint32_t>(in, "index header");
  if (version != kIndexVersion) {
    throw FormatError(path.string() + ": unsupported index version " + std::to_string(version));
  }
  IvfIndex index;
  index.d = detail::read_le_or_throw<std::uint32_t>(in, "index header");
  const std::size_t K = detail::read_le_or_throw<std::uint32_t>(in, "index header");
  const auto layout = detail::read_le_or_throw<std::uint32_t>(in, "index header");
  index.m = detail::read_le_or_throw<std::uint32_t>(in, "index header");
  index.code_size = detail::read_le_or_throw<std::uint32_t>(in, "index header");
  if (layout > 1 || index.d == 0 || index.m == 0 || index.code_size == 0) {
    throw FormatError(path.string() + ": invalid index header");
  }
  index.layout = static_cast<Layout>(layout);
  if (index.layout == Layout::transposed16 && index.code_size * 2 != index.m) {
    throw FormatError(path.string() + ": transposed layout with non 4-bit codes");
  }
  if (K > 0) {
    Codebook coarse{K, index.d, std::vector<float>(K * index.d)};
    detail::read_le_or_throw(in, std::span<float>(coarse.centroids), "coarse codebook");
    index.coarse = std::move(coarse);
  }
  const std::size_t lists = K > 0 ? K : 1;
  for (std::size_t c = 0; c < lists; ++c) {
    const auto valid = detail::read_le_or_throw<std::uint64_t>(in, "list header");
    const auto stored = detail::read_le_or_throw<std::uint64_t>(in, "list header");
    if (valid > stored) throw FormatError(path.string() + ": invalid list header");
    std::vector<std::uint64_t> ids(stored);
    detail::read_le_or_throw(in, std::span<std::uint64_t>(ids), "list ids");
    std::vector<std::uint8_t> codes(stored * index.code_size);
    detail::read_le_or_throw(in, std::span<std::uint8_t>(codes), "list codes");
    if (index.layout == Layout::standard) {
      if (valid != stored) throw FormatError(path.string() + ": padded standard list");
      index.lists.push_back({std::move(ids), std::move(codes)});
    } else {
      if (stored % kBlockCodes != 0) throw FormatError(path.string() + ": partial block");
      TransposedList t;
      t.m = index.m;
      t.size = valid;
      t.ids = std::move(ids);
      t.blocks = std::move(codes);
      index.tlists.push_back(std::move(t));
    }
  }
  return index;
}

}  // namespace qadc
