#include "qadc/pq.hpp"

#include <Eigen/Core>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "byteio.hpp"

namespace qadc {

namespace {

constexpr char kModelMagic[4] = {'Q', 'A', 'D', 'C'};
constexpr std::uint32_t kModelVersion = 1;

// Fixed-order dot product: identical results for a given input regardless of
// buffer alignment, so encode() and encode_all() agree bit for bit.
float dot_fixed(const float* a, const float* b, std::size_t n) {
  float lanes[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (int l = 0; l < 8; ++l) lanes[l] += a[i + l] * b[i + l];
  }
  float acc = 0.0f;
  for (; i < n; ++i) acc += a[i] * b[i];
  for (float l : lanes) acc += l;
  return acc;
}

void rotate_with(const std::vector<float>& r, std::size_t d, std::span<const float> x,
                 std::span<float> out) {
  for (std::size_t i = 0; i < d; ++i) out[i] = dot_fixed(r.data() + i * d, x.data(), d);
}

std::uint64_t subspace_seed(std::uint64_t seed, std::size_t j) {
  return seed + 0x9E3779B97F4A7C15ULL * (j + 1);
}

// Copies sub-space j of every row into a contiguous count x dsub buffer.
std::vector<float> slice_subspace(const float* data, std::size_t count, std::size_t d,
                                  std::size_t dsub, std::size_t j) {
  std::vector<float> out(count * dsub);
  for (std::size_t i = 0; i < count; ++i) {
    std::memcpy(out.data() + i * dsub, data + i * d + j * dsub, dsub * sizeof(float));
  }
  return out;
}

std::vector<float> identity(std::size_t d) {
  std::vector<float> r(d * d, 0.0f);
  for (std::size_t i = 0; i < d; ++i) r[i * d + i] = 1.0f;
  return r;
}

}  // namespace

void validate_pq_shape(std::size_t d, std::size_t count, std::size_t m, std::size_t b) {
  if (m == 0 || d == 0) throw std::invalid_argument("pq: d and m must be positive");
  if (d % m != 0) throw std::invalid_argument("pq: d must be divisible by m");
  if (b != 4 && b != 8 && b != 16) {
    throw std::invalid_argument("pq: unsupported bits per sub-code (expected 4, 8 or 16)");
  }
  if (count < (std::size_t{1} << b)) {
    throw std::invalid_argument("pq: learning set smaller than 2^b");
  }
}

ProductQuantizer::ProductQuantizer(std::size_t d, std::size_t m, std::size_t b,
                                   std::vector<Codebook> codebooks,
                                   std::optional<std::vector<float>> rotation)
    : d_(d), m_(m), b_(b), codebooks_(std::move(codebooks)), rotation_(std::move(rotation)) {
  validate_pq_shape(d, k(), m, b);
  if (codebooks_.size() != m) throw std::invalid_argument("pq: expected m codebooks");
  for (const auto& cb : codebooks_) {
    if (cb.k != k() || cb.dim != dsub() || cb.centroids.size() != k() * dsub()) {
      throw std::invalid_argument("pq: codebook shape mismatch");
    }
  }
  if (rotation_ && rotation_->size() != d * d) {
    throw std::invalid_argument("pq: rotation must be d x d");
  }
}

void ProductQuantizer::rotate(std::span<const float> x, std::span<float> out) const {
  if (x.size() != d_ || out.size() != d_) throw std::invalid_argument("rotate: dimension mismatch");
  if (rotation_) {
    rotate_with(*rotation_, d_, x, out);
  } else {
    std::ranges::copy(x, out.begin());
  }
}

std::vector<float> ProductQuantizer::rotate(std::span<const float> x) const {
  std::vector<float> out(d_);
  rotate(x, out);
  return out;
}

void ProductQuantizer::unrotate(std::span<const float> y, std::span<float> out) const {
  if (y.size() != d_ || out.size() != d_) {
    throw std::invalid_argument("unrotate: dimension mismatch");
  }
  if (!rotation_) {
    std::ranges::copy(y, out.begin());
    return;
  }
  const auto& r = *rotation_;
  for (std::size_t j = 0; j < d_; ++j) {
    float acc = 0.0f;
    for (std::size_t i = 0; i < d_; ++i) acc += r[i * d_ + j] * y[i];
    out[j] = acc;
  }
}

std::vector<std::uint32_t> ProductQuantizer::compute_codes_rotated(
    std::span<const float> y) const {
  if (y.size() != d_) throw std::invalid_argument("encode: dimension mismatch");
  std::vector<std::uint32_t> codes(m_);
  const std::size_t ds = dsub();
  for (std::size_t j = 0; j < m_; ++j) {
    codes[j] = assign(codebooks_[j], y.subspan(j * ds, ds)).index;
  }
  return codes;
}

std::vector<std::uint32_t> ProductQuantizer::compute_codes(std::span<const float> x) const {
  if (x.size() != d_) throw std::invalid_argument("encode: dimension mismatch");
  if (!rotation_) return compute_codes_rotated(x);
  return compute_codes_rotated(rotate(x));
}

void ProductQuantizer::pack(std::span<const std::uint32_t> codes,
                            std::span<std::uint8_t> out) const {
  if (codes.size() != m_ || out.size() != code_size()) {
    throw std::invalid_argument("pack: size mismatch");
  }
  switch (b_) {
    case 4:
      std::ranges::fill(out, std::uint8_t{0});
      for (std::size_t j = 0; j < m_; ++j) {
        out[j / 2] |= static_cast<std::uint8_t>((codes[j] & 0x0F) << (4 * (j & 1)));
      }
      break;
    case 8:
      for (std::size_t j = 0; j < m_; ++j) out[j] = static_cast<std::uint8_t>(codes[j]);
      break;
    default:
      for (std::size_t j = 0; j < m_; ++j) {
        out[2 * j] = static_cast<std::uint8_t>(codes[j] & 0xFF);
        out[2 * j + 1] = static_cast<std::uint8_t>((codes[j] >> 8) & 0xFF);
      }
  }
}

std::uint32_t ProductQuantizer::subcode(std::span<const std::uint8_t> code,
                                        std::size_t j) const {
  switch (b_) {
    case 4:
      return (code[j / 2] >> (4 * (j & 1))) & 0x0F;
    case 8:
      return code[j];
    default:
      return static_cast<std::uint32_t>(code[2 * j]) |
             (static_cast<std::uint32_t>(code[2 * j + 1]) << 8);
  }
}

std::vector<std::uint32_t> ProductQuantizer::unpack(std::span<const std::uint8_t> code) const {
  if (code.size() != code_size()) throw std::invalid_argument("unpack: size mismatch");
  std::vector<std::uint32_t> codes(m_);
  for (std::size_t j = 0; j < m_; ++j) codes[j] = subcode(code, j);
  return codes;
}

std::vector<std::uint8_t> ProductQuantizer::encode(std::span<const float> x) const {
  std::vector<std::uint8_t> out(code_size());
  pack(compute_codes(x), out);
  return out;
}

std::vector<std::uint8_t> ProductQuantizer::encode_all(const Dataset& data) const {
  if (data.dim != d_) throw std::invalid_argument("encode_all: dimension mismatch");
  const std::size_t n = data.count;
  const std::size_t ds = dsub();

  std::vector<float> rotated;
  const float* source = data.data.data();
  if (rotation_) {
    rotated.resize(n * d_);
    for (std::size_t i = 0; i < n; ++i) {
      rotate_with(*rotation_, d_, data.row(i), {rotated.data() + i * d_, d_});
    }
    source = rotated.data();
  }

  std::vector<std::uint32_t> codes(n * m_);
  for (std::size_t j = 0; j < m_; ++j) {
    const auto sub = slice_subspace(source, n, d_, ds, j);
    const auto assignments = assign_all(codebooks_[j], PointsView{sub.data(), n, ds});
    for (std::size_t i = 0; i < n; ++i) codes[i * m_ + j] = assignments[i].index;
  }

  std::vector<std::uint8_t> out(n * code_size());
  for (std::size_t i = 0; i < n; ++i) {
    pack({codes.data() + i * m_, m_}, {out.data() + i * code_size(), code_size()});
  }
  return out;
}

std::vector<float> ProductQuantizer::decode_rotated(std::span<const std::uint8_t> code) const {
  if (code.size() != code_size()) throw std::invalid_argument("decode: size mismatch");
  std::vector<float> out(d_);
  const std::size_t ds = dsub();
  for (std::size_t j = 0; j < m_; ++j) {
    auto c = codebooks_[j].centroid(subcode(code, j));
    std::ranges::copy(c, out.begin() + static_cast<std::ptrdiff_t>(j * ds));
  }
  return out;
}

std::vector<float> ProductQuantizer::decode(std::span<const std::uint8_t> code) const {
  auto y = decode_rotated(code);
  if (!rotation_) return y;
  std::vector<float> x(d_);
  unrotate(y, x);
  return x;
}

ProductQuantizer train_pq(const Dataset& learning_set, const PqTrainParams& params) {
  validate_pq_shape(learning_set.dim, learning_set.count, params.m, params.b);
  const std::size_t d = learning_set.dim;
  const std::size_t ds = d / params.m;
  const std::size_t k = std::size_t{1} << params.b;
  std::vector<Codebook> codebooks;
  codebooks.reserve(params.m);
  for (std::size_t j = 0; j < params.m; ++j) {
    const auto sub = slice_subspace(learning_set.data.data(), learning_set.count, d, ds, j);
    codebooks.push_back(train(PointsView{sub.data(), learning_set.count, ds}, k,
                              {params.iters, subspace_seed(params.seed, j)}));
  }
  return ProductQuantizer(d, params.m, params.b, std::move(codebooks));
}

OpqTrainResult train_opq_detailed(const Dataset& learning_set, const OpqTrainParams& params) {
  const auto& p = params.pq;
  validate_pq_shape(learning_set.dim, learning_set.count, p.m, p.b);
  const std::size_t n = learning_set.count;
  const std::size_t d = learning_set.dim;
  const std::size_t m = p.m;
  const std::size_t ds = d / m;
  const std::size_t k = std::size_t{1} << p.b;

  OpqTrainResult result;
  if (params.opq_iters == 0) {
    auto base = train_pq(learning_set, p);
    result.quantizer =
        ProductQuantizer(d, m, p.b, base.codebooks(), identity(d));
    result.errors.push_back(reconstruction_error(result.quantizer, learning_set));
    return result;
  }

  std::vector<float> rotation = identity(d);
  std::vector<Codebook> codebooks(m);
  std::vector<std::vector<float>> subs(m);
  std::vector<std::vector<Assignment>> assignments(m);

  auto measure = [&]() {
    double err = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      assignments[j] = assign_all(codebooks[j], PointsView{subs[j].data(), n, ds});
      for (const auto& a : assignments[j]) err += a.distance;
    }
    return err / static_cast<double>(n);
  };

  for (std::size_t j = 0; j < m; ++j) {
    subs[j] = slice_subspace(learning_set.data.data(), n, d, ds, j);
    codebooks[j] = train(PointsView{subs[j].data(), n, ds}, k,
                         {p.iters, subspace_seed(p.seed, j)});
  }
  result.errors.push_back(measure());

  using MatrixD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  MatrixD x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < d; ++c) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = learning_set.data[i * d + c];
    }
  }
  MatrixD recon(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::vector<float> rotated(n * d);

  for (std::size_t t = 0; t < params.opq_iters; ++t) {
    // Procrustes: R = U Vᵀ where recon x = U S Vᵀ.
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        auto c = codebooks[j].centroid(assignments[j][i].index);
        for (std::size_t c2 = 0; c2 < ds; ++c2) {
          recon(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j * ds + c2)) = c[c2];
        }
      }
    }
    const MatrixD cross = recon.transpose() * x;
    Eigen::JacobiSVD<MatrixD> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const MatrixD r = svd.matrixU() * svd.matrixV().transpose();
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t c = 0; c < d; ++c) {
        rotation[i * d + c] =
            static_cast<float>(r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)));
      }
    }

    for (std::size_t i = 0; i < n; ++i) {
      rotate_with(rotation, d, learning_set.row(i), {rotated.data() + i * d, d});
    }
    for (std::size_t j = 0; j < m; ++j) {
      subs[j] = slice_subspace(rotated.data(), n, d, ds, j);
      codebooks[j] = refine_kmeans(PointsView{subs[j].data(), n, ds}, std::move(codebooks[j]),
                                   params.refresh_iters)
                         .codebook;
    }
    result.errors.push_back(measure());
  }

  result.quantizer = ProductQuantizer(d, m, p.b, std::move(codebooks), std::move(rotation));
  return result;
}

double reconstruction_error(const ProductQuantizer& pq, const Dataset& data) {
  if (data.count == 0) return 0.0;
  const auto codes = pq.encode_all(data);
  double total = 0.0;
  for (std::size_t i = 0; i < data.count; ++i) {
    const auto rec = pq.decode({codes.data() + i * pq.code_size(), pq.code_size()});
    auto x = data.row(i);
    for (std::size_t c = 0; c < pq.d(); ++c) {
      const double diff = static_cast<double>(x[c]) - rec[c];
      total += diff * diff;
    }
  }
  return total / static_cast<double>(data.count);
}

double orthonormality_error(const ProductQuantizer& pq) {
  if (!pq.has_rotation()) return 0.0;
  const auto& r = pq.rotation();
  const std::size_t d = pq.d();
  double worst = 0.0;
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < d; ++b) {
      double acc = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        acc += static_cast<double>(r[i * d + a]) * r[i * d + b];
      }
      worst = std::max(worst, std::abs(acc - (a == b ? 1.0 : 0.0)));
    }
  }
  return worst;
}

void save_model(const ProductQuantizer& pq, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot create " + path.string());
  out.write(kModelMagic, sizeof(kModelMagic));
  detail::write_le(out, kModelVersion);
  detail::write_le(out, static_cast<std::uint32_t>(pq.d()));
  detail::write_le(out, static_cast<std::uint32_t>(pq.m()));
  detail::write_le(out, static_cast<std::uint32_t>(pq.b()));
  detail::write_le(out, static_cast<std::uint32_t>(pq.has_rotation() ? 1 : 0));
  if (pq.has_rotation()) detail::write_le(out, std::span<const float>(pq.rotation()));
  for (const auto& cb : pq.codebooks()) {
    detail::write_le(out, std::span<const float>(cb.centroids));
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

ProductQuantizer load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[4] = {};
  in.read(magic, sizeof(magic));
  if (in.gcount() != sizeof(magic) || std::memcmp(magic, kModelMagic, 4) != 0) {
    throw FormatError(path.string() + ": not a model file");
  }
  const auto version = detail::read_le_or_throw<std::uint32_t>(in, "model header");
  if (version != kModelVersion) {
    throw FormatError(path.string() + ": unsupported model version " + std::to_string(version));
  }
  const std::size_t d = detail::read_le_or_throw<std::uint32_t>(in, "model header");
  const std::size_t m = detail::read_le_or_throw<std::uint32_t>(in, "model header");
  const std::size_t b = detail::read_le_or_throw<std::uint32_t>(in, "model header");
  const auto has_rotation = detail::read_le_or_throw<std::uint32_t>(in, "model header");
  if (m == 0 || d == 0 || d % m != 0 || (b != 4 && b != 8 && b != 16) || has_rotation > 1) {
    throw FormatError(path.string() + ": invalid model header");
  }
  std::optional<std::vector<float>> rotation;
  if (has_rotation) {
    rotation.emplace(d * d);
    detail::read_le_or_throw(in, std::span<float>(*rotation), "rotation");
  }
  const std::size_t k = std::size_t{1} << b;
  std::vector<Codebook> codebooks(m);
  for (auto& cb : codebooks) {
    cb.k = k;
    cb.dim = d / m;
    cb.centroids.resize(k * cb.dim);
    detail::read_le_or_throw(in, std::span<float>(cb.centroids), "codebook");
  }
  return ProductQuantizer(d, m, b, std::move(codebooks), std::move(rotation));
}

}  // namespace qadc
