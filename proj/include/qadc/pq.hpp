#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "qadc/kmeans.hpp"
#include "qadc/vecio.hpp"

namespace qadc {

/// m sub-quantizers of k = 2^b centroids each over d/m-dimensional
/// sub-spaces, optionally preceded by an orthonormal rotation (OPQ).
///
/// Packed code layout:
///   b = 4:  byte j holds sub-code 2j in its low nibble, 2j+1 in its high nibble
///   b = 8:  byte j holds sub-code j
///   b = 16: bytes 2j, 2j+1 hold sub-code j, little-endian
class ProductQuantizer {
 public:
  ProductQuantizer() = default;
  ProductQuantizer(std::size_t d, std::size_t m, std::size_t b,
                   std::vector<Codebook> codebooks,
                   std::optional<std::vector<float>> rotation = std::nullopt);

  std::size_t d() const { return d_; }
  std::size_t m() const { return m_; }
  std::size_t b() const { return b_; }
  std::size_t k() const { return std::size_t{1} << b_; }
  std::size_t dsub() const { return d_ / m_; }
  std::size_t code_size() const { return (m_ * b_ + 7) / 8; }

  const Codebook& codebook(std::size_t j) const { return codebooks_[j]; }
  const std::vector<Codebook>& codebooks() const { return codebooks_; }
  bool has_rotation() const { return rotation_.has_value(); }
  /// Row-major d x d matrix R; rotated vector is R x.
  const std::vector<float>& rotation() const { return *rotation_; }

  /// R x if a rotation is present, otherwise x.
  void rotate(std::span<const float> x, std::span<float> out) const;
  std::vector<float> rotate(std::span<const float> x) const;
  /// Rᵀ y (inverse rotation).
  void unrotate(std::span<const float> y, std::span<float> out) const;

  /// Unpacked sub-codes of the vector (rotation applied first).
  std::vector<std::uint32_t> compute_codes(std::span<const float> x) const;
  /// Sub-codes of an already-rotated vector.
  std::vector<std::uint32_t> compute_codes_rotated(std::span<const float> y) const;

  std::vector<std::uint8_t> encode(std::span<const float> x) const;
  /// Encodes every row; output is count * code_size bytes.
  std::vector<std::uint8_t> encode_all(const Dataset& data) const;
  std::vector<float> decode(std::span<const std::uint8_t> code) const;
  /// Reconstruction in the rotated space (no inverse rotation).
  std::vector<float> decode_rotated(std::span<const std::uint8_t> code) const;

  void pack(std::span<const std::uint32_t> codes, std::span<std::uint8_t> out) const;
  std::vector<std::uint32_t> unpack(std::span<const std::uint8_t> code) const;
  std::uint32_t subcode(std::span<const std::uint8_t> code, std::size_t j) const;

  bool operator==(const ProductQuantizer&) const = default;

 private:
  std::size_t d_ = 0;
  std::size_t m_ = 0;
  std::size_t b_ = 0;
  std::vector<Codebook> codebooks_;
  std::optional<std::vector<float>> rotation_;
};

struct PqTrainParams {
  std::size_t m = 16;
  std::size_t b = 4;
  std::size_t iters = 25;
  std::uint64_t seed = 1234;
};

struct OpqTrainParams {
  PqTrainParams pq;
  std::size_t opq_iters = 20;
  /// Lloyd iterations used to refresh codebooks after each rotation update.
  std::size_t refresh_iters = 4;
};

struct OpqTrainResult {
  ProductQuantizer quantizer;
  /// Mean squared reconstruction error after each alternation (index 0 is
  /// the initial product quantizer), non-increasing.
  std::vector<double> errors;
};

/// Checks d % m == 0, b in {4, 8, 16} and learning set size >= 2^b.
void validate_pq_shape(std::size_t d, std::size_t count, std::size_t m, std::size_t b);

ProductQuantizer train_pq(const Dataset& learning_set, const PqTrainParams& params);
OpqTrainResult train_opq_detailed(const Dataset& learning_set, const OpqTrainParams& params);
inline ProductQuantizer train_opq(const Dataset& learning_set, const OpqTrainParams& params) {
  return train_opq_detailed(learning_set, params).quantizer;
}

/// Mean of |x - decode(encode(x))|^2 over the dataset.
double reconstruction_error(const ProductQuantizer& pq, const Dataset& data);

/// Largest |(RᵀR - I)_ij|; 0 when there is no rotation.
double orthonormality_error(const ProductQuantizer& pq);

void save_model(const ProductQuantizer& pq, const std::filesystem::path& path);
ProductQuantizer load_model(const std::filesystem::path& path);

}  // namespace qadc
