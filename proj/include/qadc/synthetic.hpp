#pragma once

#include <cstddef>
#include <cstdint>

#include "qadc/bench.hpp"

namespace qadc {

/// SIFT-like data: nonnegative integer-valued vectors drawn around clustered
/// centers with correlated low-rank variation plus isotropic noise.
struct SyntheticParams {
  std::size_t dim = 128;
  std::size_t base = 10000;
  std::size_t learn = 70000;
  std::size_t queries = 1000;
  std::size_t clusters = 1024;
  std::size_t rank = 8;
  float center_scale = 10.0f;
  float factor_scale = 32.0f;
  float noise = 2.0f;
  std::size_t gt_depth = 100;
  std::uint64_t seed = 7;
};

/// Base, learning and query sets drawn from one distribution, with exact
/// ground truth for the queries.
BenchData generate_synthetic(const SyntheticParams& params);

}  // namespace qadc
