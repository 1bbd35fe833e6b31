#pragma once

#include <cstddef>
#include <cstdint>

namespace qadc::detail {

bool cpu_supports_ssse3();
bool cpu_supports_avx2();

// `tables` is m * 16 bytes, table j at offset 16 * j. Both kernels write 16
// lane bytes per block.
void scan_blocks_sse128(const std::uint8_t* blocks, std::size_t block_count, std::size_t m,
                        const std::uint8_t* tables, std::uint8_t* out);
void scan_blocks_avx256(const std::uint8_t* blocks, std::size_t block_count, std::size_t m,
                        const std::uint8_t* tables, std::uint8_t* out);

}  // namespace qadc::detail
