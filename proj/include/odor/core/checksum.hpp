#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace odor {

/// CRC-32 (IEEE 802.3 polynomial, zlib convention). Pass the previous value to
/// continue a running checksum.
std::uint32_t crc32(std::span<const std::byte> bytes, std::uint32_t running = 0);

}  // namespace odor
