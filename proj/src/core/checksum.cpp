#include "odor/core/checksum.hpp"

#include <zlib.h>

#include <algorithm>
#include <limits>

namespace odor {

std::uint32_t crc32(std::span<const std::byte> bytes, std::uint32_t running) {
    uLong crc = running;
    const auto* data = reinterpret_cast<const Bytef*>(bytes.data());
    std::size_t left = bytes.size();
    while (left > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(left, std::numeric_limits<uInt>::max()));
        crc = ::crc32(crc, data, chunk);
        data += chunk;
        left -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

}  // namespace odor
