#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "odor/core/tensor.hpp"

namespace odor {

enum class Precision : std::uint32_t { f32 = 4, f64 = 8 };

struct CheckpointEntry {
    std::string name;
    Shape shape;
    std::vector<double> values;
};

/// Flat parameter container. Byte layout (all integers little-endian):
///
///   "ODORCKPT"            8 bytes magic
///   u32 version           currently 1
///   u32 scalar width      4 (float32) or 8 (float64)
///   u32 len, bytes        descriptor string (architecture guard)
///   u32 entry count
///   per entry: u32 len, name bytes, u32 rank, u64 dims[rank], payload
///   u32 crc32             zlib CRC-32 over every preceding byte
struct Checkpoint {
    std::string descriptor;
    Precision precision = Precision::f32;
    std::vector<CheckpointEntry> entries;

    const CheckpointEntry* find(const std::string& name) const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::byte> encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(std::span<const std::byte> bytes);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

template <typename T>
CheckpointEntry make_entry(const std::string& name, const Tensor<T>& tensor) {
    return {name, tensor.shape(), std::vector<double>(tensor.data().begin(), tensor.data().end())};
}

}  // namespace odor
