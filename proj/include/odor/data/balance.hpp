#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "odor/data/records.hpp"

namespace odor {

/// Indices (ascending) of the trials kept after undersampling the majority
/// class down to the minority count. Minority trials are always kept.
std::vector<std::size_t> balance_undersample(std::span<const Label> labels, std::uint64_t seed);

template <typename Record>
std::vector<Record> select(std::span<const Record> records, std::span<const std::size_t> indices) {
    std::vector<Record> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(records[i]);
    return out;
}

}  // namespace odor
