#pragma once

#include <cstdint>
#include <string_view>

namespace odor {

/// Counter-based seed splitter: every stream is a pure function of the master
/// seed, a purpose tag and an index, so fold/model/shuffle/dropout seeds never
/// depend on the order in which they were requested.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index = 0);

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace odor
