#include "odor/data/balance.hpp"

#include <algorithm>
#include <random>

#include "odor/core/errors.hpp"

namespace odor {

std::vector<std::size_t> balance_undersample(std::span<const Label> labels, std::uint64_t seed) {
    std::vector<std::size_t> odor, blank;
    for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == Label::odor ? odor : blank).push_back(i);
    if (odor.empty() || blank.empty()) throw InvalidArgument("balance_undersample: both classes must be present");

    auto& majority = odor.size() > blank.size() ? odor : blank;
    const std::size_t target = std::min(odor.size(), blank.size());
    std::mt19937_64 rng(seed);
    std::shuffle(majority.begin(), majority.end(), rng);
    majority.resize(target);

    std::vector<std::size_t> kept;
    kept.reserve(2 * target);
    kept.insert(kept.end(), odor.begin(), odor.end());
    kept.insert(kept.end(), blank.begin(), blank.end());
    std::sort(kept.begin(), kept.end());
    return kept;
}

}  // namespace odor
