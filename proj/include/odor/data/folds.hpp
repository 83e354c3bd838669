#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "odor/data/records.hpp"

namespace odor {

/// Index lists into the dataset the plan was built from.
struct Fold {
    std::vector<std::size_t> test;
    std::vector<std::size_t> train;       // excludes validation
    std::vector<std::size_t> validation;
};

struct FoldPlan {
    std::size_t k = 0;
    double val_fraction = 0.0;
    std::uint64_t seed = 0;
    std::vector<Fold> folds;

    /// Throws InvalidArgument naming the first violated partition property.
    void check_partition(std::size_t n) const;
};

/// Stratified k-fold plan. Each class is shuffled under the seed and dealt
/// round-robin across folds in class order, so fold sizes differ by at most
/// one. Validation takes round-half-up(val_fraction * count) trials per class
/// from each fold's training portion.
FoldPlan stratified_folds(std::span<const Label> labels, std::size_t k = 5, double val_fraction = 0.10,
                          std::uint64_t seed = 0);

/// round-half-up(fraction * count), robust to fraction not being exact in binary.
std::size_t round_half_up_share(std::size_t count, double fraction);

}  // namespace odor
