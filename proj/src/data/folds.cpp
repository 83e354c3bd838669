#include "odor/data/folds.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "odor/core/errors.hpp"
#include "odor/core/seed.hpp"

namespace odor {

std::size_t round_half_up_share(std::size_t count, double fraction) {
    // 1e-9 absorbs representation error so that e.g. 45 * 0.1 rounds to 5.
    return static_cast<std::size_t>(std::floor(static_cast<double>(count) * fraction + 0.5 + 1e-9));
}

FoldPlan stratified_folds(std::span<const Label> labels, std::size_t k, double val_fraction, std::uint64_t seed) {
    if (k < 2) throw InvalidArgument("stratified_folds: k must be >= 2");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0))
        throw InvalidArgument("stratified_folds: validation fraction must be in [0, 1)");

    std::array<std::vector<std::size_t>, 2> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[static_cast<int>(labels[i])].push_back(i);
    for (int c = 0; c < 2; ++c) {
        if (by_class[c].size() < k)
            throw InvalidArgument("stratified_folds: class '" + std::string(label_name(static_cast<Label>(c))) +
                                  "' has " + std::to_string(by_class[c].size()) + " trials, fewer than k = " +
                                  std::to_string(k));
        std::mt19937_64 rng(derive_seed(seed, "fold-class", static_cast<std::uint64_t>(c)));
        std::shuffle(by_class[c].begin(), by_class[c].end(), rng);
    }

    FoldPlan plan;
    plan.k = k;
    plan.val_fraction = val_fraction;
    plan.seed = seed;
    plan.folds.resize(k);

    std::vector<std::size_t> fold_of(labels.size());
    std::size_t position = 0;
    for (const auto& members : by_class)
        for (auto i : members) fold_of[i] = position++ % k;

    for (std::size_t f = 0; f < k; ++f) {
        auto& fold = plan.folds[f];
        for (const auto& members : by_class) {
            std::vector<std::size_t> training;
            for (auto i : members) {
                if (fold_of[i] == f) fold.test.push_back(i);
                else training.push_back(i);
            }
            const std::size_t n_val = round_half_up_share(training.size(), val_fraction);
            fold.validation.insert(fold.validation.end(), training.begin(), training.begin() + n_val);
            fold.train.insert(fold.train.end(), training.begin() + n_val, training.end());
        }
        std::sort(fold.test.begin(), fold.test.end());
        std::sort(fold.train.begin(), fold.train.end());
        std::sort(fold.validation.begin(), fold.validation.end());
    }
    return plan;
}

void FoldPlan::check_partition(std::size_t n) const {
    if (folds.size() != k) throw InvalidArgument("plan has " + std::to_string(folds.size()) + " folds, k = " + std::to_string(k));
    std::vector<int> test_hits(n, 0);
    std::size_t smallest = n, largest = 0;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        const auto& fold = folds[f];
        smallest = std::min(smallest, fold.test.size());
        largest = std::max(largest, fold.test.size());
        std::vector<int> role(n, 0);
        auto mark = [&](const std::vector<std::size_t>& ids, int bit, const char* what) {
            for (auto i : ids) {
                if (i >= n) throw InvalidArgument(std::string(what) + " index out of range");
                if (role[i]) throw InvalidArgument("fold " + std::to_string(f) + ": trial " + std::to_string(i) +
                                                   " appears in more than one split");
                role[i] = bit;
            }
        };
        mark(fold.test, 1, "test");
        mark(fold.train, 2, "train");
        mark(fold.validation, 4, "validation");
        for (std::size_t i = 0; i < n; ++i) {
            if (!role[i]) throw InvalidArgument("fold " + std::to_string(f) + ": trial " + std::to_string(i) + " unassigned");
            if (role[i] == 1) ++test_hits[i];
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (test_hits[i] != 1) throw InvalidArgument("test folds do not partition the dataset");
    if (largest - smallest > 1) throw InvalidArgument("test fold sizes differ by more than one");
}

}  // namespace odor
