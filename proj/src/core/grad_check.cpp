#include "odor/core/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace odor {

namespace {

void check_step(const GradCheckOptions& options) {
    if (!(options.step >= 1e-6 && options.step <= 1e-4))
        throw InvalidArgument("grad_check: step must lie in [1e-6, 1e-4]");
}

struct Evaluation {
    double value;
    std::uint64_t branches;
};

template <typename Fn>
Evaluation evaluate(const Fn& fn) {
    BranchFingerprint fp;
    const double v = fn().item();
    return {v, fp.value()};
}

/// Shared probe loop over (leaf, coordinate) pairs.
GradCheckReport probe(const LossFn& fn, std::vector<Tensor<double>>& leaves,
                      const std::vector<std::vector<double>>& analytic, const GradCheckOptions& options) {
    NoGradGuard<double> no_grad;
    const Evaluation base = evaluate(fn);
    if (evaluate(fn).value != base.value) throw InvalidArgument("grad_check: fn is not deterministic");

    std::vector<std::pair<std::size_t, std::size_t>> coords;
    for (std::size_t l = 0; l < leaves.size(); ++l)
        for (std::size_t i = 0; i < leaves[l].numel(); ++i) coords.emplace_back(l, i);
    if (options.max_elements != 0 && options.max_elements < coords.size()) {
        std::mt19937_64 rng(options.seed);
        std::shuffle(coords.begin(), coords.end(), rng);
        coords.resize(options.max_elements);
    }

    const double h = options.step;
    GradCheckReport report;
    for (auto [l, i] : coords) {
        auto values = leaves[l].mutable_data();
        const double saved = values[i];
        values[i] = saved + h;
        const Evaluation up = evaluate(fn);
        values[i] = saved - h;
        const Evaluation down = evaluate(fn);
        values[i] = saved;
        if (options.skip_nonsmooth && (up.branches != base.branches || down.branches != base.branches)) {
            ++report.skipped;
            continue;
        }
        const double central = (up.value - down.value) / (2.0 * h);
        const double a = analytic[l][i];
        const double denom = std::max({std::abs(a), std::abs(central), 1e-8});
        report.max_error = std::max(report.max_error, std::abs(a - central) / denom);
        ++report.checked;
    }
    return report;
}

}  // namespace

GradCheckReport grad_check_report(const ScalarFn& fn, const Tensor<double>& x, const GradCheckOptions& options) {
    check_step(options);
    Tensor<double> probe_input = x.clone(true);
    std::vector<std::vector<double>> analytic;
    {
        Tape<double> tape;
        const Tensor<double> loss = fn(probe_input);
        if (loss.numel() != 1) throw InvalidArgument("grad_check: fn must return a scalar");
        tape.backward(loss);
        if (probe_input.has_grad()) analytic.emplace_back(probe_input.grad().begin(), probe_input.grad().end());
        else analytic.emplace_back(probe_input.numel(), 0.0);
    }
    std::vector<Tensor<double>> leaves{probe_input};
    return probe([&] { return fn(probe_input); }, leaves, analytic, options);
}

double grad_check(const ScalarFn& fn, const Tensor<double>& x, const GradCheckOptions& options) {
    return grad_check_report(fn, x, options).max_error;
}

double grad_check_leaves(const LossFn& fn, std::vector<Tensor<double>> leaves, const GradCheckOptions& options) {
    check_step(options);
    for (auto& leaf : leaves) {
        if (!leaf.is_leaf() || !leaf.requires_grad())
            throw InvalidArgument("grad_check: every checked tensor must be a leaf requiring grad");
        leaf.zero_grad();
    }
    std::vector<std::vector<double>> analytic;
    {
        Tape<double> tape;
        const Tensor<double> loss = fn();
        if (loss.numel() != 1) throw InvalidArgument("grad_check: fn must return a scalar");
        tape.backward(loss);
        for (auto& leaf : leaves) {
            analytic.emplace_back(leaf.grad().begin(), leaf.grad().end());
            leaf.zero_grad();
        }
    }
    return probe(fn, leaves, analytic, options).max_error;
}

}  // namespace odor
