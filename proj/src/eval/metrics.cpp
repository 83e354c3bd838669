#include "odor/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace odor::eval {

namespace {

void check_row(const std::array<double, 2>& row, const char* who, std::size_t i) {
    const bool in_range = row[0] >= 0.0 && row[1] >= 0.0 && std::isfinite(row[0]) && std::isfinite(row[1]);
    if (!in_range || std::abs(row[0] + row[1] - 1.0) > kRowSumTolerance)
        throw InvalidArgument(std::string("ensemble_probs: row ") + std::to_string(i) + " of " + who +
                              " is not a probability distribution");
}

double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ProbRows ensemble_probs(std::span<const std::array<double, 2>> p_res, std::span<const std::array<double, 2>> p_att) {
    if (p_res.size() != p_att.size())
        throw InvalidArgument("ensemble_probs: member row counts differ (" + std::to_string(p_res.size()) + " vs " +
                              std::to_string(p_att.size()) + ")");
    ProbRows out(p_res.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        check_row(p_res[i], "p_res", i);
        check_row(p_att[i], "p_att", i);
        out[i] = {(p_res[i][0] + p_att[i][0]) / 2.0, (p_res[i][1] + p_att[i][1]) / 2.0};
    }
    return out;
}

Label decide(const std::array<double, 2>& row) {
    return row[1] > 0.5 ? Label::odor : Label::blank;
}

Confusion confusion_matrix(std::span<const Label> predicted, std::span<const Label> truth) {
    if (predicted.size() != truth.size()) throw InvalidArgument("confusion_matrix: length mismatch");
    if (predicted.empty()) throw InvalidArgument("confusion_matrix: no predictions");
    Confusion c;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const bool p = predicted[i] == Label::odor;
        const bool t = truth[i] == Label::odor;
        if (p && t) ++c.tp;
        else if (p) ++c.fp;
        else if (t) ++c.fn;
        else ++c.tn;
    }
    return c;
}

Metrics confusion_metrics(std::span<const Label> predicted, std::span<const Label> truth) {
    Metrics m;
    m.confusion = confusion_matrix(predicted, truth);
    const auto& c = m.confusion;
    m.accuracy = ratio(c.tp + c.tn, c.total());
    m.precision = ratio(c.tp, c.tp + c.fp);
    m.sensitivity = ratio(c.tp, c.tp + c.fn);
    m.specificity = ratio(c.tn, c.tn + c.fp);
    if (c.tp + c.fp == 0) m.flags |= kNoPredictedPositives;
    if (c.tp + c.fn == 0) m.flags |= kNoActualPositives;
    if (c.tn + c.fp == 0) m.flags |= kNoActualNegatives;
    // 2TP / (2TP + FP + FN) equals the harmonic mean whenever both are defined.
    const std::size_t f1_den = 2 * c.tp + c.fp + c.fn;
    m.f1 = ratio(2 * c.tp, f1_den);
    if (f1_den == 0) m.flags |= kF1Undefined;
    return m;
}

double roc_auc(std::span<const double> scores, std::span<const Label> truth) {
    if (scores.size() != truth.size()) throw InvalidArgument("roc_auc: length mismatch");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double positive_rank_sum = 0.0;
    std::size_t positives = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based ranks i+1..j
        for (std::size_t r = i; r < j; ++r)
            if (truth[order[r]] == Label::odor) {
                positive_rank_sum += mid_rank;
                ++positives;
            }
        i = j;
    }
    const std::size_t negatives = scores.size() - positives;
    if (positives == 0 || negatives == 0) throw UndefinedMetric("roc_auc: both classes must be present");
    const double p = static_cast<double>(positives);
    return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(negatives));
}

std::vector<TrialPrediction> make_predictions(std::span<const std::string> ids, std::span<const Label> truth,
                                              const ProbRows& probs) {
    if (ids.size() != truth.size() || ids.size() != probs.size())
        throw InvalidArgument("make_predictions: length mismatch");
    std::vector<TrialPrediction> out(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) out[i] = {ids[i], truth[i], probs[i][1], decide(probs[i])};
    return out;
}

FoldReport make_fold_report(std::vector<TrialPrediction> trials) {
    std::vector<Label> predicted, truth;
    std::vector<double> scores;
    for (const auto& t : trials) {
        predicted.push_back(t.predicted);
        truth.push_back(t.truth);
        scores.push_back(t.p_odor);
    }
    FoldReport report;
    report.metrics = confusion_metrics(predicted, truth);
    try {
        report.metrics.auc = roc_auc(scores, truth);
    } catch (const UndefinedMetric&) {
        report.metrics.flags |= kAucUndefined;
    }
    report.trials = std::move(trials);
    return report;
}

std::vector<CalibrationBin> calibration_report(std::span<const double> p_odor, std::span<const Label> truth,
                                               std::size_t n_bins) {
    if (p_odor.size() != truth.size()) throw InvalidArgument("calibration_report: length mismatch");
    if (n_bins == 0) throw InvalidArgument("calibration_report: n_bins must be positive");
    std::vector<CalibrationBin> bins(n_bins);
    std::vector<double> odor(n_bins, 0.0);
    for (std::size_t b = 0; b < n_bins; ++b) {
        bins[b].lower = static_cast<double>(b) / static_cast<double>(n_bins);
        bins[b].upper = static_cast<double>(b + 1) / static_cast<double>(n_bins);
    }
    for (std::size_t i = 0; i < p_odor.size(); ++i) {
        const double p = p_odor[i];
        if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("calibration_report: probability outside [0, 1]");
        const auto b = std::min(static_cast<std::size_t>(p * static_cast<double>(n_bins)), n_bins - 1);
        bins[b].mean_confidence += p;
        odor[b] += truth[i] == Label::odor ? 1.0 : 0.0;
        ++bins[b].count;
    }
    for (std::size_t b = 0; b < n_bins; ++b)
        if (bins[b].count) {
            bins[b].mean_confidence /= static_cast<double>(bins[b].count);
            bins[b].accuracy = odor[b] / static_cast<double>(bins[b].count);
        }
    return bins;
}

ConfidenceHistogram confidence_histogram(std::span<const TrialPrediction> trials, std::size_t n_bins) {
    if (n_bins == 0) throw InvalidArgument("confidence_histogram: n_bins must be positive");
    ConfidenceHistogram h;
    for (std::size_t b = 0; b <= n_bins; ++b) h.edges.push_back(0.5 + 0.5 * static_cast<double>(b) / n_bins);
    h.correct.assign(n_bins, 0);
    h.incorrect.assign(n_bins, 0);
    double sum_correct = 0.0, sum_incorrect = 0.0;
    std::size_t n_correct = 0, n_incorrect = 0;
    for (const auto& t : trials) {
        const double c = t.confidence();
        const auto b = std::min(static_cast<std::size_t>((c - 0.5) * 2.0 * static_cast<double>(n_bins)), n_bins - 1);
        if (t.correct()) {
            ++h.correct[b];
            sum_correct += c;
            ++n_correct;
        } else {
            ++h.incorrect[b];
            sum_incorrect += c;
            ++n_incorrect;
        }
    }
    if (n_correct) h.mean_correct = sum_correct / static_cast<double>(n_correct);
    if (n_incorrect) h.mean_incorrect = sum_incorrect / static_cast<double>(n_incorrect);
    return h;
}

}  // namespace odor::eval
