#include "odor/eval/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

namespace odor::eval {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InvalidArgument("cannot write " + path.string());
    out.precision(17);
    return out;
}

std::string cell(const MeanSd& v, bool percent) {
    char buf[64];
    if (percent) std::snprintf(buf, sizeof buf, "%.1f ± %.1f", 100.0 * v.mean, 100.0 * v.sd);
    else std::snprintf(buf, sizeof buf, "%.4f ± %.4f", v.mean, v.sd);
    return buf;
}

// Left-justifies to a display width, counting UTF-8 code points.
std::string pad(const std::string& text, std::size_t width) {
    std::size_t points = 0;
    for (unsigned char c : text) points += (c & 0xC0) != 0x80;
    return text + std::string(width > points ? width - points : 0, ' ');
}

}  // namespace

std::string_view metric_name(MetricId id) {
    switch (id) {
        case MetricId::accuracy: return "accuracy";
        case MetricId::f1: return "f1";
        case MetricId::auc: return "auc";
        case MetricId::sensitivity: return "sensitivity";
        case MetricId::specificity: return "specificity";
        case MetricId::precision: return "precision";
    }
    return "?";
}

double metric_value(const Metrics& m, MetricId id) {
    switch (id) {
        case MetricId::accuracy: return m.accuracy;
        case MetricId::f1: return m.f1;
        case MetricId::auc: return m.auc;
        case MetricId::sensitivity: return m.sensitivity;
        case MetricId::specificity: return m.specificity;
        case MetricId::precision: return m.precision;
    }
    return 0.0;
}

MeanSd mean_sd(std::span<const double> values) {
    MeanSd r;
    r.n = values.size();
    if (values.empty()) return r;
    for (double v : values) r.mean += v;
    r.mean /= static_cast<double>(r.n);
    if (r.n > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - r.mean) * (v - r.mean);
        r.sd = std::sqrt(ss / static_cast<double>(r.n - 1));
    }
    return r;
}

ModelSummary summarize(std::string name, std::vector<FoldReport> folds) {
    ModelSummary s;
    s.name = std::move(name);
    s.folds = std::move(folds);
    for (std::size_t k = 0; k < kAllMetrics.size(); ++k) {
        std::vector<double> values;
        for (const auto& f : s.folds) values.push_back(metric_value(f.metrics, kAllMetrics[k]));
        s.aggregate[k] = mean_sd(values);
    }
    return s;
}

void write_table(std::ostream& os, std::span<const ModelSummary> rows, std::string_view title) {
    os << title << "\n";
    const std::size_t folds = rows.empty() ? 0 : rows.front().folds.size();
    os << "mean ± SD over " << folds << " folds (sample SD, n-1); Acc/F1/Sens/Spec/Prec in %, AUC as fraction\n";
    auto row = [&os](const std::array<std::string, 7>& cells) {
        constexpr std::array<std::size_t, 7> widths = {16, 12, 12, 17, 12, 12, 12};
        for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? " | " : "") << pad(cells[i], widths[i]);
        os << '\n';
    };
    row({"Model", "Acc (%)", "F1 (%)", "AUC", "Sens (%)", "Spec (%)", "Prec (%)"});
    for (const auto& r : rows)
        row({r.name, cell(r[MetricId::accuracy], true), cell(r[MetricId::f1], true), cell(r[MetricId::auc], false),
             cell(r[MetricId::sensitivity], true), cell(r[MetricId::specificity], true),
             cell(r[MetricId::precision], true)});
}

void write_predictions_csv(const std::filesystem::path& path, std::span<const TrialPrediction> trials) {
    auto out = open_out(path);
    out << "trial_id,true_label,p_odor,predicted_label,correct\n";
    for (const auto& t : trials)
        out << t.trial_id << ',' << label_name(t.truth) << ',' << t.p_odor << ',' << label_name(t.predicted) << ','
            << (t.correct() ? 1 : 0) << '\n';
}

void write_calibration_csv(const std::filesystem::path& path, std::span<const CalibrationBin> bins) {
    auto out = open_out(path);
    out << "lower,upper,mean_confidence,accuracy,count\n";
    for (const auto& b : bins)
        out << b.lower << ',' << b.upper << ',' << b.mean_confidence << ',' << b.accuracy << ',' << b.count << '\n';
}

void write_histogram_csv(const std::filesystem::path& path, const ConfidenceHistogram& h) {
    auto out = open_out(path);
    out << "# mean_correct=" << (h.mean_correct ? std::to_string(*h.mean_correct) : "undefined")
        << " mean_incorrect=" << (h.mean_incorrect ? std::to_string(*h.mean_incorrect) : "undefined") << '\n';
    out << "lower,upper,correct,incorrect\n";
    for (std::size_t b = 0; b < h.correct.size(); ++b)
        out << h.edges[b] << ',' << h.edges[b + 1] << ',' << h.correct[b] << ',' << h.incorrect[b] << '\n';
}

nlohmann::json metrics_json(const Metrics& m) {
    const auto& c = m.confusion;
    return {{"accuracy", m.accuracy},       {"f1", m.f1},
            {"auc", m.auc},                 {"sensitivity", m.sensitivity},
            {"specificity", m.specificity}, {"precision", m.precision},
            {"flags", m.flags},             {"confusion", {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}}}};
}

}  // namespace odor::eval
