#include "odor/train/cv.hpp"

#include <atomic>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "odor/core/seed.hpp"
#include "odor/data/folds.hpp"
#include "odor/nn/inference.hpp"

namespace odor::train {

using nlohmann::json;

void CvConfig::validate() const {
    train.validate();
    if (k < 2) throw InvalidArgument("cv.k must be >= 2");
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw InvalidArgument("cv.val_fraction must lie in (0, 1)");
    if (jobs == 0) throw InvalidArgument("cv.jobs must be >= 1");
}

MemberSeeds member_seeds(std::uint64_t master, std::size_t fold, nn::Architecture arch) {
    const std::uint64_t slot = 2 * fold + (arch == nn::Architecture::attention_cnn ? 1 : 0);
    return {derive_seed(master, "init", slot), derive_seed(master, "train", slot)};
}

std::string member_display_name(nn::Architecture arch) {
    return arch == nn::Architecture::attention_cnn ? "AttentionCNN" : "ResCNN";
}

std::vector<eval::TrialPrediction> CvReport::pooled_predictions() const {
    std::vector<eval::TrialPrediction> out;
    for (const auto& f : folds) {
        if (!f.complete) continue;
        const auto& trials = f.ensemble ? f.ensemble->trials : f.members.front().report.trials;
        out.insert(out.end(), trials.begin(), trials.end());
    }
    return out;
}

namespace {

std::vector<SpectralFeatures> scaled(std::span<const SpectralFeatures> spectra, std::span<const std::size_t> idx,
                                     const dsp::ScalerParams& scaler) {
    std::vector<SpectralFeatures> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(dsp::apply_scaler(scaler, spectra[i]));
    return out;
}

FoldAudit audit_fold(std::span<const SpectralFeatures> spectra, const Fold& fold, const dsp::ScalerParams& scaler) {
    FoldAudit a{fold.train.size(), fold.validation.size(), fold.test.size()};
    std::set<std::string> seen;
    for (auto i : fold.train) seen.insert(spectra[i].trial_id);
    for (auto i : fold.validation) seen.insert(spectra[i].trial_id);
    a.test_ids_disjoint = true;
    for (auto i : fold.test) a.test_ids_disjoint = a.test_ids_disjoint && !seen.count(spectra[i].trial_id);

    const auto refit = dsp::fit_scaler(spectra, fold.train);
    std::vector<std::string> train_ids;
    for (auto i : fold.train) train_ids.push_back(spectra[i].trial_id);
    a.scaler_from_train_only = refit.median == scaler.median && refit.iqr == scaler.iqr &&
                               scaler.fit_ids == train_ids;
    return a;
}

template <typename T>
MemberOutcome train_member(nn::Architecture arch, std::size_t fold_index, const CvConfig& config,
                           std::span<const SpectralFeatures> train_set, std::span<const SpectralFeatures> val_set,
                           std::span<const SpectralFeatures> test_set) {
    const auto seeds = member_seeds(config.seed, fold_index, arch);
    auto model = nn::build_model<T>(arch, seeds.init, train_set.front().channels, train_set.front().bins);
    TrainConfig tc = config.train;
    tc.seed = seeds.train;
    if (config.ensemble) tc.schedule = config.ensemble_schedule;

    MemberOutcome m;
    m.architecture = arch;
    m.training = train_model(model, train_set, val_set, tc);
    const auto pred = nn::predict(model, test_set);
    m.probs = pred.probs;
    std::vector<std::string> ids;
    std::vector<Label> truth;
    for (const auto& s : test_set) {
        ids.push_back(s.trial_id);
        truth.push_back(s.label);
    }
    m.report = eval::make_fold_report(eval::make_predictions(ids, truth, m.probs));
    return m;
}

template <typename T>
FoldOutcome run_fold(std::span<const SpectralFeatures> spectra, const Fold& fold, std::size_t index,
                     const CvConfig& config) {
    FoldOutcome out;
    out.fold = index;
    try {
        out.scaler = dsp::fit_scaler(spectra, fold.train);
        const auto& scaler = out.scaler;
        out.audit = audit_fold(spectra, fold, scaler);
        if (!out.audit.test_ids_disjoint || !out.audit.scaler_from_train_only)
            throw Error("leakage audit failed for fold " + std::to_string(index + 1));
        const auto train_set = scaled(spectra, fold.train, scaler);
        const auto val_set = scaled(spectra, fold.validation, scaler);
        const auto test_set = scaled(spectra, fold.test, scaler);

        std::vector<nn::Architecture> archs;
        if (config.ensemble) archs = {nn::Architecture::res_cnn, nn::Architecture::attention_cnn};
        else archs = {config.architecture};
        for (auto arch : archs) out.members.push_back(train_member<T>(arch, index, config, train_set, val_set, test_set));

        if (config.ensemble) {
            const auto fused = eval::ensemble_probs(out.members[0].probs, out.members[1].probs);
            std::vector<std::string> ids;
            std::vector<Label> truth;
            for (const auto& s : test_set) {
                ids.push_back(s.trial_id);
                truth.push_back(s.label);
            }
            out.ensemble = eval::make_fold_report(eval::make_predictions(ids, truth, fused));
        }
        out.complete = true;
    } catch (const std::exception& e) {
        out.error = e.what();
        out.members.clear();
        out.ensemble.reset();
    }
    return out;
}

}  // namespace

FoldPlan plan_folds(std::span<const SpectralFeatures> spectra, const CvConfig& config) {
    config.validate();
    std::vector<Label> labels;
    for (const auto& s : spectra) labels.push_back(s.label);
    auto plan = stratified_folds(labels, config.k, config.val_fraction, derive_seed(config.seed, "folds"));
    plan.check_partition(spectra.size());
    return plan;
}

FoldOutcome train_fold(std::span<const SpectralFeatures> spectra, const FoldPlan& plan, std::size_t index,
                       const CvConfig& config) {
    if (index >= plan.folds.size()) throw InvalidArgument("fold index out of range");
    return config.precision == Precision::f64 ? run_fold<double>(spectra, plan.folds[index], index, config)
                                              : run_fold<float>(spectra, plan.folds[index], index, config);
}

CvReport run_cross_validation(std::span<const SpectralFeatures> spectra, const CvConfig& config) {
    const auto plan = plan_folds(spectra, config);

    CvReport report;
    report.config = config;
    report.trials = spectra.size();
    report.folds.resize(config.k);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t f; (f = next.fetch_add(1)) < config.k;) report.folds[f] = train_fold(spectra, plan, f, config);
    };
    {
        std::vector<std::jthread> pool;
        for (std::size_t j = 1; j < std::min(config.jobs, config.k); ++j) pool.emplace_back(worker);
        worker();
    }

    report.complete = true;
    for (const auto& f : report.folds) report.complete = report.complete && f.complete;

    std::vector<nn::Architecture> archs;
    if (config.ensemble) archs = {nn::Architecture::res_cnn, nn::Architecture::attention_cnn};
    else archs = {config.architecture};
    for (std::size_t m = 0; m < archs.size(); ++m) {
        std::vector<eval::FoldReport> reports;
        for (const auto& f : report.folds)
            if (f.complete) reports.push_back(f.members[m].report);
        report.summaries.push_back(eval::summarize(member_display_name(archs[m]), std::move(reports)));
    }
    if (config.ensemble) {
        std::vector<eval::FoldReport> reports;
        for (const auto& f : report.folds)
            if (f.complete) reports.push_back(*f.ensemble);
        report.summaries.push_back(eval::summarize("Ensemble", std::move(reports)));
    }
    return report;
}

namespace {

json config_json(const CvConfig& c) {
    const auto& t = c.train;
    return {{"architecture", nn::architecture_name(c.architecture)},
            {"ensemble", c.ensemble},
            {"k", c.k},
            {"val_fraction", c.val_fraction},
            {"seed", c.seed},
            {"precision", c.precision == Precision::f64 ? "f64" : "f32"},
            {"ensemble_schedule", schedule_name(c.ensemble_schedule)},
            {"train",
             {{"batch_size", t.batch_size},
              {"max_epochs", t.max_epochs},
              {"schedule", schedule_name(t.schedule)},
              {"lr", t.optimizer.lr},
              {"weight_decay", t.optimizer.weight_decay},
              {"patience", t.early_stop.patience},
              {"min_delta", t.early_stop.min_delta}}}};
}

}  // namespace

void write_cv_outputs(const std::filesystem::path& dir, const CvReport& report) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    std::ostringstream table;
    eval::write_table(table, report.summaries,
                      std::to_string(report.config.k) + "-fold cross-validation, " + std::to_string(report.trials) +
                          " trials" + (report.complete ? "" : " (INCOMPLETE)"));
    {
        std::ofstream out(dir / "table.txt");
        if (!out) throw InvalidArgument("cannot write " + (dir / "table.txt").string());
        out << table.str();
    }

    json j;
    j["config"] = config_json(report.config);
    j["trials"] = report.trials;
    j["complete"] = report.complete;
    j["sd_convention"] = "sample (n-1)";
    for (const auto& s : report.summaries) {
        json row;
        for (auto id : eval::kAllMetrics)
            row[std::string(eval::metric_name(id))] = {{"mean", s[id].mean}, {"sd", s[id].sd}, {"n", s[id].n}};
        j["aggregate"][s.name] = row;
    }
    for (const auto& f : report.folds) {
        json fj{{"fold", f.fold + 1}, {"complete", f.complete}};
        if (!f.complete) fj["error"] = f.error;
        fj["audit"] = {{"train", f.audit.train},
                       {"validation", f.audit.validation},
                       {"test", f.audit.test},
                       {"test_ids_disjoint", f.audit.test_ids_disjoint},
                       {"scaler_from_train_only", f.audit.scaler_from_train_only}};
        const fs::path fold_dir = dir / ("fold" + std::to_string(f.fold + 1));
        if (f.complete) fs::create_directories(fold_dir);
        for (const auto& m : f.members) {
            const std::string name(nn::architecture_name(m.architecture));
            fj["models"][name] = eval::metrics_json(m.report.metrics);
            fj["models"][name]["best_epoch"] = m.training.best_epoch;
            fj["models"][name]["epochs_run"] = m.training.curve.size();
            fj["models"][name]["stopped_early"] = m.training.stopped_early;
            eval::write_predictions_csv(fold_dir / (name + "_predictions.csv"), m.report.trials);
            write_curve_csv(fold_dir / (name + "_curve.csv"), m.training.curve);
            save_checkpoint(m.training.best, fold_dir / (name + ".ckpt"));
        }
        if (f.ensemble) {
            fj["models"]["ensemble"] = eval::metrics_json(f.ensemble->metrics);
            eval::write_predictions_csv(fold_dir / "ensemble_predictions.csv", f.ensemble->trials);
        }
        j["folds"].push_back(fj);
    }

    const auto pooled = report.pooled_predictions();
    std::vector<double> p;
    std::vector<Label> truth;
    for (const auto& t : pooled) {
        p.push_back(t.p_odor);
        truth.push_back(t.truth);
    }
    const auto hist = eval::confidence_histogram(pooled);
    eval::write_calibration_csv(dir / "calibration.csv", eval::calibration_report(p, truth));
    eval::write_histogram_csv(dir / "confidence_histogram.csv", hist);
    j["confidence"] = {{"mean_correct", hist.mean_correct ? json(*hist.mean_correct) : json()},
                       {"mean_incorrect", hist.mean_incorrect ? json(*hist.mean_incorrect) : json()}};

    std::ofstream out(dir / "report.json");
    if (!out) throw InvalidArgument("cannot write " + (dir / "report.json").string());
    out << j.dump(2) << '\n';
}

}  // namespace odor::train
