#include "odor/cli/commands.hpp"

#include <chrono>
#include <cstring>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "odor/cli/config.hpp"
#include "odor/cli/manifest.hpp"
#include "odor/core/seed.hpp"
#include "odor/data/container.hpp"
#include "odor/data/synth.hpp"
#include "odor/dsp/preprocess.hpp"
#include "odor/dsp/scaler.hpp"
#include "odor/eval/features.hpp"
#include "odor/eval/metrics.hpp"
#include "odor/eval/report.hpp"
#include "odor/nn/inference.hpp"
#include "odor/nn/model_check.hpp"
#include "odor/train/cv.hpp"

namespace odor::cli {

namespace fs = std::filesystem;

namespace {

struct Incomplete : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string one_line(std::string text) {
    for (auto& c : text)
        if (c == '\n' || c == '\r') c = ' ';
    return text;
}

fs::path require_path(const fs::path& p, const char* key) {
    if (p.empty()) throw ConfigError(key, "required");
    return p;
}

struct NotFound : InvalidArgument {
    using InvalidArgument::InvalidArgument;
};

fs::path require_existing(const fs::path& p, const char* key) {
    require_path(p, key);
    if (!fs::exists(p)) throw NotFound(std::string(key) + ": " + p.string() + " does not exist");
    return p;
}

fs::path output_dir(const RunConfig& config) { return resolve_output(require_path(config.out, "output.dir")); }

struct Invocation {
    RunConfig config;
    RunRecord record;
    std::ostream& out;
};

// ---- synth / import / preprocess ---------------------------------------------------------------

void cmd_synth(Invocation& inv) {
    auto& c = inv.config;
    c.validate();
    const fs::path dir = output_dir(c);
    const SynthConfig synth = c.effective_synth();
    inv.record.seeds["master"] = c.seed;
    DatasetWriter writer(dir, DatasetKind::raw,
                         "synthetic n=" + std::to_string(synth.n_trials) + " snr=" + c.get("synth.snr") +
                             " seed=" + std::to_string(synth.seed));
    for (std::size_t i = 0; i < synth.n_trials; ++i) writer.append(synth_trial(synth, i));
    const DatasetManifest m = writer.finish();
    inv.out << "wrote " << m.trial_count() << " raw trials (" << m.count(Label::odor) << " odor, "
            << m.count(Label::blank) << " blank) to " << dir.string() << '\n';
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    for (auto& s : cells) {
        while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
        while (!s.empty() && s.front() == ' ') s.erase(s.begin());
    }
    return cells;
}

TrialRecord read_trial_file(const ImportConfig& ic, const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw InvalidArgument("cannot read trial file " + file.string());
    const std::size_t bytes = fs::file_size(file);
    const std::size_t width = ic.dtype == SampleType::i16 ? 2 : 4;
    if (bytes == 0 || bytes % (width * ic.channels) != 0)
        throw CorruptFileError(file.string() + ": size " + std::to_string(bytes) + " is not a whole number of " +
                               std::to_string(ic.channels) + "-channel samples");
    TrialRecord t;
    t.channels = ic.channels;
    t.samples = bytes / (width * ic.channels);
    t.sample_rate_hz = ic.rate_hz;
    t.data.resize(t.channels * t.samples);
    std::vector<char> raw(bytes);
    in.read(raw.data(), static_cast<std::streamsize>(bytes));
    if (static_cast<std::size_t>(in.gcount()) != bytes) throw CorruptFileError(file.string() + ": short read");
    auto value = [&](std::size_t k) -> double {
        if (ic.dtype == SampleType::i16) {
            std::int16_t v;
            std::memcpy(&v, raw.data() + 2 * k, 2);
            return v;
        }
        float v;
        std::memcpy(&v, raw.data() + 4 * k, 4);
        return v;
    };
    for (std::size_t ch = 0; ch < t.channels; ++ch)
        for (std::size_t s = 0; s < t.samples; ++s) {
            const std::size_t k =
                ic.layout == SampleLayout::interleaved ? s * t.channels + ch : ch * t.samples + s;
            t.channel(ch)[s] = static_cast<float>(value(k) * ic.scale_uv);
        }
    return t;
}

void cmd_import(Invocation& inv) {
    auto& c = inv.config;
    c.validate();
    const fs::path index = require_existing(c.import.index, "import.index");
    const fs::path dir = output_dir(c);
    std::ifstream in(index);
    if (!in) throw InvalidArgument("cannot read index " + index.string());
    const std::vector<std::string> expected = {"trial_id", "mouse_id", "label", "odorant", "onset_offset_samples",
                                               "file"};
    std::string line;
    if (!std::getline(in, line) || split_csv(line) != expected)
        throw CorruptFileError(index.string() +
                               ": header must be trial_id,mouse_id,label,odorant,onset_offset_samples,file");
    DatasetWriter writer(dir, DatasetKind::raw, "import " + fs::absolute(index).string());
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv(line);
        const std::string where = index.string() + " row " + std::to_string(row);
        if (cells.size() != expected.size()) throw CorruptFileError(where + ": expected 6 fields");
        TrialRecord t = read_trial_file(c.import, index.parent_path() / cells[5]);
        t.trial_id = cells[0];
        t.mouse_id = cells[1];
        try {
            t.label = parse_label(cells[2]);
            t.odorant = cells[3];
            std::size_t used = 0;
            t.onset_offset_samples = std::stoul(cells[4], &used);
            if (used != cells[4].size()) throw std::invalid_argument("onset");
        } catch (const std::logic_error& e) {
            throw CorruptFileError(where + ": " + e.what());
        }
        writer.append(t);
    }
    const DatasetManifest m = writer.finish();
    inv.out << "imported " << m.trial_count() << " trials (" << m.count(Label::odor) << " odor, "
            << m.count(Label::blank) << " blank), " << m.channels << " channels x " << m.samples << " samples\n";
}

void cmd_preprocess(Invocation& inv) {
    auto& c = inv.config;
    const fs::path data = require_existing(c.data, "data.path");
    const fs::path dir = output_dir(c);
    DatasetReader reader(data);
    const auto& rm = reader.manifest();
    if (rm.kind != DatasetKind::raw) throw InvalidArgument(data.string() + " is not a raw dataset");
    // The recording's own rate and channel count are authoritative.
    c.preprocess.input_rate_hz = rm.sample_rate_hz;
    c.preprocess.channels = rm.channels;
    c.validate();
    const auto cascade = c.preprocess.design();
    DatasetWriter writer(dir, DatasetKind::spectral, "preprocess " + fs::absolute(data).string());
    for (std::size_t i = 0; i < reader.size(); ++i) writer.append(dsp::compute_spectra(reader.raw(i), cascade, c.preprocess));
    const DatasetManifest m = writer.finish();
    inv.out << "wrote " << m.trial_count() << " spectra, " << m.channels << " channels x " << m.samples
            << " bins at " << m.bin_hz << " Hz\n";
}

// ---- training ---------------------------------------------------------------------------------

std::vector<SpectralFeatures> load_spectral(const fs::path& data) {
    const DatasetManifest m = read_manifest(data);
    if (m.kind != DatasetKind::spectral)
        throw InvalidArgument(data.string() + " holds raw recordings; run `odor preprocess` first");
    return load_features(data);
}

void record_member_seeds(RunRecord& record, const train::CvConfig& cv, std::size_t fold, nn::Architecture arch) {
    const auto s = train::member_seeds(cv.seed, fold, arch);
    const std::string prefix = "fold" + std::to_string(fold + 1) + "." + std::string(nn::architecture_name(arch));
    record.seeds[prefix + ".init"] = s.init;
    record.seeds[prefix + ".train"] = s.train;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw InvalidArgument("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

void cmd_train(Invocation& inv) {
    auto& c = inv.config;
    c.validate();
    const fs::path data = require_existing(c.data, "data.path");
    const fs::path dir = output_dir(c);
    const auto spectra = load_spectral(data);
    train::CvConfig cv = c.effective_cv();
    cv.ensemble = false;
    const auto plan = train::plan_folds(spectra, cv);
    const std::size_t index = c.fold - 1;
    inv.record.seeds["master"] = cv.seed;
    inv.record.seeds["folds"] = plan.seed;
    record_member_seeds(inv.record, cv, index, cv.architecture);

    const train::FoldOutcome outcome = train::train_fold(spectra, plan, index, cv);
    fs::create_directories(dir);
    if (!outcome.complete) throw Incomplete("fold " + std::to_string(c.fold) + ": " + outcome.error);
    const auto& member = outcome.members.front();
    save_checkpoint(member.training.best, dir / "model.ckpt");
    dsp::save_scaler(outcome.scaler, dir / "scaler.json");
    train::write_curve_csv(dir / "curve.csv", member.training.curve);
    eval::write_predictions_csv(dir / "predictions.csv", member.report.trials);
    write_json(dir / "metrics.json",
               {{"fold", c.fold},
                {"architecture", nn::architecture_name(cv.architecture)},
                {"best_epoch", member.training.best_epoch},
                {"epochs_run", member.training.curve.size()},
                {"best_val_loss", member.training.best_val_loss},
                {"train", outcome.audit.train},
                {"validation", outcome.audit.validation},
                {"test", outcome.audit.test},
                {"metrics", eval::metrics_json(member.report.metrics)}});
    const auto& m = member.report.metrics;
    inv.out << train::member_display_name(cv.architecture) << " fold " << c.fold << ": best epoch "
            << member.training.best_epoch << " of " << member.training.curve.size() << ", test accuracy "
            << std::fixed << std::setprecision(4) << m.accuracy << ", AUC " << m.auc << '\n';
}

void cmd_cv(Invocation& inv) {
    auto& c = inv.config;
    c.validate();
    const fs::path data = require_existing(c.data, "data.path");
    const fs::path dir = output_dir(c);
    const auto spectra = load_spectral(data);
    const train::CvConfig cv = c.effective_cv();
    inv.record.seeds["master"] = cv.seed;
    inv.record.seeds["folds"] = train::plan_folds(spectra, cv).seed;
    for (std::size_t f = 0; f < cv.k; ++f) {
        if (cv.ensemble) {
            record_member_seeds(inv.record, cv, f, nn::Architecture::res_cnn);
            record_member_seeds(inv.record, cv, f, nn::Architecture::attention_cnn);
        } else {
            record_member_seeds(inv.record, cv, f, cv.architecture);
        }
    }
    const auto report = train::run_cross_validation(spectra, cv);
    train::write_cv_outputs(dir, report);
    std::ifstream table(dir / "table.txt");
    inv.out << table.rdbuf();
    if (!report.complete) {
        std::string failed;
        for (const auto& f : report.folds)
            if (!f.complete) failed += (failed.empty() ? "" : "; ") + ("fold " + std::to_string(f.fold + 1) + ": " + f.error);
        throw Incomplete(failed);
    }
}

// ---- inference --------------------------------------------------------------------------------

struct Loaded {
    Checkpoint checkpoint;
    std::vector<SpectralFeatures> scaled;
};

Loaded load_for_inference(const RunConfig& c) {
    const fs::path ckpt = require_existing(c.checkpoint, "model.checkpoint");
    const fs::path data = require_existing(c.data, "data.path");
    Loaded l;
    l.checkpoint = load_checkpoint(ckpt);
    const fs::path scaler_path = c.scaler.empty() ? ckpt.parent_path() / "scaler.json" : c.scaler;
    const dsp::ScalerParams scaler = dsp::load_scaler(require_existing(scaler_path, "model.scaler"));
    const auto spectra = load_spectral(data);
    l.scaled.reserve(spectra.size());
    for (const auto& s : spectra) l.scaled.push_back(dsp::apply_scaler(scaler, s));
    return l;
}

template <typename Fn>
auto with_model(const Checkpoint& ckpt, Fn&& fn) {
    if (ckpt.precision == Precision::f64) {
        auto model = nn::build_from_checkpoint<double>(ckpt);
        return fn(model);
    }
    auto model = nn::build_from_checkpoint<float>(ckpt);
    return fn(model);
}

void cmd_evaluate(Invocation& inv) {
    auto& c = inv.config;
    c.validate();
    const Loaded l = load_for_inference(c);
    const nn::Predictions p = with_model(l.checkpoint, [&](auto& model) { return nn::predict(model, std::span(l.scaled)); });
    std::vector<std::string> ids;
    std::vector<Label> truth;
    for (const auto& s : l.scaled) {
        ids.push_back(s.trial_id);
        truth.push_back(s.label);
    }
    const auto report = eval::make_fold_report(eval::make_predictions(ids, truth, p.probs));
    const nlohmann::json metrics = eval::metrics_json(report.metrics);
    inv.out << metrics.dump() << '\n';
    if (c.out.empty()) return;
    const fs::path dir = resolve_output(c.out);
    fs::create_directories(dir);
    std::vector<double> p_odor;
    for (const auto& t : report.trials) p_odor.push_back(t.p_odor);
    eval::write_predictions_csv(dir / "predictions.csv", report.trials);
    write_json(dir / "metrics.json", {{"checkpoint", l.checkpoint.descriptor}, {"trials", ids.size()}, {"metrics", metrics}});
    eval::write_calibration_csv(dir / "calibration.csv", eval::calibration_report(p_odor, truth));
    eval::write_histogram_csv(dir / "confidence_histogram.csv", eval::confidence_histogram(report.trials));
}

void cmd_export_features(Invocation& inv) {
    auto& c = inv.config;
    c.validate();
    const Loaded l = load_for_inference(c);
    const fs::path dir = output_dir(c);
    fs::create_directories(dir);
    const nn::Predictions p = with_model(l.checkpoint, [&](auto& model) {
        return eval::export_features(model, std::span(l.scaled), dir / "features.csv");
    });
    inv.out << "wrote " << l.scaled.size() << " x " << p.feature_dim << " features to "
            << (dir / "features.csv").string() << '\n';
}

bool cmd_gradcheck(Invocation& inv, bool arch_given) {
    auto& c = inv.config;
    c.validate();
    std::vector<nn::Architecture> archs;
    if (arch_given) archs.push_back(c.architecture);
    else archs = {nn::Architecture::res_cnn, nn::Architecture::attention_cnn};
    inv.record.seeds["first_instance"] = c.seed;
    bool ok = true;
    for (const auto arch : archs) {
        const auto r = nn::model_grad_suite(arch, c.gradcheck_instances, c.seed);
        ok = ok && r.passed();
        inv.out << "gradcheck " << nn::architecture_name(arch) << ": instances=" << c.gradcheck_instances
                << " max_rel_error=" << std::scientific << std::setprecision(3) << r.worst
                << " checked=" << r.checked << " skipped=" << r.skipped << ' ' << (r.passed() ? "PASS" : "FAIL")
                << '\n';
    }
    return ok;
}

void cmd_info(Invocation& inv) {
    const auto& c = inv.config;
    if (!c.checkpoint.empty()) {
        const Checkpoint ck = load_checkpoint(require_existing(c.checkpoint, "model.checkpoint"));
        std::size_t values = 0;
        for (const auto& e : ck.entries) values += e.values.size();
        inv.out << "checkpoint " << c.checkpoint.string() << "\n  model: " << ck.descriptor
                << "\n  precision: " << (ck.precision == Precision::f64 ? "f64" : "f32")
                << "\n  tensors: " << ck.entries.size() << "\n  values: " << values << '\n';
        return;
    }
    const fs::path data = require_existing(c.data, "data.path");
    DatasetReader reader(data);
    const auto& m = reader.manifest();
    reader.verify_payload();
    inv.out << "dataset " << data.string() << "\n  kind: " << kind_name(m.kind) << "\n  format: " << m.format_version
            << "\n  trials: " << m.trial_count() << " (" << m.count(Label::odor) << " odor, " << m.count(Label::blank)
            << " blank)\n  channels: " << m.channels << "\n  " << (m.kind == DatasetKind::raw ? "samples" : "bins")
            << ": " << m.samples << "\n  sample_rate_hz: " << m.sample_rate_hz;
    if (m.kind == DatasetKind::spectral) inv.out << "\n  bin_hz: " << m.bin_hz;
    inv.out << "\n  provenance: " << m.provenance << "\n  payload crc32: ok\n";
}

// ---- option wiring ----------------------------------------------------------------------------

struct Overrides {
    fs::path config_file;
    std::vector<std::pair<std::string, std::string>> values;
};

void keyed(CLI::App* sub, Overrides& o, const std::string& flag, const std::string& key, const std::string& help) {
    sub->add_option_function<std::string>(
           flag, [&o, key](const std::string& v) { o.values.emplace_back(key, v); }, help + " (" + key + ")")
        ->type_name("VALUE");
}

void common(CLI::App* sub, Overrides& o) {
    sub->add_option("--config", o.config_file, "Config file of `key = value` lines");
    sub->add_option_function<std::vector<std::string>>(
           "--set",
           [&o](const std::vector<std::string>& items) {
               for (const auto& item : items) {
                   const auto eq = item.find('=');
                   if (eq == std::string::npos) throw CLI::ValidationError("--set", "expected key=value, got " + item);
                   o.values.emplace_back(item.substr(0, eq), item.substr(eq + 1));
               }
           },
           "Override one config key (repeatable)")
        ->type_name("KEY=VALUE")
        ->allow_extra_args(false);
    keyed(sub, o, "--seed", "seed", "Master seed");
}

void training_flags(CLI::App* sub, Overrides& o) {
    keyed(sub, o, "--data", "data.path", "Spectral dataset");
    keyed(sub, o, "--out", "output.dir", "Output directory");
    keyed(sub, o, "--arch", "model.arch", "res or attention");
    keyed(sub, o, "--schedule", "train.schedule", "cosine or onecycle");
    keyed(sub, o, "--epochs", "train.max_epochs", "Epoch limit");
    keyed(sub, o, "--batch-size", "train.batch_size", "Mini-batch size");
    keyed(sub, o, "--lr", "train.lr", "Peak learning rate");
    keyed(sub, o, "--patience", "train.patience", "Early-stopping patience");
    keyed(sub, o, "--precision", "train.precision", "f32 or f64");
    keyed(sub, o, "--k", "cv.k", "Number of folds");
}

void inference_flags(CLI::App* sub, Overrides& o) {
    keyed(sub, o, "--checkpoint", "model.checkpoint", "Model checkpoint");
    keyed(sub, o, "--scaler", "model.scaler", "Scaler JSON (default: scaler.json beside the checkpoint)");
    keyed(sub, o, "--data", "data.path", "Spectral dataset");
    keyed(sub, o, "--out", "output.dir", "Output directory");
}

std::string error_kind(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return "config";
    if (dynamic_cast<const CorruptFileError*>(&e)) return "corrupt-file";
    if (dynamic_cast<const UnsupportedFormatError*>(&e)) return "unsupported-format";
    if (dynamic_cast<const train::TrainingDiverged*>(&e)) return "diverged";
    if (dynamic_cast<const NonFiniteError*>(&e)) return "non-finite";
    if (dynamic_cast<const Incomplete*>(&e)) return "incomplete";
    if (dynamic_cast<const NotFound*>(&e)) return "not-found";
    if (dynamic_cast<const InvalidArgument*>(&e)) return "invalid-argument";
    if (dynamic_cast<const fs::filesystem_error*>(&e)) return "io";
    return "internal";
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Odor detection from multichannel recordings", "odor"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("odor ") + ODOR_VERSION);
    Overrides o;
    bool arch_given = false;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic raw dataset");
    common(synth, o);
    keyed(synth, o, "--out", "output.dir", "Output directory");
    keyed(synth, o, "--n", "synth.n", "Number of trials");
    keyed(synth, o, "--snr", "synth.snr", "Burst amplitude over noise RMS");
    keyed(synth, o, "--balance", "synth.balance", "Odor fraction");
    keyed(synth, o, "--channels", "synth.channels", "Channels");
    keyed(synth, o, "--samples", "synth.samples", "Samples per channel");
    keyed(synth, o, "--rate", "synth.rate_hz", "Sample rate in Hz");
    keyed(synth, o, "--onset-offset", "synth.onset_offset", "Onset offset in samples");

    auto* import = app.add_subcommand("import", "Import external recordings listed in an index CSV");
    common(import, o);
    keyed(import, o, "--index", "import.index", "Index CSV");
    keyed(import, o, "--out", "output.dir", "Output directory");
    keyed(import, o, "--dtype", "import.dtype", "i16 or f32");
    keyed(import, o, "--layout", "import.layout", "interleaved or channel-major");
    keyed(import, o, "--scale-uv", "import.scale_uv", "Microvolts per stored unit");
    keyed(import, o, "--rate", "import.rate_hz", "Sample rate in Hz");
    keyed(import, o, "--channels", "import.channels", "Channels per file");

    auto* pre = app.add_subcommand("preprocess", "Filter, decimate and compute per-channel spectra");
    common(pre, o);
    keyed(pre, o, "--data", "data.path", "Raw dataset");
    keyed(pre, o, "--out", "output.dir", "Output directory");
    keyed(pre, o, "--low-hz", "preprocess.low_hz", "Band-pass lower edge");
    keyed(pre, o, "--high-hz", "preprocess.high_hz", "Band-pass upper edge");
    keyed(pre, o, "--order", "preprocess.order", "Butterworth order");
    keyed(pre, o, "--decimate", "preprocess.decimate", "Decimation factor");
    keyed(pre, o, "--window", "preprocess.window_samples", "Analysis window in input samples");
    keyed(pre, o, "--nperseg", "preprocess.nperseg", "Welch segment length");
    keyed(pre, o, "--overlap", "preprocess.overlap", "Welch overlap fraction");

    auto* train = app.add_subcommand("train", "Train one model on one cross-validation fold");
    common(train, o);
    training_flags(train, o);
    keyed(train, o, "--fold", "train.fold", "1-based fold to train");

    auto* cv = app.add_subcommand("cv", "Stratified k-fold cross-validation");
    common(cv, o);
    training_flags(cv, o);
    keyed(cv, o, "--jobs", "cv.jobs", "Folds trained concurrently");
    cv->add_flag_callback("--ensemble", [&o] { o.values.emplace_back("cv.ensemble", "true"); },
                          "Train both architectures and fuse them (cv.ensemble)");

    auto* evaluate = app.add_subcommand("evaluate", "Score a dataset with a saved checkpoint");
    common(evaluate, o);
    inference_flags(evaluate, o);

    auto* features = app.add_subcommand("export-features", "Write penultimate-layer features as CSV");
    common(features, o);
    inference_flags(features, o);

    auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient check of the full models");
    common(grad, o);
    grad->add_option_function<std::string>(
        "--arch",
        [&](const std::string& v) {
            o.values.emplace_back("model.arch", v);
            arch_given = true;
        },
        "res or attention (default: both)");
    keyed(grad, o, "--instances", "gradcheck.instances", "Random instances per model");

    auto* info = app.add_subcommand("info", "Describe a dataset or checkpoint");
    common(info, o);
    keyed(info, o, "--data", "data.path", "Dataset directory");
    keyed(info, o, "--checkpoint", "model.checkpoint", "Checkpoint file");

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << "odor " << ODOR_VERSION << '\n';
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: usage: " << one_line(e.what()) << "\n";
        const auto subs = app.get_subcommands();
        err << (subs.empty() ? app.help() : subs.front()->help());
        return kExitUsage;
    }

    CLI::App* chosen = app.get_subcommands().front();
    Invocation inv{RunConfig{}, RunRecord{}, out};
    inv.record.command = chosen->get_name();
    inv.record.argv.assign(args.begin(), args.end());
    bool writes_manifest = false;
    try {
        if (!o.config_file.empty()) apply_file(inv.config, o.config_file);
        for (const auto& [key, value] : o.values) inv.config.set(key, value);

        const std::string name = chosen->get_name();
        writes_manifest = name != "gradcheck" && name != "info" && !inv.config.out.empty();
        bool passed = true;
        if (name == "synth") cmd_synth(inv);
        else if (name == "import") cmd_import(inv);
        else if (name == "preprocess") cmd_preprocess(inv);
        else if (name == "train") cmd_train(inv);
        else if (name == "cv") cmd_cv(inv);
        else if (name == "evaluate") cmd_evaluate(inv);
        else if (name == "export-features") cmd_export_features(inv);
        else if (name == "gradcheck") passed = cmd_gradcheck(inv, arch_given);
        else cmd_info(inv);

        inv.record.complete = true;
        if (writes_manifest) write_run_manifest(resolve_output(inv.config.out), inv.config, inv.record);
        if (!passed) {
            err << "error: gradcheck: tolerance exceeded\n";
            return kExitError;
        }
        return kExitOk;
    } catch (const std::exception& e) {
        const std::string message = one_line(e.what());
        err << "error: " << error_kind(e) << ": " << message << '\n';
        if (writes_manifest && fs::exists(resolve_output(inv.config.out))) {
            inv.record.error = error_kind(e) + ": " + message;
            try {
                write_run_manifest(resolve_output(inv.config.out), inv.config, inv.record);
            } catch (const std::exception&) {
            }
        }
        return kExitError;
    }
}

}  // namespace odor::cli
