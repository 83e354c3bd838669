#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include <json.hpp>

#include "odor/cli/commands.hpp"
#include "odor/cli/config.hpp"
#include "odor/cli/manifest.hpp"
#include "odor/data/container.hpp"

using namespace odor;
using namespace odor::cli;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = 0;
    std::string out;
    std::string err;
};

Outcome invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "odor");
    std::ostringstream out, err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag)
        : path(fs::temp_directory_path() / ("odor_cli_" + tag + "_" + std::to_string(::getpid()))) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    return nlohmann::json::parse(in);
}

}  // namespace

TEST_CASE("config keys round-trip through text") {
    RunConfig c;
    c.set("seed", "17");
    c.set("synth.snr", "0.75");
    c.set("model.arch", "attention");
    c.set("train.schedule", "onecycle");
    c.set("cv.ensemble", "true");
    c.set("import.layout", "channel-major");
    c.set("output.dir", "runs/a");
    CHECK(c.get("seed") == "17");
    CHECK(c.get("model.arch") == "attention_cnn");
    CHECK(c.effective_cv().seed == 17);
    CHECK(c.effective_cv().architecture == nn::Architecture::attention_cnn);
    CHECK(c.effective_synth().seed == 17);

    TempDir tmp("roundtrip");
    {
        std::ofstream f(tmp / "run.conf");
        f << c.to_text();
    }
    RunConfig loaded;
    apply_file(loaded, tmp / "run.conf");
    CHECK(loaded.to_text() == c.to_text());
    for (const auto& key : RunConfig::keys()) CHECK(loaded.get(key) == c.get(key));
}

TEST_CASE("config errors name the offending key") {
    RunConfig c;
    auto field_of = [&](const std::string& key, const std::string& value) {
        try {
            c.set(key, value);
        } catch (const ConfigError& e) {
            return e.field;
        }
        return std::string("<accepted>");
    };
    CHECK(field_of("synth.bogus", "1") == "synth.bogus");
    CHECK(field_of("synth.n", "many") == "synth.n");
    CHECK(field_of("synth.n", "12x") == "synth.n");
    CHECK(field_of("model.arch", "lstm") == "model.arch");
    CHECK(field_of("cv.ensemble", "maybe") == "cv.ensemble");

    RunConfig bad;
    bad.set("preprocess.high_hz", "600");
    try {
        bad.validate();
        FAIL("validate accepted a band edge above Nyquist");
    } catch (const ConfigError& e) {
        CHECK(e.field == "preprocess.high_hz");
    }

    TempDir tmp("badfile");
    {
        std::ofstream f(tmp / "run.conf");
        f << "# comment\nseed = 3\nthis line has no equals sign\n";
    }
    RunConfig r;
    CHECK_THROWS_AS(apply_file(r, tmp / "run.conf"), ConfigError);
}

TEST_CASE("command-line flags override the config file") {
    TempDir tmp("precedence");
    {
        std::ofstream f(tmp / "run.conf");
        f << "synth.n = 10\nsynth.samples = 30000\nsynth.snr = 9\n";
    }
    const auto r = invoke({"synth", "--config", tmp / "run.conf", "--n", "6", "--set", "synth.samples=3000",
                           "--out", tmp / "raw"});
    REQUIRE(r.code == kExitOk);
    const DatasetManifest m = read_manifest(tmp / "raw");
    CHECK(m.trial_count() == 6);
    CHECK(m.samples == 3000);
    const auto manifest = read_json(fs::path(tmp / "raw") / kManifestName);
    CHECK(manifest["config"]["synth.snr"] == "9");
    CHECK(manifest["status"] == "complete");
}

TEST_CASE("exit codes and one-line errors") {
    CHECK(invoke({}).code == kExitUsage);
    CHECK(invoke({"frobnicate"}).code == kExitUsage);
    CHECK(invoke({"synth", "--no-such-flag"}).code == kExitUsage);
    CHECK(invoke({"--help"}).code == kExitOk);
    CHECK(invoke({"--version"}).out.starts_with("odor "));

    const auto missing = invoke({"evaluate", "--checkpoint", "/nonexistent/model.ckpt", "--data", "/nonexistent"});
    CHECK(missing.code == kExitError);
    CHECK(missing.err.starts_with("error: not-found: model.checkpoint"));
    CHECK(std::count(missing.err.begin(), missing.err.end(), '\n') == 1);

    const auto unknown = invoke({"synth", "--set", "synth.nope=1", "--out", "/tmp/unused"});
    CHECK(unknown.code == kExitError);
    CHECK(unknown.err == "error: config: synth.nope: unknown key\n");

    const auto no_out = invoke({"synth", "--n", "4"});
    CHECK(no_out.code == kExitError);
    CHECK(no_out.err.starts_with("error: config: output.dir"));
}

TEST_CASE("import reads both sample layouts and types") {
    TempDir tmp("import");
    const std::size_t channels = 3, samples = 600;
    auto value = [](std::size_t ch, std::size_t s) { return static_cast<int>(ch * 1000 + s) - 700; };
    {
        std::ofstream idx(tmp / "a.csv");
        idx << "trial_id,mouse_id,label,odorant,onset_offset_samples,file\n"
            << "t0,m1,odor,ipa,5,t0.bin\n";
        std::ofstream bin(tmp / "t0.bin", std::ios::binary);
        for (std::size_t s = 0; s < samples; ++s)
            for (std::size_t ch = 0; ch < channels; ++ch) {
                const auto v = static_cast<std::int16_t>(value(ch, s));
                bin.write(reinterpret_cast<const char*>(&v), 2);
            }
    }
    {
        std::ofstream idx(tmp / "b.csv");
        idx << "trial_id,mouse_id,label,odorant,onset_offset_samples,file\n"
            << "t0,m1,odor,ipa,5,t0f.bin\n";
        std::ofstream bin(tmp / "t0f.bin", std::ios::binary);
        for (std::size_t ch = 0; ch < channels; ++ch)
            for (std::size_t s = 0; s < samples; ++s) {
                const auto v = static_cast<float>(value(ch, s));
                bin.write(reinterpret_cast<const char*>(&v), 4);
            }
    }
    REQUIRE(invoke({"import", "--index", tmp / "a.csv", "--channels", "3", "--rate", "1000", "--scale-uv", "0.5",
                    "--out", tmp / "a"})
                .code == kExitOk);
    REQUIRE(invoke({"import", "--index", tmp / "b.csv", "--channels", "3", "--rate", "1000", "--dtype", "f32",
                    "--layout", "channel-major", "--scale-uv", "0.5", "--out", tmp / "b"})
                .code == kExitOk);
    for (const char* name : {"a", "b"}) {
        const auto trials = load_dataset(tmp / name);
        REQUIRE(trials.size() == 1);
        const auto& t = trials[0];
        CHECK(t.label == Label::odor);
        CHECK(t.onset_offset_samples == 5);
        CHECK(t.sample_rate_hz == 1000.0);
        REQUIRE(t.samples == samples);
        bool exact = true;
        for (std::size_t ch = 0; ch < channels; ++ch)
            for (std::size_t s = 0; s < samples; ++s) exact = exact && t.channel(ch)[s] == 0.5f * value(ch, s);
        CHECK(exact);
    }

    {
        std::ofstream bin(tmp / "t0.bin", std::ios::binary | std::ios::app);
        bin.put('x');
    }
    const auto r = invoke({"import", "--index", tmp / "a.csv", "--channels", "3", "--out", tmp / "c"});
    CHECK(r.code == kExitError);
    CHECK(r.err.starts_with("error: corrupt-file:"));
}

TEST_CASE("synth, preprocess, cv, train, evaluate and export wire together") {
    TempDir tmp("pipeline");
    REQUIRE(invoke({"synth", "--n", "24", "--snr", "3", "--samples", "30000", "--seed", "5", "--out", tmp / "raw"})
                .code == kExitOk);
    REQUIRE(invoke({"preprocess", "--data", tmp / "raw", "--window", "30000", "--out", tmp / "spec"}).code ==
            kExitOk);
    const DatasetManifest spec = read_manifest(tmp / "spec");
    CHECK(spec.kind == DatasetKind::spectral);
    CHECK(spec.channels == 32);
    CHECK(spec.samples == 129);

    const auto cv = invoke({"cv", "--data", tmp / "spec", "--out", tmp / "cv", "--k", "3", "--epochs", "2",
                            "--ensemble", "--seed", "9"});
    REQUIRE(cv.code == kExitOk);
    CHECK(cv.out.find("Ensemble") != std::string::npos);
    const fs::path cvdir = tmp / "cv";
    for (const char* f : {"table.txt", "report.json", "config.txt", "calibration.csv", "confidence_histogram.csv",
                          "fold1/res_cnn.ckpt", "fold3/ensemble_predictions.csv"})
        CHECK_MESSAGE(fs::exists(cvdir / f), f);
    const auto manifest = read_json(cvdir / kManifestName);
    CHECK(manifest["status"] == "complete");
    CHECK(manifest["seeds"]["master"] == 9);
    CHECK(manifest["seeds"].contains("fold3.attention_cnn.init"));
    for (const auto& a : manifest["artifacts"]) {
        const fs::path p = cvdir / a["path"].get<std::string>();
        CHECK(a["bytes"] == fs::file_size(p));
        CHECK(a["crc32"] == file_crc32(p));
    }
    RunConfig echoed;
    apply_file(echoed, cvdir / "config.txt");
    CHECK(echoed.cv.ensemble);
    CHECK(echoed.cv.k == 3);

    REQUIRE(invoke({"train", "--data", tmp / "spec", "--out", tmp / "tr", "--epochs", "2", "--fold", "2", "--k", "3"})
                .code == kExitOk);
    const auto metrics = read_json(fs::path(tmp / "tr") / "metrics.json");
    CHECK(metrics["fold"] == 2);
    CHECK(metrics["test"] == 8);

    const auto ev = invoke({"evaluate", "--checkpoint", tmp / "tr/model.ckpt", "--data", tmp / "spec", "--out",
                            tmp / "ev"});
    REQUIRE(ev.code == kExitOk);
    const auto evm = read_json(fs::path(tmp / "ev") / "metrics.json");
    CHECK(evm["trials"] == 24);
    CHECK(evm["metrics"]["confusion"]["tp"].get<int>() + evm["metrics"]["confusion"]["fn"].get<int>() == 12);

    REQUIRE(invoke({"export-features", "--checkpoint", tmp / "tr/model.ckpt", "--data", tmp / "spec", "--out",
                    tmp / "fe"})
                .code == kExitOk);
    std::ifstream features(fs::path(tmp / "fe") / "features.csv");
    std::string header;
    std::getline(features, header);
    CHECK(header.starts_with("trial_id,label,f0,"));

    const auto raw_cv = invoke({"cv", "--data", tmp / "raw", "--out", tmp / "bad"});
    CHECK(raw_cv.code == kExitError);
    CHECK(raw_cv.err.find("preprocess") != std::string::npos);
}
