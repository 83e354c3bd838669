#include "odor/cli/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>

namespace odor::cli {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

template <typename N>
N parse_number(std::string_view key, std::string_view text) {
    N value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
        throw ConfigError(std::string(key), "not a valid number: '" + std::string(text) + "'");
    return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    throw ConfigError(std::string(key), "expected true/false, got '" + std::string(text) + "'");
}

std::string show(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string show(std::uint64_t v) {
    return std::to_string(v);
}

std::string show(bool v) {
    return v ? "true" : "false";
}

struct Field {
    std::function<void(RunConfig&, std::string_view key, std::string_view value)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define ODOR_NUMBER(expr)                                                                                  \
    Field {                                                                                                \
        [](RunConfig& c, std::string_view k, std::string_view v) {                                         \
            c.expr = parse_number<std::remove_reference_t<decltype(c.expr)>>(k, v);                        \
        },                                                                                                 \
            [](const RunConfig& c) {                                                                       \
                using V = std::remove_cvref_t<decltype(c.expr)>;                                           \
                if constexpr (std::is_floating_point_v<V>) return show(static_cast<double>(c.expr));       \
                else return show(static_cast<std::uint64_t>(c.expr));                                      \
            }                                                                                              \
    }

#define ODOR_PATH(expr)                                                                       \
    Field {                                                                                   \
        [](RunConfig& c, std::string_view, std::string_view v) { c.expr = std::string(v); }, \
            [](const RunConfig& c) { return c.expr.string(); }                                \
    }

#define ODOR_BOOL(expr)                                                                          \
    Field {                                                                                      \
        [](RunConfig& c, std::string_view k, std::string_view v) { c.expr = parse_bool(k, v); }, \
            [](const RunConfig& c) { return show(c.expr); }                                      \
    }

const std::map<std::string, Field, std::less<>>& fields() {
    static const std::map<std::string, Field, std::less<>> table = {
        {"seed", ODOR_NUMBER(seed)},
        {"data.path", ODOR_PATH(data)},
        {"output.dir", ODOR_PATH(out)},
        {"model.checkpoint", ODOR_PATH(checkpoint)},
        {"model.scaler", ODOR_PATH(scaler)},
        {"model.arch",
         {[](RunConfig& c, std::string_view k, std::string_view v) {
              try {
                  c.architecture = nn::parse_architecture(v);
              } catch (const InvalidArgument& e) {
                  throw ConfigError(std::string(k), e.what());
              }
          },
          [](const RunConfig& c) { return std::string(nn::architecture_name(c.architecture)); }}},

        {"synth.n", ODOR_NUMBER(synth.n_trials)},
        {"synth.snr", ODOR_NUMBER(synth.snr)},
        {"synth.balance", ODOR_NUMBER(synth.class_balance)},
        {"synth.channels", ODOR_NUMBER(synth.channels)},
        {"synth.samples", ODOR_NUMBER(synth.samples)},
        {"synth.rate_hz", ODOR_NUMBER(synth.sample_rate_hz)},
        {"synth.onset_offset", ODOR_NUMBER(synth.onset_offset_samples)},
        {"synth.noise_rms_uv", ODOR_NUMBER(synth.noise_rms_uv)},
        {"synth.burst_seconds", ODOR_NUMBER(synth.burst_seconds)},
        {"synth.trial_gain_sigma", ODOR_NUMBER(synth.trial_gain_sigma)},
        {"synth.mice", ODOR_NUMBER(synth.mice)},

        {"import.index", ODOR_PATH(import.index)},
        {"import.dtype",
         {[](RunConfig& c, std::string_view k, std::string_view v) {
              if (v == "f32") c.import.dtype = SampleType::f32;
              else if (v == "i16") c.import.dtype = SampleType::i16;
              else throw ConfigError(std::string(k), "expected f32 or i16");
          },
          [](const RunConfig& c) { return std::string(c.import.dtype == SampleType::f32 ? "f32" : "i16"); }}},
        {"import.layout",
         {[](RunConfig& c, std::string_view k, std::string_view v) {
              if (v == "interleaved") c.import.layout = SampleLayout::interleaved;
              else if (v == "channel_major" || v == "channel-major") c.import.layout = SampleLayout::channel_major;
              else throw ConfigError(std::string(k), "expected interleaved or channel_major");
          },
          [](const RunConfig& c) {
              return std::string(c.import.layout == SampleLayout::interleaved ? "interleaved" : "channel_major");
          }}},
        {"import.scale_uv", ODOR_NUMBER(import.scale_uv)},
        {"import.rate_hz", ODOR_NUMBER(import.rate_hz)},
        {"import.channels", ODOR_NUMBER(import.channels)},

        {"preprocess.channels", ODOR_NUMBER(preprocess.channels)},
        {"preprocess.order", ODOR_NUMBER(preprocess.order)},
        {"preprocess.low_hz", ODOR_NUMBER(preprocess.low_hz)},
        {"preprocess.high_hz", ODOR_NUMBER(preprocess.high_hz)},
        {"preprocess.input_rate_hz", ODOR_NUMBER(preprocess.input_rate_hz)},
        {"preprocess.decimate", ODOR_NUMBER(preprocess.decimate)},
        {"preprocess.window_samples", ODOR_NUMBER(preprocess.window_samples)},
        {"preprocess.nperseg", ODOR_NUMBER(preprocess.segment_length)},
        {"preprocess.overlap", ODOR_NUMBER(preprocess.overlap)},

        {"train.batch_size", ODOR_NUMBER(cv.train.batch_size)},
        {"train.max_epochs", ODOR_NUMBER(cv.train.max_epochs)},
        {"train.schedule",
         {[](RunConfig& c, std::string_view k, std::string_view v) {
              try {
                  c.cv.train.schedule = train::parse_schedule(v);
              } catch (const InvalidArgument& e) {
                  throw ConfigError(std::string(k), e.what());
              }
          },
          [](const RunConfig& c) { return std::string(train::schedule_name(c.cv.train.schedule)); }}},
        {"train.lr", ODOR_NUMBER(cv.train.optimizer.lr)},
        {"train.weight_decay", ODOR_NUMBER(cv.train.optimizer.weight_decay)},
        {"train.patience", ODOR_NUMBER(cv.train.early_stop.patience)},
        {"train.min_delta", ODOR_NUMBER(cv.train.early_stop.min_delta)},
        {"train.precision",
         {[](RunConfig& c, std::string_view k, std::string_view v) {
              if (v == "f32") c.cv.precision = Precision::f32;
              else if (v == "f64") c.cv.precision = Precision::f64;
              else throw ConfigError(std::string(k), "expected f32 or f64");
          },
          [](const RunConfig& c) { return std::string(c.cv.precision == Precision::f64 ? "f64" : "f32"); }}},
        {"train.fold", ODOR_NUMBER(fold)},

        {"cv.k", ODOR_NUMBER(cv.k)},
        {"cv.val_fraction", ODOR_NUMBER(cv.val_fraction)},
        {"cv.ensemble", ODOR_BOOL(cv.ensemble)},
        {"cv.ensemble_schedule",
         {[](RunConfig& c, std::string_view k, std::string_view v) {
              try {
                  c.cv.ensemble_schedule = train::parse_schedule(v);
              } catch (const InvalidArgument& e) {
                  throw ConfigError(std::string(k), e.what());
              }
          },
          [](const RunConfig& c) { return std::string(train::schedule_name(c.cv.ensemble_schedule)); }}},
        {"cv.jobs", ODOR_NUMBER(cv.jobs)},

        {"gradcheck.instances", ODOR_NUMBER(gradcheck_instances)},
    };
    return table;
}

void require(bool ok, const char* field, const std::string& message) {
    if (!ok) throw ConfigError(field, message);
}

}  // namespace

void RunConfig::set(std::string_view key, std::string_view value) {
    const auto it = fields().find(key);
    if (it == fields().end()) throw ConfigError(std::string(key), "unknown key");
    it->second.set(*this, key, trim(value));
}

std::string RunConfig::get(std::string_view key) const {
    const auto it = fields().find(key);
    if (it == fields().end()) throw ConfigError(std::string(key), "unknown key");
    return it->second.get(*this);
}

const std::vector<std::string>& RunConfig::keys() {
    static const std::vector<std::string> k = [] {
        std::vector<std::string> out;
        for (const auto& [name, f] : fields()) out.push_back(name);
        return out;
    }();
    return k;
}

void RunConfig::validate() const {
    try {
        effective_synth().validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError("synth", e.what());
    }
    const auto& p = preprocess;
    require(p.channels > 0, "preprocess.channels", "must be positive");
    require(p.order >= 1 && p.order <= 12, "preprocess.order", "must lie in [1, 12]");
    require(p.input_rate_hz > 0.0, "preprocess.input_rate_hz", "must be positive");
    require(p.decimate >= 1, "preprocess.decimate", "must be >= 1");
    require(p.low_hz > 0.0 && p.low_hz < p.high_hz, "preprocess.low_hz", "must satisfy 0 < low < high");
    require(p.high_hz < p.output_rate_hz() / 2.0, "preprocess.high_hz", "must be below the decimated Nyquist rate");
    require(p.segment_length >= 2, "preprocess.nperseg", "must be >= 2");
    require(p.overlap >= 0.0 && p.overlap < 1.0, "preprocess.overlap", "must lie in [0, 1)");
    require(p.window_samples / p.decimate >= p.segment_length, "preprocess.window_samples",
            "decimated window is shorter than one Welch segment");

    const auto& t = cv.train;
    require(t.batch_size >= 2, "train.batch_size", "must be >= 2 (batch statistics)");
    require(t.max_epochs >= 1, "train.max_epochs", "must be >= 1");
    require(t.optimizer.lr > 0.0, "train.lr", "must be positive");
    require(t.optimizer.weight_decay >= 0.0, "train.weight_decay", "must be >= 0");
    require(t.early_stop.patience >= 1, "train.patience", "must be >= 1");
    require(t.early_stop.min_delta >= 0.0, "train.min_delta", "must be >= 0");
    require(cv.k >= 2, "cv.k", "must be >= 2");
    require(cv.val_fraction > 0.0 && cv.val_fraction < 1.0, "cv.val_fraction", "must lie in (0, 1)");
    require(cv.jobs >= 1, "cv.jobs", "must be >= 1");
    require(fold >= 1 && fold <= cv.k, "train.fold", "must lie in [1, cv.k]");
    require(import.channels > 0, "import.channels", "must be positive");
    require(import.rate_hz > 0.0, "import.rate_hz", "must be positive");
    require(import.scale_uv > 0.0, "import.scale_uv", "must be positive");
    require(gradcheck_instances >= 1, "gradcheck.instances", "must be >= 1");
}

std::string RunConfig::to_text() const {
    std::string out;
    for (const auto& [name, f] : fields()) out += name + " = " + f.get(*this) + "\n";
    return out;
}

train::CvConfig RunConfig::effective_cv() const {
    train::CvConfig c = cv;
    c.seed = seed;
    c.architecture = architecture;
    return c;
}

SynthConfig RunConfig::effective_synth() const {
    SynthConfig s = synth;
    s.seed = seed;
    return s;
}

void apply_file(RunConfig& config, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot read " + path.string());
    std::string line;
    for (std::size_t number = 1; std::getline(in, line); ++number) {
        const auto hash = line.find('#');
        const std::string body = trim(std::string_view(line).substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(number), "expected 'key = value' in " + path.string());
        config.set(trim(std::string_view(body).substr(0, eq)), std::string_view(body).substr(eq + 1));
    }
}

std::filesystem::path resolve_output(const std::filesystem::path& path) {
    const char* root = std::getenv("ODOR_OUTPUT_ROOT");
    if (!root || !*root || path.empty() || path.is_absolute()) return path;
    return std::filesystem::path(root) / path;
}

}  // namespace odor::cli
