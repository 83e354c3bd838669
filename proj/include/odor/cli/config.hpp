#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "odor/core/errors.hpp"
#include "odor/data/synth.hpp"
#include "odor/dsp/preprocess.hpp"
#include "odor/nn/models.hpp"
#include "odor/train/cv.hpp"

namespace odor::cli {

/// Invalid configuration; `field` is the dotted key at fault.
struct ConfigError : InvalidArgument {
    ConfigError(std::string field, const std::string& message)
        : InvalidArgument(field + ": " + message), field(std::move(field)) {}
    std::string field;
};

enum class SampleType { f32, i16 };
enum class SampleLayout { channel_major, interleaved };

/// External-recording import contract: an index CSV with header
/// trial_id,mouse_id,label,odorant,onset_offset_samples,file and one binary
/// file per trial, path relative to the index.
struct ImportConfig {
    std::filesystem::path index;
    SampleType dtype = SampleType::i16;
    SampleLayout layout = SampleLayout::interleaved;
    double scale_uv = 1.0;  // microvolts per stored unit
    double rate_hz = 30000.0;
    std::size_t channels = 32;
};

struct RunConfig {
    std::uint64_t seed = 0;
    std::filesystem::path data;
    std::filesystem::path out;
    std::filesystem::path checkpoint;
    std::filesystem::path scaler;  // empty: scaler.json next to the checkpoint
    SynthConfig synth;
    ImportConfig import;
    dsp::PreprocessConfig preprocess;
    nn::Architecture architecture = nn::Architecture::res_cnn;
    train::CvConfig cv;   // cv.train holds the training settings
    std::size_t fold = 1;  // 1-based fold trained by `train`
    std::size_t gradcheck_instances = 100;

    /// Assigns one dotted key. Throws ConfigError naming the key.
    void set(std::string_view key, std::string_view value);
    std::string get(std::string_view key) const;
    static const std::vector<std::string>& keys();

    /// Cross-field checks; throws ConfigError.
    void validate() const;

    /// `key = value` lines for every key, loadable by apply_file.
    std::string to_text() const;

    /// Derived seeds written alongside results.
    train::CvConfig effective_cv() const;
    SynthConfig effective_synth() const;
};

/// Reads `key = value` lines; `#` starts a comment. Unknown keys and
/// malformed lines raise ConfigError ("line N" when no key applies).
void apply_file(RunConfig& config, const std::filesystem::path& path);

/// A relative output path is placed under $ODOR_OUTPUT_ROOT when it is set.
std::filesystem::path resolve_output(const std::filesystem::path& path);

}  // namespace odor::cli
