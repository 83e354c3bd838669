#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "odor/data/records.hpp"

namespace odor {

/// On-disk dataset: a directory holding `manifest` (JSON) and `trials.bin`
/// (little-endian float32, channel-major per trial). A dataset stores either
/// raw recordings or preprocessed spectra, never both.
enum class DatasetKind { raw, spectral };

std::string_view kind_name(DatasetKind kind);

struct ManifestEntry {
    std::string trial_id;
    std::string mouse_id;
    Label label = Label::blank;
    std::string odorant;
    std::size_t onset_offset_samples = 0;
    std::uint64_t offset = 0;  // byte offset into trials.bin
    std::uint64_t length = 0;  // float32 count
    std::uint32_t crc32 = 0;
};

struct DatasetManifest {
    static constexpr int kFormatVersion = 1;

    int format_version = kFormatVersion;
    DatasetKind kind = DatasetKind::raw;
    std::size_t channels = 0;
    std::size_t samples = 0;  // per channel (raw) or frequency bins (spectral)
    double sample_rate_hz = 0.0;
    double bin_hz = 0.0;      // spectral only
    std::array<std::size_t, 2> class_counts{};  // indexed by Label
    std::string provenance;
    std::vector<ManifestEntry> trials;
    std::uint32_t payload_crc32 = 0;

    std::size_t trial_count() const { return trials.size(); }
    std::size_t count(Label label) const { return class_counts[static_cast<int>(label)]; }
    /// Throws CorruptFileError if class counts or offsets are inconsistent.
    void validate() const;
};

/// Appends trials one at a time so large raw datasets never sit in memory.
class DatasetWriter {
public:
    DatasetWriter(const std::filesystem::path& dir, DatasetKind kind, std::string provenance);
    ~DatasetWriter();
    DatasetWriter(const DatasetWriter&) = delete;
    DatasetWriter& operator=(const DatasetWriter&) = delete;

    void append(const TrialRecord& trial);
    void append(const SpectralFeatures& spectrum);
    /// Writes the manifest; the dataset is not loadable before this.
    DatasetManifest finish();

private:
    void append_payload(ManifestEntry entry, std::span<const float> values);

    std::filesystem::path dir_;
    std::ofstream payload_;
    DatasetManifest manifest_;
    bool finished_ = false;
};

/// Random access to a saved dataset; per-trial CRCs are checked on read.
class DatasetReader {
public:
    explicit DatasetReader(const std::filesystem::path& dir);

    const DatasetManifest& manifest() const { return manifest_; }
    std::size_t size() const { return manifest_.trials.size(); }

    TrialRecord raw(std::size_t index);
    SpectralFeatures spectral(std::size_t index);
    /// Re-reads the whole payload and compares the aggregate checksum.
    void verify_payload();

private:
    std::vector<float> read_values(std::size_t index);

    std::filesystem::path dir_;
    std::ifstream payload_;
    DatasetManifest manifest_;
};

DatasetManifest read_manifest(const std::filesystem::path& dir);

DatasetManifest save_dataset(std::span<const TrialRecord> trials, const std::filesystem::path& dir,
                             const std::string& provenance = "");
std::vector<TrialRecord> load_dataset(const std::filesystem::path& dir);

DatasetManifest save_features(std::span<const SpectralFeatures> spectra, const std::filesystem::path& dir,
                              const std::string& provenance = "");
std::vector<SpectralFeatures> load_features(const std::filesystem::path& dir);

}  // namespace odor
