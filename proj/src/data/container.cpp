#include "odor/data/container.hpp"

#include <bit>
#include <set>

#include <json.hpp>

#include "odor/core/checksum.hpp"
#include "odor/core/errors.hpp"

namespace odor {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifestName = "manifest";
constexpr const char* kPayloadName = "trials.bin";

DatasetKind parse_kind(const std::string& text) {
    if (text == "raw") return DatasetKind::raw;
    if (text == "spectral") return DatasetKind::spectral;
    throw UnsupportedFormatError("unknown dataset kind '" + text + "'");
}

std::span<const std::byte> as_bytes(std::span<const float> values) {
    return std::as_bytes(values);
}

json to_json(const DatasetManifest& m) {
    json trials = json::array();
    for (const auto& e : m.trials) {
        trials.push_back({{"trial_id", e.trial_id},
                          {"mouse_id", e.mouse_id},
                          {"label", std::string(label_name(e.label))},
                          {"odorant", e.odorant},
                          {"onset_offset_samples", e.onset_offset_samples},
                          {"offset", e.offset},
                          {"length", e.length},
                          {"crc32", e.crc32}});
    }
    return {{"format_version", m.format_version},
            {"kind", std::string(kind_name(m.kind))},
            {"trial_count", m.trials.size()},
            {"channels", m.channels},
            {"samples", m.samples},
            {"sample_rate_hz", m.sample_rate_hz},
            {"bin_hz", m.bin_hz},
            {"class_counts", {{"blank", m.class_counts[0]}, {"odor", m.class_counts[1]}}},
            {"provenance", m.provenance},
            {"payload_crc32", m.payload_crc32},
            {"trials", trials}};
}

DatasetManifest from_json(const json& j) {
    DatasetManifest m;
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != DatasetManifest::kFormatVersion)
        throw UnsupportedFormatError("dataset format version " + std::to_string(m.format_version) +
                                     " is not supported (expected " +
                                     std::to_string(DatasetManifest::kFormatVersion) + ")");
    m.kind = parse_kind(j.at("kind").get<std::string>());
    m.channels = j.at("channels").get<std::size_t>();
    m.samples = j.at("samples").get<std::size_t>();
    m.sample_rate_hz = j.at("sample_rate_hz").get<double>();
    m.bin_hz = j.at("bin_hz").get<double>();
    m.class_counts[0] = j.at("class_counts").at("blank").get<std::size_t>();
    m.class_counts[1] = j.at("class_counts").at("odor").get<std::size_t>();
    m.provenance = j.at("provenance").get<std::string>();
    m.payload_crc32 = j.at("payload_crc32").get<std::uint32_t>();
    for (const auto& t : j.at("trials")) {
        ManifestEntry e;
        e.trial_id = t.at("trial_id").get<std::string>();
        e.mouse_id = t.at("mouse_id").get<std::string>();
        e.label = parse_label(t.at("label").get<std::string>());
        e.odorant = t.at("odorant").get<std::string>();
        e.onset_offset_samples = t.at("onset_offset_samples").get<std::size_t>();
        e.offset = t.at("offset").get<std::uint64_t>();
        e.length = t.at("length").get<std::uint64_t>();
        e.crc32 = t.at("crc32").get<std::uint32_t>();
        m.trials.push_back(std::move(e));
    }
    if (j.at("trial_count").get<std::size_t>() != m.trials.size())
        throw CorruptFileError("manifest trial_count disagrees with its trial list");
    return m;
}

}  // namespace

std::string_view kind_name(DatasetKind kind) {
    return kind == DatasetKind::raw ? "raw" : "spectral";
}

void DatasetManifest::validate() const {
    if (trials.empty()) throw CorruptFileError("manifest lists no trials");
    if (class_counts[0] + class_counts[1] != trials.size())
        throw CorruptFileError("class counts do not sum to the trial count");
    std::array<std::size_t, 2> seen{};
    std::set<std::string> ids;
    const std::uint64_t expected_length = channels * samples;
    for (std::size_t i = 0; i < trials.size(); ++i) {
        const auto& e = trials[i];
        ++seen[static_cast<int>(e.label)];
        if (!ids.insert(e.trial_id).second) throw CorruptFileError("duplicate trial id " + e.trial_id);
        if (e.length != expected_length) throw CorruptFileError("trial " + e.trial_id + " has the wrong length");
        if (i > 0 && e.offset <= trials[i - 1].offset) throw CorruptFileError("trial offsets are not increasing");
        if (i > 0 && e.offset != trials[i - 1].offset + trials[i - 1].length * sizeof(float))
            throw CorruptFileError("trial offsets are not contiguous");
    }
    if (trials.front().offset != 0) throw CorruptFileError("first trial does not start at offset 0");
    if (seen != class_counts) throw CorruptFileError("class counts disagree with trial labels");
}

DatasetWriter::DatasetWriter(const fs::path& dir, DatasetKind kind, std::string provenance) : dir_(dir) {
    fs::create_directories(dir_);
    payload_.open(dir_ / kPayloadName, std::ios::binary | std::ios::trunc);
    if (!payload_) throw Error("cannot write " + (dir_ / kPayloadName).string());
    manifest_.kind = kind;
    manifest_.provenance = std::move(provenance);
}

DatasetWriter::~DatasetWriter() = default;

void DatasetWriter::append_payload(ManifestEntry entry, std::span<const float> values) {
    if (finished_) throw InvalidArgument("dataset writer already finished");
    const auto bytes = as_bytes(values);
    entry.offset = manifest_.trials.empty()
                       ? 0
                       : manifest_.trials.back().offset + manifest_.trials.back().length * sizeof(float);
    entry.length = values.size();
    entry.crc32 = crc32(bytes);
    manifest_.payload_crc32 = crc32(bytes, manifest_.payload_crc32);
    payload_.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!payload_) throw Error("write failed for " + (dir_ / kPayloadName).string());
    ++manifest_.class_counts[static_cast<int>(entry.label)];
    manifest_.trials.push_back(std::move(entry));
}

void DatasetWriter::append(const TrialRecord& trial) {
    if (manifest_.kind != DatasetKind::raw) throw InvalidArgument("spectral dataset cannot hold raw trials");
    trial.validate();
    if (manifest_.trials.empty()) {
        manifest_.channels = trial.channels;
        manifest_.samples = trial.samples;
        manifest_.sample_rate_hz = trial.sample_rate_hz;
    } else if (trial.channels != manifest_.channels || trial.samples != manifest_.samples ||
               trial.sample_rate_hz != manifest_.sample_rate_hz) {
        throw InvalidArgument("trial " + trial.trial_id + " does not match the dataset geometry");
    }
    append_payload({trial.trial_id, trial.mouse_id, trial.label, trial.odorant, trial.onset_offset_samples},
                   trial.data);
}

void DatasetWriter::append(const SpectralFeatures& spectrum) {
    if (manifest_.kind != DatasetKind::spectral) throw InvalidArgument("raw dataset cannot hold spectra");
    if (spectrum.values.size() != spectrum.channels * spectrum.bins || spectrum.values.empty())
        throw InvalidArgument("spectrum " + spectrum.trial_id + " has inconsistent shape");
    if (manifest_.trials.empty()) {
        manifest_.channels = spectrum.channels;
        manifest_.samples = spectrum.bins;
        manifest_.bin_hz = spectrum.bin_hz;
        manifest_.sample_rate_hz = spectrum.bin_hz * 2.0 * static_cast<double>(spectrum.bins - 1);
    } else if (spectrum.channels != manifest_.channels || spectrum.bins != manifest_.samples ||
               spectrum.bin_hz != manifest_.bin_hz) {
        throw InvalidArgument("spectrum " + spectrum.trial_id + " does not match the dataset geometry");
    }
    std::vector<float> values(spectrum.values.begin(), spectrum.values.end());
    append_payload({spectrum.trial_id, "", spectrum.label, "", 0}, values);
}

DatasetManifest DatasetWriter::finish() {
    if (finished_) throw InvalidArgument("dataset writer already finished");
    if (manifest_.trials.empty()) throw InvalidArgument("refusing to save an empty dataset");
    payload_.close();
    if (!payload_) throw Error("closing " + (dir_ / kPayloadName).string() + " failed");
    manifest_.validate();
    std::ofstream out(dir_ / kManifestName, std::ios::trunc);
    out << to_json(manifest_).dump(1) << '\n';
    if (!out) throw Error("cannot write " + (dir_ / kManifestName).string());
    finished_ = true;
    return manifest_;
}

DatasetManifest read_manifest(const fs::path& dir) {
    std::ifstream in(dir / kManifestName);
    if (!in) throw Error("no dataset manifest in " + dir.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw CorruptFileError(std::string("manifest is not valid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("format_version")) throw CorruptFileError("manifest lacks a format version");
    DatasetManifest m;
    try {
        m = from_json(j);
    } catch (const json::exception& e) {
        throw CorruptFileError(std::string("manifest field error: ") + e.what());
    }
    m.validate();
    return m;
}

DatasetReader::DatasetReader(const fs::path& dir) : dir_(dir), manifest_(read_manifest(dir)) {
    const auto path = dir_ / kPayloadName;
    if (!fs::exists(path)) throw CorruptFileError("missing payload " + path.string());
    const auto& last = manifest_.trials.back();
    const std::uint64_t expected = last.offset + last.length * sizeof(float);
    const auto actual = fs::file_size(path);
    if (actual != expected)
        throw CorruptFileError("payload is " + std::to_string(actual) + " bytes, manifest expects " +
                               std::to_string(expected));
    payload_.open(path, std::ios::binary);
    if (!payload_) throw Error("cannot open " + path.string());
}

std::vector<float> DatasetReader::read_values(std::size_t index) {
    if (index >= manifest_.trials.size()) throw InvalidArgument("trial index out of range");
    const auto& e = manifest_.trials[index];
    std::vector<float> values(e.length);
    payload_.seekg(static_cast<std::streamoff>(e.offset));
    payload_.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(e.length * sizeof(float)));
    if (!payload_) throw CorruptFileError("short read for trial " + e.trial_id);
    if (crc32(as_bytes(values)) != e.crc32) throw CorruptFileError("checksum mismatch for trial " + e.trial_id);
    return values;
}

TrialRecord DatasetReader::raw(std::size_t index) {
    if (manifest_.kind != DatasetKind::raw) throw InvalidArgument("dataset holds spectra, not raw trials");
    const auto& e = manifest_.trials[index];
    TrialRecord t;
    t.data = read_values(index);
    t.trial_id = e.trial_id;
    t.mouse_id = e.mouse_id;
    t.label = e.label;
    t.odorant = e.odorant;
    t.onset_offset_samples = e.onset_offset_samples;
    t.channels = manifest_.channels;
    t.samples = manifest_.samples;
    t.sample_rate_hz = manifest_.sample_rate_hz;
    return t;
}

SpectralFeatures DatasetReader::spectral(std::size_t index) {
    if (manifest_.kind != DatasetKind::spectral) throw InvalidArgument("dataset holds raw trials, not spectra");
    const auto values = read_values(index);
    const auto& e = manifest_.trials[index];
    SpectralFeatures s;
    s.trial_id = e.trial_id;
    s.label = e.label;
    s.channels = manifest_.channels;
    s.bins = manifest_.samples;
    s.bin_hz = manifest_.bin_hz;
    s.values.assign(values.begin(), values.end());
    return s;
}

void DatasetReader::verify_payload() {
    std::uint32_t running = 0;
    for (std::size_t i = 0; i < size(); ++i) running = crc32(as_bytes(read_values(i)), running);
    if (running != manifest_.payload_crc32) throw CorruptFileError("payload checksum mismatch");
}

DatasetManifest save_dataset(std::span<const TrialRecord> trials, const fs::path& dir, const std::string& provenance) {
    if (trials.empty()) throw InvalidArgument("refusing to save an empty dataset");
    DatasetWriter writer(dir, DatasetKind::raw, provenance);
    for (const auto& t : trials) writer.append(t);
    return writer.finish();
}

std::vector<TrialRecord> load_dataset(const fs::path& dir) {
    DatasetReader reader(dir);
    reader.verify_payload();
    std::vector<TrialRecord> out;
    out.reserve(reader.size());
    for (std::size_t i = 0; i < reader.size(); ++i) out.push_back(reader.raw(i));
    return out;
}

DatasetManifest save_features(std::span<const SpectralFeatures> spectra, const fs::path& dir,
                              const std::string& provenance) {
    if (spectra.empty()) throw InvalidArgument("refusing to save an empty dataset");
    DatasetWriter writer(dir, DatasetKind::spectral, provenance);
    for (const auto& s : spectra) writer.append(s);
    return writer.finish();
}

std::vector<SpectralFeatures> load_features(const fs::path& dir) {
    DatasetReader reader(dir);
    reader.verify_payload();
    std::vector<SpectralFeatures> out;
    out.reserve(reader.size());
    for (std::size_t i = 0; i < reader.size(); ++i) out.push_back(reader.spectral(i));
    return out;
}

}  // namespace odor
