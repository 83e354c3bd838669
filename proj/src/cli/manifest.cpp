#include "odor/cli/manifest.hpp"

#include <ctime>
#include <fstream>

#include <json.hpp>

#include "odor/core/checkpoint.hpp"
#include "odor/core/checksum.hpp"
#include "odor/data/container.hpp"

namespace odor::cli {

namespace fs = std::filesystem;

std::uint32_t file_crc32(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot read " + path.string());
    std::vector<char> buffer(1 << 20);
    std::uint32_t crc = 0;
    while (in) {
        in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
        const auto got = static_cast<std::size_t>(in.gcount());
        if (got) crc = crc32(std::as_bytes(std::span(buffer.data(), got)), crc);
    }
    return crc;
}

namespace {

std::string utc(std::chrono::system_clock::time_point t) {
    const std::time_t tt = std::chrono::system_clock::to_time_t(t);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

void write_run_manifest(const fs::path& dir, const RunConfig& config, const RunRecord& record) {
    fs::create_directories(dir);
    {
        std::ofstream echo(dir / "config.txt");
        if (!echo) throw InvalidArgument("cannot write " + (dir / "config.txt").string());
        echo << "# " << record.command << " run configuration\n" << config.to_text();
    }
    nlohmann::json j;
    j["command"] = record.command;
    j["argv"] = record.argv;
    j["status"] = record.complete ? "complete" : "incomplete";
    if (!record.error.empty()) j["error"] = record.error;
    j["started_utc"] = utc(record.started);
    j["wall_seconds"] = std::chrono::duration<double>(std::chrono::system_clock::now() - record.started).count();
    for (const auto& [name, seed] : record.seeds) j["seeds"][name] = seed;
    for (const auto& key : RunConfig::keys()) j["config"][key] = config.get(key);
    j["versions"] = {{"odor", ODOR_VERSION},
                     {"dataset_format", DatasetManifest::kFormatVersion},
                     {"checkpoint_format", kCheckpointVersion},
                     {"compiler", __VERSION__}};
    j["artifacts"] = nlohmann::json::array();
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().filename() != kManifestName) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files)
        j["artifacts"].push_back({{"path", fs::relative(f, dir).generic_string()},
                                  {"bytes", fs::file_size(f)},
                                  {"crc32", file_crc32(f)}});
    std::ofstream out(dir / kManifestName);
    if (!out) throw InvalidArgument("cannot write " + (dir / kManifestName).string());
    out << j.dump(2) << '\n';
}

}  // namespace odor::cli
