#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "odor/cli/config.hpp"

namespace odor::cli {

inline constexpr const char* kManifestName = "run_manifest.json";

struct RunRecord {
    std::string command;
    std::vector<std::string> argv;
    std::chrono::system_clock::time_point started = std::chrono::system_clock::now();
    bool complete = false;
    std::string error;
    std::map<std::string, std::uint64_t> seeds;
};

/// CRC-32 of a whole file, streamed.
std::uint32_t file_crc32(const std::filesystem::path& path);

/// Writes run_manifest.json into dir: the record, the full config echo, module
/// format versions, wall-clock time since record.started, and size plus
/// CRC-32 of every other regular file under dir. Also writes config.txt.
void write_run_manifest(const std::filesystem::path& dir, const RunConfig& config, const RunRecord& record);

}  // namespace odor::cli
