#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "factmatch/timeutil.hpp"

namespace factmatch::app {

struct FileDigest {
    std::string path;
    std::string sha256;
    std::uintmax_t bytes = 0;

    friend bool operator==(const FileDigest&, const FileDigest&) = default;
};

std::string sha256_hex(std::string_view data);
/// Throws MissingFileError.
FileDigest digest_file(const std::filesystem::path& path);

/// "YYYYMMDDTHHMMSSZ-xxxxxxxx"; the suffix is random and a process-wide
/// counter, so ids never repeat within or across invocations.
std::string new_run_id(Timestamp now);

struct RunManifest {
    std::string run_id;
    std::string command;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    std::vector<FileDigest> inputs;
    std::vector<FileDigest> outputs;
    nlohmann::ordered_json counts = nlohmann::ordered_json::object();
    Timestamp started_at{};
    Timestamp finished_at{};

    void add_input(const std::filesystem::path& path);
    void add_output(const std::filesystem::path& path);

    nlohmann::ordered_json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);
    void write(const std::filesystem::path& path) const;
    static RunManifest read(const std::filesystem::path& path);

    /// Inputs whose current digest differs from the recorded one.
    std::vector<std::string> changed_inputs() const;
};

}  // namespace factmatch::app
