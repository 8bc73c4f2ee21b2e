#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

namespace fdist {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;

struct RunRequest {
    nlohmann::json config;
    std::filesystem::path out_dir;
    std::optional<std::uint64_t> seed;  // overrides config "seed"
    int threads = 1;
    std::string config_path;            // echoed in the manifest only
    std::string load_error;             // set when the config could not be read
};

/// Executes one configured command and writes manifest.json, result.json and
/// the command's CSV series into out_dir. Returns the process exit status.
int run(const RunRequest& request);

/// Reads a JSON config file; ConfigError when unreadable or malformed.
nlohmann::json load_config(const std::filesystem::path& path);

/// The published JSON schema of result.json.
const char* result_schema();

/// Version string of the library.
const char* version();

} // namespace fdist
