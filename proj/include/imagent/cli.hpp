// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <imagent/types.hpp>

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace imagent::cli
{

inline constexpr int kExitOk = 0;
inline constexpr int kExitAborted = 1;
inline constexpr int kExitUsage = 2;

/// Settings after merging defaults, config file, environment and flags (later wins).
struct CliConfig
{
    std::string backend = "sim"; // "sim" or "http"
    std::string endpoint;
    std::string api_key;
    std::filesystem::path out_dir = "runs";
    RunConfig run;
    int parallel = 1;

    // Simulated world.
    double noise_rate = 0.0;
    int refine_gain = 1;
    bool sim_no_edit = false;
    bool sim_no_image_understanding = false;

    /// Applies one `key=value` setting. Throws std::invalid_argument for unknown keys or bad values.
    void set(const std::string& key, const std::string& value);

    /// Settings recorded in traces, sorted by key. Secrets and output locations are left out.
    [[nodiscard]] std::vector<std::pair<std::string, std::string>> effective() const;
};

/// `key = value` lines; `#` starts a comment; blank lines ignored. Throws std::runtime_error.
std::map<std::string, std::string> parse_config_file(const std::filesystem::path& file);

/// `$XDG_CONFIG_HOME/imagent/config`, else `$HOME/.config/imagent/config`.
std::optional<std::filesystem::path> default_config_path();

/// Entry point shared by the executable and the tests. Returns the process exit code.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace imagent::cli
