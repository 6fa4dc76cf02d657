#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace wn {

inline constexpr const char* kConfigSchema = "wn-config/1";
inline constexpr const char* kReportSchema = "wn-report/1";

/// Runs one CLI command. Writes the JSON report to out_path (plus a CSV plot
/// series next to it when the command produces one). Returns the process
/// exit code: 0 all checks pass, 1 a check failed, 2 config/runtime error.
/// Diagnostics go to stderr.
int run_command(const std::string& command, const std::string& config_path,
                const std::string& out_path, std::optional<uint64_t> seed_override);

const std::vector<std::string>& command_names();

}  // namespace wn
