#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "nvspin/config.hpp"
#include "nvspin/trace.hpp"

namespace nvspin::cli {

enum ExitCode : int { kOk = 0, kComputationError = 1, kInputError = 2 };

// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

const char* version();

// Subcommands. Each writes its files into cfg.output.dir and returns the
// JSON document it wrote (or would write) as the primary record.
nlohmann::json cmd_spectrum(const config::RunConfig& cfg);
nlohmann::json cmd_trace(const config::RunConfig& cfg);
nlohmann::json cmd_fit(const config::RunConfig& cfg, const std::string& trace_file);
nlohmann::json cmd_sweep(const config::RunConfig& cfg);
nlohmann::json cmd_sensitivity(const config::RunConfig& cfg);

// Reads a duration_us,signal CSV; errors name the offending line.
TraceSeries read_trace_csv(const std::string& path);
TraceSeries parse_trace_csv(const std::string& text, const std::string& source = "<input>");

// Shortest round-trip decimal representation, dot separator.
std::string format_number(double v);

}  // namespace nvspin::cli
