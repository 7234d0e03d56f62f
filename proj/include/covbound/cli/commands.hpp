#pragma once

// Subcommand implementations behind the `covbound` executable. Each command
// takes the parsed config, writes its files under the resolved output
// directory and returns the JSON document printed on stdout.

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "covbound/cli/config.hpp"

namespace covbound::cli {

inline constexpr const char* kOutputDirEnv = "COVBOUND_OUTPUT_DIR";

struct RunContext {
  std::string config_dir;  ///< base for relative paths inside the config
  std::string out_dir;     ///< from --out; empty defers to config, env, then "."
  unsigned workers = 1;
};

struct CommandOutput {
  Json summary;
  std::vector<std::string> files;
};

/// Output directory precedence: --out, config output.dir, $COVBOUND_OUTPUT_DIR, ".".
std::string resolve_output_dir(const std::string& flag, const std::string& from_config);

CommandOutput cmd_simulate(const Json& config, const RunContext& ctx);
CommandOutput cmd_verify(const Json& config, const RunContext& ctx);
CommandOutput cmd_calibrate(const Json& config, const RunContext& ctx);

struct ReportArgs {
  std::vector<std::string> replicate_files;
  std::string prefix = "report";
  bool svg = false;
};
CommandOutput cmd_report(const ReportArgs& args, const RunContext& ctx);

struct BoundArgs {
  std::string theorem;
  std::optional<double> constant;
  std::string constants_file;
  std::map<std::string, double> inputs;
  std::string data_file;
  std::string geometry = "euclidean";
};
/// Handles the closed-form theorems plus the pseudo-theorems `fixed_point`
/// (inputs a, b) and `confidence` (data file and t).
Json cmd_bound(const BoundArgs& args);

/// Full command-line entry point. Returns the process exit code:
/// 0 success, 2 configuration error, 3 numerical error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace covbound::cli
