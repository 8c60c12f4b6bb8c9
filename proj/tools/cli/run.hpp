#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

namespace msbp::cli {

enum ExitCode : int { kExitOk = 0, kExitRuntime = 1, kExitValidation = 2, kExitCheck = 3 };

struct RunOptions {
  std::string subcommand;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  std::optional<std::string> out_dir;  // used verbatim; otherwise a timestamped directory
  bool check = false;
};

const char* build_id() noexcept;

// Loads and validates the config, runs the experiment and writes
// config-echo.json, results.json and the requested CSVs. Returns an ExitCode.
int run_command(const RunOptions& opt, std::ostream& out, std::ostream& err);

// Prints the canonical echo of a config; exit 0 or 2.
int validate_command(const std::string& config_path, std::ostream& out, std::ostream& err);

// CSV with columns series,t,value,lo,hi built from a results.json document.
std::string emit_plotdata(const nlohmann::json& results);

}  // namespace msbp::cli
