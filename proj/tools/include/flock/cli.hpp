#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

namespace flock::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kIoError = 3,
  kSimulationAbort = 4,
};

struct Options {
  std::optional<std::filesystem::path> config;  // defaults when absent
  std::filesystem::path out = ".";
  std::uint64_t seed = 42;
  std::optional<std::filesystem::path> grid;
  bool quiet = false;
  std::vector<double> figure2_l_v;  // one curve per value; config l_v when empty
};

// Each command prints progress to `log` unless quiet and diagnostics to `err`.
int cmd_run(const Options& opts, std::ostream& log, std::ostream& err);
int cmd_sweep(const Options& opts, std::ostream& log, std::ostream& err);
int cmd_figure2(const Options& opts, std::ostream& log, std::ostream& err);

/// Argument parsing and dispatch for the flock-sim executable.
int run_cli(int argc, const char* const* argv, std::ostream& log, std::ostream& err);

}  // namespace flock::cli
