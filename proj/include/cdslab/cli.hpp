#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cdslab/config.hpp"

namespace cdslab {

inline const std::vector<std::string> kSubcommands = {"sample",           "distill",      "train-denoiser",
                                                      "equivalence-check", "theorem-scan", "variance-compare",
                                                      "ablate"};

/// Command-line values that override the config file.
struct CliOverrides {
    std::optional<std::string> mode;                  // sample: "sde" | "ode"
    std::optional<std::string> loss;                  // distill: "sds" | "cds"
    std::optional<std::filesystem::path> out_dir;
};

/// Runs one subcommand and writes its outputs plus manifest.json under the
/// output directory. Errors propagate as cdslab::Error.
void dispatch(const std::string& subcommand, const RunConfig& config, const std::filesystem::path& config_path,
              const CliOverrides& overrides);

/// Full entry point: parses argv, dispatches, maps errors to exit codes
/// (1 config, 2 numerical, 3 divergence, 4 io) with one line on `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// The single-line error report written on failure.
std::string error_line(const Error& e);

} // namespace cdslab
