#pragma once

#include <filesystem>
#include <string>

#include "ratchet/config.hpp"
#include "ratchet/error.hpp"

namespace ratchet {

inline constexpr int kSchemaVersion = 1;

/// Runs one experiment and writes summary.json, series.csv and config.json
/// under `out_dir`. On failure writes error.json instead. Returns the process
/// exit code: 0 on success, 2 when the data were too thin for the requested
/// statistic, 1 for every other error.
int run(const RunConfig& cfg, Experiment experiment, const std::filesystem::path& out_dir);

/// Canonical text of a double in all outputs (17 significant digits).
std::string format_real(double v);

int exit_code_for(ErrorCode code);

}  // namespace ratchet
