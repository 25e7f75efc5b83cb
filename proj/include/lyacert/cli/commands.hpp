#pragma once

#include "lyacert/algorithms/config.hpp"
#include "lyacert/algorithms/report.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace lyacert::cli {

enum ExitCode { kSuccess = 0, kFailure = 1, kConfigError = 2, kNumericalAbort = 3 };

/// Resolves a run config: defaults for (algo, env), then the JSON file, then `--key value`
/// overrides in order. Dashes in keys are read as underscores.
algorithms::RunConfig resolve_config(const std::string& config_path,
                                     const std::vector<std::pair<std::string, std::string>>& overrides);

/// Output root: $LYACERT_OUT when set, otherwise config.out_dir.
std::filesystem::path output_root(const algorithms::RunConfig& config);

/// <root>/<algo>-<env>-seed<k>
std::filesystem::path run_directory(const algorithms::RunConfig& config);

/// Trains one run and writes report.csv, config.resolved.json and checkpoints into `dir`.
/// A numerical abort still writes the partial report before rethrowing.
algorithms::RunReport train_to_directory(const algorithms::RunConfig& config,
                                         const std::filesystem::path& dir);

/// Entry point of the command-line tool.
int run(int argc, char** argv);

}  // namespace lyacert::cli
