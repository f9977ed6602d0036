#pragma once

#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "pmhmc/config.hpp"
#include "pmhmc/convergence.hpp"
#include "pmhmc/datasets.hpp"
#include "pmhmc/diagnostics.hpp"
#include "pmhmc/samplers.hpp"

namespace pmhmc {

enum ExitCode : int { exit_ok = 0, exit_config = 1, exit_runtime = 2 };

/// pmhmc {generate|sample|convergence|diagnose} CONFIG [options].
/// Returns 1 for usage or configuration errors, 2 for runtime failures.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int cli_main(int argc, const char* const* argv);

/// Every key the CLI understands; anything else in a config file is an error.
const std::set<std::string>& known_config_keys();
void check_config_keys(const Config& cfg);

SamplerConfig sampler_config_from(const Config& cfg);
FlowExperimentConfig flow_config_from(const Config& cfg);
/// Regions from diagnose.lambda_threshold or diagnose.region.<name> = a, b, c [; a, b, c ...].
std::vector<ModeRegion> mode_regions_from(const Config& cfg);

/// The dataset named by data_file, or generated from data.seed (default: seed).
Dataset load_or_generate_data(const Config& cfg, const ModelSpec& spec);

std::vector<std::string> parameter_names(const ModelSpec& spec);

}  // namespace pmhmc
