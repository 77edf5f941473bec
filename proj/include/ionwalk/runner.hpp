#pragma once

// Batch experiment runner behind the `ionwalk` command line tool.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>

#include <json.hpp>

#include "ionwalk/error.hpp"
#include "ionwalk/walk.hpp"

namespace ionwalk {

using Json = nlohmann::json;

// Process exit codes, one per failure class.
enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitConfig = 2,
  kExitPhysics = 3,
  kExitTruncation = 4,
  kExitNumerical = 5,
};

int exit_code_for(ErrorKind kind);

// Built-in defaults with every recognized key present.
Json default_config();

// Recursively overlays `overrides` on `base`; keys absent from `base` are
// rejected with a Config error naming the dotted key path.
Json merge_config(const Json& base, const Json& overrides);

std::string config_hash(const Json& config);

struct RunRequest {
  std::string subcommand;
  Json config = default_config();
  std::filesystem::path out_dir = ".";
};

// Executes one subcommand, writes its result files into out_dir and returns
// the JSON report (also written as report.json).
Json run(const RunRequest& request);

struct ThermalReport {
  WalkReport mean;
  std::map<std::size_t, std::size_t> fock_counts;  // initial n -> samples
  double sample_mean_n = 0.0;
};

// Monte Carlo average over initial Fock states drawn from a thermal
// distribution of mean nbar0. Runs once per distinct n, weighted by its
// sample count; nbar0 = 0 reproduces the pure-state run.
ThermalReport thermal_ensemble(const std::function<WalkReport(std::size_t)>& run_from_fock,
                               double nbar0, std::size_t samples, std::uint64_t seed,
                               unsigned threads = 1);

// Full command line entry point. Errors are reported on `err` as one JSON line.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ionwalk
