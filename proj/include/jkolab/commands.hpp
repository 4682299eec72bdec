#ifndef JKOLAB_COMMANDS_HPP
#define JKOLAB_COMMANDS_HPP

// Subcommands of the experiment runner. Each returns a process exit status;
// check results come from certify, never from here.

#include "jkolab/config.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace jkolab::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitBoundFailed = 1,
  kExitSolverFailure = 2,
  kExitConfigError = 64,
  kExitMissingData = 66,
  kExitInternal = 70,
};

/// Environment variable naming the default output root.
inline constexpr const char* kOutEnv = "JKOLAB_OUT";

struct Options {
  std::string out_root;  // --out; falls back to output_dir, then $JKOLAB_OUT, then "runs"
  int workers = 1;
  std::optional<std::uint64_t> seed_override;
  std::vector<std::string> checks;  // overrides the config's checks when non-empty
  std::ostream* log = nullptr;      // progress lines; std::cout when null
  std::ostream* err = nullptr;      // diagnostics; std::cerr when null
};

/// Run directory of a config: <root>/<run_id>.
std::string run_directory(const RunConfig& cfg, const Options& opts);

int cmd_forward(const std::string& config_path, const Options& opts);
/// Exactly one of config_path and run_id is non-empty. With a config the
/// forward stage runs first when its data is absent.
int cmd_reverse(const std::string& config_path, const std::string& run_id, const Options& opts);
int cmd_certify(const std::string& config_path, const std::string& run_id, const Options& opts);
/// Axes are "key=v1,v2,..."; the cross product of all axes is run as
/// independent forward/reverse/certify entries on opts.workers threads.
int cmd_sweep(const std::string& config_path, const std::vector<std::string>& axes, const Options& opts);
/// Aggregates the report files of the given runs (every run under the root
/// when empty) into report_summary.csv.
int cmd_report(const std::vector<std::string>& run_ids, const Options& opts);

/// Config-level entry points used by the subcommands; they throw instead of
/// returning exit codes.
void run_forward_stage(const RunConfig& cfg, const std::string& dir);
void run_reverse_stage(const RunConfig& cfg, const std::string& dir);
/// Returns true iff every report holds.
bool run_certify_stage(const RunConfig& cfg, const std::string& dir, const std::vector<std::string>& checks,
                       std::vector<std::string>* failing = nullptr);

/// Maps an exception thrown by a stage to its exit status.
int exit_code_for(const std::exception& e);

}  // namespace jkolab::cli

#endif  // JKOLAB_COMMANDS_HPP
