#ifndef JKOLAB_CONFIG_HPP
#define JKOLAB_CONFIG_HPP

// Run configuration: flat "key = value" text with dotted keys.
//
//   family = grid                 # gaussian | grid
//   dim = 1
//   grid.M = 2048
//   objective.variant = KL        # KL | POTENTIAL_ONLY | WEIGHTED
//   objective.alpha = 1           # WEIGHTED only
//   objective.lambda_mat = 1      # one entry (times I) or dim² row-major
//   objective.center = 0
//   p0.mean = 2                   # Gaussian start ...
//   p0.cov = 1                    #   one entry (times I) or dim² row-major
//   p0.mixture.weights = 0.3,0.7  # ... or a 1-D normal mixture ...
//   p0.mixture.means = -1,1
//   p0.mixture.sds = 0.5,0.5
//   p0.atoms = -1; 1              # ... or OU-smoothed atoms (';' between atoms)
//   p0.weights = 0.5,0.5
//   p0.delta = 0.01
//   gamma = 1
//   eps = 0.1                     # scalar or per-step schedule
//   eps_inv = 0.001
//   N = AUTO                      # integer or AUTO
//   seed = 7
//   perturb.mode = MEAN_SHIFT     # MEAN_SHIFT | DILATION | GRID_BUMP
//   perturb.direction = 1,0
//   perturb.bump_width_sds = 1.5
//   checks = evi,forward_rate
//   output_dir = runs

#include "jkolab/process.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace jkolab {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class StartKind { kGaussian, kMixture, kAtoms };

struct RunConfig {
  Family family = Family::kGaussian;
  int dim = 1;
  int grid_m = 2048;

  Variant variant = Variant::kKL;
  double alpha = 1;
  std::vector<double> lambda_mat{1.0};
  std::vector<double> center{0.0};

  StartKind start = StartKind::kGaussian;
  std::vector<double> p0_mean{0.0};
  std::vector<double> p0_cov{1.0};
  std::vector<double> mix_weights, mix_means, mix_sds;
  std::vector<std::vector<double>> atoms;
  std::vector<double> atom_weights;
  double delta = 0.01;

  double gamma = 1;
  std::vector<double> eps{0.0};
  double eps_inv = 0;
  std::optional<int> n_steps = 20;  // nullopt: AUTO
  std::uint64_t seed = 0;

  PerturbMode mode = PerturbMode::kMeanShift;
  std::vector<double> direction;
  double bump_width_sds = 1.5;

  std::vector<std::string> checks;  // empty: every family
  std::string output_dir;

  bool operator==(const RunConfig&) const = default;
};

/// Throws ConfigError on syntax errors, unknown or repeated keys, malformed
/// values and inconsistent settings.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Canonical text: fixed key order, 17 significant digits, output_dir last.
std::string serialize_config(const RunConfig& cfg);

/// Applies "key = value" overrides on top of a serialized config.
RunConfig with_overrides(const RunConfig& cfg, const std::vector<std::pair<std::string, std::string>>& kv);

/// 16 hex digits of FNV-1a 64 over the canonical text without output_dir.
std::string run_id(const RunConfig& cfg);

// Objects built from a validated config.
Objective build_objective(const RunConfig& cfg);
Gaussian build_gaussian_start(const RunConfig& cfg);
Grid build_grid_start(const RunConfig& cfg);
std::optional<AtomicMeasure> build_atoms(const RunConfig& cfg);
PerturbConfig build_perturb(const RunConfig& cfg);
std::vector<std::string> effective_checks(const RunConfig& cfg);

}  // namespace jkolab

#endif  // JKOLAB_CONFIG_HPP
