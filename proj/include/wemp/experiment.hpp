#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

#include "wemp/fem.hpp"
#include "wemp/mesh.hpp"
#include "wemp/solvers.hpp"

namespace wemp {

struct KappaConfig {
  std::string kind = "constant";  ///< constant | contrast-inclusions | raster-file
  double value = 1.0;             ///< constant value
  double contrast = 1e4;          ///< inclusion value over a unit background
  int count = 8;                  ///< number of inclusions, each inside its own coarse cell
  int width = 0;                  ///< inclusion size in fine cells; 0 picks refinement/2 by refinement/4
  int height = 0;
  std::string path;               ///< raster file
};

/// Flat key-value file with `[problem]`, `[mesh]`, `[kappa]` and `[run]`
/// sections; `#` starts a comment.
struct ExperimentConfig {
  // [problem]
  double alpha = 0.5;
  double final_time = 1.0;
  double tau_c = 0.1;
  double tau_f = 1e-3;
  int level = 2;
  std::optional<double> epsilon;
  std::optional<int> n_exp;
  std::string source = "smooth";  ///< smooth: xyt | rough: sgn(cos 2 pi t) xy | zero
  double eta = 1.0;               ///< stability margin in the epsilon admissibility check
  // [mesh]
  int coarse_divisions = 8;
  int refinement = 8;
  // [kappa]
  KappaConfig kappa;
  // [run]
  std::string experiment;
  std::filesystem::path output = "wemp-out";
  int workers = 1;
  double delta = 1e-8;
  int k_max = 3;
  std::uint64_t seed = 1;
  std::string reference = "l1";  ///< l1 | soe
  std::optional<double> assert_rel_l2;

  void validate() const;
};

ExperimentConfig parse_config(std::istream& in, const std::string& source_name = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Constant, seeded rectangular inclusions inside distinct coarse cells, or a raster file.
CoefficientField generate_kappa(const KappaConfig& config, const TwoLevelMesh& mesh, std::uint64_t seed);

/// The SOE selected by either epsilon or n_exp.
SoeApproximation soe_from_config(const ExperimentConfig& config);

/// Problem data of the numerical study: u0 = x(1-x)y(1-y) and the configured source.
ProblemSpec problem_from_config(const ExperimentConfig& config);

struct RunOptions {
  bool assert_thresholds = false;
  std::optional<int> workers;
  std::optional<std::filesystem::path> output;
  /// Runs the oracle self-tests for the `unit-oracles` experiment; returns true when all pass.
  std::function<bool(std::ostream&)> oracles;
};

/// Thrown when --assert is active and a result misses its threshold.
class AcceptanceBreach : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs one experiment, writing CSVs and `summary.txt` to the output
/// directory and a short report to `log`.
void run_experiment(const ExperimentConfig& config, const RunOptions& options, std::ostream& log);

}  // namespace wemp
