#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "wemp/fem.hpp"
#include "wemp/multiscale.hpp"
#include "wemp/soe.hpp"
#include "wemp/time_stepping.hpp"

namespace wemp {

using SpaceFunction = std::function<double(double x, double y)>;

/// Time-fractional problem data on the unit square with homogeneous Dirichlet
/// conditions. `fine_steps`, `coarse_steps` and `substeps` validate that the
/// grids nest exactly.
struct ProblemSpec {
  double alpha = 0.5;
  double final_time = 1.0;
  double tau_f = 1e-3;
  double tau_c = 0.1;
  SpaceFunction initial;
  SpaceTimeFunction source;
  int level = 2;
  double epsilon = 0.5;

  void validate() const;
  [[nodiscard]] int fine_steps() const;
  [[nodiscard]] int coarse_steps() const;
  [[nodiscard]] int substeps() const;
};

/// Solver of (shift M + A) x = b for one space.
class ImplicitSystem {
 public:
  virtual ~ImplicitSystem() = default;
  [[nodiscard]] virtual Vector solve(const Vector& rhs) const = 0;
};

/// Mass and stiffness of one Galerkin space in its own coordinates.
class DiscreteSpace {
 public:
  virtual ~DiscreteSpace() = default;
  [[nodiscard]] virtual Eigen::Index dofs() const = 0;
  [[nodiscard]] virtual Vector apply_mass(const Vector& v) const = 0;
  [[nodiscard]] virtual Vector apply_stiffness(const Vector& v) const = 0;
  [[nodiscard]] virtual std::unique_ptr<ImplicitSystem> factor(double mass_shift) const = 0;
};

/// Interior fine nodes with the restricted sparse operators.
class FineSpace final : public DiscreteSpace {
 public:
  explicit FineSpace(const OperatorPair& ops) : ops_(&ops) {}
  [[nodiscard]] Eigen::Index dofs() const override { return ops_->mass_free.rows(); }
  [[nodiscard]] Vector apply_mass(const Vector& v) const override { return ops_->mass_free * v; }
  [[nodiscard]] Vector apply_stiffness(const Vector& v) const override { return ops_->stiffness_free * v; }
  [[nodiscard]] std::unique_ptr<ImplicitSystem> factor(double mass_shift) const override;

 private:
  const OperatorPair* ops_;
};

/// Small dense space: multiscale coordinates or a scalar model problem.
class DenseSpace final : public DiscreteSpace {
 public:
  DenseSpace(DenseMatrix mass, DenseMatrix stiffness);
  [[nodiscard]] Eigen::Index dofs() const override { return mass_.rows(); }
  [[nodiscard]] Vector apply_mass(const Vector& v) const override { return mass_ * v; }
  [[nodiscard]] Vector apply_stiffness(const Vector& v) const override { return stiffness_ * v; }
  [[nodiscard]] std::unique_ptr<ImplicitSystem> factor(double mass_shift) const override;
  [[nodiscard]] const DenseMatrix& mass() const noexcept { return mass_; }

 private:
  DenseMatrix mass_;
  DenseMatrix stiffness_;
};

/// Load vector in space coordinates at fine time index m (t = m tau_f).
using LoadFunction = std::function<Vector(int fine_index)>;

/// Loads precomputed for every fine time index 0..fine_steps.
class LoadTable {
 public:
  LoadTable() = default;
  LoadTable(int fine_steps, const LoadFunction& load, const Execution& exec = Execution::sequential());
  [[nodiscard]] const Vector& operator()(int fine_index) const { return loads_.at(static_cast<std::size_t>(fine_index)); }
  [[nodiscard]] int size() const noexcept { return static_cast<int>(loads_.size()); }

 private:
  std::vector<Vector> loads_;
};

enum class SpaceTag { fine, multiscale, scalar };

struct Trajectory {
  SpaceTag space = SpaceTag::fine;
  std::vector<double> times;
  std::vector<Vector> states;
};

/// One step of the compressed scheme from t_next - tau to t_next: solves for
/// the new state, then advances the history with (u, u_new). `u` is replaced.
void soe_step(const ImplicitSystem& system, const DiscreteSpace& space, const SoeApproximation& soe,
              const StepCoefficients& coeffs, Vector& u, HistoryState& history, const Vector& u0, double t_next,
              const Vector& load);

/// Memory allowed for the full L1 history before `l1_march` refuses to run.
inline constexpr std::size_t default_history_budget = std::size_t{2} << 30;

/// L1 scheme over `steps` steps of size tau. States at indices that are
/// multiples of `store_every` (and the last one) are kept.
Trajectory l1_march(const DiscreteSpace& space, double alpha, double tau, int steps, const Vector& u0,
                    const LoadFunction& load, int store_every = 1,
                    std::size_t history_budget = default_history_budget);

/// Compressed scheme with the same storage convention; holds only the
/// current state and the history moments.
Trajectory soe_march(const DiscreteSpace& space, const SoeApproximation& soe, double tau, int steps,
                     const Vector& u0, const LoadFunction& load, int store_every = 1);

/// Fine-space solves; trajectories hold full nodal vectors at coarse times.
Trajectory reference_l1_solve(const ProblemSpec& spec, const TwoLevelMesh& mesh, const OperatorPair& ops,
                              bool store_all = false, std::size_t history_budget = default_history_budget);
Trajectory fine_soe_solve(const ProblemSpec& spec, const TwoLevelMesh& mesh, const OperatorPair& ops,
                          const SoeApproximation& soe, bool store_all = false);

/// Multiscale-space data of one problem: the projected initial value and the
/// Galerkin loads basis' F at every fine time.
struct MultiscaleProblem {
  Vector initial;
  LoadTable loads;
};
MultiscaleProblem project_problem(const ProblemSpec& spec, const TwoLevelMesh& mesh, const OperatorPair& ops,
                                  const MultiscaleSpace& space, const Execution& exec = Execution::sequential());

/// Trajectory of multiscale coefficients at coarse times.
Trajectory multiscale_soe_solve(const ProblemSpec& spec, const TwoLevelMesh& mesh, const OperatorPair& ops,
                                const MultiscaleSpace& space, const SoeApproximation& soe, bool store_all = false);
/// Full nodal view basis * c of a multiscale trajectory.
Trajectory lift_trajectory(const MultiscaleSpace& space, const Trajectory& coefficients);

struct ErrorSample {
  double time = 0.0;
  double rel_l2 = 0.0;
  double rel_energy = 0.0;
};
/// Relative L2 and energy errors of full nodal trajectories at matching times;
/// samples where the reference vanishes report the absolute error.
std::vector<ErrorSample> compare_trajectories(const OperatorPair& ops, const Trajectory& approx,
                                              const Trajectory& reference);
double max_rel_l2(const std::vector<ErrorSample>& samples);
double max_rel_energy(const std::vector<ErrorSample>& samples);

/// CSV `t,relL2,relEnergy`.
void write_error_csv(std::ostream& out, const std::vector<ErrorSample>& samples);

/// Binary state: 8-byte magic "WEMPVEC1", little-endian uint64 count, then
/// little-endian float64 values.
void write_state(std::ostream& out, const Vector& v);
Vector read_state(std::istream& in);

}  // namespace wemp
