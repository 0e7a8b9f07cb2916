#pragma once

#include <iosfwd>
#include <memory>
#include <vector>

#include "wemp/parallel.hpp"
#include "wemp/solvers.hpp"

namespace wemp {

/// Everything the slab propagators need: the space, the SOE, both step
/// sizes with their factorized systems, the global initial value (for the
/// initial-data kernel term) and the loads at every fine time.
class PropagatorContext {
 public:
  PropagatorContext(std::shared_ptr<const DiscreteSpace> space, SoeApproximation soe, double tau_f, int substeps,
                    int coarse_steps, Vector initial, LoadTable loads);

  [[nodiscard]] const DiscreteSpace& space() const noexcept { return *space_; }
  [[nodiscard]] const SoeApproximation& soe() const noexcept { return soe_; }
  [[nodiscard]] double tau_f() const noexcept { return tau_f_; }
  [[nodiscard]] double tau_c() const noexcept { return tau_f_ * substeps_; }
  [[nodiscard]] int substeps() const noexcept { return substeps_; }
  [[nodiscard]] int coarse_steps() const noexcept { return coarse_steps_; }
  [[nodiscard]] const Vector& initial() const noexcept { return initial_; }
  [[nodiscard]] const LoadTable& loads() const noexcept { return loads_; }
  [[nodiscard]] const StepCoefficients& coarse_coefficients() const noexcept { return coarse_coeffs_; }
  [[nodiscard]] const StepCoefficients& fine_coefficients() const noexcept { return fine_coeffs_; }
  [[nodiscard]] const ImplicitSystem& coarse_system() const noexcept { return *coarse_system_; }
  [[nodiscard]] const ImplicitSystem& fine_system() const noexcept { return *fine_system_; }
  /// Time of fine index m; every propagator measures time this way.
  [[nodiscard]] double fine_time(int m) const noexcept { return m * tau_f_; }

 private:
  std::shared_ptr<const DiscreteSpace> space_;
  SoeApproximation soe_;
  double tau_f_;
  int substeps_;
  int coarse_steps_;
  Vector initial_;
  LoadTable loads_;
  StepCoefficients coarse_coeffs_;
  StepCoefficients fine_coeffs_;
  std::unique_ptr<ImplicitSystem> coarse_system_;
  std::unique_ptr<ImplicitSystem> fine_system_;
};

/// Context for the multiscale problem of `spec` in the space's coordinates.
PropagatorContext multiscale_context(const ProblemSpec& spec, const TwoLevelMesh& mesh, const OperatorPair& ops,
                                     const MultiscaleSpace& space, const SoeApproximation& soe,
                                     const Execution& exec = Execution::sequential());

struct Propagated {
  Vector solution;
  HistoryState history;
};

/// One coarse step over slab n (T^n -> T^{n+1}).
Propagated coarse_propagate(const PropagatorContext& ctx, int slab, const Vector& u, const HistoryState& history);
/// `substeps` fine steps over slab n, keeping the global clock.
Propagated fine_propagate(const PropagatorContext& ctx, int slab, const Vector& u, const HistoryState& history);
/// Fine minus coarse slab-end solution.
Vector jump(const PropagatorContext& ctx, int slab, const Vector& u, const HistoryState& history);
/// History recurrence with coarse coefficients from (u_prev, u_next).
HistoryState advance_coarse_history(const PropagatorContext& ctx, HistoryState history, const Vector& u_prev,
                                    const Vector& u_next);

struct PararealIterate {
  int k = 0;
  std::vector<Vector> solution;       ///< U_k^n, n = 0..M_c
  std::vector<HistoryState> history;  ///< Phi_k^n
  std::vector<Vector> jumps;          ///< jumps from iterate k-1; empty at k = 0, index 0 unused
  double err = 0.0;                   ///< mean Euclidean change from iterate k-1; 0 at k = 0
  double parallel_seconds = 0.0;
  double sweep_seconds = 0.0;
};

struct WempOptions {
  double tolerance = 1e-8;
  int max_iterations = 10;
  Execution exec;
};

struct WempResult {
  std::vector<PararealIterate> iterates;  ///< k = 0 is the sequential coarse sweep
  bool converged = false;
};

/// Parareal iteration with the coarse sweep as initial iterate. Stops when
/// err <= tolerance or after max_iterations corrections.
WempResult wemp_solve(const PropagatorContext& ctx, const WempOptions& options);

/// One correction of a given iterate, exposed for fixed-point studies.
PararealIterate wemp_iteration(const PropagatorContext& ctx, const PararealIterate& previous, const Execution& exec);

/// The contraction hypothesis e^{-tau_c gamma}((1 - alpha)^{-1} + eps tau_c^{1+alpha} / 2)
/// < alpha (theta - alpha) / (1 + alpha), evaluated at the supremum theta -> 1.
struct ContractionCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};
ContractionCheck contraction_condition(const SoeApproximation& soe, double tau_c);

struct PararealRecord {
  int k = 0;
  int n = 0;
  double rel_l2 = 0.0;
  double rel_energy = 0.0;
  double err = 0.0;
};
/// CSV `k,n,relL2,relEnergy,err`.
void write_parareal_csv(std::ostream& out, const std::vector<PararealRecord>& records);

}  // namespace wemp
