#pragma once

#include <span>
#include <vector>

#include "wemp/fem.hpp"
#include "wemp/soe.hpp"

namespace wemp {

/// Weights of the L1 discretization of the Caputo derivative,
/// b_j = (j + 1)^(1 - alpha) - j^(1 - alpha), and c_alpha = Gamma(2 - alpha).
struct L1Coefficients {
  double alpha = 0.0;
  std::vector<double> b;
  double c_alpha = 0.0;
};

L1Coefficients l1_coefficients(double alpha, int n);

/// Known part of the L1 derivative at t_{n+1} given v^0..v^n: the vector w with
///   D v^{n+1} = v^{n+1} / (tau^alpha c_alpha) - w,
/// so an implicit step solves (M / (tau^alpha c_alpha) + A) v^{n+1} = M w + F.
/// `coeffs` must hold at least history.size() weights.
Vector l1_apply(const L1Coefficients& coeffs, std::span<const Vector> history, double tau);

/// Exponential moments of a trajectory for the compressed Caputo history.
///
/// `moments[j]` holds the integral over [0, t_n] of e^{-rate_j (t_n - s)} v(s),
/// with v the piecewise-linear interpolant of the computed values. The
/// integrator uses the one-step-ahead form psi_j[n] = e^{-rate_j tau} moments[j];
/// keeping the moments themselves lets propagators with different step sizes
/// share one state.
struct HistoryState {
  int step_index = 0;
  double step_size = 0.0;  ///< tau of the most recent propagation, 0 before the first
  std::vector<Vector> moments;

  static HistoryState zero(int terms, Eigen::Index dofs);
  [[nodiscard]] int terms() const noexcept { return static_cast<int>(moments.size()); }
  [[nodiscard]] Eigen::Index dofs() const noexcept { return moments.empty() ? 0 : moments.front().size(); }
  /// psi_j for an upcoming step of size tau.
  [[nodiscard]] Vector component(std::size_t j, const StepCoefficients& coeffs) const;
};

/// Advances the moments from t_n to t_n + tau:
///   moments_j <- e^{-rate_j tau} moments_j + lag_prev_j v_prev + lag_next_j v_next,
/// which is psi_j[n+1] = e^{-rate_j tau} psi_j[n] + c1_j v_prev + c2_j v_next.
void propagate_history(HistoryState& state, const StepCoefficients& coeffs, const Vector& v_prev,
                       const Vector& v_next);

/// sum_j w_j psi_j for an upcoming step described by `coeffs`.
Vector weighted_history(const HistoryState& state, const StepCoefficients& coeffs);

/// Known part of the compressed derivative at t_next:
///   alpha v_curr / (tau^alpha c_alpha) + (v0 / t_next^alpha + alpha sum_j w_j psi_j) / Gamma(1 - alpha),
/// so the step solves (M / (tau^alpha c_alpha) + A) v_next = M known + F.
Vector soe_known_part(const HistoryState& state, const SoeApproximation& soe, const StepCoefficients& coeffs,
                      const Vector& v_curr, const Vector& v0, double t_next);

/// tau^alpha c_alpha, the reciprocal of the mass shift of every implicit step.
double caputo_scale(double alpha, double tau) noexcept;

/// tau_c^alpha ||sum_j w_j psi_j||_M with psi taken for a step of size tau_c.
double history_norm(const HistoryState& state, const SoeApproximation& soe, double tau_c, const SparseMatrix& mass);
double history_norm(const HistoryState& state, const SoeApproximation& soe, double tau_c, const DenseMatrix& mass);

}  // namespace wemp
