#pragma once

#include <iosfwd>
#include <vector>

namespace wemp {

/// Overflow-safe ln(1 + e^s).
double softplus(double s) noexcept;

/// Integrand of the sinc representation of the power kernel:
/// its integral over s equals Gamma(alpha + 1) * t^-(1 + alpha).
double weight_function(double s, double t, double alpha) noexcept;

/// Sum-of-exponentials approximation of t^-(1 + alpha) on [tau_f, infinity),
/// built from 2N + 1 sinc nodes s_m = m * pi / sqrt(N), m = -N..N, after the
/// substitution t -> (1 + alpha) t / tau_f.
struct SoeApproximation {
  double alpha = 0.0;
  double tau_f = 0.0;
  double epsilon = 0.0;  ///< a-priori bound realized by the chosen N
  int half_terms = 0;    ///< N
  double node_step = 0.0;
  std::vector<double> weights;
  std::vector<double> rates;
  double gamma = 0.0;  ///< smallest rate

  [[nodiscard]] int size() const noexcept { return static_cast<int>(weights.size()); }
  [[nodiscard]] double evaluate(double t) const noexcept;
};

/// A-priori uniform error bound for N half terms; N may be fractional.
double soe_error_bound(double alpha, double tau_f, double half_terms) noexcept;
/// The bound for a total term count, taking N = (terms - 1) / 2.
double soe_bound_for_terms(double alpha, double tau_f, int terms) noexcept;

inline constexpr int max_soe_terms = 20001;

/// Smallest N whose bound is <= epsilon. Throws ConfigError on invalid
/// parameters or when more than `max_terms` exponentials would be needed.
SoeApproximation build_soe(double alpha, double tau_f, double epsilon, int max_terms = max_soe_terms);
/// Approximation with exactly 2N + 1 terms; `epsilon` is set to the realized bound.
SoeApproximation build_soe_with_half_terms(double alpha, double tau_f, int half_terms);

/// |t^-(1 + alpha) - sum_j w_j exp(-l_j t)|.
double soe_residual(const SoeApproximation& soe, double t) noexcept;
/// Largest residual on `points` logarithmically spaced samples of [t_min, t_max].
double max_soe_residual(const SoeApproximation& soe, double t_min, double t_max, int points = 10'000);

/// Per-term constants for advancing the exponential history by one step tau.
/// With x = rate * tau: decay = e^-x,
///   lag_prev = (1 - e^-x - x e^-x) / (rate^2 tau),  lag_next = (x - 1 + e^-x) / (rate^2 tau),
/// the exact integrals of a linear interpolant against e^-rate(t-s).
/// The one-step-ahead coefficients are c1 = decay * lag_prev, c2 = decay * lag_next.
/// `history_weight` = weight * decay converts stored moments into the kernel sum.
struct StepCoefficients {
  double tau = 0.0;
  std::vector<double> decay;
  std::vector<double> lag_prev;
  std::vector<double> lag_next;
  std::vector<double> history_weight;

  [[nodiscard]] double c1(std::size_t j) const noexcept { return decay[j] * lag_prev[j]; }
  [[nodiscard]] double c2(std::size_t j) const noexcept { return decay[j] * lag_next[j]; }
};

StepCoefficients step_coefficients(const SoeApproximation& soe, double tau);

/// Admissibility of epsilon for the stability and long-time estimates.
struct EpsilonCheck {
  double stability_bound = 0.0;  ///< alpha M_f^alpha eta / T^(1 + alpha)
  double long_time_bound = 0.0;  ///< 1 / (2 T^(1 + alpha))
  double threshold = 0.0;        ///< the smaller of the two
  double margin = 0.0;           ///< threshold - epsilon
  bool admissible = false;
};
EpsilonCheck validate_epsilon(double epsilon, double alpha, double final_time, long fine_steps, double eta);

/// CSV with header `j,omega,lambda`, one row per term.
void write_soe_csv(std::ostream& out, const SoeApproximation& soe);

}  // namespace wemp
