#include "wemp/time_stepping.hpp"

#include <algorithm>
#include <cmath>

#include "wemp/errors.hpp"

namespace wemp {

L1Coefficients l1_coefficients(double alpha, int n) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (n < 0) throw ConfigError("L1 coefficient count must be non-negative");
  L1Coefficients c;
  c.alpha = alpha;
  c.c_alpha = std::tgamma(2.0 - alpha);
  c.b.resize(static_cast<std::size_t>(n) + 1);
  c.b[0] = 1.0;
  // j^(1-alpha) * ((1 + 1/j)^(1-alpha) - 1) keeps full relative accuracy for large j.
  for (int j = 1; j <= n; ++j)
    c.b[static_cast<std::size_t>(j)] = std::pow(j, 1.0 - alpha) * std::expm1((1.0 - alpha) * std::log1p(1.0 / j));
  return c;
}

double caputo_scale(double alpha, double tau) noexcept { return std::pow(tau, alpha) * std::tgamma(2.0 - alpha); }

Vector l1_apply(const L1Coefficients& coeffs, std::span<const Vector> history, double tau) {
  if (history.empty()) throw ConfigError("L1 step needs at least the initial value");
  const std::size_t n = history.size() - 1;
  if (coeffs.b.size() < n + 1) throw ConfigError("L1 coefficients too short for the history");
  const auto& b = coeffs.b;
  // w = b_n v^0 + sum_{k=1}^{n-1} (b_{n-k} - b_{n-k+1}) v^k + (b_0 - b_1) v^n for n >= 1, w = v^0 for n = 0.
  Vector w;
  if (n == 0) {
    w = history[0];
  } else {
    w = b[n] * history[0];
    for (std::size_t k = 1; k < n; ++k) w += (b[n - k] - b[n - k + 1]) * history[k];
    w += (b[0] - b[1]) * history[n];
  }
  return w / caputo_scale(coeffs.alpha, tau);
}

HistoryState HistoryState::zero(int terms, Eigen::Index dofs) {
  HistoryState s;
  s.moments.assign(static_cast<std::size_t>(terms), Vector::Zero(dofs));
  return s;
}

Vector HistoryState::component(std::size_t j, const StepCoefficients& coeffs) const {
  return coeffs.decay[j] * moments[j];
}

void propagate_history(HistoryState& state, const StepCoefficients& coeffs, const Vector& v_prev,
                       const Vector& v_next) {
  if (coeffs.decay.size() != state.moments.size()) throw ConfigError("history and step coefficients differ in length");
  if (v_prev.size() != state.dofs() || v_next.size() != state.dofs())
    throw ConfigError("history state and solution vectors differ in dimension");
  for (std::size_t j = 0; j < state.moments.size(); ++j)
    state.moments[j] = coeffs.decay[j] * state.moments[j] + coeffs.lag_prev[j] * v_prev + coeffs.lag_next[j] * v_next;
  ++state.step_index;
  state.step_size = coeffs.tau;
}

Vector weighted_history(const HistoryState& state, const StepCoefficients& coeffs) {
  if (coeffs.history_weight.size() != state.moments.size())
    throw ConfigError("history and step coefficients differ in length");
  Vector sum = Vector::Zero(state.dofs());
  for (std::size_t j = 0; j < state.moments.size(); ++j) sum += coeffs.history_weight[j] * state.moments[j];
  return sum;
}

Vector soe_known_part(const HistoryState& state, const SoeApproximation& soe, const StepCoefficients& coeffs,
                      const Vector& v_curr, const Vector& v0, double t_next) {
  if (!(t_next > 0.0)) throw ConfigError("known part needs t_next > 0");
  const double alpha = soe.alpha;
  const double g = std::tgamma(1.0 - alpha);
  Vector known = (alpha / caputo_scale(alpha, coeffs.tau)) * v_curr;
  known += (std::pow(t_next, -alpha) / g) * v0;
  if (state.step_index > 0) known += (alpha / g) * weighted_history(state, coeffs);
  return known;
}

namespace {
template <class Mass>
double history_norm_impl(const HistoryState& state, const SoeApproximation& soe, double tau_c, const Mass& mass) {
  const Vector v = weighted_history(state, step_coefficients(soe, tau_c));
  return std::pow(tau_c, soe.alpha) * std::sqrt(std::max(0.0, v.dot(mass * v)));
}
}  // namespace

double history_norm(const HistoryState& state, const SoeApproximation& soe, double tau_c, const SparseMatrix& mass) {
  return history_norm_impl(state, soe, tau_c, mass);
}
double history_norm(const HistoryState& state, const SoeApproximation& soe, double tau_c, const DenseMatrix& mass) {
  return history_norm_impl(state, soe, tau_c, mass);
}

}  // namespace wemp
