#include "wemp/soe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "wemp/errors.hpp"

namespace wemp {

namespace {

// Logistic function 1 / (1 + e^-s) without overflow.
double logistic(double s) noexcept {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

void require_parameters(double alpha, double tau_f) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (!(tau_f > 0.0 && tau_f < 1.0)) throw ConfigError("fine step must lie in (0, 1)");
}

// (1 - e^-x - x e^-x) / x^2 and (x - 1 + e^-x) / x^2 by their Taylor series;
// coefficients (-1)^k (k - 1) / k! and (-1)^k / k! of x^(k-2), k >= 2.
void lag_series(double x, double& prev, double& next) noexcept {
  prev = 0.0;
  next = 0.0;
  double term = 0.5;  // x^(k-2) / k! at k = 2
  for (int k = 2; k < 30; ++k) {
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    prev += sign * (k - 1) * term;
    next += sign * term;
    term *= x / (k + 1);
  }
}

}  // namespace

double softplus(double s) noexcept {
  if (s > 30.0) return s + std::log1p(std::exp(-s));
  return std::log1p(std::exp(s));
}

double weight_function(double s, double t, double alpha) noexcept {
  const double l = softplus(s);
  if (l == 0.0) return 0.0;
  return std::exp(-t * l + alpha * std::log(l)) * logistic(s);
}

double SoeApproximation::evaluate(double t) const noexcept {
  double sum = 0.0;
  for (std::size_t j = 0; j < weights.size(); ++j) sum += weights[j] * std::exp(-rates[j] * t);
  return sum;
}

double soe_error_bound(double alpha, double tau_f, double half_terms) noexcept {
  const double decay = std::exp(-std::numbers::pi * std::sqrt(half_terms));
  return std::pow(tau_f, -1.0 - alpha) * (2.0 / (1.0 - decay) + 2.0) * decay;
}

double soe_bound_for_terms(double alpha, double tau_f, int terms) noexcept {
  return soe_error_bound(alpha, tau_f, 0.5 * (terms - 1));
}

SoeApproximation build_soe_with_half_terms(double alpha, double tau_f, int half_terms) {
  require_parameters(alpha, tau_f);
  if (half_terms < 1) throw ConfigError("SOE needs at least one half term");
  if (2 * static_cast<long>(half_terms) + 1 > max_soe_terms)
    throw ConfigError("SOE term count exceeds " + std::to_string(max_soe_terms));

  SoeApproximation soe;
  soe.alpha = alpha;
  soe.tau_f = tau_f;
  soe.half_terms = half_terms;
  soe.epsilon = soe_error_bound(alpha, tau_f, half_terms);
  soe.node_step = std::numbers::pi / std::sqrt(static_cast<double>(half_terms));
  // Sinc nodes of the integral representation, rescaled by (1 + alpha) / tau_f;
  // the integral carries a factor Gamma(1 + alpha) that the weights divide out.
  const double scale = std::pow(tau_f, -1.0 - alpha) * std::pow(alpha + 1.0, 1.0 + alpha) * soe.node_step /
                       std::tgamma(alpha + 1.0);
  const std::size_t terms = 2 * static_cast<std::size_t>(half_terms) + 1;
  soe.weights.resize(terms);
  soe.rates.resize(terms);
  for (int m = -half_terms; m <= half_terms; ++m) {
    const double s = m * soe.node_step;
    const double l = softplus(s);
    const auto j = static_cast<std::size_t>(m + half_terms);
    soe.weights[j] = scale * std::pow(l, alpha) * logistic(s);
    soe.rates[j] = (alpha + 1.0) * l / tau_f;
  }
  soe.gamma = soe.rates.front();
  return soe;
}

SoeApproximation build_soe(double alpha, double tau_f, double epsilon, int max_terms) {
  require_parameters(alpha, tau_f);
  if (!(epsilon > 0.0)) throw ConfigError("SOE tolerance must be positive");
  const int max_half = (std::min(max_terms, max_soe_terms) - 1) / 2;
  for (int n = 1; n <= max_half; ++n)
    if (soe_error_bound(alpha, tau_f, n) <= epsilon) return build_soe_with_half_terms(alpha, tau_f, n);
  std::ostringstream msg;
  msg << "SOE tolerance " << epsilon << " needs more than " << 2 * max_half + 1 << " exponentials";
  throw ConfigError(msg.str());
}

double soe_residual(const SoeApproximation& soe, double t) noexcept {
  return std::abs(std::pow(t, -1.0 - soe.alpha) - soe.evaluate(t));
}

double max_soe_residual(const SoeApproximation& soe, double t_min, double t_max, int points) {
  if (!(t_min > 0.0 && t_max >= t_min) || points < 2) throw ConfigError("invalid residual sweep range");
  const double a = std::log(t_min);
  const double b = std::log(t_max);
  double worst = 0.0;
  for (int k = 0; k < points; ++k) {
    const double t = (k == points - 1) ? t_max : std::exp(a + (b - a) * k / (points - 1));
    worst = std::max(worst, soe_residual(soe, t));
  }
  return worst;
}

StepCoefficients step_coefficients(const SoeApproximation& soe, double tau) {
  if (!(tau > 0.0)) throw ConfigError("step size must be positive");
  StepCoefficients c;
  c.tau = tau;
  const std::size_t n = soe.weights.size();
  c.decay.resize(n);
  c.lag_prev.resize(n);
  c.lag_next.resize(n);
  c.history_weight.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double x = soe.rates[j] * tau;
    const double e = std::exp(-x);
    double prev = 0.0;
    double next = 0.0;
    if (x < 0.5) {
      lag_series(x, prev, next);
    } else {
      prev = (-std::expm1(-x) - x * e) / (x * x);
      next = (x + std::expm1(-x)) / (x * x);
    }
    c.decay[j] = e;
    c.lag_prev[j] = tau * prev;
    c.lag_next[j] = tau * next;
    c.history_weight[j] = soe.weights[j] * e;
  }
  return c;
}

EpsilonCheck validate_epsilon(double epsilon, double alpha, double final_time, long fine_steps, double eta) {
  EpsilonCheck check;
  const double tp = std::pow(final_time, 1.0 + alpha);
  check.stability_bound = alpha * std::pow(static_cast<double>(fine_steps), alpha) * eta / tp;
  check.long_time_bound = 1.0 / (2.0 * tp);
  check.threshold = std::min(check.stability_bound, check.long_time_bound);
  check.margin = check.threshold - epsilon;
  check.admissible = epsilon <= check.threshold;
  return check;
}

void write_soe_csv(std::ostream& out, const SoeApproximation& soe) {
  out << "j,omega,lambda\n";
  out.precision(std::numeric_limits<double>::max_digits10);
  for (std::size_t j = 0; j < soe.weights.size(); ++j) out << j + 1 << ',' << soe.weights[j] << ',' << soe.rates[j] << '\n';
}

}  // namespace wemp
