#include "wemp/solvers.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "wemp/errors.hpp"

namespace wemp {

namespace {

// Number of steps of size `step` in `span`; throws unless the ratio is an integer.
int exact_ratio(double span, double step, const char* what) {
  const double ratio = span / step;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * rounded) {
    std::ostringstream msg;
    msg << what << ": " << span << " is not an integer multiple of " << step;
    throw ConfigError(msg.str());
  }
  return static_cast<int>(rounded);
}

class SparseSystem final : public ImplicitSystem {
 public:
  explicit SparseSystem(const SparseMatrix& m) : solver_(m) {}
  [[nodiscard]] Vector solve(const Vector& rhs) const override { return solver_.solve(rhs); }

 private:
  SpdSolver solver_;
};

class DenseSystem final : public ImplicitSystem {
 public:
  explicit DenseSystem(const DenseMatrix& m) : llt_(m) {
    if (llt_.info() != Eigen::Success) throw NumericalError("dense implicit system is not positive definite");
  }
  [[nodiscard]] Vector solve(const Vector& rhs) const override { return llt_.solve(rhs); }

 private:
  Eigen::LLT<DenseMatrix> llt_;
};

void keep(Trajectory& out, double t, const Vector& v) {
  out.times.push_back(t);
  out.states.push_back(v);
}

Trajectory to_full(const OperatorPair& ops, Trajectory free) {
  for (Vector& s : free.states) s = ops.extend_from_free(s);
  return free;
}

Vector free_initial(const ProblemSpec& spec, const TwoLevelMesh& mesh, const OperatorPair& ops) {
  const SpaceTimeFunction u0 = [&](double x, double y, double) { return spec.initial(x, y); };
  return ops.restrict_to_free(nodal_values(mesh, u0, 0.0));
}

LoadFunction free_load(const ProblemSpec& spec, const TwoLevelMesh& mesh, const OperatorPair& ops) {
  return [&spec, &mesh, &ops](int m) {
    return ops.restrict_to_free(assemble_load(mesh, ops, spec.source, m * spec.tau_f));
  };
}

}  // namespace

void ProblemSpec::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (!(final_time > 0.0)) throw ConfigError("final time must be positive");
  if (!(tau_f > 0.0) || !(tau_c > 0.0)) throw ConfigError("time steps must be positive");
  if (tau_f > tau_c) throw ConfigError("fine step exceeds coarse step");
  if (level < 0) throw ConfigError("wavelet level must be non-negative");
  if (!(epsilon > 0.0)) throw ConfigError("SOE tolerance must be positive");
  if (!initial || !source) throw ConfigError("initial value and source must be set");
  (void)coarse_steps();
  (void)substeps();
  (void)fine_steps();
}

int ProblemSpec::coarse_steps() const { return exact_ratio(final_time, tau_c, "final time vs coarse step"); }
int ProblemSpec::substeps() const { return exact_ratio(tau_c, tau_f, "coarse step vs fine step"); }
int ProblemSpec::fine_steps() const { return coarse_steps() * substeps(); }

std::unique_ptr<ImplicitSystem> FineSpace::factor(double mass_shift) const {
  const SparseMatrix m = mass_shift * ops_->mass_free + ops_->stiffness_free;
  return std::make_unique<SparseSystem>(m);
}

DenseSpace::DenseSpace(DenseMatrix mass, DenseMatrix stiffness) : mass_(std::move(mass)), stiffness_(std::move(stiffness)) {
  if (mass_.rows() != mass_.cols() || stiffness_.rows() != mass_.rows() || stiffness_.cols() != mass_.cols())
    throw ConfigError("dense space needs square mass and stiffness of equal size");
}

std::unique_ptr<ImplicitSystem> DenseSpace::factor(double mass_shift) const {
  return std::make_unique<DenseSystem>(mass_shift * mass_ + stiffness_);
}

LoadTable::LoadTable(int fine_steps, const LoadFunction& load, const Execution& exec) {
  loads_.resize(static_cast<std::size_t>(fine_steps) + 1);
  parallel_for(fine_steps + 1, exec, [&](std::ptrdiff_t m) { loads_[static_cast<std::size_t>(m)] = load(static_cast<int>(m)); });
}

void soe_step(const ImplicitSystem& system, const DiscreteSpace& space, const SoeApproximation& soe,
              const StepCoefficients& coeffs, Vector& u, HistoryState& history, const Vector& u0, double t_next,
              const Vector& load) {
  const Vector known = soe_known_part(history, soe, coeffs, u, u0, t_next);
  Vector next = system.solve(space.apply_mass(known) + load);
  propagate_history(history, coeffs, u, next);
  u = std::move(next);
}

Trajectory l1_march(const DiscreteSpace& space, double alpha, double tau, int steps, const Vector& u0,
                    const LoadFunction& load, int store_every, std::size_t history_budget) {
  if (steps < 0 || store_every < 1) throw ConfigError("invalid step or storage count");
  const std::size_t bytes = (static_cast<std::size_t>(steps) + 1) * static_cast<std::size_t>(space.dofs()) * sizeof(double);
  if (bytes > history_budget) {
    std::ostringstream msg;
    msg << "L1 history needs " << bytes << " bytes (budget " << history_budget
        << "); use the sum-of-exponentials solver instead";
    throw ConfigError(msg.str());
  }
  const L1Coefficients coeffs = l1_coefficients(alpha, steps);
  const auto system = space.factor(1.0 / caputo_scale(alpha, tau));
  std::vector<Vector> history;
  history.reserve(static_cast<std::size_t>(steps) + 1);
  history.push_back(u0);
  Trajectory out;
  keep(out, 0.0, u0);
  for (int n = 0; n < steps; ++n) {
    const Vector known = l1_apply(coeffs, history, tau);
    history.push_back(system->solve(space.apply_mass(known) + load(n + 1)));
    if ((n + 1) % store_every == 0 || n + 1 == steps) keep(out, (n + 1) * tau, history.back());
  }
  return out;
}

Trajectory soe_march(const DiscreteSpace& space, const SoeApproximation& soe, double tau, int steps,
                     const Vector& u0, const LoadFunction& load, int store_every) {
  if (steps < 0 || store_every < 1) throw ConfigError("invalid step or storage count");
  const StepCoefficients coeffs = step_coefficients(soe, tau);
  const auto system = space.factor(1.0 / caputo_scale(soe.alpha, tau));
  HistoryState history = HistoryState::zero(soe.size(), space.dofs());
  Vector u = u0;
  Trajectory out;
  keep(out, 0.0, u0);
  for (int n = 0; n < steps; ++n) {
    soe_step(*system, space, soe, coeffs, u, history, u0, (n + 1) * tau, load(n + 1));
    if ((n + 1) % store_every == 0 || n + 1 == steps) keep(out, (n + 1) * tau, u);
  }
  return out;
}

Trajectory reference_l1_solve(const ProblemSpec& spec, const TwoLevelMesh& mesh, const OperatorPair& ops,
                              bool store_all, std::size_t history_budget) {
  spec.validate();
  const FineSpace space(ops);
  return to_full(ops, l1_march(space, spec.alpha, spec.tau_f, spec.fine_steps(), free_initial(spec, mesh, ops),
                               free_load(spec, mesh, ops), store_all ? 1 : spec.substeps(), history_budget));
}

Trajectory fine_soe_solve(const ProblemSpec& spec, const TwoLevelMesh& mesh, const OperatorPair& ops,
                          const SoeApproximation& soe, bool store_all) {
  spec.validate();
  const FineSpace space(ops);
  return to_full(ops, soe_march(space, soe, spec.tau_f, spec.fine_steps(), free_initial(spec, mesh, ops),
                                free_load(spec, mesh, ops), store_all ? 1 : spec.substeps()));
}

MultiscaleProblem project_problem(const ProblemSpec& spec, const TwoLevelMesh& mesh, const OperatorPair& ops,
                                  const MultiscaleSpace& space, const Execution& exec) {
  spec.validate();
  MultiscaleProblem p;
  const SpaceTimeFunction u0 = [&](double x, double y, double) { return spec.initial(x, y); };
  p.initial = edge_projection(space, ops, nodal_values(mesh, u0, 0.0));
  p.loads = LoadTable(spec.fine_steps(), [&](int m) -> Vector {
    return space.basis.transpose() * assemble_load(mesh, ops, spec.source, m * spec.tau_f);
  }, exec);
  return p;
}

Trajectory multiscale_soe_solve(const ProblemSpec& spec, const TwoLevelMesh& mesh, const OperatorPair& ops,
                                const MultiscaleSpace& space, const SoeApproximation& soe, bool store_all) {
  const MultiscaleProblem problem = project_problem(spec, mesh, ops, space);
  const DenseSpace dense(space.mass, space.stiffness);
  Trajectory out = soe_march(dense, soe, spec.tau_f, spec.fine_steps(), problem.initial,
                             [&](int m) { return problem.loads(m); }, store_all ? 1 : spec.substeps());
  out.space = SpaceTag::multiscale;
  return out;
}

Trajectory lift_trajectory(const MultiscaleSpace& space, const Trajectory& coefficients) {
  Trajectory out;
  out.space = SpaceTag::fine;
  out.times = coefficients.times;
  out.states.reserve(coefficients.states.size());
  for (const Vector& c : coefficients.states) out.states.push_back(space.lift(c));
  return out;
}

std::vector<ErrorSample> compare_trajectories(const OperatorPair& ops, const Trajectory& approx,
                                              const Trajectory& reference) {
  if (approx.times.size() != reference.times.size()) throw ConfigError("trajectories hold different time grids");
  std::vector<ErrorSample> out;
  for (std::size_t k = 0; k < approx.times.size(); ++k) {
    if (std::abs(approx.times[k] - reference.times[k]) > 1e-9 * std::max(1.0, reference.times[k]))
      throw ConfigError("trajectories hold different time grids");
    const Vector diff = approx.states[k] - reference.states[k];
    const double l2 = l2_norm(ops, reference.states[k]);
    const double en = energy_norm(ops, reference.states[k]);
    out.push_back({reference.times[k], l2_norm(ops, diff) / (l2 > 0.0 ? l2 : 1.0),
                   energy_norm(ops, diff) / (en > 0.0 ? en : 1.0)});
  }
  return out;
}

double max_rel_l2(const std::vector<ErrorSample>& samples) {
  double m = 0.0;
  for (const auto& s : samples) m = std::max(m, s.rel_l2);
  return m;
}

double max_rel_energy(const std::vector<ErrorSample>& samples) {
  double m = 0.0;
  for (const auto& s : samples) m = std::max(m, s.rel_energy);
  return m;
}

void write_error_csv(std::ostream& out, const std::vector<ErrorSample>& samples) {
  out << "t,relL2,relEnergy\n";
  out.precision(std::numeric_limits<double>::max_digits10);
  for (const auto& s : samples) out << s.time << ',' << s.rel_l2 << ',' << s.rel_energy << '\n';
}

namespace {
constexpr char state_magic[8] = {'W', 'E', 'M', 'P', 'V', 'E', 'C', '1'};

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}
}  // namespace

void write_state(std::ostream& out, const Vector& v) {
  out.write(state_magic, sizeof state_magic);
  const std::uint64_t n = to_little(static_cast<std::uint64_t>(v.size()));
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    const double x = to_little(v[k]);
    out.write(reinterpret_cast<const char*>(&x), sizeof x);
  }
  if (!out) throw ConfigError("failed to write state");
}

Vector read_state(std::istream& in) {
  char magic[8];
  std::uint64_t n = 0;
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, state_magic, sizeof magic) != 0)
    throw ConfigError("not a state file (bad magic)");
  if (!in.read(reinterpret_cast<char*>(&n), sizeof n)) throw ConfigError("truncated state header");
  n = to_little(n);
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    double x = 0.0;
    if (!in.read(reinterpret_cast<char*>(&x), sizeof x)) throw ConfigError("truncated state data");
    v[k] = to_little(x);
  }
  return v;
}

}  // namespace wemp
