#include "wemp/parareal.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "wemp/errors.hpp"

namespace wemp {

PropagatorContext::PropagatorContext(std::shared_ptr<const DiscreteSpace> space, SoeApproximation soe, double tau_f,
                                     int substeps, int coarse_steps, Vector initial, LoadTable loads)
    : space_(std::move(space)),
      soe_(std::move(soe)),
      tau_f_(tau_f),
      substeps_(substeps),
      coarse_steps_(coarse_steps),
      initial_(std::move(initial)),
      loads_(std::move(loads)) {
  if (!space_) throw ConfigError("propagator context needs a space");
  if (!(tau_f_ > 0.0) || substeps_ < 1 || coarse_steps_ < 1) throw ConfigError("invalid slab configuration");
  if (loads_.size() < coarse_steps_ * substeps_ + 1) throw ConfigError("load table does not cover the time interval");
  if (initial_.size() != space_->dofs()) throw ConfigError("initial value does not match the space");
  coarse_coeffs_ = step_coefficients(soe_, tau_c());
  fine_coeffs_ = step_coefficients(soe_, tau_f_);
  coarse_system_ = space_->factor(1.0 / caputo_scale(soe_.alpha, tau_c()));
  fine_system_ = space_->factor(1.0 / caputo_scale(soe_.alpha, tau_f_));
}

PropagatorContext multiscale_context(const ProblemSpec& spec, const TwoLevelMesh& mesh, const OperatorPair& ops,
                                     const MultiscaleSpace& space, const SoeApproximation& soe, const Execution& exec) {
  MultiscaleProblem problem = project_problem(spec, mesh, ops, space, exec);
  return PropagatorContext(std::make_shared<DenseSpace>(space.mass, space.stiffness), soe, spec.tau_f,
                           spec.substeps(), spec.coarse_steps(), std::move(problem.initial), std::move(problem.loads));
}

Propagated coarse_propagate(const PropagatorContext& ctx, int slab, const Vector& u, const HistoryState& history) {
  const int end = (slab + 1) * ctx.substeps();
  Propagated out{u, history};
  soe_step(ctx.coarse_system(), ctx.space(), ctx.soe(), ctx.coarse_coefficients(), out.solution, out.history,
           ctx.initial(), ctx.fine_time(end), ctx.loads()(end));
  return out;
}

Propagated fine_propagate(const PropagatorContext& ctx, int slab, const Vector& u, const HistoryState& history) {
  Propagated out{u, history};
  for (int j = 0; j < ctx.substeps(); ++j) {
    const int m = slab * ctx.substeps() + j + 1;
    soe_step(ctx.fine_system(), ctx.space(), ctx.soe(), ctx.fine_coefficients(), out.solution, out.history,
             ctx.initial(), ctx.fine_time(m), ctx.loads()(m));
  }
  return out;
}

Vector jump(const PropagatorContext& ctx, int slab, const Vector& u, const HistoryState& history) {
  return fine_propagate(ctx, slab, u, history).solution - coarse_propagate(ctx, slab, u, history).solution;
}

HistoryState advance_coarse_history(const PropagatorContext& ctx, HistoryState history, const Vector& u_prev,
                                    const Vector& u_next) {
  propagate_history(history, ctx.coarse_coefficients(), u_prev, u_next);
  return history;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void require_finite(const PararealIterate& it) {
  for (std::size_t n = 0; n < it.solution.size(); ++n)
    if (!it.solution[n].allFinite()) {
      std::ostringstream msg;
      msg << "non-finite solution at iteration " << it.k << ", slab end " << n;
      throw NumericalError(msg.str());
    }
}

PararealIterate coarse_sweep(const PropagatorContext& ctx) {
  PararealIterate it;
  const auto start = Clock::now();
  it.solution.push_back(ctx.initial());
  it.history.push_back(HistoryState::zero(ctx.soe().size(), ctx.space().dofs()));
  for (int n = 0; n < ctx.coarse_steps(); ++n) {
    Propagated g = coarse_propagate(ctx, n, it.solution.back(), it.history.back());
    it.solution.push_back(std::move(g.solution));
    it.history.push_back(std::move(g.history));
  }
  it.sweep_seconds = seconds_since(start);
  require_finite(it);
  return it;
}

}  // namespace

PararealIterate wemp_iteration(const PropagatorContext& ctx, const PararealIterate& previous, const Execution& exec) {
  const int slabs = ctx.coarse_steps();
  if (static_cast<int>(previous.solution.size()) != slabs + 1 || previous.history.size() != previous.solution.size())
    throw ConfigError("previous iterate does not cover all slabs");
  PararealIterate it;
  it.k = previous.k + 1;

  auto start = Clock::now();
  it.jumps.assign(static_cast<std::size_t>(slabs) + 1, Vector());
  parallel_for(slabs, exec, [&](std::ptrdiff_t s) {
    const auto n = static_cast<std::size_t>(s);
    it.jumps[n + 1] = jump(ctx, static_cast<int>(s), previous.solution[n], previous.history[n]);
  });
  it.parallel_seconds = seconds_since(start);

  start = Clock::now();
  it.solution.push_back(ctx.initial());
  it.history.push_back(HistoryState::zero(ctx.soe().size(), ctx.space().dofs()));
  for (int n = 1; n <= slabs; ++n) {
    const auto i = static_cast<std::size_t>(n);
    const Vector& prev = it.solution[i - 1];
    Vector next = it.jumps[i] + coarse_propagate(ctx, n - 1, prev, it.history[i - 1]).solution;
    it.history.push_back(advance_coarse_history(ctx, it.history[i - 1], prev, next));
    it.solution.push_back(std::move(next));
  }
  double sum = 0.0;
  for (int n = 1; n <= slabs; ++n) {
    const auto i = static_cast<std::size_t>(n);
    sum += (it.solution[i] - previous.solution[i]).norm();
  }
  it.err = sum / slabs;
  it.sweep_seconds = seconds_since(start);
  require_finite(it);
  return it;
}

WempResult wemp_solve(const PropagatorContext& ctx, const WempOptions& options) {
  if (options.max_iterations < 0) throw ConfigError("iteration cap must be non-negative");
  WempResult result;
  result.iterates.push_back(coarse_sweep(ctx));
  for (int k = 1; k <= options.max_iterations; ++k) {
    result.iterates.push_back(wemp_iteration(ctx, result.iterates.back(), options.exec));
    if (result.iterates.back().err <= options.tolerance) {
      result.converged = true;
      break;
    }
  }
  return result;
}

ContractionCheck contraction_condition(const SoeApproximation& soe, double tau_c) {
  const double a = soe.alpha;
  ContractionCheck c;
  c.lhs = std::exp(-tau_c * soe.gamma) * (1.0 / (1.0 - a) + soe.epsilon * std::pow(tau_c, 1.0 + a) / 2.0);
  c.rhs = a * (1.0 - a) / (1.0 + a);
  c.holds = c.lhs < c.rhs;
  return c;
}

void write_parareal_csv(std::ostream& out, const std::vector<PararealRecord>& records) {
  out << "k,n,relL2,relEnergy,err\n";
  out.precision(std::numeric_limits<double>::max_digits10);
  for (const auto& r : records) out << r.k << ',' << r.n << ',' << r.rel_l2 << ',' << r.rel_energy << ',' << r.err << '\n';
}

}  // namespace wemp
