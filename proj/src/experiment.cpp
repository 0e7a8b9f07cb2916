#include "wemp/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "wemp/errors.hpp"
#include "wemp/multiscale.hpp"
#include "wemp/parareal.hpp"

namespace wemp {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

class LineError {
 public:
  LineError(std::string source, int line) : source_(std::move(source)), line_(line) {}
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError(source_ + ":" + std::to_string(line_) + ": " + what);
  }

 private:
  std::string source_;
  int line_;
};

double to_double(const std::string& text, const LineError& where) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size() || !std::isfinite(v))
    where.fail("expected a number, got '" + text + "'");
  return v;
}

long long to_integer(const std::string& text, const LineError& where) {
  long long v = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size()) where.fail("expected an integer, got '" + text + "'");
  return v;
}

int to_int(const std::string& text, const LineError& where) {
  const long long v = to_integer(text, where);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) where.fail("integer out of range");
  return static_cast<int>(v);
}

void assign(ExperimentConfig& c, const std::string& section, const std::string& key, const std::string& value,
            const LineError& where) {
  if (section == "problem") {
    if (key == "alpha") c.alpha = to_double(value, where);
    else if (key == "final_time" || key == "T") c.final_time = to_double(value, where);
    else if (key == "tau_c") c.tau_c = to_double(value, where);
    else if (key == "tau_f") c.tau_f = to_double(value, where);
    else if (key == "level") c.level = to_int(value, where);
    else if (key == "epsilon") c.epsilon = to_double(value, where);
    else if (key == "n_exp") c.n_exp = to_int(value, where);
    else if (key == "source") c.source = value;
    else if (key == "eta") c.eta = to_double(value, where);
    else where.fail("unknown key '" + key + "' in [problem]");
  } else if (section == "mesh") {
    if (key == "coarse_divisions") c.coarse_divisions = to_int(value, where);
    else if (key == "refinement" || key == "refinements") c.refinement = to_int(value, where);
    else where.fail("unknown key '" + key + "' in [mesh]");
  } else if (section == "kappa") {
    if (key == "kind") c.kappa.kind = value;
    else if (key == "value") c.kappa.value = to_double(value, where);
    else if (key == "contrast") c.kappa.contrast = to_double(value, where);
    else if (key == "count") c.kappa.count = to_int(value, where);
    else if (key == "width") c.kappa.width = to_int(value, where);
    else if (key == "height") c.kappa.height = to_int(value, where);
    else if (key == "path") c.kappa.path = value;
    else where.fail("unknown key '" + key + "' in [kappa]");
  } else if (section == "run") {
    if (key == "experiment") c.experiment = value;
    else if (key == "output") c.output = value;
    else if (key == "workers") c.workers = to_int(value, where);
    else if (key == "delta") c.delta = to_double(value, where);
    else if (key == "k_max") c.k_max = to_int(value, where);
    else if (key == "seed") {
      const long long s = to_integer(value, where);
      if (s < 0) where.fail("seed must be non-negative");
      c.seed = static_cast<std::uint64_t>(s);
    } else if (key == "reference") c.reference = value;
    else if (key == "assert_rel_l2") c.assert_rel_l2 = to_double(value, where);
    else where.fail("unknown key '" + key + "' in [run]");
  } else {
    where.fail("key '" + key + "' outside a known section");
  }
}

SpaceTimeFunction source_function(const std::string& name) {
  if (name == "smooth") return [](double x, double y, double t) { return x * y * t; };
  if (name == "rough")
    return [](double x, double y, double t) {
      const double c = std::cos(2.0 * std::numbers::pi * t);
      return (c > 0.0 ? 1.0 : (c < 0.0 ? -1.0 : 0.0)) * x * y;
    };
  if (name == "zero") return [](double, double, double) { return 0.0; };
  throw ConfigError("unknown source '" + name + "' (smooth | rough | zero)");
}

void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  body(out);
  if (!out) throw ConfigError("failed writing " + path.string());
}

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Setup {
  TwoLevelMesh mesh;
  CoefficientField kappa;
  OperatorPair ops;
  ProblemSpec spec;
  SoeApproximation soe;
};

Setup prepare(const ExperimentConfig& c, const Execution& exec, std::ostream& log) {
  TwoLevelMesh mesh = make_mesh(c.coarse_divisions, c.refinement);
  CoefficientField kappa = generate_kappa(c.kappa, mesh, c.seed);
  OperatorPair ops = assemble_operators(mesh, kappa, exec);
  ProblemSpec spec = problem_from_config(c);
  SoeApproximation soe = soe_from_config(c);
  spec.epsilon = soe.epsilon;
  log << "mesh: H = 1/" << mesh.coarse_divisions() << ", h = 1/" << mesh.fine_divisions() << ", kappa in ["
      << kappa.min() << ", " << kappa.max() << "]\n";
  log << "soe: " << soe.size() << " exponentials, bound " << soe.epsilon << '\n';
  const EpsilonCheck check = validate_epsilon(soe.epsilon, spec.alpha, spec.final_time, spec.fine_steps(), c.eta);
  if (!check.admissible)
    log << "warning: SOE bound " << soe.epsilon << " exceeds the admissible " << check.threshold
        << " (stability " << check.stability_bound << ", long-time " << check.long_time_bound << ")\n";
  return {std::move(mesh), std::move(kappa), std::move(ops), std::move(spec), std::move(soe)};
}

double threshold(const ExperimentConfig& c, double fallback) { return c.assert_rel_l2.value_or(fallback); }

void run_soe_accuracy(const ExperimentConfig& c, const RunOptions& opt, const Execution& exec,
                      const std::filesystem::path& out, std::ostream& log) {
  const Setup s = prepare(c, exec, log);
  auto start = Clock::now();
  const Trajectory reference = reference_l1_solve(s.spec, s.mesh, s.ops);
  const double t_ref = seconds_since(start);
  start = Clock::now();
  const Trajectory compressed = fine_soe_solve(s.spec, s.mesh, s.ops, s.soe);
  const double t_soe = seconds_since(start);
  const auto errors = compare_trajectories(s.ops, compressed, reference);
  write_file(out / "soe_accuracy.csv", [&](std::ostream& o) { write_error_csv(o, errors); });
  write_file(out / "soe_table.csv", [&](std::ostream& o) { write_soe_csv(o, s.soe); });
  const double l2 = max_rel_l2(errors);
  const double en = max_rel_energy(errors);
  write_file(out / "summary.txt", [&](std::ostream& o) {
    o << "experiment: soe-accuracy\nalpha: " << c.alpha << "\nn_exp: " << s.soe.size() << "\nepsilon: " << s.soe.epsilon
      << "\nmax_rel_l2_percent: " << 100 * l2 << "\nmax_rel_energy_percent: " << 100 * en
      << "\nseconds_l1: " << t_ref << "\nseconds_soe: " << t_soe << '\n';
  });
  log << "soe vs L1: max rel L2 " << 100 * l2 << "%, max rel energy " << 100 * en << "%\n";
  const double limit = threshold(c, 0.01);
  if (opt.assert_thresholds && l2 > limit) {
    std::ostringstream msg;
    msg << "relative L2 gap " << l2 << " exceeds " << limit;
    throw AcceptanceBreach(msg.str());
  }
}

void run_wemp(const ExperimentConfig& c, const RunOptions& opt, const Execution& exec,
              const std::filesystem::path& out, std::ostream& log) {
  const Setup s = prepare(c, exec, log);
  std::ostringstream timing;
  auto start = Clock::now();
  const PartitionOfUnity pou = build_partition_of_unity(s.mesh, s.kappa, exec);
  const MultiscaleSpace space = assemble_space(s.mesh, s.ops, s.kappa, pou, c.level, exec);
  timing << "space_seconds " << seconds_since(start) << '\n';
  log << "multiscale space: " << space.size() << " of " << space.raw_column_count << " columns kept\n";
  const auto tilde = weighted_coefficient(s.mesh, s.kappa, pou);
  log << "eta(H, level) = " << eta_indicator(s.mesh, c.level, s.kappa, tilde) << '\n';

  start = Clock::now();
  const Trajectory reference =
      c.reference == "soe" ? fine_soe_solve(s.spec, s.mesh, s.ops, s.soe) : reference_l1_solve(s.spec, s.mesh, s.ops);
  timing << "reference_seconds " << seconds_since(start) << '\n';

  start = Clock::now();
  const PropagatorContext ctx = multiscale_context(s.spec, s.mesh, s.ops, space, s.soe, exec);
  const ContractionCheck contraction = contraction_condition(s.soe, s.spec.tau_c);
  log << "contraction hypothesis: " << contraction.lhs << (contraction.holds ? " < " : " >= ") << contraction.rhs
      << (contraction.holds ? "" : " (not satisfied; logged only)") << '\n';
  const WempResult result = wemp_solve(ctx, {c.delta, c.k_max, exec});
  timing << "parareal_seconds " << seconds_since(start) << '\n';

  std::vector<PararealRecord> records;
  double final_l2 = 0.0;
  double final_energy = 0.0;
  for (const PararealIterate& it : result.iterates) {
    timing << "iteration " << it.k << " parallel_seconds " << it.parallel_seconds << " sweep_seconds "
           << it.sweep_seconds << '\n';
    double worst_l2 = 0.0;
    double worst_energy = 0.0;
    for (std::size_t n = 0; n < it.solution.size(); ++n) {
      const Vector lifted = space.lift(it.solution[n]);
      const Vector& ref = reference.states[n];
      const double rl2 = l2_norm(s.ops, ref);
      const double ren = energy_norm(s.ops, ref);
      const Vector diff = lifted - ref;
      PararealRecord r{it.k, static_cast<int>(n), l2_norm(s.ops, diff) / (rl2 > 0 ? rl2 : 1.0),
                       energy_norm(s.ops, diff) / (ren > 0 ? ren : 1.0), it.err};
      // The initial state is a projection, not a solve; the maxima cover t > 0.
      if (n > 0) {
        worst_l2 = std::max(worst_l2, r.rel_l2);
        worst_energy = std::max(worst_energy, r.rel_energy);
      }
      records.push_back(r);
    }
    log << "k = " << it.k << ": err " << it.err << ", max rel L2 " << 100 * worst_l2 << "%, max rel energy "
        << 100 * worst_energy << "% over t > 0\n";
    final_l2 = worst_l2;
    final_energy = worst_energy;
  }
  write_file(out / "parareal.csv", [&](std::ostream& o) { write_parareal_csv(o, records); });
  write_file(out / "timing.log", [&](std::ostream& o) { o << "workers " << exec.workers << '\n' << timing.str(); });
  write_file(out / "soe_table.csv", [&](std::ostream& o) { write_soe_csv(o, s.soe); });
  write_file(out / "summary.txt", [&](std::ostream& o) {
    o << "experiment: " << c.experiment << "\nalpha: " << c.alpha << "\nfinal_time: " << c.final_time
      << "\nlevel: " << c.level << "\nms_dofs: " << space.size() << "\nn_exp: " << s.soe.size()
      << "\niterations: " << result.iterates.back().k << "\nconverged: " << (result.converged ? "yes" : "no")
      << "\nfinal_err: " << result.iterates.back().err << "\nfinal_max_rel_l2_percent: " << 100 * final_l2
      << "\nfinal_max_rel_energy_percent: " << 100 * final_energy << '\n';
  });
  const double limit = threshold(c, 0.10);
  if (opt.assert_thresholds && final_l2 > limit) {
    std::ostringstream msg;
    msg << "relative L2 error " << final_l2 << " after " << result.iterates.back().k << " iterations exceeds " << limit;
    throw AcceptanceBreach(msg.str());
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  if (epsilon.has_value() == n_exp.has_value()) throw ConfigError("give exactly one of epsilon and n_exp in [problem]");
  if (n_exp && (*n_exp < 3 || *n_exp % 2 == 0))
    throw ConfigError("n_exp must be odd and >= 3 (2N + 1 sinc nodes), got " + std::to_string(*n_exp));
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (k_max < 0) throw ConfigError("k_max must be >= 0");
  if (!(delta >= 0.0)) throw ConfigError("delta must be non-negative");
  if (reference != "l1" && reference != "soe") throw ConfigError("reference must be l1 or soe");
  (void)source_function(source);
  problem_from_config(*this).validate();
}

ExperimentConfig parse_config(std::istream& in, const std::string& source_name) {
  ExperimentConfig c;
  std::string section;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const LineError where(source_name, line);
    std::string text = trim(raw.substr(0, raw.find('#')));
    if (text.empty()) continue;
    if (text.front() == '[') {
      if (text.back() != ']') where.fail("unterminated section header");
      section = trim(std::string_view(text).substr(1, text.size() - 2));
      if (section != "problem" && section != "mesh" && section != "kappa" && section != "run")
        where.fail("unknown section [" + section + "]");
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) where.fail("expected 'key = value'");
    const std::string key = trim(std::string_view(text).substr(0, eq));
    const std::string value = trim(std::string_view(text).substr(eq + 1));
    if (key.empty() || value.empty()) where.fail("expected 'key = value'");
    assign(c, section, key, value, where);
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_config(in, path.string());
}

CoefficientField generate_kappa(const KappaConfig& config, const TwoLevelMesh& mesh, std::uint64_t seed) {
  if (config.kind == "constant") {
    if (!(config.value > 0.0)) throw ConfigError("constant coefficient must be positive");
    return uniform_coefficient(mesh, config.value);
  }
  if (config.kind == "raster-file") {
    std::ifstream in(config.path);
    if (!in) throw ConfigError("cannot open coefficient raster " + config.path);
    CoefficientField kappa = read_coefficient(in);
    validate_coefficient(mesh, kappa);
    return kappa;
  }
  if (config.kind != "contrast-inclusions")
    throw ConfigError("unknown kappa kind '" + config.kind + "' (constant | contrast-inclusions | raster-file)");
  if (!(config.contrast > 0.0)) throw ConfigError("inclusion contrast must be positive");
  if (config.count < 0) throw ConfigError("inclusion count must be non-negative");

  CoefficientField kappa = uniform_coefficient(mesh, 1.0);
  if (config.count == 0) return kappa;
  const int n = mesh.fine_divisions();
  const int r = mesh.refinement();
  const int cells = mesh.coarse_cell_count();
  // Each inclusion sits strictly inside its own coarse cell, at least one fine
  // cell away from every coarse edge, so affine partition-of-unity data never
  // cuts through a high-contrast region.
  const int w = config.width > 0 ? config.width : std::max(1, r / 2);
  const int h = config.height > 0 ? config.height : std::max(1, r / 4);
  if (config.count > cells || w > r - 2 || h > r - 2) {
    std::ostringstream msg;
    msg << config.count << " inclusions of " << w << "x" << h << " cells do not fit inside distinct coarse cells of "
        << r << "x" << r << " fine cells (" << cells << " available, one-cell margin)";
    throw ConfigError(msg.str());
  }
  std::mt19937_64 rng(seed);
  std::vector<int> order(static_cast<std::size_t>(cells));
  std::iota(order.begin(), order.end(), 0);
  // Explicit Fisher-Yates so the layout does not depend on the library's shuffle.
  for (int k = cells - 1; k > 0; --k)
    std::swap(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(rng() % static_cast<std::uint64_t>(k + 1))]);
  const int coarse = mesh.coarse_divisions();
  for (int q = 0; q < config.count; ++q) {
    const int cell = order[static_cast<std::size_t>(q)];
    const int x0 = (cell % coarse) * r + 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(r - 1 - w));
    const int y0 = (cell / coarse) * r + 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(r - 1 - h));
    for (int j = y0; j < y0 + h; ++j)
      for (int i = x0; i < x0 + w; ++i) kappa.values[static_cast<std::size_t>(j * n + i)] = config.contrast;
  }
  return kappa;
}

SoeApproximation soe_from_config(const ExperimentConfig& config) {
  if (config.n_exp) return build_soe_with_half_terms(config.alpha, config.tau_f, (*config.n_exp - 1) / 2);
  if (config.epsilon) return build_soe(config.alpha, config.tau_f, *config.epsilon);
  throw ConfigError("give exactly one of epsilon and n_exp in [problem]");
}

ProblemSpec problem_from_config(const ExperimentConfig& config) {
  ProblemSpec spec;
  spec.alpha = config.alpha;
  spec.final_time = config.final_time;
  spec.tau_f = config.tau_f;
  spec.tau_c = config.tau_c;
  spec.level = config.level;
  spec.epsilon = config.epsilon.value_or(1.0);
  spec.initial = [](double x, double y) { return x * (1 - x) * y * (1 - y); };
  spec.source = source_function(config.source);
  return spec;
}

void run_experiment(const ExperimentConfig& config, const RunOptions& options, std::ostream& log) {
  const Execution exec{options.workers.value_or(config.workers)};
  if (exec.workers < 1) throw ConfigError("workers must be >= 1");
  const std::filesystem::path out = options.output.value_or(config.output);
  std::filesystem::create_directories(out);
  log << "experiment " << config.experiment << " -> " << out.string() << " (" << exec.workers << " workers)\n";
  if (config.experiment == "soe-accuracy") {
    run_soe_accuracy(config, options, exec, out, log);
  } else if (config.experiment == "wemp-convergence" || config.experiment == "long-time") {
    run_wemp(config, options, exec, out, log);
  } else if (config.experiment == "unit-oracles") {
    if (!options.oracles) throw ConfigError("no oracle runner available");
    std::ostringstream report;
    const bool ok = options.oracles(report);
    log << report.str();
    write_file(out / "summary.txt", [&](std::ostream& o) { o << "experiment: unit-oracles\n" << report.str(); });
    if (!ok && options.assert_thresholds) throw AcceptanceBreach("an oracle check failed");
  } else {
    throw ConfigError("unknown experiment '" + config.experiment +
                      "' (soe-accuracy | wemp-convergence | long-time | unit-oracles)");
  }
}

}  // namespace wemp
