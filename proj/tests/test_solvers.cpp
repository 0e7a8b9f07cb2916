#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>

#include "wemp/errors.hpp"
#include "wemp/experiment.hpp"
#include "wemp/solvers.hpp"

using namespace wemp;

namespace {

ProblemSpec smooth_problem(double alpha, double final_time, double tau_f, double tau_c) {
  ProblemSpec spec;
  spec.alpha = alpha;
  spec.final_time = final_time;
  spec.tau_f = tau_f;
  spec.tau_c = tau_c;
  spec.initial = [](double x, double y) { return x * (1 - x) * y * (1 - y); };
  spec.source = [](double x, double y, double t) { return x * y * t; };
  return spec;
}

double max_gap(const OperatorPair& ops, const Trajectory& a, const Trajectory& b) {
  return max_rel_l2(compare_trajectories(ops, a, b));
}

}  // namespace

TEST_SUITE("solvers") {
  TEST_CASE("problem grids must nest exactly") {
    ProblemSpec spec = smooth_problem(0.5, 1.0, 1e-3, 0.1);
    CHECK_NOTHROW(spec.validate());
    CHECK(spec.coarse_steps() == 10);
    CHECK(spec.substeps() == 100);
    CHECK(spec.fine_steps() == 1000);
    spec.tau_c = 0.3;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec.tau_c = 0.1;
    spec.tau_f = 3e-2;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec.tau_f = 1e-3;
    spec.alpha = 1.0;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
  }

  TEST_CASE("zero data gives the zero trajectory") {
    const TwoLevelMesh mesh = make_mesh(2, 4);
    const OperatorPair ops = assemble_operators(mesh, uniform_coefficient(mesh, 1.0));
    ProblemSpec spec = smooth_problem(0.5, 0.2, 1e-2, 0.1);
    spec.initial = [](double, double) { return 0.0; };
    spec.source = [](double, double, double) { return 0.0; };
    const Trajectory t = reference_l1_solve(spec, mesh, ops, true);
    CHECK(t.states.size() == 21);
    for (const Vector& s : t.states) CHECK(s.cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("diagonal-symmetric data keeps the diagonal symmetry") {
    const TwoLevelMesh mesh = make_mesh(2, 6);
    const OperatorPair ops = assemble_operators(mesh, uniform_coefficient(mesh, 1.0));
    const ProblemSpec spec = smooth_problem(0.6, 0.2, 1e-2, 0.1);
    const Trajectory t = reference_l1_solve(spec, mesh, ops);
    const int n = mesh.fine_divisions();
    for (const Vector& s : t.states)
      for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i) CHECK(std::abs(s[mesh.node(i, j)] - s[mesh.node(j, i)]) < 1e-9);
  }

  TEST_CASE("trajectories are increasing in time and thinned to coarse times") {
    const TwoLevelMesh mesh = make_mesh(2, 2);
    const OperatorPair ops = assemble_operators(mesh, uniform_coefficient(mesh, 1.0));
    const ProblemSpec spec = smooth_problem(0.5, 0.5, 1e-2, 0.1);
    const SoeApproximation soe = build_soe(0.5, 1e-2, 1e-2);
    const Trajectory t = fine_soe_solve(spec, mesh, ops, soe);
    REQUIRE(t.times.size() == 6);
    for (std::size_t k = 1; k < t.times.size(); ++k) {
      CHECK(t.times[k] > t.times[k - 1]);
      CHECK(t.states[k].size() == mesh.node_count());
    }
    CHECK(t.times.back() == doctest::Approx(0.5));
  }

  TEST_CASE("compressed and L1 fine solves agree at alpha 0.9") {
    const TwoLevelMesh mesh = make_mesh(2, 8);
    const OperatorPair ops = assemble_operators(mesh, uniform_coefficient(mesh, 1.0));
    const ProblemSpec spec = smooth_problem(0.9, 1.0, 1e-3, 0.1);
    const SoeApproximation soe = build_soe_with_half_terms(0.9, 1e-3, 25);
    const Trajectory ref = reference_l1_solve(spec, mesh, ops);
    const Trajectory fast = fine_soe_solve(spec, mesh, ops, soe);
    CHECK(max_gap(ops, fast, ref) <= 2e-3);
  }

  TEST_CASE("rough source does not degrade the compressed scheme by more than a factor two") {
    const TwoLevelMesh mesh = make_mesh(2, 8);
    const OperatorPair ops = assemble_operators(mesh, uniform_coefficient(mesh, 1.0));
    ProblemSpec smooth = smooth_problem(0.9, 1.0, 1e-3, 0.1);
    ProblemSpec rough = smooth;
    rough.source = [](double x, double y, double t) {
      const double c = std::cos(2 * M_PI * t);
      return (c > 0 ? 1.0 : (c < 0 ? -1.0 : 0.0)) * x * y;
    };
    const SoeApproximation soe = build_soe_with_half_terms(0.9, 1e-3, 25);
    const double gap_smooth = max_gap(ops, fine_soe_solve(smooth, mesh, ops, soe), reference_l1_solve(smooth, mesh, ops));
    const double gap_rough = max_gap(ops, fine_soe_solve(rough, mesh, ops, soe), reference_l1_solve(rough, mesh, ops));
    CAPTURE(gap_smooth);
    CAPTURE(gap_rough);
    CHECK(gap_rough <= 2 * gap_smooth);
  }

  TEST_CASE("unforced solutions stay bounded across the parameter matrix") {
    const TwoLevelMesh mesh = make_mesh(2, 4);
    KappaConfig k;
    k.kind = "contrast-inclusions";
    k.contrast = 1e4;
    k.count = 4;
    const OperatorPair ops = assemble_operators(mesh, generate_kappa(k, mesh, 3));
    for (double alpha : {0.1, 0.5, 0.9})
      for (double tau_f : {1e-2, 1e-3}) {
        ProblemSpec spec = smooth_problem(alpha, 1.0, tau_f, 0.1);
        spec.source = [](double, double, double) { return 0.0; };
        const SoeApproximation soe = build_soe(alpha, tau_f, 0.5);
        const Trajectory t = fine_soe_solve(spec, mesh, ops, soe, true);
        const double data = t.states.front().cwiseAbs().maxCoeff();
        double worst = 0.0;
        for (const Vector& s : t.states) worst = std::max(worst, s.cwiseAbs().maxCoeff());
        CAPTURE(alpha);
        CAPTURE(tau_f);
        CHECK(worst <= 10 * data);
        CHECK(t.states.back().allFinite());
      }
  }

  TEST_CASE("identical inputs give bitwise identical trajectories") {
    const TwoLevelMesh mesh = make_mesh(2, 4);
    const OperatorPair ops = assemble_operators(mesh, uniform_coefficient(mesh, 2.0));
    const ProblemSpec spec = smooth_problem(0.3, 0.2, 1e-2, 0.1);
    const SoeApproximation soe = build_soe(0.3, 1e-2, 1e-3);
    const Trajectory a = fine_soe_solve(spec, mesh, ops, soe);
    const Trajectory b = fine_soe_solve(spec, mesh, ops, soe);
    for (std::size_t k = 0; k < a.states.size(); ++k) CHECK((a.states[k] - b.states[k]).norm() == 0.0);
  }

  TEST_CASE("dense and sparse spaces give the same compressed solve") {
    const TwoLevelMesh mesh = make_mesh(2, 3);
    const OperatorPair ops = assemble_operators(mesh, uniform_coefficient(mesh, 1.0));
    const ProblemSpec spec = smooth_problem(0.5, 0.2, 1e-2, 0.1);
    const SoeApproximation soe = build_soe(0.5, 1e-2, 1e-3);
    const Trajectory fine = fine_soe_solve(spec, mesh, ops, soe);
    const DenseSpace dense{DenseMatrix(ops.mass_free), DenseMatrix(ops.stiffness_free)};
    const Vector u0 = ops.restrict_to_free(nodal_values(mesh, [&](double x, double y, double) { return spec.initial(x, y); }, 0.0));
    const Trajectory coeffs = soe_march(dense, soe, spec.tau_f, spec.fine_steps(), u0, [&](int m) {
      return ops.restrict_to_free(assemble_load(mesh, ops, spec.source, m * spec.tau_f));
    }, spec.substeps());
    REQUIRE(coeffs.states.size() == fine.states.size());
    for (std::size_t k = 0; k < fine.states.size(); ++k)
      CHECK((ops.extend_from_free(coeffs.states[k]) - fine.states[k]).norm() <= 1e-12 * (1 + fine.states[k].norm()));
  }

  TEST_CASE("multiscale error decreases from level one to level three") {
    const TwoLevelMesh mesh = make_mesh(4, 8);
    KappaConfig k;
    k.kind = "contrast-inclusions";
    k.contrast = 1e4;
    const CoefficientField kappa = generate_kappa(k, mesh, 5);
    const OperatorPair ops = assemble_operators(mesh, kappa);
    const PartitionOfUnity pou = build_partition_of_unity(mesh, kappa);
    const ProblemSpec spec = smooth_problem(0.5, 0.2, 1e-2, 0.1);
    const SoeApproximation soe = build_soe(0.5, 1e-2, 1e-3);
    const Trajectory fine = fine_soe_solve(spec, mesh, ops, soe);
    auto error = [&](int level) {
      const MultiscaleSpace space = assemble_space(mesh, ops, kappa, pou, level);
      const Trajectory ms = lift_trajectory(space, multiscale_soe_solve(spec, mesh, ops, space, soe));
      auto samples = compare_trajectories(ops, ms, fine);
      samples.erase(samples.begin());
      return max_rel_energy(samples);
    };
    CHECK(error(3) < error(1));
  }

  TEST_CASE("L1 history budget is enforced") {
    const DenseSpace scalar(DenseMatrix::Ones(1, 1), DenseMatrix::Ones(1, 1));
    CHECK_THROWS_AS(l1_march(scalar, 0.5, 1e-3, 1000, Vector::Ones(1), [](int) { return Vector::Zero(1); }, 1, 64),
                    ConfigError);
  }

  TEST_CASE("error comparison, CSV and state round trip") {
    const TwoLevelMesh mesh = make_mesh(1, 2);
    const OperatorPair ops = assemble_operators(mesh, uniform_coefficient(mesh, 1.0));
    Trajectory a;
    a.times = {0.0, 0.1};
    a.states = {Vector::Ones(mesh.node_count()), Vector::Ones(mesh.node_count())};
    Trajectory b = a;
    b.states[1] *= 1.1;
    const auto samples = compare_trajectories(ops, b, a);
    CHECK(samples[0].rel_l2 == 0.0);
    CHECK(samples[1].rel_l2 == doctest::Approx(0.1));
    Trajectory c = a;
    c.times[1] = 0.2;
    CHECK_THROWS_AS(compare_trajectories(ops, c, a), ConfigError);
    std::stringstream csv;
    write_error_csv(csv, samples);
    std::string header;
    std::getline(csv, header);
    CHECK(header == "t,relL2,relEnergy");

    const Vector v = Vector::LinSpaced(7, -3.5, 2.25);
    std::stringstream io;
    write_state(io, v);
    CHECK(io.str().size() == 16 + 7 * 8);
    CHECK(io.str().substr(0, 8) == "WEMPVEC1");
    CHECK((read_state(io) - v).norm() == 0.0);
    std::stringstream bad("NOTMAGIC........");
    CHECK_THROWS(read_state(bad));
  }
}
