#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "wemp/errors.hpp"
#include "wemp/experiment.hpp"

using namespace wemp;
namespace fs = std::filesystem;

namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in, "test.cfg");
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("wemp-test-" + name);
  fs::remove_all(dir);
  return dir;
}

const char* small_soe_config = R"(
[problem]
alpha = 0.7
T = 0.2
tau_c = 0.1
tau_f = 1e-2
epsilon = 1e-4
[mesh]
coarse_divisions = 2
refinement = 4
[run]
experiment = soe-accuracy
)";

const char* small_wemp_config = R"(
[problem]
alpha = 0.5
T = 0.3
tau_c = 0.1
tau_f = 1e-2
level = 1
epsilon = 0.5
[mesh]
coarse_divisions = 4
refinement = 4
[kappa]
kind = contrast-inclusions
count = 4
[run]
experiment = wemp-convergence
k_max = 2
delta = 0
seed = 3
)";

}  // namespace

TEST_SUITE("experiment") {
  TEST_CASE("parser reads every section and reports line numbers") {
    const ExperimentConfig c = parse(small_wemp_config);
    CHECK(c.alpha == 0.5);
    CHECK(c.final_time == doctest::Approx(0.3));
    CHECK(c.level == 1);
    CHECK(c.kappa.kind == "contrast-inclusions");
    CHECK(c.kappa.count == 4);
    CHECK(c.seed == 3);
    CHECK(c.k_max == 2);
    try {
      parse("[problem]\nalpha = 0.5\nepsilon = 1\n\n[mesh]\nbogus = 1\n");
      FAIL("no error");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("test.cfg:6") != std::string::npos);
    }
    CHECK_THROWS_AS(parse("[problem]\nalpha = abc\nepsilon = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse("[nowhere]\n"), ConfigError);
    CHECK_THROWS_AS(parse("[problem\n"), ConfigError);
    CHECK_THROWS_AS(parse("[problem]\nalpha 0.5\n"), ConfigError);
    CHECK_NOTHROW(parse("# comment only\n[problem]\nepsilon = 1 # trailing\n"));
  }

  TEST_CASE("exactly one of epsilon and the term count is accepted") {
    CHECK_THROWS_AS(parse("[problem]\n"), ConfigError);
    CHECK_THROWS_AS(parse("[problem]\nepsilon = 1\nn_exp = 19\n"), ConfigError);
    CHECK_NOTHROW(parse("[problem]\nn_exp = 19\n"));
    CHECK_THROWS_AS(parse("[problem]\nn_exp = 20\n"), ConfigError);
    CHECK_THROWS_AS(parse("[problem]\nn_exp = 1\n"), ConfigError);
    const ExperimentConfig c = parse("[problem]\nalpha = 0.9\ntau_f = 1e-4\nn_exp = 19\n");
    CHECK(soe_from_config(c).size() == 19);
  }

  TEST_CASE("invalid problem grids are rejected at parse time") {
    CHECK_THROWS_AS(parse("[problem]\nepsilon = 1\ntau_c = 0.3\n"), ConfigError);
    CHECK_THROWS_AS(parse("[problem]\nepsilon = 1\nalpha = 1.5\n"), ConfigError);
    CHECK_THROWS_AS(parse("[problem]\nepsilon = 1\n[run]\nworkers = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse("[problem]\nepsilon = 1\n[run]\nreference = exact\n"), ConfigError);
    CHECK_THROWS_AS(parse("[problem]\nepsilon = 1\n[run]\nseed = -1\n"), ConfigError);
  }

  TEST_CASE("constant coefficient generator") {
    const TwoLevelMesh mesh = make_mesh(2, 2);
    KappaConfig k;
    k.value = 3.5;
    const CoefficientField f = generate_kappa(k, mesh, 1);
    for (double v : f.values) CHECK(v == 3.5);
    k.value = -1;
    CHECK_THROWS_AS(generate_kappa(k, mesh, 1), ConfigError);
  }

  TEST_CASE("inclusions sit strictly inside distinct coarse cells") {
    const TwoLevelMesh mesh = make_mesh(8, 8);
    KappaConfig k;
    k.kind = "contrast-inclusions";
    k.width = 4;
    k.height = 2;
    const CoefficientField f = generate_kappa(k, mesh, 7);
    int high = 0;
    std::set<int> coarse_cells;
    const int n = mesh.fine_divisions();
    for (int c = 0; c < mesh.cell_count(); ++c) {
      if (f.values[static_cast<std::size_t>(c)] == 1.0) continue;
      CHECK(f.values[static_cast<std::size_t>(c)] == 1e4);
      ++high;
      coarse_cells.insert(mesh.coarse_cell_of(c));
      const int i = c % n;
      const int j = c / n;
      CHECK(i % 8 != 0);
      CHECK(i % 8 != 7);
      CHECK(j % 8 != 0);
      CHECK(j % 8 != 7);
    }
    CHECK(high == 8 * 4 * 2);
    CHECK(coarse_cells.size() == 8);
    k.width = 7;
    CHECK_THROWS_AS(generate_kappa(k, mesh, 7), ConfigError);
    k.width = 4;
    k.count = 65;
    CHECK_THROWS_AS(generate_kappa(k, mesh, 7), ConfigError);
  }

  TEST_CASE("generator is a function of the seed") {
    const TwoLevelMesh mesh = make_mesh(8, 8);
    KappaConfig k;
    k.kind = "contrast-inclusions";
    CHECK(generate_kappa(k, mesh, 11).values == generate_kappa(k, mesh, 11).values);
    CHECK(generate_kappa(k, mesh, 11).values != generate_kappa(k, mesh, 12).values);
  }

  TEST_CASE("raster coefficients load from file") {
    const TwoLevelMesh mesh = make_mesh(1, 2);
    const fs::path dir = scratch("raster");
    fs::create_directories(dir);
    CoefficientField field = uniform_coefficient(mesh, 1.0);
    field.values[2] = 9.0;
    {
      std::ofstream out(dir / "k.txt");
      write_coefficient(out, field);
    }
    KappaConfig k;
    k.kind = "raster-file";
    k.path = (dir / "k.txt").string();
    CHECK(generate_kappa(k, mesh, 0).values == field.values);
    k.path = (dir / "missing.txt").string();
    CHECK_THROWS_AS(generate_kappa(k, mesh, 0), ConfigError);
    k.kind = "checkerboard";
    CHECK_THROWS_AS(generate_kappa(k, mesh, 0), ConfigError);
    fs::remove_all(dir);
  }

  TEST_CASE("oracle experiment writes a passing summary") {
    const fs::path dir = scratch("oracles");
    ExperimentConfig c = parse("[problem]\nepsilon = 1\n[run]\nexperiment = unit-oracles\n");
    RunOptions opts;
    opts.assert_thresholds = true;
    opts.output = dir;
    opts.oracles = [](std::ostream& report) { return oracles::run_all(report); };
    std::ostringstream log;
    CHECK_NOTHROW(run_experiment(c, opts, log));
    CHECK(slurp(dir / "summary.txt").find("unit-oracles") != std::string::npos);
    opts.oracles = nullptr;
    CHECK_THROWS_AS(run_experiment(c, opts, log), ConfigError);
    c.experiment = "nothing";
    CHECK_THROWS_AS(run_experiment(c, opts, log), ConfigError);
    fs::remove_all(dir);
  }

  TEST_CASE("compressed accuracy experiment is reproducible byte for byte") {
    const ExperimentConfig c = parse(small_soe_config);
    std::ostringstream log;
    RunOptions opts;
    opts.assert_thresholds = true;
    const fs::path first = scratch("soe-a");
    const fs::path second = scratch("soe-b");
    opts.output = first;
    run_experiment(c, opts, log);
    opts.output = second;
    run_experiment(c, opts, log);
    const std::string a = slurp(first / "soe_accuracy.csv");
    CHECK(a.rfind("t,relL2,relEnergy", 0) == 0);
    CHECK(a == slurp(second / "soe_accuracy.csv"));
    CHECK(slurp(first / "soe_table.csv") == slurp(second / "soe_table.csv"));
    fs::remove_all(first);
    fs::remove_all(second);
  }

  TEST_CASE("threshold breach raises the acceptance error") {
    ExperimentConfig c = parse(small_soe_config);
    c.assert_rel_l2 = 0.0;
    c.epsilon = 1.0;
    RunOptions opts;
    opts.assert_thresholds = true;
    opts.output = scratch("breach");
    std::ostringstream log;
    CHECK_THROWS_AS(run_experiment(c, opts, log), AcceptanceBreach);
    fs::remove_all(*opts.output);
  }

  TEST_CASE("parareal experiment output does not depend on the worker count") {
    const ExperimentConfig c = parse(small_wemp_config);
    std::ostringstream log;
    RunOptions opts;
    const fs::path serial = scratch("wemp-1");
    const fs::path parallel = scratch("wemp-4");
    opts.output = serial;
    opts.workers = 1;
    run_experiment(c, opts, log);
    opts.output = parallel;
    opts.workers = 4;
    run_experiment(c, opts, log);
    const std::string one = slurp(serial / "parareal.csv");
    CHECK(one.rfind("k,n,relL2,relEnergy,err", 0) == 0);
    CHECK(one == slurp(parallel / "parareal.csv"));
    CHECK(slurp(parallel / "summary.txt").find("iterations: 2") != std::string::npos);
    fs::remove_all(serial);
    fs::remove_all(parallel);
  }
}
