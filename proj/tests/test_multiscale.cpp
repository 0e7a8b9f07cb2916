#include <doctest.h>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "../oracles/oracles.hpp"
#include "wemp/errors.hpp"
#include "wemp/experiment.hpp"
#include "wemp/multiscale.hpp"

using namespace wemp;

namespace {

CoefficientField inclusions(const TwoLevelMesh& mesh, double contrast, std::uint64_t seed = 7) {
  KappaConfig k;
  k.kind = "contrast-inclusions";
  k.contrast = contrast;
  k.count = std::min(8, mesh.coarse_cell_count());
  return generate_kappa(k, mesh, seed);
}

CoefficientField lognormal(const TwoLevelMesh& mesh, double contrast, unsigned seed) {
  CoefficientField kappa = uniform_coefficient(mesh, 1.0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, std::log10(contrast));
  for (double& v : kappa.values) v = std::pow(10.0, u(rng));
  return kappa;
}

// Local index of the image of (i, j) under a symmetry of the box that maps
// the fine triangulation to itself.
int mapped(const NodeBox& b, int i, int j, int which) {
  const int w = b.width();
  const int x = i - b.i0;
  const int y = j - b.j0;
  switch (which) {
    case 0: return b.local(b.i0 + w - x, b.j0 + w - y);  // half turn
    case 1: return b.local(b.i0 + y, b.j0 + x);          // main diagonal
    default: return b.local(b.i0 + w - y, b.j0 + w - x); // anti-diagonal
  }
}

double steady_energy_error(const TwoLevelMesh& mesh, const OperatorPair& ops, const CoefficientField& kappa,
                           const PartitionOfUnity& pou, int level) {
  const Vector load = assemble_load(mesh, ops, [](double, double, double) { return 1.0; }, 0.0);
  const Vector fine = ops.extend_from_free(solve_spd(ops.stiffness_free, ops.restrict_to_free(load)));
  const MultiscaleSpace space = assemble_space(mesh, ops, kappa, pou, level);
  const Vector c = Eigen::LLT<DenseMatrix>(space.stiffness).solve(space.basis.transpose() * load);
  return energy_norm(ops, space.lift(c) - fine) / energy_norm(ops, fine);
}

}  // namespace

TEST_SUITE("multiscale") {
  TEST_CASE("partition of unity sums to one, stays in [0, 1] and interpolates at coarse vertices") {
    const TwoLevelMesh mesh = make_mesh(4, 6);
    for (const CoefficientField& kappa :
         {uniform_coefficient(mesh, 1.0), inclusions(mesh, 1e4), lognormal(mesh, 1e4, 3)}) {
      const PartitionOfUnity pou = build_partition_of_unity(mesh, kappa);
      REQUIRE(pou.functions.size() == static_cast<std::size_t>(mesh.coarse_vertex_count()));
      Vector sum = Vector::Zero(mesh.node_count());
      for (const Vector& chi : pou.functions) {
        sum += chi;
        CHECK(chi.minCoeff() >= -1e-10);
        CHECK(chi.maxCoeff() <= 1.0 + 1e-10);
      }
      CHECK((sum.array() - 1.0).abs().maxCoeff() <= 1e-10);
      for (int v = 0; v < mesh.coarse_vertex_count(); ++v)
        for (int w = 0; w < mesh.coarse_vertex_count(); ++w) {
          const GridIndex g = mesh.coarse_vertex_position(w);
          const int node = mesh.node(g.i * mesh.refinement(), g.j * mesh.refinement());
          CHECK(pou.functions[static_cast<std::size_t>(v)][node] == (v == w ? 1.0 : 0.0));
        }
    }
  }

  TEST_CASE("partition function is supported on its neighborhood") {
    const TwoLevelMesh mesh = make_mesh(3, 4);
    const PartitionOfUnity pou = build_partition_of_unity(mesh, lognormal(mesh, 100, 8));
    for (int v = 0; v < mesh.coarse_vertex_count(); ++v) {
      const CoarseNeighborhood hood = coarse_neighborhood(mesh, v);
      const std::set<int> inside(hood.nodes.begin(), hood.nodes.end());
      for (int k = 0; k < mesh.node_count(); ++k)
        if (!inside.count(k)) CHECK(pou.functions[static_cast<std::size_t>(v)][k] == 0.0);
    }
  }

  TEST_CASE("partition function on one cell matches a dense harmonic solve") {
    const TwoLevelMesh mesh = make_mesh(1, 6);
    const PartitionOfUnity pou = build_partition_of_unity(mesh, uniform_coefficient(mesh, 1.0));
    const Eigen::VectorXd ref =
        oracles::five_point_harmonic(6, [](int i, int j) { return (1 - i / 6.0) * (1 - j / 6.0); });
    CHECK((pou.functions[0] - ref).cwiseAbs().maxCoeff() < 1e-10);
  }

  TEST_CASE("parallel partition of unity is bitwise identical") {
    const TwoLevelMesh mesh = make_mesh(4, 4);
    const CoefficientField kappa = lognormal(mesh, 1e3, 2);
    const PartitionOfUnity a = build_partition_of_unity(mesh, kappa);
    const PartitionOfUnity b = build_partition_of_unity(mesh, kappa, Execution{4});
    for (std::size_t v = 0; v < a.functions.size(); ++v) CHECK((a.functions[v] - b.functions[v]).norm() == 0.0);
  }

  TEST_CASE("edge wavelets: counts, orthonormality and the Haar step") {
    const auto zero = edge_wavelets(0, 4, 0.5);
    REQUIRE(zero.size() == 1);
    for (double s : zero[0].segment_values) CHECK(s == doctest::Approx(1.0 / std::sqrt(0.5)));

    for (int level : {1, 2, 3}) {
      const int segments = 8;
      const double length = 0.25;
      const auto w = edge_wavelets(level, segments, length);
      REQUIRE(w.size() == static_cast<std::size_t>(1 << level));
      for (std::size_t a = 0; a < w.size(); ++a)
        for (std::size_t b = 0; b < w.size(); ++b) {
          double g = 0.0;
          for (int k = 0; k < segments; ++k)
            g += w[a].segment_values[static_cast<std::size_t>(k)] * w[b].segment_values[static_cast<std::size_t>(k)] *
                 length / segments;
          CHECK(std::abs(g - (a == b ? 1.0 : 0.0)) <= 1e-12);
        }
    }

    const auto two = edge_wavelets(2, 4, 2.0);
    const double v = 1.0 / std::sqrt(2.0);
    CHECK(two[1].segment_values == std::vector<double>{v, v, -v, -v});
    CHECK_THROWS_AS(edge_wavelets(3, 4, 1.0), ConfigError);
  }

  TEST_CASE("nodal trace averages adjacent segments and halves the ends") {
    const auto w = edge_wavelets(2, 4, 1.0);
    for (const EdgeWavelet& e : w) {
      REQUIRE(e.trace.size() == 5);
      CHECK(e.trace[0] == doctest::Approx(0.5 * e.segment_values[0]));
      CHECK(e.trace[4] == doctest::Approx(0.5 * e.segment_values[3]));
      for (int k = 1; k < 4; ++k)
        CHECK(e.trace[k] == doctest::Approx(0.5 * (e.segment_values[static_cast<std::size_t>(k - 1)] +
                                                   e.segment_values[static_cast<std::size_t>(k)])));
    }
  }

  TEST_CASE("harmonic lifts: constants, linearity and antisymmetry") {
    const TwoLevelMesh mesh = make_mesh(4, 4);
    const int vertex = 2 * 5 + 2;
    const NeighborhoodProblem high(mesh, lognormal(mesh, 1e4, 6), coarse_neighborhood(mesh, vertex));
    const int segments = 8;
    const auto w = edge_wavelets(2, segments, segments * mesh.fine_size());
    const Vector unit_trace = Vector::Ones(segments + 1);
    Vector ends = unit_trace;
    ends[0] = ends[segments] = 0.5;
    Vector data = Vector::Zero(high.neighborhood().box.node_count());
    for (int side = 0; side < 4; ++side) data += high.side_data(side, ends);
    CHECK((high.harmonic_lift(data).array() - 1.0).abs().maxCoeff() < 1e-10);

    const Vector d1 = high.side_data(0, w[1].trace);
    const Vector d2 = high.side_data(3, w[2].trace);
    const Vector combined = high.harmonic_lift(2.0 * d1 - 0.5 * d2);
    CHECK((combined - (2.0 * high.harmonic_lift(d1) - 0.5 * high.harmonic_lift(d2))).norm() <=
          1e-10 * combined.norm());

    const NeighborhoodProblem flat(mesh, uniform_coefficient(mesh, 1.0), coarse_neighborhood(mesh, vertex));
    const NodeBox& b = flat.neighborhood().box;
    const Vector lift = flat.harmonic_lift(flat.side_data(0, w[1].trace));
    double asym = 0.0;
    for (int j = b.j0; j <= b.j1; ++j)
      for (int i = b.i0; i <= b.i1; ++i)
        asym = std::max(asym, std::abs(lift[b.local(i, j)] + lift[b.local(b.i0 + b.i1 - i, j)]));
    CHECK(asym < 1e-10);
  }

  TEST_CASE("Neumann corrector: gauge, compatibility, balance and mesh symmetry") {
    const TwoLevelMesh mesh = make_mesh(4, 4);
    const CoefficientField kappa = uniform_coefficient(mesh, 1.0);
    const PartitionOfUnity pou = build_partition_of_unity(mesh, kappa);
    const std::vector<double> tilde = weighted_coefficient(mesh, kappa, pou);
    const NeighborhoodProblem p(mesh, kappa, coarse_neighborhood(mesh, 2 * 5 + 2));
    const NeighborhoodProblem::NeumannSolution s = p.neumann_corrector(tilde);
    const Vector ones = Vector::Ones(s.values.size());
    CHECK(std::abs(ones.dot(p.operators().mass * s.values)) <= 1e-10);
    CHECK(s.compatibility <= 1e-10);
    CHECK(std::abs(ones.dot(p.operators().stiffness * s.values)) <= 1e-10);
    CHECK(s.values.norm() > 0.0);
    const NodeBox& b = p.neighborhood().box;
    for (int which = 0; which < 3; ++which) {
      double err = 0.0;
      for (int j = b.j0; j <= b.j1; ++j)
        for (int i = b.i0; i <= b.i1; ++i)
          err = std::max(err, std::abs(s.values[b.local(i, j)] - s.values[mapped(b, i, j, which)]));
      CAPTURE(which);
      CHECK(err < 1e-8);
    }

    const CoefficientField rough = lognormal(mesh, 1e4, 12);
    const PartitionOfUnity rough_pou = build_partition_of_unity(mesh, rough);
    const NeighborhoodProblem q(mesh, rough, coarse_neighborhood(mesh, 1 * 5 + 3));
    const auto r = q.neumann_corrector(weighted_coefficient(mesh, rough, rough_pou));
    CHECK(r.compatibility <= 1e-10);
    CHECK(r.values.allFinite());
  }

  TEST_CASE("weighted coefficient: hand value, positivity and linear scaling") {
    const TwoLevelMesh tiny = make_mesh(1, 2);
    const CoefficientField one = uniform_coefficient(tiny, 1.0);
    const PartitionOfUnity tiny_pou = build_partition_of_unity(tiny, one);
    // Corner values 1, 1/2, 1/2, 1/4 of each bilinear-like function give 3 per cell.
    for (double v : weighted_coefficient(tiny, one, tiny_pou)) CHECK(v == doctest::Approx(3.0).epsilon(1e-14));

    const TwoLevelMesh mesh = make_mesh(1, 6);
    const CoefficientField kappa = uniform_coefficient(mesh, 1.0);
    const PartitionOfUnity pou = build_partition_of_unity(mesh, kappa);
    const auto base = weighted_coefficient(mesh, kappa, pou);
    for (double v : base) CHECK(v > 0.0);
    const auto scaled = weighted_coefficient(mesh, uniform_coefficient(mesh, 7.0), pou);
    for (std::size_t c = 0; c < base.size(); ++c) CHECK(scaled[c] == doctest::Approx(7.0 * base[c]).epsilon(1e-14));
  }

  TEST_CASE("eta indicator: limits, level monotonicity and coarse-size scaling") {
    const TwoLevelMesh coarse = make_mesh(4, 4);
    const TwoLevelMesh finer = make_mesh(8, 4);
    const CoefficientField k4 = uniform_coefficient(coarse, 1.0);
    const CoefficientField k8 = uniform_coefficient(finer, 1.0);
    const auto t4 = weighted_coefficient(coarse, k4, build_partition_of_unity(coarse, k4));
    const auto t8 = weighted_coefficient(finer, k8, build_partition_of_unity(finer, k8));
    double previous = INFINITY;
    for (int level = 0; level <= 6; ++level) {
      const double eta = eta_indicator(coarse, level, k4, t4);
      CHECK(eta < previous);
      previous = eta;
    }
    const double first4 = eta_indicator(coarse, 200, k4, t4);
    const double first8 = eta_indicator(finer, 200, k8, t8);
    CHECK(first4 == doctest::Approx(0.25 * std::sqrt(*std::max_element(t4.begin(), t4.end()))));
    CHECK(first8 / first4 == doctest::Approx(0.5).epsilon(0.1));
  }

  TEST_CASE("assembled space: column count, boundary zeros, locality, SPD mass, Galerkin consistency") {
    const TwoLevelMesh mesh = make_mesh(4, 4);
    const CoefficientField kappa = inclusions(mesh, 1e4, 3);
    const OperatorPair ops = assemble_operators(mesh, kappa);
    const PartitionOfUnity pou = build_partition_of_unity(mesh, kappa);
    const MultiscaleSpace space = assemble_space(mesh, ops, kappa, pou, 1);
    CHECK(space.raw_column_count == 81);
    CHECK(space.size() <= 81);
    CHECK(2 * space.size() >= space.raw_column_count);
    CHECK(space.columns.size() == static_cast<std::size_t>(space.size()));
    for (int col = 0; col < space.basis.outerSize(); ++col) {
      const CoarseNeighborhood hood = coarse_neighborhood(mesh, space.columns[static_cast<std::size_t>(col)].vertex);
      const std::set<int> inside(hood.nodes.begin(), hood.nodes.end());
      for (SparseMatrix::InnerIterator it(space.basis, col); it; ++it) {
        CHECK_FALSE(mesh.on_boundary(static_cast<int>(it.row())));
        CHECK(inside.count(static_cast<int>(it.row())) == 1);
      }
    }
    const Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(space.mass);
    CHECK(eig.eigenvalues().minCoeff() > 0.0);
    CHECK(std::isfinite(eig.eigenvalues().maxCoeff() / eig.eigenvalues().minCoeff()));

    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    Vector c(space.size());
    for (auto& x : c) x = g(rng);
    const Vector v = space.lift(c);
    const double fine = v.dot(ops.stiffness * v);
    CHECK(c.dot(space.stiffness * c) == doctest::Approx(fine).epsilon(1e-12));
    CHECK(c.dot(space.mass * c) == doctest::Approx(v.dot(ops.mass * v)).epsilon(1e-12));
  }

  TEST_CASE("space assembly does not depend on the worker count") {
    const TwoLevelMesh mesh = make_mesh(4, 4);
    const CoefficientField kappa = lognormal(mesh, 1e3, 4);
    const OperatorPair ops = assemble_operators(mesh, kappa);
    const PartitionOfUnity pou = build_partition_of_unity(mesh, kappa);
    const MultiscaleSpace a = assemble_space(mesh, ops, kappa, pou, 2);
    const MultiscaleSpace b = assemble_space(mesh, ops, kappa, pou, 2, Execution{4});
    CHECK((DenseMatrix(a.basis) - DenseMatrix(b.basis)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.stiffness - b.stiffness).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("rank filter drops duplicated columns and keeps independent ones") {
    DenseMatrix basis(4, 3);
    basis << 1, 0, 1, 0, 1, 0, 0, 0, 0, 1, 1, 1;
    const DenseMatrix gram = basis.transpose() * basis;
    CHECK(rank_filter(gram) == std::vector<int>{0, 1});
    CHECK(rank_filter(DenseMatrix::Identity(5, 5)).size() == 5);
  }

  TEST_CASE("projection reproduces the span and is idempotent") {
    const TwoLevelMesh mesh = make_mesh(4, 4);
    const CoefficientField kappa = inclusions(mesh, 1e4, 5);
    const OperatorPair ops = assemble_operators(mesh, kappa);
    const MultiscaleSpace space = assemble_space(mesh, ops, kappa, build_partition_of_unity(mesh, kappa), 1);
    const Vector c = Vector::LinSpaced(space.size(), -1.0, 1.0);
    const Vector v = space.lift(c);
    const Vector back = space.lift(edge_projection(space, ops, v));
    CHECK(l2_norm(ops, back - v) <= 1e-10 * l2_norm(ops, v));
    const Vector rough = nodal_values(mesh, [](double x, double y, double) { return std::sin(17 * x) * std::cos(13 * y); }, 0);
    const Vector once = space.lift(edge_projection(space, ops, rough));
    const Vector twice = space.lift(edge_projection(space, ops, once));
    CHECK(l2_norm(ops, twice - once) <= 1e-10 * l2_norm(ops, once));
  }

  TEST_CASE("projection error of an oscillatory function decreases with the level") {
    const TwoLevelMesh mesh = make_mesh(4, 8);
    const CoefficientField kappa = inclusions(mesh, 1e4, 9);
    const OperatorPair ops = assemble_operators(mesh, kappa);
    const PartitionOfUnity pou = build_partition_of_unity(mesh, kappa);
    const Vector v = nodal_values(
        mesh, [](double x, double y, double) { return x * (1 - x) * y * (1 - y) * std::sin(40 * x + 30 * y); }, 0);
    double previous = INFINITY;
    for (int level = 0; level <= 2; ++level) {
      const MultiscaleSpace space = assemble_space(mesh, ops, kappa, pou, level);
      const double err = l2_norm(ops, space.lift(edge_projection(space, ops, v)) - v);
      CAPTURE(level);
      CHECK(err < previous);
      previous = err;
    }
  }

  TEST_CASE("steady high-contrast energy error decreases with the level") {
    const TwoLevelMesh mesh = make_mesh(8, 8);
    const CoefficientField kappa = inclusions(mesh, 1e4);
    const OperatorPair ops = assemble_operators(mesh, kappa);
    const PartitionOfUnity pou = build_partition_of_unity(mesh, kappa);
    double previous = INFINITY;
    for (int level = 0; level <= 3; ++level) {
      const double err = steady_energy_error(mesh, ops, kappa, pou, level);
      CAPTURE(level);
      CAPTURE(err);
      CHECK(err < previous);
      previous = err;
    }
  }

  TEST_CASE("edge-trace projection reproduces one away from the boundary ring") {
    const TwoLevelMesh mesh = make_mesh(4, 4);
    const CoefficientField kappa = lognormal(mesh, 1e2, 7);
    const PartitionOfUnity pou = build_partition_of_unity(mesh, kappa);
    const Vector v = trace_projection(mesh, kappa, pou, 1, Vector::Ones(mesh.node_count()));
    const int r = mesh.refinement();
    for (int j = r; j <= 3 * r; ++j)
      for (int i = r; i <= 3 * r; ++i) CHECK(v[mesh.node(i, j)] == doctest::Approx(1.0).epsilon(1e-10));
  }

  TEST_CASE("basis triplet export header") {
    const TwoLevelMesh mesh = make_mesh(2, 2);
    const CoefficientField kappa = uniform_coefficient(mesh, 1.0);
    const OperatorPair ops = assemble_operators(mesh, kappa);
    const MultiscaleSpace space = assemble_space(mesh, ops, kappa, build_partition_of_unity(mesh, kappa), 0);
    std::stringstream out;
    write_basis_triplets(out, space);
    std::string word;
    long rows = 0, cols = 0, nnz = 0;
    out >> word >> rows >> cols >> nnz;
    CHECK(word == "basis");
    CHECK(rows == mesh.node_count());
    CHECK(cols == space.size());
    CHECK(nnz == space.basis.nonZeros());
  }
}
