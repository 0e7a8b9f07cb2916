#include "wemp/fem.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "wemp/errors.hpp"

namespace wemp {

namespace {

using Triplet = Eigen::Triplet<double, int>;

std::array<Point2, 3> triangle_points(const TwoLevelMesh& mesh, const std::array<int, 3>& tri) {
  return {mesh.coordinates(tri[0]), mesh.coordinates(tri[1]), mesh.coordinates(tri[2])};
}

SparseMatrix restrict_matrix(const SparseMatrix& full, const std::vector<int>& free_index, int free_count) {
  std::vector<Triplet> entries;
  entries.reserve(static_cast<std::size_t>(full.nonZeros()));
  for (int col = 0; col < full.outerSize(); ++col) {
    const int fc = free_index[static_cast<std::size_t>(col)];
    if (fc < 0) continue;
    for (SparseMatrix::InnerIterator it(full, col); it; ++it) {
      const int fr = free_index[static_cast<std::size_t>(it.row())];
      if (fr >= 0) entries.emplace_back(fr, fc, it.value());
    }
  }
  SparseMatrix out(free_count, free_count);
  out.setFromTriplets(entries.begin(), entries.end());
  return out;
}

}  // namespace

double CoefficientField::min() const { return *std::min_element(values.begin(), values.end()); }
double CoefficientField::max() const { return *std::max_element(values.begin(), values.end()); }

CoefficientField uniform_coefficient(const TwoLevelMesh& mesh, double value) {
  const int n = mesh.fine_divisions();
  return {n, n, std::vector<double>(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), value)};
}

void validate_coefficient(const TwoLevelMesh& mesh, const CoefficientField& kappa) {
  const int n = mesh.fine_divisions();
  if (kappa.nx != n || kappa.ny != n)
    throw ConfigError("coefficient raster is " + std::to_string(kappa.nx) + "x" + std::to_string(kappa.ny) +
                      ", fine mesh has " + std::to_string(n) + "x" + std::to_string(n) + " cells");
  if (kappa.values.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n))
    throw ConfigError("coefficient raster holds " + std::to_string(kappa.values.size()) + " values");
  for (std::size_t k = 0; k < kappa.values.size(); ++k) {
    const double v = kappa.values[k];
    if (!std::isfinite(v) || v <= 0.0) {
      std::ostringstream msg;
      msg << "coefficient must be finite and positive; cell " << k << " has " << v;
      throw ConfigError(msg.str());
    }
  }
}

CoefficientField read_coefficient(std::istream& in) {
  std::string tag;
  CoefficientField kappa;
  if (!(in >> tag >> kappa.nx >> kappa.ny) || tag != "kappa")
    throw ConfigError("coefficient raster must start with 'kappa <nx> <ny>'");
  if (kappa.nx < 1 || kappa.ny < 1) throw ConfigError("coefficient raster dimensions must be positive");
  const auto count = static_cast<std::size_t>(kappa.nx) * static_cast<std::size_t>(kappa.ny);
  kappa.values.reserve(count);
  double v = 0.0;
  while (kappa.values.size() < count && in >> v) kappa.values.push_back(v);
  if (kappa.values.size() != count)
    throw ConfigError("coefficient raster expects " + std::to_string(count) + " values, read " +
                      std::to_string(kappa.values.size()));
  return kappa;
}

void write_coefficient(std::ostream& out, const CoefficientField& kappa) {
  out << "kappa " << kappa.nx << ' ' << kappa.ny << '\n';
  out.precision(std::numeric_limits<double>::max_digits10);
  for (int j = 0; j < kappa.ny; ++j) {
    for (int i = 0; i < kappa.nx; ++i) out << (i ? " " : "") << kappa.at(i, j);
    out << '\n';
  }
}

ElementMatrices p1_element(const std::array<Point2, 3>& p) {
  const double det = (p[1].x - p[0].x) * (p[2].y - p[0].y) - (p[2].x - p[0].x) * (p[1].y - p[0].y);
  const double area = 0.5 * std::abs(det);
  // Gradient of barycentric coordinate a is (y_b - y_c, x_c - x_b) / det.
  std::array<Point2, 3> grad;
  for (int a = 0; a < 3; ++a) {
    const Point2& b = p[static_cast<std::size_t>((a + 1) % 3)];
    const Point2& c = p[static_cast<std::size_t>((a + 2) % 3)];
    grad[static_cast<std::size_t>(a)] = {(b.y - c.y) / det, (c.x - b.x) / det};
  }
  ElementMatrices e;
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t b = a; b < 3; ++b) {
      e.mass[a][b] = e.mass[b][a] = area / 12.0 * (a == b ? 2.0 : 1.0);
      e.stiffness[a][b] = e.stiffness[b][a] = area * (grad[a].x * grad[b].x + grad[a].y * grad[b].y);
    }
  }
  return e;
}

Vector OperatorPair::restrict_to_free(const Vector& full) const {
  Vector out(static_cast<Eigen::Index>(free_nodes.size()));
  for (std::size_t k = 0; k < free_nodes.size(); ++k) out[static_cast<Eigen::Index>(k)] = full[free_nodes[k]];
  return out;
}

Vector OperatorPair::extend_from_free(const Vector& free) const {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(free_index.size()));
  for (std::size_t k = 0; k < free_nodes.size(); ++k) out[free_nodes[k]] = free[static_cast<Eigen::Index>(k)];
  return out;
}

OperatorPair assemble_operators(const TwoLevelMesh& mesh, const CoefficientField& kappa, const Execution& exec) {
  validate_coefficient(mesh, kappa);
  const int triangles = mesh.triangle_count();
  // Each triangle owns a fixed slot of nine entries, so the triplet order and
  // hence the summation order of duplicates does not depend on the schedule.
  std::vector<Triplet> mass_entries(static_cast<std::size_t>(triangles) * 9);
  std::vector<Triplet> stiff_entries(mass_entries.size());
  parallel_for(triangles, exec, [&](std::ptrdiff_t t) {
    const auto tri = mesh.triangle(static_cast<int>(t));
    const ElementMatrices e = p1_element(triangle_points(mesh, tri));
    const double k = kappa.values[static_cast<std::size_t>(mesh.cell_of_triangle(static_cast<int>(t)))];
    std::size_t slot = static_cast<std::size_t>(t) * 9;
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = 0; b < 3; ++b, ++slot) {
        mass_entries[slot] = Triplet(tri[a], tri[b], e.mass[a][b]);
        stiff_entries[slot] = Triplet(tri[a], tri[b], k * e.stiffness[a][b]);
      }
  });

  OperatorPair ops;
  const int n = mesh.node_count();
  ops.mass.resize(n, n);
  ops.stiffness.resize(n, n);
  ops.mass.setFromTriplets(mass_entries.begin(), mass_entries.end());
  ops.stiffness.setFromTriplets(stiff_entries.begin(), stiff_entries.end());
  ops.free_nodes = mesh.free_nodes();
  ops.free_index.assign(static_cast<std::size_t>(n), -1);
  for (std::size_t k = 0; k < ops.free_nodes.size(); ++k)
    ops.free_index[static_cast<std::size_t>(ops.free_nodes[k])] = static_cast<int>(k);
  const int nf = static_cast<int>(ops.free_nodes.size());
  ops.mass_free = restrict_matrix(ops.mass, ops.free_index, nf);
  ops.stiffness_free = restrict_matrix(ops.stiffness, ops.free_index, nf);
  return ops;
}

BoxOperators assemble_box(const TwoLevelMesh& mesh, std::span<const double> cell_coefficient, const NodeBox& box) {
  const int n = mesh.fine_divisions();
  std::vector<Triplet> mass_entries;
  std::vector<Triplet> stiff_entries;
  const auto cells = static_cast<std::size_t>(box.width()) * static_cast<std::size_t>(box.height());
  mass_entries.reserve(cells * 18);
  stiff_entries.reserve(cells * 18);
  for (int cj = box.j0; cj < box.j1; ++cj) {
    for (int ci = box.i0; ci < box.i1; ++ci) {
      const int cell = cj * n + ci;
      const double k = cell_coefficient[static_cast<std::size_t>(cell)];
      for (int t = 2 * cell; t < 2 * cell + 2; ++t) {
        const auto tri = mesh.triangle(t);
        const ElementMatrices e = p1_element(triangle_points(mesh, tri));
        std::array<int, 3> loc{};
        for (std::size_t a = 0; a < 3; ++a) {
          const auto g = mesh.grid_index(tri[a]);
          loc[a] = box.local(g.i, g.j);
        }
        for (std::size_t a = 0; a < 3; ++a)
          for (std::size_t b = 0; b < 3; ++b) {
            mass_entries.emplace_back(loc[a], loc[b], e.mass[a][b]);
            stiff_entries.emplace_back(loc[a], loc[b], k * e.stiffness[a][b]);
          }
      }
    }
  }
  BoxOperators out;
  const int m = box.node_count();
  out.mass.resize(m, m);
  out.stiffness.resize(m, m);
  out.mass.setFromTriplets(mass_entries.begin(), mass_entries.end());
  out.stiffness.setFromTriplets(stiff_entries.begin(), stiff_entries.end());
  return out;
}

Vector nodal_values(const TwoLevelMesh& mesh, const SpaceTimeFunction& f, double t) {
  Vector v(mesh.node_count());
  for (int k = 0; k < mesh.node_count(); ++k) {
    const Point2 p = mesh.coordinates(k);
    v[k] = f(p.x, p.y, t);
  }
  return v;
}

Vector assemble_load(const TwoLevelMesh& mesh, const OperatorPair& ops, const SpaceTimeFunction& f, double t) {
  return ops.mass * nodal_values(mesh, f, t);
}

Vector l2_project(const OperatorPair& ops, const Vector& nodal) {
  const Vector rhs = ops.restrict_to_free(ops.mass * nodal);
  return ops.extend_from_free(solve_spd(ops.mass_free, rhs));
}

struct SpdSolver::Impl {
  SparseMatrix matrix;
  Eigen::SimplicialLLT<SparseMatrix> factor;
  double tolerance = 1e-10;
  double matrix_norm = 0.0;  // max absolute row sum
};

SpdSolver::SpdSolver(const SparseMatrix& matrix, double tolerance) : impl_(std::make_unique<Impl>()) {
  if (matrix.rows() != matrix.cols()) throw ConfigError("SPD solve needs a square matrix");
  impl_->matrix = matrix;
  impl_->tolerance = tolerance;
  Vector row_sums = Vector::Zero(matrix.rows());
  for (int col = 0; col < impl_->matrix.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(impl_->matrix, col); it; ++it) row_sums[it.row()] += std::abs(it.value());
  impl_->matrix_norm = matrix.rows() > 0 ? row_sums.maxCoeff() : 0.0;
  impl_->factor.compute(impl_->matrix);
  if (impl_->factor.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "sparse Cholesky broke down on a " << matrix.rows() << "x" << matrix.cols()
        << " matrix (not positive definite or singular)";
    throw NumericalError(msg.str());
  }
}

SpdSolver::SpdSolver(SpdSolver&&) noexcept = default;
SpdSolver& SpdSolver::operator=(SpdSolver&&) noexcept = default;
SpdSolver::~SpdSolver() = default;

int SpdSolver::size() const noexcept { return static_cast<int>(impl_->matrix.rows()); }

Vector SpdSolver::solve(const Vector& rhs) const {
  if (rhs.size() != impl_->matrix.rows()) throw ConfigError("SPD solve: right-hand side has the wrong length");
  // Normwise backward error ||r|| <= tol (||A|| ||x|| + ||b||) in the max norm; for
  // well-conditioned systems this is the plain relative residual.
  Vector x = impl_->factor.solve(rhs);
  auto bound = [&](const Vector& sol) {
    return impl_->tolerance * (impl_->matrix_norm * sol.cwiseAbs().maxCoeff() + rhs.cwiseAbs().maxCoeff());
  };
  Vector residual = rhs - impl_->matrix * x;
  if (residual.size() > 0 && residual.cwiseAbs().maxCoeff() > bound(x)) {
    x += impl_->factor.solve(residual);
    residual = rhs - impl_->matrix * x;
  }
  const double r = residual.size() > 0 ? residual.cwiseAbs().maxCoeff() : 0.0;
  if (!std::isfinite(r) || r > bound(x)) {
    std::ostringstream msg;
    msg << "SPD solve residual " << r << " exceeds the backward-error bound " << bound(x);
    throw NumericalError(msg.str());
  }
  return x;
}

DenseMatrix SpdSolver::solve(const DenseMatrix& rhs) const {
  DenseMatrix out(rhs.rows(), rhs.cols());
  for (Eigen::Index c = 0; c < rhs.cols(); ++c) out.col(c) = solve(Vector(rhs.col(c)));
  return out;
}

Vector solve_spd(const SparseMatrix& matrix, const Vector& rhs, double tolerance) {
  return SpdSolver(matrix, tolerance).solve(rhs);
}

double l2_norm(const OperatorPair& ops, const Vector& v) { return std::sqrt(std::max(0.0, v.dot(ops.mass * v))); }
double energy_norm(const OperatorPair& ops, const Vector& v) {
  return std::sqrt(std::max(0.0, v.dot(ops.stiffness * v)));
}

}  // namespace wemp
