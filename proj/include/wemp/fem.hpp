#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <array>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "wemp/mesh.hpp"
#include "wemp/parallel.hpp"

namespace wemp {

using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using SpaceTimeFunction = std::function<double(double x, double y, double t)>;

/// Piecewise-constant conductivity on the fine cells, stored row-major
/// (cell (ci, cj) at cj * nx + ci).
struct CoefficientField {
  int nx = 0;
  int ny = 0;
  std::vector<double> values;

  [[nodiscard]] double at(int ci, int cj) const { return values[static_cast<std::size_t>(cj * nx + ci)]; }
  [[nodiscard]] double min() const;
  [[nodiscard]] double max() const;
};

CoefficientField uniform_coefficient(const TwoLevelMesh& mesh, double value);
/// Throws ConfigError unless the raster matches the fine mesh and every value
/// is finite and strictly positive.
void validate_coefficient(const TwoLevelMesh& mesh, const CoefficientField& kappa);

/// Raster text format: a header line `kappa <nx> <ny>` followed by nx*ny values
/// in row-major order (any whitespace).
CoefficientField read_coefficient(std::istream& in);
void write_coefficient(std::ostream& out, const CoefficientField& kappa);

/// P1 element matrices of a triangle with unit coefficient.
struct ElementMatrices {
  std::array<std::array<double, 3>, 3> mass{};
  std::array<std::array<double, 3>, 3> stiffness{};
};
ElementMatrices p1_element(const std::array<Point2, 3>& vertices);

/// Global mass and stiffness on all fine nodes plus their restriction to the
/// interior (free) nodes. Full vectors are indexed by fine node, free vectors
/// by position in `free_nodes`.
struct OperatorPair {
  SparseMatrix mass;
  SparseMatrix stiffness;
  SparseMatrix mass_free;
  SparseMatrix stiffness_free;
  std::vector<int> free_nodes;
  std::vector<int> free_index;  ///< fine node -> free position, -1 on the boundary

  [[nodiscard]] Vector restrict_to_free(const Vector& full) const;
  [[nodiscard]] Vector extend_from_free(const Vector& free) const;
};

OperatorPair assemble_operators(const TwoLevelMesh& mesh, const CoefficientField& kappa,
                                const Execution& exec = Execution::sequential());

/// Mass and stiffness of the triangles inside `box`, with one coefficient per
/// fine cell (indexed like CoefficientField). Rows follow `box.local`.
struct BoxOperators {
  SparseMatrix mass;
  SparseMatrix stiffness;
};
BoxOperators assemble_box(const TwoLevelMesh& mesh, std::span<const double> cell_coefficient, const NodeBox& box);

Vector nodal_values(const TwoLevelMesh& mesh, const SpaceTimeFunction& f, double t);
/// Load vector M * (nodal interpolant of f(., t)) on all fine nodes.
Vector assemble_load(const TwoLevelMesh& mesh, const OperatorPair& ops, const SpaceTimeFunction& f, double t);
/// L2 projection onto the discrete space with homogeneous Dirichlet values.
Vector l2_project(const OperatorPair& ops, const Vector& nodal);

/// Sparse Cholesky with a residual check on every solve. A failed
/// factorization, or a max-norm residual above
/// `tolerance * (||A|| ||x|| + ||rhs||)` after one step of iterative
/// refinement, throws NumericalError.
class SpdSolver {
 public:
  explicit SpdSolver(const SparseMatrix& matrix, double tolerance = 1e-10);
  SpdSolver(const SpdSolver&) = delete;
  SpdSolver& operator=(const SpdSolver&) = delete;
  SpdSolver(SpdSolver&&) noexcept;
  SpdSolver& operator=(SpdSolver&&) noexcept;
  ~SpdSolver();

  [[nodiscard]] Vector solve(const Vector& rhs) const;
  [[nodiscard]] DenseMatrix solve(const DenseMatrix& rhs) const;
  [[nodiscard]] int size() const noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

Vector solve_spd(const SparseMatrix& matrix, const Vector& rhs, double tolerance = 1e-10);

/// sqrt(v' M v) and sqrt(v' A v) for full nodal vectors.
double l2_norm(const OperatorPair& ops, const Vector& v);
double energy_norm(const OperatorPair& ops, const Vector& v);

}  // namespace wemp
