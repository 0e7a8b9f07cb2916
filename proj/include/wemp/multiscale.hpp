#pragma once

#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "wemp/fem.hpp"
#include "wemp/mesh.hpp"
#include "wemp/parallel.hpp"

namespace wemp {

/// One kappa-harmonic function per coarse vertex, stored as full fine-nodal
/// vectors. Each vanishes outside the vertex's neighborhood and they sum to one.
struct PartitionOfUnity {
  std::vector<Vector> functions;
};

/// Per coarse cell, four Dirichlet solves with the bilinear corner functions
/// as boundary data.
PartitionOfUnity build_partition_of_unity(const TwoLevelMesh& mesh, const CoefficientField& kappa,
                                          const Execution& exec = Execution::sequential());

/// Piecewise-constant function on a side of `segments` equal fine segments.
/// `trace` is its nodal interpolant on the segments + 1 side nodes: the mean of
/// the two adjacent segment values inside, half the end segment value at the
/// two end nodes.
struct EdgeWavelet {
  int generation = -1;  ///< -1 for the constant
  int shift = 0;
  std::vector<double> segment_values;
  Vector trace;
};

/// The constant plus Haar wavelets of generations 0..level-1 (2^g per
/// generation): 2^level functions orthonormal in L2 of a side of length
/// `length`. Needs `segments` divisible by 2^level.
std::vector<EdgeWavelet> edge_wavelets(int level, int segments, double length);

/// Local kappa-harmonic and Neumann solves on one coarse neighborhood.
class NeighborhoodProblem {
 public:
  NeighborhoodProblem(const TwoLevelMesh& mesh, const CoefficientField& kappa, CoarseNeighborhood hood);
  NeighborhoodProblem(NeighborhoodProblem&&) noexcept;
  NeighborhoodProblem& operator=(NeighborhoodProblem&&) noexcept;
  ~NeighborhoodProblem();

  [[nodiscard]] const CoarseNeighborhood& neighborhood() const noexcept;
  [[nodiscard]] const BoxOperators& operators() const noexcept;

  /// Places a side trace into a local vector (zero on the rest of the box).
  [[nodiscard]] Vector side_data(int side, const Vector& trace) const;

  /// kappa-harmonic function in the box with the boundary entries of
  /// `boundary_data` (a local vector) as Dirichlet values.
  [[nodiscard]] Vector harmonic_lift(const Vector& boundary_data) const;
  [[nodiscard]] DenseMatrix harmonic_lifts(const DenseMatrix& boundary_data) const;

  struct NeumannSolution {
    Vector values;              ///< mass-weighted mean zero
    double compatibility = 0.0; ///< |sum of the discrete right-hand side|
  };
  /// Pure Neumann problem -div(kappa grad v) = g / int g with outward flux
  /// density 1 / |boundary|, g the weighted coefficient (per fine cell).
  [[nodiscard]] NeumannSolution neumann_corrector(std::span<const double> kappa_tilde) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// H^2 kappa sum_i |grad chi_i|^2 per fine triangle, averaged to fine cells.
std::vector<double> weighted_coefficient(const TwoLevelMesh& mesh, const CoefficientField& kappa,
                                         const PartitionOfUnity& pou);

/// H max(kappa_tilde)^(1/2) + 2^(-level/2) max of kappa on cells touching
/// coarse edges. Diagnostic only.
double eta_indicator(const TwoLevelMesh& mesh, int level, const CoefficientField& kappa,
                     std::span<const double> kappa_tilde);

/// Origin of a basis column: the neighborhood's vertex, the side (0..3 for a
/// wavelet lift, -1 for the Neumann corrector) and the wavelet index.
struct BasisColumn {
  int vertex = -1;
  int side = -1;
  int wavelet = -1;
};

struct MultiscaleSpace {
  int level = 0;
  SparseMatrix basis;  ///< fine nodes x columns
  DenseMatrix mass;    ///< basis' M basis
  DenseMatrix stiffness;
  std::vector<BasisColumn> columns;
  int raw_column_count = 0;  ///< before rank filtering

  [[nodiscard]] int size() const noexcept { return static_cast<int>(basis.cols()); }
  [[nodiscard]] Vector lift(const Vector& coefficients) const { return basis * coefficients; }
};

/// Gram-based rank filter tolerance, relative to unit-normalized columns.
inline constexpr double rank_drop_tolerance = 1e-10;

/// Columns chi_i * lift for every wavelet on every side plus chi_i * Neumann
/// corrector, for every interior coarse vertex, followed by the rank filter.
MultiscaleSpace assemble_space(const TwoLevelMesh& mesh, const OperatorPair& ops, const CoefficientField& kappa,
                               const PartitionOfUnity& pou, int level,
                               const Execution& exec = Execution::sequential());

/// Indices of columns kept by greedy pivoted Cholesky on the normalized Gram
/// matrix, ascending.
std::vector<int> rank_filter(const DenseMatrix& gram, double tolerance = rank_drop_tolerance);

/// Mass-orthogonal projection of a fine-nodal vector: solves M_ms c = basis' M v.
Vector edge_projection(const MultiscaleSpace& space, const OperatorPair& ops, const Vector& v);

/// Sum over interior vertices of chi_i times the lift of the L2 projection of
/// the trace of v onto the edge wavelets. Fine-nodal result; diagnostic path.
Vector trace_projection(const TwoLevelMesh& mesh, const CoefficientField& kappa, const PartitionOfUnity& pou,
                        int level, const Vector& v);

/// Text triplets `row col value`, preceded by a `basis <rows> <cols> <nnz>` line.
void write_basis_triplets(std::ostream& out, const MultiscaleSpace& space);

}  // namespace wemp
