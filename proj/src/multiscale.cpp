#include "wemp/multiscale.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "wemp/errors.hpp"

namespace wemp {

namespace {

using Triplet = Eigen::Triplet<double, int>;

/// Dirichlet solves on a node box: unknowns are the nodes off the box edge.
class DirichletBox {
 public:
  DirichletBox(const NodeBox& box, const SparseMatrix& stiffness) : stiffness_(&stiffness) {
    interior_position_.assign(static_cast<std::size_t>(box.node_count()), -1);
    for (int j = box.j0; j <= box.j1; ++j)
      for (int i = box.i0; i <= box.i1; ++i)
        if (!box.on_edge(i, j)) {
          interior_position_[static_cast<std::size_t>(box.local(i, j))] = static_cast<int>(interior_.size());
          interior_.push_back(box.local(i, j));
        }
    if (interior_.empty()) return;
    std::vector<Triplet> entries;
    for (int col = 0; col < stiffness.outerSize(); ++col) {
      const int c = interior_position_[static_cast<std::size_t>(col)];
      if (c < 0) continue;
      for (SparseMatrix::InnerIterator it(stiffness, col); it; ++it) {
        const int r = interior_position_[static_cast<std::size_t>(it.row())];
        if (r >= 0) entries.emplace_back(r, c, it.value());
      }
    }
    const auto n = static_cast<int>(interior_.size());
    SparseMatrix k(n, n);
    k.setFromTriplets(entries.begin(), entries.end());
    solver_ = std::make_unique<SpdSolver>(k);
  }

  /// Columns of `data` carry Dirichlet values on the box edge; interior entries are ignored.
  [[nodiscard]] DenseMatrix solve(const DenseMatrix& data) const {
    DenseMatrix out = data;
    for (int local : interior_) out.row(local).setZero();
    if (interior_.empty()) return out;
    const DenseMatrix applied = *stiffness_ * out;
    DenseMatrix rhs(static_cast<Eigen::Index>(interior_.size()), data.cols());
    for (std::size_t k = 0; k < interior_.size(); ++k) rhs.row(static_cast<Eigen::Index>(k)) = -applied.row(interior_[k]);
    const DenseMatrix x = solver_->solve(rhs);
    for (std::size_t k = 0; k < interior_.size(); ++k) out.row(interior_[k]) = x.row(static_cast<Eigen::Index>(k));
    return out;
  }

 private:
  const SparseMatrix* stiffness_;
  std::vector<int> interior_;
  std::vector<int> interior_position_;
  std::unique_ptr<SpdSolver> solver_;
};

// Gradient of the P1 interpolant of (u0, u1, u2) on a triangle.
Point2 p1_gradient(const std::array<Point2, 3>& p, const std::array<double, 3>& u) {
  const double det = (p[1].x - p[0].x) * (p[2].y - p[0].y) - (p[2].x - p[0].x) * (p[1].y - p[0].y);
  Point2 g;
  for (std::size_t a = 0; a < 3; ++a) {
    const Point2& b = p[(a + 1) % 3];
    const Point2& c = p[(a + 2) % 3];
    g.x += u[a] * (b.y - c.y) / det;
    g.y += u[a] * (c.x - b.x) / det;
  }
  return g;
}

std::array<int, 4> coarse_cell_corners(const TwoLevelMesh& mesh, int coarse_cell) {
  const int nc = mesh.coarse_divisions();
  const int a = coarse_cell % nc;
  const int b = coarse_cell / nc;
  const int stride = nc + 1;
  return {b * stride + a, b * stride + a + 1, (b + 1) * stride + a, (b + 1) * stride + a + 1};
}

}  // namespace

PartitionOfUnity build_partition_of_unity(const TwoLevelMesh& mesh, const CoefficientField& kappa,
                                          const Execution& exec) {
  validate_coefficient(mesh, kappa);
  const int cells = mesh.coarse_cell_count();
  const int r = mesh.refinement();
  std::vector<DenseMatrix> local(static_cast<std::size_t>(cells));
  parallel_for(cells, exec, [&](std::ptrdiff_t c) {
    const NodeBox box = coarse_cell_box(mesh, static_cast<int>(c));
    const BoxOperators ops = assemble_box(mesh, kappa.values, box);
    DenseMatrix data = DenseMatrix::Zero(box.node_count(), 4);
    for (int j = box.j0; j <= box.j1; ++j)
      for (int i = box.i0; i <= box.i1; ++i) {
        if (!box.on_edge(i, j)) continue;
        const double s = static_cast<double>(i - box.i0) / r;
        const double t = static_cast<double>(j - box.j0) / r;
        const int k = box.local(i, j);
        data(k, 0) = (1 - s) * (1 - t);
        data(k, 1) = s * (1 - t);
        data(k, 2) = (1 - s) * t;
        data(k, 3) = s * t;
      }
    local[static_cast<std::size_t>(c)] = DirichletBox(box, ops.stiffness).solve(data);
  });

  PartitionOfUnity pou;
  pou.functions.assign(static_cast<std::size_t>(mesh.coarse_vertex_count()), Vector::Zero(mesh.node_count()));
  for (int c = 0; c < cells; ++c) {
    const NodeBox box = coarse_cell_box(mesh, c);
    const auto corners = coarse_cell_corners(mesh, c);
    for (int j = box.j0; j <= box.j1; ++j)
      for (int i = box.i0; i <= box.i1; ++i)
        for (std::size_t q = 0; q < 4; ++q)
          pou.functions[static_cast<std::size_t>(corners[q])][mesh.node(i, j)] =
              local[static_cast<std::size_t>(c)](box.local(i, j), static_cast<Eigen::Index>(q));
  }
  return pou;
}

std::vector<EdgeWavelet> edge_wavelets(int level, int segments, double length) {
  if (level < 0) throw ConfigError("wavelet level must be non-negative");
  if (segments < 1 || !(length > 0.0)) throw ConfigError("edge needs at least one segment and positive length");
  const int pieces = 1 << level;
  if (segments % pieces != 0) {
    std::ostringstream msg;
    msg << "edge with " << segments << " fine segments is too coarse for wavelet level " << level
        << " (needs a multiple of " << pieces << ")";
    throw ConfigError(msg.str());
  }
  auto finish = [segments](EdgeWavelet w) {
    w.trace.resize(segments + 1);
    const auto& s = w.segment_values;
    w.trace[0] = 0.5 * s.front();
    w.trace[segments] = 0.5 * s.back();
    for (int k = 1; k < segments; ++k)
      w.trace[k] = 0.5 * (s[static_cast<std::size_t>(k - 1)] + s[static_cast<std::size_t>(k)]);
    return w;
  };

  std::vector<EdgeWavelet> out;
  const double base = 1.0 / std::sqrt(length);
  EdgeWavelet constant;
  constant.segment_values.assign(static_cast<std::size_t>(segments), base);
  out.push_back(finish(std::move(constant)));
  for (int g = 0; g < level; ++g) {
    const int count = 1 << g;
    const int support = segments / count;
    const double height = base * std::sqrt(static_cast<double>(count));
    for (int shift = 0; shift < count; ++shift) {
      EdgeWavelet w;
      w.generation = g;
      w.shift = shift;
      w.segment_values.assign(static_cast<std::size_t>(segments), 0.0);
      for (int k = 0; k < support; ++k)
        w.segment_values[static_cast<std::size_t>(shift * support + k)] = k < support / 2 ? height : -height;
      out.push_back(finish(std::move(w)));
    }
  }
  return out;
}

struct NeighborhoodProblem::Impl {
  const TwoLevelMesh* mesh = nullptr;
  CoarseNeighborhood hood;
  BoxOperators ops;
  std::unique_ptr<DirichletBox> dirichlet;
};

NeighborhoodProblem::NeighborhoodProblem(const TwoLevelMesh& mesh, const CoefficientField& kappa,
                                         CoarseNeighborhood hood)
    : impl_(std::make_unique<Impl>()) {
  impl_->mesh = &mesh;
  impl_->hood = std::move(hood);
  impl_->ops = assemble_box(mesh, kappa.values, impl_->hood.box);
  impl_->dirichlet = std::make_unique<DirichletBox>(impl_->hood.box, impl_->ops.stiffness);
}

NeighborhoodProblem::NeighborhoodProblem(NeighborhoodProblem&&) noexcept = default;
NeighborhoodProblem& NeighborhoodProblem::operator=(NeighborhoodProblem&&) noexcept = default;
NeighborhoodProblem::~NeighborhoodProblem() = default;

const CoarseNeighborhood& NeighborhoodProblem::neighborhood() const noexcept { return impl_->hood; }
const BoxOperators& NeighborhoodProblem::operators() const noexcept { return impl_->ops; }

Vector NeighborhoodProblem::side_data(int side, const Vector& trace) const {
  if (side < 0 || side > 3) throw ConfigError("side index must be 0..3");
  const auto& nodes = impl_->hood.sides[static_cast<std::size_t>(side)];
  if (trace.size() != static_cast<Eigen::Index>(nodes.size()))
    throw ConfigError("side trace length does not match the side");
  Vector out = Vector::Zero(impl_->hood.box.node_count());
  for (std::size_t k = 0; k < nodes.size(); ++k) out[nodes[k]] = trace[static_cast<Eigen::Index>(k)];
  return out;
}

Vector NeighborhoodProblem::harmonic_lift(const Vector& boundary_data) const {
  return impl_->dirichlet->solve(boundary_data);
}

DenseMatrix NeighborhoodProblem::harmonic_lifts(const DenseMatrix& boundary_data) const {
  if (boundary_data.rows() != impl_->hood.box.node_count())
    throw ConfigError("boundary data does not match the neighborhood");
  return impl_->dirichlet->solve(boundary_data);
}

NeighborhoodProblem::NeumannSolution NeighborhoodProblem::neumann_corrector(
    std::span<const double> kappa_tilde) const {
  const TwoLevelMesh& mesh = *impl_->mesh;
  const NodeBox& box = impl_->hood.box;
  const int n = mesh.fine_divisions();
  const double h = mesh.fine_size();
  const double cell_area = h * h;

  double total = 0.0;
  for (int cj = box.j0; cj < box.j1; ++cj)
    for (int ci = box.i0; ci < box.i1; ++ci) total += kappa_tilde[static_cast<std::size_t>(cj * n + ci)] * cell_area;
  if (!(total > 0.0)) throw NumericalError("weighted coefficient vanishes on the neighborhood");

  // Source g / int g tested against the hats: each triangle gives area / 3 to its vertices.
  Vector rhs = Vector::Zero(box.node_count());
  for (int cj = box.j0; cj < box.j1; ++cj)
    for (int ci = box.i0; ci < box.i1; ++ci) {
      const int cell = cj * n + ci;
      const double share = kappa_tilde[static_cast<std::size_t>(cell)] / total * (0.5 * cell_area) / 3.0;
      for (int t = 2 * cell; t < 2 * cell + 2; ++t)
        for (int node : mesh.triangle(t)) {
          const auto g = mesh.grid_index(node);
          rhs[box.local(g.i, g.j)] += share;
        }
    }
  // Outward flux density 1 / |boundary|: each boundary segment gives h / 2 to its ends.
  const double perimeter = 2.0 * (box.width() + box.height()) * h;
  const auto& walk = impl_->hood.boundary;
  for (std::size_t k = 0; k < walk.size(); ++k) {
    const int a = walk[k];
    const int b = walk[(k + 1) % walk.size()];
    rhs[a] -= 0.5 * h / perimeter;
    rhs[b] -= 0.5 * h / perimeter;
  }

  NeumannSolution sol;
  sol.compatibility = std::abs(rhs.sum());
  if (sol.compatibility > 1e-10) {
    std::ostringstream msg;
    msg << "Neumann data incompatible: residual " << sol.compatibility;
    throw NumericalError(msg.str());
  }
  // Pinning one node makes the singular Neumann matrix definite; compatible data
  // then yields a solution of the original system, shifted to mass-mean zero.
  SparseMatrix pinned = impl_->ops.stiffness;
  const int pin = box.local((box.i0 + box.i1) / 2, (box.j0 + box.j1) / 2);
  pinned.coeffRef(pin, pin) += 1.0;
  sol.values = solve_spd(pinned, rhs);
  const Vector ones = Vector::Ones(box.node_count());
  const Vector mass_ones = impl_->ops.mass * ones;
  sol.values.array() -= sol.values.dot(mass_ones) / ones.dot(mass_ones);
  return sol;
}

std::vector<double> weighted_coefficient(const TwoLevelMesh& mesh, const CoefficientField& kappa,
                                         const PartitionOfUnity& pou) {
  validate_coefficient(mesh, kappa);
  if (pou.functions.size() != static_cast<std::size_t>(mesh.coarse_vertex_count()))
    throw ConfigError("partition of unity does not match the mesh");
  const double h2 = mesh.coarse_size() * mesh.coarse_size();
  std::vector<double> out(static_cast<std::size_t>(mesh.cell_count()), 0.0);
  for (int cell = 0; cell < mesh.cell_count(); ++cell) {
    const auto corners = coarse_cell_corners(mesh, mesh.coarse_cell_of(cell));
    double sum = 0.0;
    for (int t = 2 * cell; t < 2 * cell + 2; ++t) {
      const auto tri = mesh.triangle(t);
      const std::array<Point2, 3> p{mesh.coordinates(tri[0]), mesh.coordinates(tri[1]), mesh.coordinates(tri[2])};
      for (int v : corners) {
        const Vector& chi = pou.functions[static_cast<std::size_t>(v)];
        const Point2 g = p1_gradient(p, {chi[tri[0]], chi[tri[1]], chi[tri[2]]});
        sum += g.x * g.x + g.y * g.y;
      }
    }
    out[static_cast<std::size_t>(cell)] = h2 * kappa.values[static_cast<std::size_t>(cell)] * 0.5 * sum;
  }
  return out;
}

double eta_indicator(const TwoLevelMesh& mesh, int level, const CoefficientField& kappa,
                     std::span<const double> kappa_tilde) {
  const int n = mesh.fine_divisions();
  const int r = mesh.refinement();
  double edge_max = 0.0;
  for (int cj = 0; cj < n; ++cj)
    for (int ci = 0; ci < n; ++ci) {
      const bool touches = ci % r == 0 || ci % r == r - 1 || cj % r == 0 || cj % r == r - 1;
      if (touches) edge_max = std::max(edge_max, kappa.at(ci, cj));
    }
  const double tilde_max = *std::max_element(kappa_tilde.begin(), kappa_tilde.end());
  return mesh.coarse_size() * std::sqrt(tilde_max) + std::pow(2.0, -0.5 * level) * edge_max;
}

std::vector<int> rank_filter(const DenseMatrix& gram, double tolerance) {
  const Eigen::Index n = gram.rows();
  Vector scale(n);
  for (Eigen::Index i = 0; i < n; ++i) scale[i] = gram(i, i) > 0.0 ? 1.0 / std::sqrt(gram(i, i)) : 0.0;
  const DenseMatrix g = scale.asDiagonal() * gram * scale.asDiagonal();

  Vector residual = g.diagonal();
  DenseMatrix factor = DenseMatrix::Zero(n, n);
  std::vector<char> taken(static_cast<std::size_t>(n), 0);
  std::vector<int> kept;
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index pivot = -1;
    double best = tolerance;
    for (Eigen::Index i = 0; i < n; ++i)
      if (!taken[static_cast<std::size_t>(i)] && residual[i] > best) {
        best = residual[i];
        pivot = i;
      }
    if (pivot < 0) break;
    taken[static_cast<std::size_t>(pivot)] = 1;
    kept.push_back(static_cast<int>(pivot));
    Vector column = g.col(pivot) - factor.leftCols(k) * factor.row(pivot).head(k).transpose();
    column /= std::sqrt(best);
    factor.col(k) = column;
    residual -= column.cwiseAbs2();
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

MultiscaleSpace assemble_space(const TwoLevelMesh& mesh, const OperatorPair& ops, const CoefficientField& kappa,
                               const PartitionOfUnity& pou, int level, const Execution& exec) {
  const std::vector<int> vertices = mesh.interior_coarse_vertices();
  if (vertices.empty()) throw ConfigError("the coarse grid has no interior vertices; use at least 2 coarse divisions");
  const std::vector<double> kappa_tilde = weighted_coefficient(mesh, kappa, pou);
  const int segments = 2 * mesh.refinement();
  const auto wavelets = edge_wavelets(level, segments, segments * mesh.fine_size());
  const int per_side = static_cast<int>(wavelets.size());

  struct Block {
    std::vector<Triplet> entries;  // column index relative to the block
    std::vector<BasisColumn> columns;
  };
  std::vector<Block> blocks(vertices.size());
  parallel_for(static_cast<std::ptrdiff_t>(vertices.size()), exec, [&](std::ptrdiff_t v) {
    const int vertex = vertices[static_cast<std::size_t>(v)];
    const NeighborhoodProblem problem(mesh, kappa, coarse_neighborhood(mesh, vertex));
    const CoarseNeighborhood& hood = problem.neighborhood();
    DenseMatrix data(hood.box.node_count(), 4 * per_side + 1);
    Block& block = blocks[static_cast<std::size_t>(v)];
    for (int side = 0; side < 4; ++side)
      for (int w = 0; w < per_side; ++w) {
        data.col(side * per_side + w) = problem.side_data(side, wavelets[static_cast<std::size_t>(w)].trace);
        block.columns.push_back({vertex, side, w});
      }
    DenseMatrix local = problem.harmonic_lifts(data.leftCols(4 * per_side));
    local.conservativeResize(Eigen::NoChange, 4 * per_side + 1);
    local.col(4 * per_side) = problem.neumann_corrector(kappa_tilde).values;
    block.columns.push_back({vertex, -1, -1});

    const Vector& chi = pou.functions[static_cast<std::size_t>(vertex)];
    for (Eigen::Index c = 0; c < local.cols(); ++c)
      for (std::size_t k = 0; k < hood.nodes.size(); ++k) {
        const int node = hood.nodes[k];
        if (mesh.on_boundary(node)) continue;
        const double value = chi[node] * local(static_cast<Eigen::Index>(k), c);
        if (value != 0.0) block.entries.emplace_back(node, static_cast<int>(c), value);
      }
  });

  std::vector<Triplet> entries;
  std::vector<BasisColumn> raw_columns;
  for (Block& block : blocks) {
    const int offset = static_cast<int>(raw_columns.size());
    for (const Triplet& t : block.entries) entries.emplace_back(t.row(), t.col() + offset, t.value());
    raw_columns.insert(raw_columns.end(), block.columns.begin(), block.columns.end());
  }
  SparseMatrix raw(mesh.node_count(), static_cast<int>(raw_columns.size()));
  raw.setFromTriplets(entries.begin(), entries.end());

  const SparseMatrix mass_raw = raw.transpose() * ops.mass * raw;
  const std::vector<int> kept = rank_filter(DenseMatrix(mass_raw));
  const auto raw_count = static_cast<int>(raw_columns.size());
  if (2 * static_cast<int>(kept.size()) < raw_count) {
    std::ostringstream msg;
    msg << "rank filter kept only " << kept.size() << " of " << raw_count << " multiscale columns";
    throw NumericalError(msg.str());
  }

  MultiscaleSpace space;
  space.level = level;
  space.raw_column_count = raw_count;
  std::vector<Triplet> selection;
  selection.reserve(kept.size());
  for (std::size_t k = 0; k < kept.size(); ++k) {
    selection.emplace_back(kept[k], static_cast<int>(k), 1.0);
    space.columns.push_back(raw_columns[static_cast<std::size_t>(kept[k])]);
  }
  SparseMatrix select(raw_count, static_cast<int>(kept.size()));
  select.setFromTriplets(selection.begin(), selection.end());
  space.basis = raw * select;
  space.mass = DenseMatrix(space.basis.transpose() * ops.mass * space.basis);
  space.stiffness = DenseMatrix(space.basis.transpose() * ops.stiffness * space.basis);
  // Products are computed once; symmetrize to remove rounding asymmetry.
  space.mass = 0.5 * (space.mass + space.mass.transpose()).eval();
  space.stiffness = 0.5 * (space.stiffness + space.stiffness.transpose()).eval();
  if (Eigen::LLT<DenseMatrix>(space.mass).info() != Eigen::Success)
    throw NumericalError("multiscale mass matrix is not positive definite after rank filtering");
  return space;
}

Vector edge_projection(const MultiscaleSpace& space, const OperatorPair& ops, const Vector& v) {
  const Vector rhs = space.basis.transpose() * (ops.mass * v);
  const Eigen::LLT<DenseMatrix> llt(space.mass);
  if (llt.info() != Eigen::Success) throw NumericalError("multiscale mass matrix factorization failed");
  return llt.solve(rhs);
}

Vector trace_projection(const TwoLevelMesh& mesh, const CoefficientField& kappa, const PartitionOfUnity& pou,
                        int level, const Vector& v) {
  const int segments = 2 * mesh.refinement();
  const double h = mesh.fine_size();
  const auto wavelets = edge_wavelets(level, segments, segments * h);
  Vector out = Vector::Zero(mesh.node_count());
  for (int vertex : mesh.interior_coarse_vertices()) {
    const NeighborhoodProblem problem(mesh, kappa, coarse_neighborhood(mesh, vertex));
    const CoarseNeighborhood& hood = problem.neighborhood();
    // By linearity one lift of the combined trace suffices.
    Vector data = Vector::Zero(hood.box.node_count());
    for (int side = 0; side < 4; ++side) {
      const auto& nodes = hood.sides[static_cast<std::size_t>(side)];
      Vector trace = Vector::Zero(static_cast<Eigen::Index>(nodes.size()));
      for (const EdgeWavelet& w : wavelets) {
        double coefficient = 0.0;
        for (int k = 0; k < segments; ++k) {
          const double a = v[hood.nodes[static_cast<std::size_t>(nodes[static_cast<std::size_t>(k)])]];
          const double b = v[hood.nodes[static_cast<std::size_t>(nodes[static_cast<std::size_t>(k + 1)])]];
          coefficient += 0.5 * (a + b) * h * w.segment_values[static_cast<std::size_t>(k)];
        }
        trace += coefficient * w.trace;
      }
      data += problem.side_data(side, trace);
    }
    const Vector lift = problem.harmonic_lift(data);
    const Vector& chi = pou.functions[static_cast<std::size_t>(vertex)];
    for (std::size_t k = 0; k < hood.nodes.size(); ++k) {
      const int node = hood.nodes[k];
      if (!mesh.on_boundary(node)) out[node] += chi[node] * lift[static_cast<Eigen::Index>(k)];
    }
  }
  return out;
}

void write_basis_triplets(std::ostream& out, const MultiscaleSpace& space) {
  out << "basis " << space.basis.rows() << ' ' << space.basis.cols() << ' ' << space.basis.nonZeros() << '\n';
  out.precision(std::numeric_limits<double>::max_digits10);
  for (int col = 0; col < space.basis.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(space.basis, col); it; ++it)
      out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
}

}  // namespace wemp
