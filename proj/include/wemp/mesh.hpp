#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace wemp {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Fine node (i, j) in grid coordinates, 0 <= i, j <= fine_divisions.
struct GridIndex {
  int i = 0;
  int j = 0;
};

/// Nested uniform meshes of the unit square. The coarse grid has
/// `coarse_divisions` cells per side; each coarse cell holds `refinement` x
/// `refinement` fine cells, each split along its lower-left/upper-right diagonal.
///
/// Numbering: fine node (i, j) -> j * (n + 1) + i; fine cell (ci, cj) -> cj * n + ci;
/// triangles 2c and 2c+1 belong to fine cell c; coarse vertex (a, b) ->
/// b * (coarse_divisions + 1) + a; coarse cell (a, b) -> b * coarse_divisions + a.
class TwoLevelMesh {
 public:
  TwoLevelMesh(int coarse_divisions, int refinement);

  [[nodiscard]] int coarse_divisions() const noexcept { return coarse_; }
  [[nodiscard]] int refinement() const noexcept { return refinement_; }
  [[nodiscard]] int fine_divisions() const noexcept { return coarse_ * refinement_; }
  [[nodiscard]] double coarse_size() const noexcept { return 1.0 / coarse_; }
  [[nodiscard]] double fine_size() const noexcept { return 1.0 / fine_divisions(); }

  [[nodiscard]] int node_count() const noexcept { return (fine_divisions() + 1) * (fine_divisions() + 1); }
  [[nodiscard]] int cell_count() const noexcept { return fine_divisions() * fine_divisions(); }
  [[nodiscard]] int triangle_count() const noexcept { return 2 * cell_count(); }
  [[nodiscard]] int coarse_vertex_count() const noexcept { return (coarse_ + 1) * (coarse_ + 1); }
  [[nodiscard]] int coarse_cell_count() const noexcept { return coarse_ * coarse_; }

  [[nodiscard]] int node(int i, int j) const noexcept { return j * (fine_divisions() + 1) + i; }
  [[nodiscard]] GridIndex grid_index(int node) const noexcept;
  [[nodiscard]] Point2 coordinates(int node) const noexcept;
  [[nodiscard]] bool on_boundary(int node) const noexcept;

  /// Counter-clockwise node triple of a triangle.
  [[nodiscard]] std::array<int, 3> triangle(int t) const noexcept;
  [[nodiscard]] int cell_of_triangle(int t) const noexcept { return t / 2; }
  /// Coarse cell containing a fine cell.
  [[nodiscard]] int coarse_cell_of(int fine_cell) const noexcept;

  [[nodiscard]] GridIndex coarse_vertex_position(int vertex) const noexcept;
  [[nodiscard]] bool coarse_vertex_interior(int vertex) const noexcept;
  /// Indices of interior coarse vertices, ascending.
  [[nodiscard]] std::vector<int> interior_coarse_vertices() const;

  /// Interior fine nodes, ascending; these are the unknowns of every solve.
  [[nodiscard]] const std::vector<int>& free_nodes() const noexcept { return free_nodes_; }
  [[nodiscard]] const std::vector<int>& boundary_nodes() const noexcept { return boundary_nodes_; }

 private:
  int coarse_;
  int refinement_;
  std::vector<int> free_nodes_;
  std::vector<int> boundary_nodes_;
};

/// Largest fine mesh accepted by `make_mesh` unless the caller raises it.
inline constexpr std::size_t default_node_budget = 4'000'000;

/// Validating factory: divisions >= 1, refinement >= 1, node count within budget.
TwoLevelMesh make_mesh(int coarse_divisions, int refinement, std::size_t node_budget = default_node_budget);

/// Axis-aligned rectangle of fine nodes [i0, i1] x [j0, j1].
struct NodeBox {
  int i0 = 0;
  int j0 = 0;
  int i1 = 0;
  int j1 = 0;

  [[nodiscard]] int width() const noexcept { return i1 - i0; }
  [[nodiscard]] int height() const noexcept { return j1 - j0; }
  [[nodiscard]] int node_count() const noexcept { return (width() + 1) * (height() + 1); }
  /// Local index of node (i, j), row-major from the lower-left corner.
  [[nodiscard]] int local(int i, int j) const noexcept { return (j - j0) * (width() + 1) + (i - i0); }
  [[nodiscard]] bool on_edge(int i, int j) const noexcept { return i == i0 || i == i1 || j == j0 || j == j1; }
};

/// Support of the partition-of-unity function of one coarse vertex: the union
/// of coarse cells touching it, which is always a rectangle.
///
/// `sides` lists the four sides in counter-clockwise order (bottom, right, top,
/// left); each side runs counter-clockwise and includes both end corners, so
/// consecutive sides share a corner. `boundary` is the closed boundary walk
/// without repeated corners, starting at the lower-left corner.
struct CoarseNeighborhood {
  int vertex = -1;
  NodeBox box;
  std::vector<int> cells;                  ///< coarse cells
  std::vector<int> nodes;                  ///< global fine node per local index of `box`
  std::array<std::vector<int>, 4> sides;   ///< local indices along each side
  std::vector<int> boundary;               ///< local indices of the boundary walk
};

CoarseNeighborhood coarse_neighborhood(const TwoLevelMesh& mesh, int vertex);

/// Fine-node box of one coarse cell.
NodeBox coarse_cell_box(const TwoLevelMesh& mesh, int coarse_cell);

}  // namespace wemp
