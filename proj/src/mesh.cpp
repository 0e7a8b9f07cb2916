#include "wemp/mesh.hpp"

#include <string>

#include "wemp/errors.hpp"

namespace wemp {

TwoLevelMesh::TwoLevelMesh(int coarse_divisions, int refinement)
    : coarse_(coarse_divisions), refinement_(refinement) {
  const int n = fine_divisions();
  free_nodes_.reserve(static_cast<std::size_t>(n - 1) * static_cast<std::size_t>(n - 1));
  boundary_nodes_.reserve(static_cast<std::size_t>(4 * n));
  for (int k = 0; k < node_count(); ++k) (on_boundary(k) ? boundary_nodes_ : free_nodes_).push_back(k);
}

GridIndex TwoLevelMesh::grid_index(int node) const noexcept {
  const int stride = fine_divisions() + 1;
  return {node % stride, node / stride};
}

Point2 TwoLevelMesh::coordinates(int node) const noexcept {
  const auto [i, j] = grid_index(node);
  const double n = fine_divisions();
  return {i / n, j / n};
}

bool TwoLevelMesh::on_boundary(int node) const noexcept {
  const auto [i, j] = grid_index(node);
  const int n = fine_divisions();
  return i == 0 || j == 0 || i == n || j == n;
}

std::array<int, 3> TwoLevelMesh::triangle(int t) const noexcept {
  const int c = t / 2;
  const int n = fine_divisions();
  const int i = c % n;
  const int j = c / n;
  if (t % 2 == 0) return {node(i, j), node(i + 1, j), node(i + 1, j + 1)};
  return {node(i, j), node(i + 1, j + 1), node(i, j + 1)};
}

int TwoLevelMesh::coarse_cell_of(int fine_cell) const noexcept {
  const int n = fine_divisions();
  return (fine_cell / n / refinement_) * coarse_ + (fine_cell % n) / refinement_;
}

GridIndex TwoLevelMesh::coarse_vertex_position(int vertex) const noexcept {
  return {vertex % (coarse_ + 1), vertex / (coarse_ + 1)};
}

bool TwoLevelMesh::coarse_vertex_interior(int vertex) const noexcept {
  const auto [a, b] = coarse_vertex_position(vertex);
  return a > 0 && b > 0 && a < coarse_ && b < coarse_;
}

std::vector<int> TwoLevelMesh::interior_coarse_vertices() const {
  std::vector<int> out;
  for (int v = 0; v < coarse_vertex_count(); ++v)
    if (coarse_vertex_interior(v)) out.push_back(v);
  return out;
}

TwoLevelMesh make_mesh(int coarse_divisions, int refinement, std::size_t node_budget) {
  if (coarse_divisions < 1) throw ConfigError("coarse divisions must be >= 1, got " + std::to_string(coarse_divisions));
  if (refinement < 1) throw ConfigError("refinement must be >= 1, got " + std::to_string(refinement));
  const auto n = static_cast<std::size_t>(coarse_divisions) * static_cast<std::size_t>(refinement);
  const std::size_t nodes = (n + 1) * (n + 1);
  if (nodes > node_budget)
    throw ConfigError("fine mesh has " + std::to_string(nodes) + " nodes, budget is " + std::to_string(node_budget));
  return TwoLevelMesh(coarse_divisions, refinement);
}

NodeBox coarse_cell_box(const TwoLevelMesh& mesh, int coarse_cell) {
  const int nc = mesh.coarse_divisions();
  const int r = mesh.refinement();
  const int a = coarse_cell % nc;
  const int b = coarse_cell / nc;
  return {a * r, b * r, (a + 1) * r, (b + 1) * r};
}

CoarseNeighborhood coarse_neighborhood(const TwoLevelMesh& mesh, int vertex) {
  if (vertex < 0 || vertex >= mesh.coarse_vertex_count())
    throw ConfigError("coarse vertex " + std::to_string(vertex) + " out of range");
  const int nc = mesh.coarse_divisions();
  const int r = mesh.refinement();
  const auto [a, b] = mesh.coarse_vertex_position(vertex);

  CoarseNeighborhood hood;
  hood.vertex = vertex;
  const int a0 = a > 0 ? a - 1 : a;
  const int a1 = a < nc ? a + 1 : a;
  const int b0 = b > 0 ? b - 1 : b;
  const int b1 = b < nc ? b + 1 : b;
  hood.box = {a0 * r, b0 * r, a1 * r, b1 * r};
  for (int cb = b0; cb < b1; ++cb)
    for (int ca = a0; ca < a1; ++ca) hood.cells.push_back(cb * nc + ca);

  const NodeBox& box = hood.box;
  hood.nodes.resize(static_cast<std::size_t>(box.node_count()));
  for (int j = box.j0; j <= box.j1; ++j)
    for (int i = box.i0; i <= box.i1; ++i) hood.nodes[static_cast<std::size_t>(box.local(i, j))] = mesh.node(i, j);

  auto& [bottom, right, top, left] = hood.sides;
  for (int i = box.i0; i <= box.i1; ++i) bottom.push_back(box.local(i, box.j0));
  for (int j = box.j0; j <= box.j1; ++j) right.push_back(box.local(box.i1, j));
  for (int i = box.i1; i >= box.i0; --i) top.push_back(box.local(i, box.j1));
  for (int j = box.j1; j >= box.j0; --j) left.push_back(box.local(box.i0, j));
  for (const auto& side : hood.sides) hood.boundary.insert(hood.boundary.end(), side.begin(), side.end() - 1);
  return hood;
}

}  // namespace wemp
