#pragma once

// Legacy ASCII VTK output: GL nodes as vertex cells with point data.

#include <array>
#include <iomanip>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "kdg/mesh.hpp"

namespace kdg {

struct VtkScalar {
  std::string name;
  std::vector<double> values;  // one per point
};

struct VtkVector {
  std::string name;
  std::vector<std::array<double, 3>> values;
};

/// Writes an UNSTRUCTURED_GRID of VTK_VERTEX cells, one per point.
template <int D>
void write_vtk(std::ostream& os, const std::string& title, const std::vector<Vec<D>>& points,
               const std::vector<VtkScalar>& scalars, const std::vector<VtkVector>& vectors = {}) {
  const std::size_t n = points.size();
  os << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << n << " double\n" << std::setprecision(12);
  for (const auto& p : points) {
    for (int k = 0; k < 3; ++k) os << (k ? " " : "") << (k < D ? p[k] : 0.0);
    os << "\n";
  }
  os << "CELLS " << n << " " << 2 * n << "\n";
  for (std::size_t i = 0; i < n; ++i) os << "1 " << i << "\n";
  os << "CELL_TYPES " << n << "\n";
  for (std::size_t i = 0; i < n; ++i) os << "1\n";
  if (scalars.empty() && vectors.empty()) return;
  os << "POINT_DATA " << n << "\n";
  for (const auto& s : scalars) {
    os << "SCALARS " << s.name << " double 1\nLOOKUP_TABLE default\n";
    for (double v : s.values) os << v << "\n";
  }
  for (const auto& v : vectors) {
    os << "VECTORS " << v.name << " double\n";
    for (const auto& a : v.values) os << a[0] << " " << a[1] << " " << a[2] << "\n";
  }
}

/// All GL nodes of a mesh in storage order (macrocell, subcell, node).
template <int D>
std::vector<Vec<D>> mesh_points(const Macromesh<D>& mesh) {
  std::vector<Vec<D>> out;
  out.reserve(mesh.num_nodes());
  for (int k = 0; k < mesh.num_macrocells(); ++k)
    for (int n = 0; n < mesh.nodes_per_macrocell(); ++n) out.push_back(mesh.point(k, n));
  return out;
}

}  // namespace kdg
