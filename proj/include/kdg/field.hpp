#pragma once

#include <span>
#include <vector>

namespace kdg {

/// Kinetic unknowns F, one block per (velocity, macrocell), and the
/// macroscopic field W, one block per macrocell. Inside a block values are
/// ordered subcell-major then node; W blocks store variable r of node n at
/// r * nodes + n. Both are overwritten in place.
struct FieldState {
  int num_velocities = 0;
  int num_cells = 0;
  int nodes_per_cell = 0;
  int num_conserved = 0;
  double time = 0.0;

  std::vector<std::vector<double>> f;
  std::vector<std::vector<double>> w;

  FieldState() = default;
  FieldState(int nv, int ncells, int nloc, int m)
      : num_velocities(nv), num_cells(ncells), nodes_per_cell(nloc), num_conserved(m),
        f(static_cast<std::size_t>(nv) * ncells, std::vector<double>(nloc, 0.0)),
        w(ncells, std::vector<double>(static_cast<std::size_t>(m) * nloc, 0.0)) {}

  std::span<double> fblock(int v, int cell) { return f[index(v, cell)]; }
  std::span<const double> fblock(int v, int cell) const { return f[index(v, cell)]; }
  std::span<double> wblock(int cell) { return w[cell]; }
  std::span<const double> wblock(int cell) const { return w[cell]; }

  double& W(int cell, int var, int node) {
    return w[cell][static_cast<std::size_t>(var) * nodes_per_cell + node];
  }
  double W(int cell, int var, int node) const {
    return w[cell][static_cast<std::size_t>(var) * nodes_per_cell + node];
  }

  std::size_t index(int v, int cell) const {
    return static_cast<std::size_t>(v) * num_cells + cell;
  }
};

}  // namespace kdg
