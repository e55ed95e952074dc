#pragma once

// Upwind dependency graphs. An edge L -> R means R needs the values of L
// (some GL node on the shared face has n_LR . v > 0). Fictitious boundary
// cells are never vertices; their data is constant ghost data.

#include <algorithm>
#include <functional>
#include <map>
#include <ostream>
#include <queue>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "kdg/errors.hpp"
#include "kdg/mesh.hpp"

namespace kdg {

enum class Granularity { subcell, macrocell };

struct DepGraph {
  int num_vertices = 0;
  std::vector<std::pair<int, int>> edges;  // sorted, unique
  Granularity granularity = Granularity::subcell;
  int velocity = -1;

  std::vector<std::vector<int>> successors() const {
    std::vector<std::vector<int>> s(num_vertices);
    for (auto [a, b] : edges) s[a].push_back(b);
    return s;
  }
  std::vector<std::vector<int>> predecessors() const {
    std::vector<std::vector<int>> p(num_vertices);
    for (auto [a, b] : edges) p[b].push_back(a);
    return p;
  }
  bool has_edge(int a, int b) const {
    return std::binary_search(edges.begin(), edges.end(), std::make_pair(a, b));
  }
};

struct TopoOrder {
  std::vector<int> order;     // order[k] = vertex at position k
  std::vector<int> position;  // inverse permutation
};

namespace detail {

/// Positive-flux test with the tangential tolerance |v.n| <= 1e-12 |v||n|.
template <int D>
bool outflow(const Vec<D>& v, const Vec<D>& n) {
  const double vn = dot<D>(v, n);
  return vn > 1e-12 * norm<D>(v) * norm<D>(n);
}

inline void finalize(DepGraph& g) {
  std::sort(g.edges.begin(), g.edges.end());
  g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
}

}  // namespace detail

/// Subcell graph restricted to one macrocell (vertices = local subcells).
template <int D>
DepGraph build_subcell_graph(const Macromesh<D>& mesh, int cell, const Vec<D>& v,
                             int velocity = -1) {
  const auto& c = mesh.cell(cell);
  const auto& ref = mesh.ref();
  DepGraph g;
  g.num_vertices = c.num_subcells;
  g.granularity = Granularity::subcell;
  g.velocity = velocity;
  for (int s = 0; s < c.num_subcells; ++s) {
    for (int f = 0; f < 2 * D; ++f) {
      const int nb = c.subcell_neighbor(s, f);
      if (nb < 0) continue;
      for (int i : ref.face_nodes(f)) {
        if (detail::outflow<D>(v, scaled_normal<D>(mesh, cell, {s, i}, f))) {
          g.edges.emplace_back(s, nb);
          break;
        }
      }
    }
  }
  detail::finalize(g);
  return g;
}

/// Graph over every subcell of the mesh (vertex = cell * subcells + s) or
/// over macrocells, for one velocity.
template <int D>
DepGraph build_dep_graph(const Macromesh<D>& mesh, const Vec<D>& v, Granularity gran,
                         int velocity = -1) {
  DepGraph g;
  g.granularity = gran;
  g.velocity = velocity;
  const int nsub = mesh.subcells_per_macrocell();
  if (gran == Granularity::macrocell) {
    g.num_vertices = mesh.num_macrocells();
    for (const auto& iface : mesh.interfaces()) {
      for (const auto& [l, r] : iface.pairs) {
        if (detail::outflow<D>(v, scaled_normal<D>(mesh, iface.left, l, iface.left_face))) {
          g.edges.emplace_back(iface.left, iface.right);
          break;
        }
      }
      for (const auto& [l, r] : iface.pairs) {
        if (detail::outflow<D>(v, scaled_normal<D>(mesh, iface.right, r, iface.right_face))) {
          g.edges.emplace_back(iface.right, iface.left);
          break;
        }
      }
    }
  } else {
    g.num_vertices = mesh.num_macrocells() * nsub;
    for (int k = 0; k < mesh.num_macrocells(); ++k) {
      const auto local = build_subcell_graph<D>(mesh, k, v);
      for (auto [a, b] : local.edges) g.edges.emplace_back(k * nsub + a, k * nsub + b);
    }
    for (const auto& iface : mesh.interfaces()) {
      for (const auto& [l, r] : iface.pairs) {
        const int lv = iface.left * nsub + l.subcell;
        const int rv = iface.right * nsub + r.subcell;
        if (detail::outflow<D>(v, scaled_normal<D>(mesh, iface.left, l, iface.left_face)))
          g.edges.emplace_back(lv, rv);
        if (detail::outflow<D>(v, scaled_normal<D>(mesh, iface.right, r, iface.right_face)))
          g.edges.emplace_back(rv, lv);
      }
    }
  }
  detail::finalize(g);
  return g;
}

/// Kahn's algorithm; among ready vertices the lowest index goes first.
inline TopoOrder topological_order(const DepGraph& g) {
  const auto succ = g.successors();
  std::vector<int> indeg(g.num_vertices, 0);
  for (auto [a, b] : g.edges) ++indeg[b];
  std::priority_queue<int, std::vector<int>, std::greater<int>> ready;
  for (int u = 0; u < g.num_vertices; ++u)
    if (indeg[u] == 0) ready.push(u);

  TopoOrder t;
  t.order.reserve(g.num_vertices);
  while (!ready.empty()) {
    const int u = ready.top();
    ready.pop();
    t.order.push_back(u);
    for (int w : succ[u])
      if (--indeg[w] == 0) ready.push(w);
  }

  if (static_cast<int>(t.order.size()) != g.num_vertices) {
    // Walk predecessors among the unprocessed vertices until one repeats.
    const auto pred = g.predecessors();
    int u = 0;
    while (indeg[u] == 0) ++u;
    std::vector<int> seen(g.num_vertices, -1);
    std::vector<int> path;
    while (seen[u] < 0) {
      seen[u] = static_cast<int>(path.size());
      path.push_back(u);
      for (int p : pred[u])
        if (indeg[p] > 0) {
          u = p;
          break;
        }
    }
    std::vector<int> cycle(path.begin() + seen[u], path.end());
    std::reverse(cycle.begin(), cycle.end());
    std::string msg = "cycle";
    for (int c : cycle) msg += " " + std::to_string(c);
    msg += " " + std::to_string(cycle.front());
    throw CycleDetected(msg);
  }

  t.position.assign(g.num_vertices, 0);
  for (int k = 0; k < g.num_vertices; ++k) t.position[t.order[k]] = k;
  return t;
}

/// Level k holds the vertices whose longest path from a source has length k.
inline std::vector<std::vector<int>> parallel_levels(const DepGraph& g, const TopoOrder& t) {
  const auto pred = g.predecessors();
  std::vector<int> level(g.num_vertices, 0);
  int max_level = -1;
  for (int u : t.order) {
    for (int p : pred[u]) level[u] = std::max(level[u], level[p] + 1);
    max_level = std::max(max_level, level[u]);
  }
  std::vector<std::vector<int>> out(max_level + 1);
  for (int u = 0; u < g.num_vertices; ++u) out[level[u]].push_back(u);
  return out;
}

inline void write_dot(std::ostream& os, const DepGraph& g) {
  os << "digraph dep {\n";
  os << "  // granularity="
     << (g.granularity == Granularity::subcell ? "subcell" : "macrocell")
     << " velocity=" << g.velocity << "\n";
  for (int u = 0; u < g.num_vertices; ++u) os << "  " << u << ";\n";
  for (auto [a, b] : g.edges) os << "  " << a << " -> " << b << ";\n";
  os << "}\n";
}

}  // namespace kdg
