#pragma once

// Macromesh: coarse macrocells with a D-linear geometric map, each split
// into a regular grid of subcells that reuse the macrocell map. Neighbouring
// macrocells communicate through Interface objects whose node lists are
// matched point by point.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "kdg/basis.hpp"
#include "kdg/errors.hpp"

namespace kdg {

template <int D>
using Vec = std::array<double, D>;

/// Row-major small matrix, m[r][c].
template <int D>
using Mat = std::array<std::array<double, D>, D>;

template <int D>
double dot(const Vec<D>& a, const Vec<D>& b) {
  double s = 0.0;
  for (int k = 0; k < D; ++k) s += a[k] * b[k];
  return s;
}

template <int D>
double norm(const Vec<D>& a) {
  return std::sqrt(dot<D>(a, a));
}

template <int D>
double determinant(const Mat<D>& m) {
  if constexpr (D == 1) {
    return m[0][0];
  } else if constexpr (D == 2) {
    return m[0][0] * m[1][1] - m[0][1] * m[1][0];
  } else {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  }
}

/// Cofactor matrix co(A) = det(A) A^{-T}, computed in adjugate form so it is
/// defined for singular A as well.
template <int D>
Mat<D> cofactor(const Mat<D>& a) {
  Mat<D> c{};
  if constexpr (D == 1) {
    c[0][0] = 1.0;
  } else if constexpr (D == 2) {
    c[0][0] = a[1][1];
    c[0][1] = -a[1][0];
    c[1][0] = -a[0][1];
    c[1][1] = a[0][0];
  } else {
    for (int r = 0; r < 3; ++r) {
      const int r1 = (r + 1) % 3, r2 = (r + 2) % 3;
      for (int col = 0; col < 3; ++col) {
        const int c1 = (col + 1) % 3, c2 = (col + 2) % 3;
        c[r][col] = a[r1][c1] * a[r2][c2] - a[r1][c2] * a[r2][c1];
      }
    }
  }
  return c;
}

template <int D>
Vec<D> mat_vec(const Mat<D>& m, const Vec<D>& v) {
  Vec<D> r{};
  for (int i = 0; i < D; ++i)
    for (int k = 0; k < D; ++k) r[i] += m[i][k] * v[k];
  return r;
}

/// m^T v
template <int D>
Vec<D> mat_t_vec(const Mat<D>& m, const Vec<D>& v) {
  Vec<D> r{};
  for (int i = 0; i < D; ++i)
    for (int k = 0; k < D; ++k) r[k] += m[i][k] * v[i];
  return r;
}

/// Reference to one GL node of one subcell of a macrocell.
struct NodeRef {
  int subcell = 0;
  int node = 0;
};

template <int D>
struct Macrocell {
  static constexpr int num_corners = 1 << D;

  int id = 0;
  /// Corner c has reference coordinate -1 (bit k clear) or +1 (bit k set)
  /// along axis k.
  std::array<Vec<D>, num_corners> corners{};
  std::array<int, D> sub{};  // subcells per axis
  int num_subcells = 0;

  // Per (subcell, node), flattened as subcell * nodes_per_subcell + node.
  std::vector<Vec<D>> x;
  std::vector<double> omega;
  std::vector<Mat<D>> cof;

  /// Macro face -> interface id (>= 0), or -(boundary id + 1).
  std::array<int, 2 * D> face_link{};

  Vec<D> map(const Vec<D>& xi) const {
    Vec<D> p{};
    for (int c = 0; c < num_corners; ++c) {
      double n = 1.0;
      for (int k = 0; k < D; ++k)
        n *= ((c >> k) & 1) ? 0.5 * (1.0 + xi[k]) : 0.5 * (1.0 - xi[k]);
      for (int r = 0; r < D; ++r) p[r] += n * corners[c][r];
    }
    return p;
  }

  /// d map_r / d xi_k
  Mat<D> jacobian(const Vec<D>& xi) const {
    Mat<D> j{};
    for (int c = 0; c < num_corners; ++c) {
      for (int k = 0; k < D; ++k) {
        double dn = ((c >> k) & 1) ? 0.5 : -0.5;
        for (int l = 0; l < D; ++l) {
          if (l == k) continue;
          dn *= ((c >> l) & 1) ? 0.5 * (1.0 + xi[l]) : 0.5 * (1.0 - xi[l]);
        }
        for (int r = 0; r < D; ++r) j[r][k] += dn * corners[c][r];
      }
    }
    return j;
  }

  std::array<int, D> subcell_index(int s) const {
    std::array<int, D> si{};
    for (int k = 0; k < D; ++k) {
      si[k] = s % sub[k];
      s /= sub[k];
    }
    return si;
  }

  int subcell_flat(const std::array<int, D>& si) const {
    int s = 0;
    for (int k = D - 1; k >= 0; --k) s = s * sub[k] + si[k];
    return s;
  }

  /// Neighbouring subcell across subcell face f, or -1 on the macro boundary.
  int subcell_neighbor(int s, int f) const {
    auto si = subcell_index(s);
    const int axis = f / 2;
    si[axis] += (f % 2 == 0) ? -1 : 1;
    if (si[axis] < 0 || si[axis] >= sub[axis]) return -1;
    return subcell_flat(si);
  }

  /// Macro reference coordinate of a subcell-reference point.
  Vec<D> macro_coord(int s, const Vec<D>& xhat) const {
    const auto si = subcell_index(s);
    Vec<D> xi{};
    for (int k = 0; k < D; ++k) xi[k] = -1.0 + (2.0 * si[k] + 1.0 + xhat[k]) / sub[k];
    return xi;
  }
};

/// Shared macro face between two macrocells with matched node lists.
struct Interface {
  int left = 0;        // macrocell ids
  int right = 0;
  int left_face = 0;   // macro face indices
  int right_face = 0;
  /// pairs[p] = (left node, right node) at the same physical point.
  std::vector<std::pair<NodeRef, NodeRef>> pairs;
};

struct BoundaryFace {
  int cell = 0;
  int face = 0;
  std::vector<NodeRef> nodes;
};

template <int D>
class Macromesh {
public:
  Macromesh(int degree, std::array<int, D> sub) : ref_(degree), sub_(sub) {
    for (int k = 0; k < D; ++k) subcells_per_macro_ *= sub[k];
  }

  const RefElement<D>& ref() const { return ref_; }
  int degree() const { return ref_.degree(); }
  std::array<int, D> sub_dims() const { return sub_; }
  int nodes_per_subcell() const { return ref_.num_nodes(); }
  int subcells_per_macrocell() const { return subcells_per_macro_; }
  int nodes_per_macrocell() const { return subcells_per_macro_ * ref_.num_nodes(); }
  int num_macrocells() const { return static_cast<int>(cells_.size()); }
  std::size_t num_nodes() const {
    return static_cast<std::size_t>(num_macrocells()) * nodes_per_macrocell();
  }

  const Macrocell<D>& cell(int k) const { return cells_[k]; }
  const std::vector<Macrocell<D>>& cells() const { return cells_; }
  const std::vector<Interface>& interfaces() const { return interfaces_; }
  const std::vector<BoundaryFace>& boundary_faces() const { return boundary_; }

  /// Offset of (subcell, node) inside a macrocell block.
  int local_index(NodeRef r) const { return r.subcell * ref_.num_nodes() + r.node; }
  int local_index(int subcell, int node) const { return subcell * ref_.num_nodes() + node; }

  /// All (subcell, node) pairs of a macrocell lying on macro face f, in
  /// lexicographic order.
  std::vector<NodeRef> macro_face_nodes(int face) const {
    const int axis = face / 2;
    const bool plus = face % 2 == 1;
    std::vector<NodeRef> out;
    for (int s = 0; s < subcells_per_macro_; ++s) {
      int rem = s;
      std::array<int, D> si{};
      for (int k = 0; k < D; ++k) {
        si[k] = rem % sub_[k];
        rem /= sub_[k];
      }
      if (si[axis] != (plus ? sub_[axis] - 1 : 0)) continue;
      for (int i : ref_.face_nodes(face)) out.push_back({s, i});
    }
    return out;
  }

  /// Adds a macrocell and computes its node geometry.
  int add_macrocell(const std::array<Vec<D>, Macrocell<D>::num_corners>& corners) {
    Macrocell<D> c;
    c.id = num_macrocells();
    c.corners = corners;
    c.sub = sub_;
    c.num_subcells = subcells_per_macro_;
    const int nn = ref_.num_nodes();
    c.x.resize(static_cast<std::size_t>(c.num_subcells) * nn);
    c.omega.resize(c.x.size());
    c.cof.resize(c.x.size());
    for (int s = 0; s < c.num_subcells; ++s) {
      for (int i = 0; i < nn; ++i) {
        const Vec<D> xi = c.macro_coord(s, ref_.node(i));
        Mat<D> jac = c.jacobian(xi);
        for (int r = 0; r < D; ++r)
          for (int k = 0; k < D; ++k) jac[r][k] /= sub_[k];
        const double det = determinant<D>(jac);
        if (!(det > 0.0))
          throw DegenerateBox("macrocell " + std::to_string(c.id) +
                              " has non-positive Jacobian determinant");
        const std::size_t idx = static_cast<std::size_t>(s) * nn + i;
        c.x[idx] = c.map(xi);
        c.omega[idx] = ref_.weight(i) * det;
        c.cof[idx] = cofactor<D>(jac);
      }
    }
    c.face_link.fill(-1);
    cells_.push_back(std::move(c));
    return cells_.back().id;
  }

  const Vec<D>& point(int cell, NodeRef r) const { return cells_[cell].x[local_index(r)]; }
  const Vec<D>& point(int cell, int local) const { return cells_[cell].x[local]; }

  void add_interface(Interface iface) {
    const int id = static_cast<int>(interfaces_.size());
    cells_[iface.left].face_link[iface.left_face] = id;
    cells_[iface.right].face_link[iface.right_face] = id;
    interfaces_.push_back(std::move(iface));
  }

  void add_boundary(BoundaryFace b) {
    const int id = static_cast<int>(boundary_.size());
    cells_[b.cell].face_link[b.face] = -(id + 1);
    boundary_.push_back(std::move(b));
  }

  double volume(int cell, int subcell) const {
    const auto& c = cells_[cell];
    double v = 0.0;
    for (int i = 0; i < ref_.num_nodes(); ++i) v += c.omega[local_index(subcell, i)];
    return v;
  }

private:
  RefElement<D> ref_;
  std::array<int, D> sub_;
  int subcells_per_macro_ = 1;
  std::vector<Macrocell<D>> cells_;
  std::vector<Interface> interfaces_;
  std::vector<BoundaryFace> boundary_;
};

/// n_f(x_{L,i}) = c_{L,i} n_hat_f. The node must lie on the subcell face.
template <int D>
Vec<D> scaled_normal(const Macromesh<D>& mesh, int cell, NodeRef r, int face) {
  if (mesh.ref().face_weight(r.node, face) == 0.0)
    throw NodeNotOnFace("node " + std::to_string(r.node) + " not on face " +
                        std::to_string(face));
  return mat_vec<D>(mesh.cell(cell).cof[mesh.local_index(r)],
                    RefElement<D>::face_normal(face));
}

/// For each left point, the index of the coincident right point. Throws
/// NonConformalInterface when counts differ or any point is unmatched
/// within tol.
template <int D>
std::vector<int> match_interface_nodes(const std::vector<Vec<D>>& left,
                                       const std::vector<Vec<D>>& right,
                                       double tol = 1e-10) {
  if (left.size() != right.size())
    throw NonConformalInterface("face node counts differ (" + std::to_string(left.size()) +
                                " vs " + std::to_string(right.size()) + ")");
  const std::size_t n = left.size();
  auto order_of = [n](const std::vector<Vec<D>>& p) {
    std::vector<std::size_t> o(n);
    std::iota(o.begin(), o.end(), 0);
    auto key = [&](std::size_t i) {
      std::array<std::int64_t, D> q{};
      for (int k = 0; k < D; ++k) q[k] = std::llround(p[i][k] * 1e8);
      return q;
    };
    std::stable_sort(o.begin(), o.end(),
                     [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
    return o;
  };
  auto close = [&](const Vec<D>& a, const Vec<D>& b) {
    double d2 = 0.0;
    for (int k = 0; k < D; ++k) d2 += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(d2) <= tol;
  };

  std::vector<int> match(n, -1);
  const auto ol = order_of(left);
  const auto orr = order_of(right);
  bool sorted_ok = true;
  for (std::size_t p = 0; p < n; ++p) {
    if (!close(left[ol[p]], right[orr[p]])) {
      sorted_ok = false;
      break;
    }
    match[ol[p]] = static_cast<int>(orr[p]);
  }
  if (sorted_ok) return match;

  // Quantization split a cluster; fall back to a direct search.
  std::vector<char> used(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    match[i] = -1;
    for (std::size_t j = 0; j < n; ++j) {
      if (!used[j] && close(left[i], right[j])) {
        match[i] = static_cast<int>(j);
        used[j] = 1;
        break;
      }
    }
    if (match[i] < 0)
      throw NonConformalInterface("no partner for face node " + std::to_string(i));
  }
  return match;
}

/// Box [lo, hi] split into macro[k] macrocells per axis, each split into
/// sub[k] subcells of degree d. Macrocells are numbered with the first axis
/// varying fastest.
template <int D>
Macromesh<D> build_box_macromesh(const Vec<D>& lo, const Vec<D>& hi,
                                 const std::array<int, D>& macro,
                                 const std::array<int, D>& sub, int d) {
  for (int k = 0; k < D; ++k) {
    if (!(hi[k] > lo[k]) || !std::isfinite(lo[k]) || !std::isfinite(hi[k]))
      throw DegenerateBox("axis " + std::to_string(k) + " has empty extent");
    if (macro[k] < 1 || sub[k] < 1)
      throw DegenerateBox("subdivision counts must be >= 1");
  }
  detail::check_degree(d);
  Macromesh<D> mesh(d, sub);

  int total = 1;
  for (int k = 0; k < D; ++k) total *= macro[k];
  auto macro_index = [&](int id) {
    std::array<int, D> mi{};
    for (int k = 0; k < D; ++k) {
      mi[k] = id % macro[k];
      id /= macro[k];
    }
    return mi;
  };
  auto macro_flat = [&](const std::array<int, D>& mi) {
    int id = 0;
    for (int k = D - 1; k >= 0; --k) id = id * macro[k] + mi[k];
    return id;
  };

  for (int id = 0; id < total; ++id) {
    const auto mi = macro_index(id);
    std::array<Vec<D>, Macrocell<D>::num_corners> corners{};
    for (int c = 0; c < Macrocell<D>::num_corners; ++c)
      for (int k = 0; k < D; ++k) {
        const int j = mi[k] + ((c >> k) & 1);
        corners[c][k] = (j == macro[k]) ? hi[k] : lo[k] + (hi[k] - lo[k]) * j / macro[k];
      }
    mesh.add_macrocell(corners);
  }

  auto face_points = [&](int cell, const std::vector<NodeRef>& nodes) {
    std::vector<Vec<D>> p;
    p.reserve(nodes.size());
    for (const auto& r : nodes) p.push_back(mesh.point(cell, r));
    return p;
  };

  for (int id = 0; id < total; ++id) {
    const auto mi = macro_index(id);
    for (int k = 0; k < D; ++k) {
      if (mi[k] + 1 < macro[k]) {
        auto nj = mi;
        nj[k] += 1;
        Interface iface;
        iface.left = id;
        iface.right = macro_flat(nj);
        iface.left_face = 2 * k + 1;
        iface.right_face = 2 * k;
        const auto ln = mesh.macro_face_nodes(iface.left_face);
        const auto rn = mesh.macro_face_nodes(iface.right_face);
        const auto m = match_interface_nodes<D>(face_points(iface.left, ln),
                                                face_points(iface.right, rn));
        iface.pairs.reserve(ln.size());
        for (std::size_t p = 0; p < ln.size(); ++p) iface.pairs.emplace_back(ln[p], rn[m[p]]);
        mesh.add_interface(std::move(iface));
      }
    }
  }
  for (int id = 0; id < total; ++id) {
    const auto mi = macro_index(id);
    for (int f = 0; f < 2 * D; ++f) {
      const int k = f / 2;
      const bool on_boundary = (f % 2 == 0) ? mi[k] == 0 : mi[k] == macro[k] - 1;
      if (on_boundary) mesh.add_boundary({id, f, mesh.macro_face_nodes(f)});
    }
  }
  return mesh;
}

/// Plain-text listing of macrocells, interfaces and node counts.
template <int D>
void write_mesh_summary(std::ostream& os, const Macromesh<D>& mesh) {
  os << "macromesh dim=" << D << " degree=" << mesh.degree()
     << " macrocells=" << mesh.num_macrocells()
     << " interfaces=" << mesh.interfaces().size()
     << " boundary_faces=" << mesh.boundary_faces().size()
     << " subcells_per_macrocell=" << mesh.subcells_per_macrocell()
     << " nodes=" << mesh.num_nodes() << "\n";
  for (const auto& c : mesh.cells()) {
    os << "cell " << c.id << " corners";
    for (const auto& p : c.corners) {
      os << " (";
      for (int k = 0; k < D; ++k) os << (k ? "," : "") << p[k];
      os << ")";
    }
    os << " links";
    for (int f = 0; f < 2 * D; ++f) os << " " << c.face_link[f];
    os << "\n";
  }
  for (std::size_t j = 0; j < mesh.interfaces().size(); ++j) {
    const auto& i = mesh.interfaces()[j];
    os << "interface " << j << " " << i.left << ":" << i.left_face << " -> " << i.right
       << ":" << i.right_face << " nodes=" << i.pairs.size() << "\n";
  }
}

}  // namespace kdg
