#pragma once

// Upwind nodal DG transport at constant velocity with a theta-weighted
// implicit step
//
//   (I - theta dt L_h) F^{n+1} = (I + (1-theta) dt L_h) F^n + dt B f^b,
//
// solved without any global linear system: macrocells are visited in the
// topological order of the upwind graph and, inside a macrocell, subcells
// in their own topological order, so only one (d+1)^D block is factorized
// at a time. One step of one velocity splits into five task bodies:
// volume_residual, interface_residual, boundary_residual, volume_solve and
// extract_traces.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kdg/errors.hpp"
#include "kdg/graph.hpp"
#include "kdg/mesh.hpp"

namespace kdg {

/// Dense LU with partial pivoting for the small diagonal blocks.
class BlockLU {
public:
  void factorize(std::vector<double> a, int n) {
    n_ = n;
    lu_ = std::move(a);
    perm_.resize(n);
    for (int i = 0; i < n; ++i) perm_[i] = i;
    for (int c = 0; c < n; ++c) {
      int p = c;
      double best = std::abs(lu_[c * n + c]);
      for (int r = c + 1; r < n; ++r)
        if (std::abs(lu_[r * n + c]) > best) {
          best = std::abs(lu_[r * n + c]);
          p = r;
        }
      if (best < 1e-300) throw SingularBlock("pivot " + std::to_string(best) + " in column " +
                                             std::to_string(c));
      if (p != c) {
        for (int k = 0; k < n; ++k) std::swap(lu_[c * n + k], lu_[p * n + k]);
        std::swap(perm_[c], perm_[p]);
      }
      const double inv = 1.0 / lu_[c * n + c];
      for (int r = c + 1; r < n; ++r) {
        double& l = lu_[r * n + c];
        if (l == 0.0) continue;
        l *= inv;
        for (int k = c + 1; k < n; ++k) lu_[r * n + k] -= l * lu_[c * n + k];
      }
    }
  }

  /// Solves in place.
  void solve(std::span<double> b) const {
    const int n = n_;
    tmp_.assign(n, 0.0);
    for (int i = 0; i < n; ++i) tmp_[i] = b[perm_[i]];
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < i; ++k) tmp_[i] -= lu_[i * n + k] * tmp_[k];
    for (int i = n - 1; i >= 0; --i) {
      for (int k = i + 1; k < n; ++k) tmp_[i] -= lu_[i * n + k] * tmp_[k];
      tmp_[i] /= lu_[i * n + i];
    }
    for (int i = 0; i < n; ++i) b[i] = tmp_[i];
  }

  bool empty() const { return n_ == 0; }

private:
  int n_ = 0;
  std::vector<double> lu_;
  std::vector<int> perm_;
  mutable std::vector<double> tmp_;
};

/// Gamma tables of one subcell for one velocity:
///   (L_h f)_i = sum_j diag[i*n+j] f_j + sum_f inflow[i*2D+f] f_R(i'),
/// with diag the Gamma_{L<-L} block and inflow >= 0 the Gamma_{L<-R}
/// weights, nonzero only on inflow face nodes.
struct SubcellStencil {
  std::vector<double> diag;
  std::vector<double> inflow;
};

template <int D>
class Transport {
public:
  /// f^b(x, velocity index); evaluated once, the ghost data is constant.
  using BoundaryData = std::function<double(const Vec<D>&, int)>;

  Transport(const Macromesh<D>& mesh, std::vector<Vec<D>> velocities, BoundaryData fb)
      : mesh_(mesh), vel_(std::move(velocities)) {
    const int nv = num_velocities();
    const int nc = mesh.num_macrocells();
    const int ni = static_cast<int>(mesh.interfaces().size());
    const int nb = static_cast<int>(mesh.boundary_faces().size());
    const int nloc = mesh.nodes_per_macrocell();

    macro_order_.resize(nv);
    sub_order_.resize(static_cast<std::size_t>(nv) * nc);
    iface_dir_.assign(static_cast<std::size_t>(nv) * ni, 0);
    upwind_ifaces_.resize(static_cast<std::size_t>(nv) * nc);
    downwind_ifaces_.resize(static_cast<std::size_t>(nv) * nc);
    for (int v = 0; v < nv; ++v) {
      const DepGraph g = build_dep_graph<D>(mesh, vel_[v], Granularity::macrocell, v);
      macro_order_[v] = topological_order(g);
      for (int k = 0; k < nc; ++k)
        sub_order_[v * nc + k] = topological_order(build_subcell_graph<D>(mesh, k, vel_[v], v));
      for (int j = 0; j < ni; ++j) {
        const auto& iface = mesh.interfaces()[j];
        int dir = 0;
        if (g.has_edge(iface.left, iface.right)) dir = 1;
        else if (g.has_edge(iface.right, iface.left)) dir = -1;
        iface_dir_[v * ni + j] = dir;
        if (dir == 0) continue;
        const int up = dir > 0 ? iface.left : iface.right;
        const int down = dir > 0 ? iface.right : iface.left;
        downwind_ifaces_[v * nc + up].push_back(j);
        upwind_ifaces_[v * nc + down].push_back(j);
      }
    }

    ghost_.resize(static_cast<std::size_t>(nv) * nb);
    for (int b = 0; b < nb; ++b) {
      const auto& bf = mesh.boundary_faces()[b];
      for (int v = 0; v < nv; ++v) {
        auto& gv = ghost_[v * nb + b];
        gv.resize(bf.nodes.size());
        for (std::size_t p = 0; p < bf.nodes.size(); ++p)
          gv[p] = fb ? fb(mesh.point(bf.cell, bf.nodes[p]), v) : 0.0;
      }
    }

    rhs_.assign(static_cast<std::size_t>(nv) * nc, std::vector<double>(nloc, 0.0));
    traces_.resize(static_cast<std::size_t>(nv) * ni);
    for (int v = 0; v < nv; ++v)
      for (int j = 0; j < ni; ++j) {
        auto& t = traces_[v * ni + j];
        t.old_values.assign(mesh.interfaces()[j].pairs.size(), 0.0);
        t.new_values.assign(mesh.interfaces()[j].pairs.size(), 0.0);
      }
  }

  const Macromesh<D>& mesh() const { return mesh_; }
  int num_velocities() const { return static_cast<int>(vel_.size()); }
  const Vec<D>& velocity(int v) const { return vel_[v]; }

  const TopoOrder& macro_order(int v) const { return macro_order_[v]; }
  const TopoOrder& subcell_order(int v, int cell) const {
    return sub_order_[v * mesh_.num_macrocells() + cell];
  }
  /// +1: left -> right, -1: right -> left, 0: tangential.
  int interface_direction(int v, int j) const {
    return iface_dir_[v * static_cast<int>(mesh_.interfaces().size()) + j];
  }
  int downwind_cell(int v, int j) const {
    const auto& i = mesh_.interfaces()[j];
    return interface_direction(v, j) > 0 ? i.right : i.left;
  }
  const std::vector<int>& upwind_interfaces(int v, int cell) const {
    return upwind_ifaces_[v * mesh_.num_macrocells() + cell];
  }
  const std::vector<int>& downwind_interfaces(int v, int cell) const {
    return downwind_ifaces_[v * mesh_.num_macrocells() + cell];
  }
  /// Boundary faces of a cell with at least one inflow node for velocity v.
  std::vector<int> inflow_boundaries(int v, int cell) const {
    std::vector<int> out;
    const auto& c = mesh_.cell(cell);
    for (int f = 0; f < 2 * D; ++f) {
      if (c.face_link[f] >= 0) continue;
      const int b = -c.face_link[f] - 1;
      for (const auto& r : mesh_.boundary_faces()[b].nodes)
        if (dot<D>(vel_[v], scaled_normal<D>(mesh_, cell, r, f)) < 0.0) {
          out.push_back(b);
          break;
        }
    }
    return out;
  }

  std::span<const double> ghost(int v, int b) const {
    return ghost_[v * static_cast<int>(mesh_.boundary_faces().size()) + b];
  }
  std::span<double> rhs(int v, int cell) { return rhs_[v * mesh_.num_macrocells() + cell]; }

  /// Cache diagonal-block factorizations across steps (keyed by theta*dt).
  void set_block_cache(bool on) {
    cache_on_ = on;
    cache_.clear();
    if (on)
      cache_.resize(static_cast<std::size_t>(num_velocities()) * mesh_.num_macrocells() *
                    mesh_.subcells_per_macrocell());
  }

  SubcellStencil stencil(int v, int cell, int s) const {
    const auto& ref = mesh_.ref();
    const auto& c = mesh_.cell(cell);
    const int nn = ref.num_nodes();
    const int n1 = ref.nodes_per_axis();
    const auto& der = ref.deriv_1d();
    SubcellStencil st;
    st.diag.assign(static_cast<std::size_t>(nn) * nn, 0.0);
    st.inflow.assign(static_cast<std::size_t>(nn) * 2 * D, 0.0);

    std::vector<Vec<D>> b(nn);  // b_j = c_j^T v
    for (int j = 0; j < nn; ++j) b[j] = mat_t_vec<D>(c.cof[mesh_.local_index(s, j)], vel_[v]);

    for (int i = 0; i < nn; ++i) {
      const double inv_w = 1.0 / c.omega[mesh_.local_index(s, i)];
      const auto mi = ref.multi_index(i);
      for (int k = 0; k < D; ++k) {
        auto mj = mi;
        for (int a = 0; a < n1; ++a) {
          mj[k] = a;
          const int j = ref.flatten(mj);
          // grad_k phi_i(x_j) = phi'_{i_k}(x_a)
          st.diag[i * nn + j] += inv_w * ref.weight(j) * b[j][k] * der[a * n1 + mi[k]];
        }
      }
      for (int f = 0; f < 2 * D; ++f) {
        const double mu = ref.face_weight(i, f);
        if (mu == 0.0) continue;
        const double vn = dot<D>(b[i], RefElement<D>::face_normal(f));
        if (vn > 0.0) st.diag[i * nn + i] -= inv_w * mu * vn;
        else st.inflow[i * 2 * D + f] = -inv_w * mu * vn;
      }
    }
    return st;
  }

  // --- task bodies --------------------------------------------------------

  /// R = F^n + (1-theta) dt (intra-macrocell part of L_h F^n). Also stores
  /// the F^n face values on every downwind interface (old trace slot).
  void volume_residual(int v, int cell, std::span<const double> f, double dt, double theta,
                       int pass) {
    auto r = rhs(v, cell);
    const auto& c = mesh_.cell(cell);
    const int nn = mesh_.ref().num_nodes();
    const double a = (1.0 - theta) * dt;
    for (int s = 0; s < c.num_subcells; ++s) {
      const int off = s * nn;
      if (a == 0.0) {
        for (int i = 0; i < nn; ++i) r[off + i] = f[off + i];
        continue;
      }
      const SubcellStencil st = stencil(v, cell, s);
      for (int i = 0; i < nn; ++i) {
        double lf = 0.0;
        for (int j = 0; j < nn; ++j) lf += st.diag[i * nn + j] * f[off + j];
        r[off + i] = lf;
      }
      add_internal_inflow(cell, s, st, f, r.subspan(off, nn));
      for (int i = 0; i < nn; ++i) r[off + i] = f[off + i] + a * r[off + i];
    }
    for (int j : downwind_interfaces(v, cell)) {
      auto& t = trace(v, j);
      const auto& iface = mesh_.interfaces()[j];
      const bool left_up = interface_direction(v, j) > 0;
      for (std::size_t p = 0; p < iface.pairs.size(); ++p) {
        const NodeRef& up = left_up ? iface.pairs[p].first : iface.pairs[p].second;
        t.old_values[p] = f[mesh_.local_index(up)];
      }
      t.old_pass = pass;
    }
  }

  /// Adds dt * Gamma_{L<-R} ((1-theta) f^n_R + theta f^{n+1}_R) from the
  /// upwind side of interface j into the downwind macrocell's R.
  void interface_residual(int v, int j, double dt, double theta, int pass) {
    const auto& t = trace(v, j);
    if (t.old_pass != pass || t.new_pass != pass)
      throw MissingTrace("interface " + std::to_string(j) + " velocity " + std::to_string(v) +
                         " has no trace for pass " + std::to_string(pass));
    const auto& iface = mesh_.interfaces()[j];
    const bool left_up = interface_direction(v, j) > 0;
    const int down = left_up ? iface.right : iface.left;
    const int face = left_up ? iface.right_face : iface.left_face;
    auto r = rhs(v, down);
    const auto& c = mesh_.cell(down);
    for (std::size_t p = 0; p < iface.pairs.size(); ++p) {
      const NodeRef& dn = left_up ? iface.pairs[p].second : iface.pairs[p].first;
      const double g = inflow_weight(v, c, dn, face);
      if (g == 0.0) continue;
      r[mesh_.local_index(dn)] +=
          dt * g * ((1.0 - theta) * t.old_values[p] + theta * t.new_values[p]);
    }
  }

  /// Adds dt * Gamma_{L<-ghost} f^b on the inflow nodes of boundary face b.
  void boundary_residual(int v, int b, double dt) {
    const auto& bf = mesh_.boundary_faces()[b];
    auto r = rhs(v, bf.cell);
    const auto& c = mesh_.cell(bf.cell);
    const auto gh = ghost(v, b);
    for (std::size_t p = 0; p < bf.nodes.size(); ++p) {
      const double g = inflow_weight(v, c, bf.nodes[p], bf.face);
      if (g != 0.0) r[mesh_.local_index(bf.nodes[p])] += dt * g * gh[p];
    }
  }

  /// Solves (I - theta dt L_h) F^{n+1} = R on one macrocell by marching its
  /// subcells in topological order; overwrites f.
  void volume_solve(int v, int cell, std::span<double> f, double dt, double theta) {
    const auto r = rhs(v, cell);
    const int nn = mesh_.ref().num_nodes();
    const double a = theta * dt;
    std::vector<double> rhs_s(nn);
    for (int s : subcell_order(v, cell).order) {
      const int off = s * nn;
      for (int i = 0; i < nn; ++i) rhs_s[i] = r[off + i];
      if (a == 0.0) {
        for (int i = 0; i < nn; ++i) f[off + i] = rhs_s[i];
        continue;
      }
      const SubcellStencil st = stencil(v, cell, s);
      std::vector<double> up(nn, 0.0);
      add_internal_inflow(cell, s, st, f, up);
      for (int i = 0; i < nn; ++i) rhs_s[i] += a * up[i];

      const BlockLU* lu = nullptr;
      BlockLU local;
      if (cache_on_) {
        lu = &cached_block(v, cell, s, a, st);
      } else {
        local.factorize(system_block(st, a, nn), nn);
        lu = &local;
      }
      lu->solve(rhs_s);
      for (int i = 0; i < nn; ++i) f[off + i] = rhs_s[i];
    }
  }

  /// Copies the freshly solved face values to every downwind interface.
  void extract_traces(int v, int cell, std::span<const double> f, int pass) {
    for (int j : downwind_interfaces(v, cell)) {
      auto& t = trace(v, j);
      const auto& iface = mesh_.interfaces()[j];
      const bool left_up = interface_direction(v, j) > 0;
      for (std::size_t p = 0; p < iface.pairs.size(); ++p) {
        const NodeRef& up = left_up ? iface.pairs[p].first : iface.pairs[p].second;
        t.new_values[p] = f[mesh_.local_index(up)];
      }
      t.new_pass = pass;
    }
  }

  /// Sequential driver for one velocity: the five task bodies in macrocell
  /// topological order. blocks[k] is the F block of macrocell k.
  void step_velocity(int v, std::span<const std::span<double>> blocks, double dt, double theta,
                     int pass) {
    for (int k : macro_order(v).order) {
      volume_residual(v, k, blocks[k], dt, theta, pass);
      for (int j : upwind_interfaces(v, k)) interface_residual(v, j, dt, theta, pass);
      for (int b : inflow_boundaries(v, k)) boundary_residual(v, b, dt);
      volume_solve(v, k, blocks[k], dt, theta);
      extract_traces(v, k, blocks[k], pass);
    }
  }

  struct TraceBuffer {
    std::vector<double> old_values;
    std::vector<double> new_values;
    int old_pass = -1;
    int new_pass = -1;
  };
  TraceBuffer& trace(int v, int j) {
    return traces_[v * static_cast<int>(mesh_.interfaces().size()) + j];
  }

private:
  double inflow_weight(int v, const Macrocell<D>& c, NodeRef r, int face) const {
    const auto& ref = mesh_.ref();
    const double mu = ref.face_weight(r.node, face);
    if (mu == 0.0) return 0.0;
    const int idx = mesh_.local_index(r);
    const Vec<D> b = mat_t_vec<D>(c.cof[idx], vel_[v]);
    const double vn = dot<D>(b, RefElement<D>::face_normal(face));
    return vn < 0.0 ? -mu * vn / c.omega[idx] : 0.0;
  }

  /// out_i += inflow weight * f of the neighbouring subcell inside the same
  /// macrocell.
  void add_internal_inflow(int cell, int s, const SubcellStencil& st,
                           std::span<const double> f, std::span<double> out) const {
    const auto& ref = mesh_.ref();
    const auto& c = mesh_.cell(cell);
    const int nn = ref.num_nodes();
    for (int face = 0; face < 2 * D; ++face) {
      const int nb = c.subcell_neighbor(s, face);
      if (nb < 0) continue;
      for (int i : ref.face_nodes(face)) {
        const double g = st.inflow[i * 2 * D + face];
        if (g != 0.0) out[i] += g * f[nb * nn + ref.mirror_node(i, face)];
      }
    }
  }

  static std::vector<double> system_block(const SubcellStencil& st, double a, int nn) {
    std::vector<double> m(static_cast<std::size_t>(nn) * nn);
    for (int i = 0; i < nn; ++i)
      for (int j = 0; j < nn; ++j) m[i * nn + j] = (i == j ? 1.0 : 0.0) - a * st.diag[i * nn + j];
    return m;
  }

  const BlockLU& cached_block(int v, int cell, int s, double a, const SubcellStencil& st) {
    const int nc = mesh_.num_macrocells();
    const int ns = mesh_.subcells_per_macrocell();
    auto& e = cache_[(static_cast<std::size_t>(v) * nc + cell) * ns + s];
    if (e.lu.empty() || e.key != a) {
      e.lu.factorize(system_block(st, a, mesh_.ref().num_nodes()), mesh_.ref().num_nodes());
      e.key = a;
    }
    return e.lu;
  }

  struct CacheEntry {
    double key = 0.0;
    BlockLU lu;
  };

  const Macromesh<D>& mesh_;
  std::vector<Vec<D>> vel_;
  std::vector<TopoOrder> macro_order_;
  std::vector<TopoOrder> sub_order_;
  std::vector<int> iface_dir_;
  std::vector<std::vector<int>> upwind_ifaces_;
  std::vector<std::vector<int>> downwind_ifaces_;
  std::vector<std::vector<double>> ghost_;
  std::vector<std::vector<double>> rhs_;
  std::vector<TraceBuffer> traces_;
  bool cache_on_ = false;
  std::vector<CacheEntry> cache_;
};

}  // namespace kdg
