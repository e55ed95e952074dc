#pragma once

// Kinetic solver state plus task submission for the three operator steps
// (transport, collision, source) and the W reduction. All work is expressed
// as runtime tasks on per-block data handles:
//
//   F[v][k]  kinetic block of velocity v, macrocell k
//   W[k]     macroscopic block of macrocell k
//   R[v][k]  transport residual of velocity v, macrocell k
//   T[v][j]  interface trace buffer of velocity v, interface j
//   D[k]     source increment w* - w of macrocell k
//
// Submission is asynchronous; nothing executes before run().

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "kdg/errors.hpp"
#include "kdg/field.hpp"
#include "kdg/kinetic.hpp"
#include "kdg/mesh.hpp"
#include "kdg/runtime.hpp"
#include "kdg/transport.hpp"

namespace kdg {

struct SolverOptions {
  int workers = 1;
  rt::Scheduler scheduler = rt::Scheduler::eager;
  bool deterministic = false;
  bool cache_blocks = false;
  double picard_tol = 1e-14;
  int picard_max = 50;
};

template <int D>
class KineticSolver {
public:
  static constexpr int m = D + 1;
  using State = std::array<double, m>;
  /// Kinetic boundary data f^b(x, velocity index).
  using BoundaryData = typename Transport<D>::BoundaryData;

  KineticSolver(std::shared_ptr<const Macromesh<D>> mesh, KineticModel<D> model,
                BoundaryData fb, std::shared_ptr<const MacroSource<D>> source = nullptr,
                SolverOptions opt = {})
      : mesh_(std::move(mesh)), model_(std::move(model)), source_(std::move(source)),
        opt_(opt), transport_(*mesh_, velocities(model_), std::move(fb)),
        state_(model_.num_velocities(), mesh_->num_macrocells(), mesh_->nodes_per_macrocell(), m) {
    const int nv = model_.num_velocities();
    const int nc = mesh_->num_macrocells();
    const int ni = static_cast<int>(mesh_->interfaces().size());
    transport_.set_block_cache(opt_.cache_blocks);
    rt_.deterministic_mode(opt_.deterministic);
    for (int v = 0; v < nv; ++v)
      for (int k = 0; k < nc; ++k)
        hF_.push_back(rt_.register_data("F[" + std::to_string(v) + "][" + std::to_string(k) + "]"));
    for (int k = 0; k < nc; ++k) hW_.push_back(rt_.register_data("W[" + std::to_string(k) + "]"));
    for (int v = 0; v < nv; ++v)
      for (int k = 0; k < nc; ++k)
        hR_.push_back(rt_.register_data("R[" + std::to_string(v) + "][" + std::to_string(k) + "]"));
    for (int v = 0; v < nv; ++v)
      for (int j = 0; j < ni; ++j)
        hT_.push_back(rt_.register_data("T[" + std::to_string(v) + "][" + std::to_string(j) + "]"));
    for (int k = 0; k < nc; ++k) hD_.push_back(rt_.register_data("D[" + std::to_string(k) + "]"));
    delta_.assign(nc, std::vector<double>(static_cast<std::size_t>(m) * mesh_->nodes_per_macrocell()));
  }

  const Macromesh<D>& mesh() const { return *mesh_; }
  std::shared_ptr<const Macromesh<D>> mesh_ptr() const { return mesh_; }
  const KineticModel<D>& model() const { return model_; }
  KineticModel<D>& model() { return model_; }
  Transport<D>& transport() { return transport_; }
  FieldState& state() { return state_; }
  const FieldState& state() const { return state_; }
  rt::Runtime& runtime() { return rt_; }
  const SolverOptions& options() const { return opt_; }
  void set_workers(int w) { opt_.workers = w; }
  void set_scheduler(rt::Scheduler s) { opt_.scheduler = s; }
  void set_deterministic(bool on) {
    opt_.deterministic = on;
    rt_.deterministic_mode(on);
  }

  /// F = f^eq(w0(x)), W = w0(x) at every node.
  void set_initial(const std::function<State(const Vec<D>&)>& w0) {
    const int nloc = mesh_->nodes_per_macrocell();
    for (int k = 0; k < mesh_->num_macrocells(); ++k)
      for (int n = 0; n < nloc; ++n) {
        const State w = w0(mesh_->point(k, n));
        for (int r = 0; r < m; ++r) state_.W(k, r, n) = w[r];
        for (int v = 0; v < model_.num_velocities(); ++v)
          state_.fblock(v, k)[n] = model_.equilibrium(w, v);
      }
    state_.time = 0.0;
  }

  /// Recomputes W = P F directly, outside the runtime.
  void reduce_now() {
    submit_reduce();
    run();
  }

  // --- task submission ----------------------------------------------------

  /// One theta-weighted transport step for every moving velocity.
  void submit_transport(double dt, double theta, const std::string& tag = "T") {
    const int pass = ++pass_;
    for (int v = 0; v < model_.num_velocities(); ++v) {
      if (is_rest(v)) continue;  // transport is the identity
      for (int k : transport_.macro_order(v).order) {
        std::vector<std::pair<rt::DataHandle, rt::Access>> down;
        for (int j : transport_.downwind_interfaces(v, k))
          down.push_back({T(v, j), rt::Access::read_write});

        auto acc = down;
        acc.push_back({F(v, k), rt::Access::read});
        acc.push_back({R(v, k), rt::Access::read_write});
        rt_.submit({tag + ":volume_residual", [this, v, k, dt, theta, pass] {
                      transport_.volume_residual(v, k, state_.fblock(v, k), dt, theta, pass);
                    },
                    acc});

        for (int j : transport_.upwind_interfaces(v, k))
          rt_.submit({tag + ":interface_residual",
                      [this, v, j, dt, theta, pass] {
                        transport_.interface_residual(v, j, dt, theta, pass);
                      },
                      {{T(v, j), rt::Access::read}, {R(v, k), rt::Access::commute}}});
        for (int b : transport_.inflow_boundaries(v, k))
          rt_.submit({tag + ":boundary_residual",
                      [this, v, b, dt] { transport_.boundary_residual(v, b, dt); },
                      {{R(v, k), rt::Access::commute}}});

        rt_.submit({tag + ":volume_solve",
                    [this, v, k, dt, theta] {
                      transport_.volume_solve(v, k, state_.fblock(v, k), dt, theta);
                    },
                    {{F(v, k), rt::Access::read_write}, {R(v, k), rt::Access::read}}});

        acc = down;
        acc.push_back({F(v, k), rt::Access::read});
        rt_.submit({tag + ":extract_traces",
                    [this, v, k, pass] {
                      transport_.extract_traces(v, k, state_.fblock(v, k), pass);
                    },
                    acc});
      }
    }
  }

  /// W = P F: one zeroing task per macrocell, then one commutative
  /// accumulation per (velocity, macrocell).
  void submit_reduce(const std::string& tag = "reduce") {
    const int nc = mesh_->num_macrocells();
    for (int k = 0; k < nc; ++k)
      rt_.submit({tag + ":zero_w",
                  [this, k] { std::fill(state_.w[k].begin(), state_.w[k].end(), 0.0); },
                  {{W(k), rt::Access::write}}});
    for (int v = 0; v < model_.num_velocities(); ++v)
      for (int k = 0; k < nc; ++k)
        rt_.submit({tag + ":reduce_w", [this, v, k] { reduce_block(v, k); },
                    {{F(v, k), rt::Access::read}, {W(k), rt::Access::commute}}});
  }

  /// Nodewise BGK step; W must hold P F.
  void submit_collision(double dt, double theta, const std::string& tag = "C") {
    for (int v = 0; v < model_.num_velocities(); ++v)
      for (int k = 0; k < mesh_->num_macrocells(); ++k)
        rt_.submit({tag + ":relax", [this, v, k, dt, theta] { collide_block(v, k, dt, theta); },
                    {{W(k), rt::Access::read}, {F(v, k), rt::Access::read_write}}});
  }

  /// Implicit source step solved on W, then lifted onto every F block.
  void submit_source(double dt, double theta, const std::string& tag = "S") {
    if (!source_) return;
    for (int k = 0; k < mesh_->num_macrocells(); ++k)
      rt_.submit({tag + ":source_solve", [this, k, dt, theta] { source_block(k, dt, theta); },
                  {{W(k), rt::Access::read_write}, {Dh(k), rt::Access::write}}});
    for (int v = 0; v < model_.num_velocities(); ++v)
      for (int k = 0; k < mesh_->num_macrocells(); ++k)
        rt_.submit({tag + ":source_apply", [this, v, k] { apply_source_block(v, k); },
                    {{Dh(k), rt::Access::read}, {F(v, k), rt::Access::read_write}}});
  }

  rt::TaskGraphRun run() {
    rt::TaskGraphRun r = rt_.run(opt_.workers, opt_.scheduler);
    picard_max_seen_ = std::max(picard_max_seen_, picard_iter_.load());
    return r;
  }

  /// Largest local source iteration count seen so far.
  int max_picard_iterations() const { return picard_max_seen_; }

  bool is_rest(int v) const {
    for (int k = 0; k < D; ++k)
      if (model_.velocity(v)[k] != 0.0) return false;
    return true;
  }

  // --- handles ------------------------------------------------------------
  rt::DataHandle F(int v, int k) const { return hF_[v * mesh_->num_macrocells() + k]; }
  rt::DataHandle W(int k) const { return hW_[k]; }
  rt::DataHandle R(int v, int k) const { return hR_[v * mesh_->num_macrocells() + k]; }
  rt::DataHandle T(int v, int j) const {
    return hT_[v * static_cast<int>(mesh_->interfaces().size()) + j];
  }
  rt::DataHandle Dh(int k) const { return hD_[k]; }

private:
  static std::vector<Vec<D>> velocities(const KineticModel<D>& model) {
    std::vector<Vec<D>> out;
    for (int v = 0; v < model.num_velocities(); ++v) out.push_back(model.velocity(v));
    return out;
  }

  void reduce_block(int v, int k) {
    rt::Runtime::check_access(W(k), true);
    const auto f = state_.fblock(v, k);
    const int nloc = mesh_->nodes_per_macrocell();
    for (int r = 0; r < m; ++r) {
      const double p = model_.projection(r, v);
      if (p == 0.0) continue;
      double* w = state_.w[k].data() + static_cast<std::size_t>(r) * nloc;
      for (int n = 0; n < nloc; ++n) w[n] += p * f[n];
    }
  }

  void collide_block(int v, int k, double dt, double theta) {
    rt::Runtime::check_access(F(v, k), true);
    auto f = state_.fblock(v, k);
    const int nloc = mesh_->nodes_per_macrocell();
    State w;
    for (int n = 0; n < nloc; ++n) {
      for (int r = 0; r < m; ++r) w[r] = state_.W(k, r, n);
      f[n] = relax(f[n], model_.equilibrium(w, v), dt, model_.tau(), theta);
    }
  }

  void source_block(int k, double dt, double theta) {
    const int nloc = mesh_->nodes_per_macrocell();
    auto& d = delta_[k];
    int worst = 0;
    for (int n = 0; n < nloc; ++n) {
      State w;
      for (int r = 0; r < m; ++r) w[r] = state_.W(k, r, n);
      const State w0 = w;
      const auto res = solve_source_node<D>(*source_, mesh_->point(k, n), w, dt, theta,
                                            opt_.picard_tol, opt_.picard_max);
      worst = std::max(worst, res.iterations);
      for (int r = 0; r < m; ++r) {
        state_.W(k, r, n) = w[r];
        d[static_cast<std::size_t>(r) * nloc + n] = w[r] - w0[r];
      }
    }
    int cur = picard_iter_.load();
    while (worst > cur && !picard_iter_.compare_exchange_weak(cur, worst)) {
    }
  }

  void apply_source_block(int v, int k) {
    auto f = state_.fblock(v, k);
    const int nloc = mesh_->nodes_per_macrocell();
    const auto& d = delta_[k];
    State s;
    for (int n = 0; n < nloc; ++n) {
      for (int r = 0; r < m; ++r) s[r] = d[static_cast<std::size_t>(r) * nloc + n];
      f[n] += model_.lift_source(s, v);
    }
  }

  std::shared_ptr<const Macromesh<D>> mesh_;
  KineticModel<D> model_;
  std::shared_ptr<const MacroSource<D>> source_;
  SolverOptions opt_;
  Transport<D> transport_;
  FieldState state_;
  rt::Runtime rt_;
  std::vector<rt::DataHandle> hF_, hW_, hR_, hT_, hD_;
  std::vector<std::vector<double>> delta_;
  int pass_ = 0;
  std::atomic<int> picard_iter_{0};
  int picard_max_seen_ = 0;
};

}  // namespace kdg
