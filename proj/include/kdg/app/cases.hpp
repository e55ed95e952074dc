#pragma once

// Test cases (gravity, cylinder, pulse), error norms, DG post-processing,
// the convergence study and the scaling benchmark.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "kdg/app/config.hpp"
#include "kdg/integrator.hpp"
#include "kdg/kinetic.hpp"
#include "kdg/mesh.hpp"
#include "kdg/solver.hpp"
#include "kdg/version.hpp"
#include "kdg/vtk.hpp"

namespace kdg::app {

// --- error norms ----------------------------------------------------------

struct ErrorReport {
  std::vector<double> eps_var;  // per conservative variable
  double eps = 0.0;             // root mean square of eps_var
  double dt = 0.0;
  std::size_t nodes = 0;
  double wall_seconds = 0.0;
};

/// Relative discrete L2 error with GL weights. A variable whose exact
/// solution has zero norm is measured in absolute terms.
template <int D>
ErrorReport l2_error(const Macromesh<D>& mesh, const FieldState& state,
                     const std::function<std::array<double, D + 1>(const Vec<D>&)>& exact) {
  constexpr int m = D + 1;
  std::array<double, m> num{}, den{};
  for (int k = 0; k < mesh.num_macrocells(); ++k) {
    const auto& c = mesh.cell(k);
    for (int n = 0; n < mesh.nodes_per_macrocell(); ++n) {
      const auto w = exact(c.x[n]);
      for (int r = 0; r < m; ++r) {
        const double e = state.W(k, r, n) - w[r];
        num[r] += c.omega[n] * e * e;
        den[r] += c.omega[n] * w[r] * w[r];
      }
    }
  }
  ErrorReport rep;
  rep.nodes = mesh.num_nodes();
  double sq = 0.0;
  for (int r = 0; r < m; ++r) {
    const double e = den[r] > 0.0 ? std::sqrt(num[r] / den[r]) : std::sqrt(num[r]);
    rep.eps_var.push_back(e);
    sq += e * e;
  }
  rep.eps = std::sqrt(sq / m);
  return rep;
}

/// Same norm as l2_error with a discrete reference field in place of the
/// exact solution.
template <int D>
ErrorReport l2_difference(const Macromesh<D>& mesh, const std::vector<std::vector<double>>& w,
                          const std::vector<std::vector<double>>& ref) {
  constexpr int m = D + 1;
  const int nloc = mesh.nodes_per_macrocell();
  std::array<double, m> num{}, den{};
  for (int k = 0; k < mesh.num_macrocells(); ++k)
    for (int r = 0; r < m; ++r)
      for (int n = 0; n < nloc; ++n) {
        const double om = mesh.cell(k).omega[n];
        const double e = w[k][r * nloc + n] - ref[k][r * nloc + n];
        num[r] += om * e * e;
        den[r] += om * ref[k][r * nloc + n] * ref[k][r * nloc + n];
      }
  ErrorReport rep;
  rep.nodes = mesh.num_nodes();
  double sq = 0.0;
  for (int r = 0; r < m; ++r) {
    const double e = den[r] > 0.0 ? std::sqrt(num[r] / den[r]) : std::sqrt(num[r]);
    rep.eps_var.push_back(e);
    sq += e * e;
  }
  rep.eps = std::sqrt(sq / m);
  return rep;
}

// --- DG post-processing ---------------------------------------------------

/// Physical gradient of a nodal field (one value per local node of macrocell
/// k) by differentiating the subcell interpolant.
template <int D>
std::vector<Vec<D>> dg_gradient(const Macromesh<D>& mesh, int k, std::span<const double> u) {
  const auto& ref = mesh.ref();
  const auto& c = mesh.cell(k);
  const int nn = ref.num_nodes();
  const int n1 = ref.nodes_per_axis();
  const auto& der = ref.deriv_1d();
  std::vector<Vec<D>> out(mesh.nodes_per_macrocell());
  for (int s = 0; s < c.num_subcells; ++s)
    for (int i = 0; i < nn; ++i) {
      const auto mi = ref.multi_index(i);
      Vec<D> gref{};
      for (int q = 0; q < D; ++q) {
        auto mj = mi;
        for (int a = 0; a < n1; ++a) {
          mj[q] = a;
          gref[q] += der[mi[q] * n1 + a] * u[s * nn + ref.flatten(mj)];
        }
      }
      const int idx = s * nn + i;
      const double det = c.omega[idx] / ref.weight(i);
      Vec<D> g = mat_vec<D>(c.cof[idx], gref);
      for (int q = 0; q < D; ++q) g[q] /= det;
      out[idx] = g;
    }
  return out;
}

/// Interpolated W at a physical point; nullopt when outside the mesh.
template <int D>
std::optional<std::array<double, D + 1>> evaluate_at(const Macromesh<D>& mesh,
                                                     const FieldState& state, const Vec<D>& x) {
  const auto& ref = mesh.ref();
  for (int k = 0; k < mesh.num_macrocells(); ++k) {
    const auto& c = mesh.cell(k);
    Vec<D> xi{};
    for (int it = 0; it < 30; ++it) {
      const Vec<D> r = c.map(xi);
      Vec<D> res;
      for (int q = 0; q < D; ++q) res[q] = x[q] - r[q];
      const Mat<D> j = c.jacobian(xi);
      const Mat<D> co = cofactor<D>(j);
      const double det = determinant<D>(j);
      const Vec<D> step = mat_t_vec<D>(co, res);  // J^{-1} res = co^T res / det
      double sz = 0.0;
      for (int q = 0; q < D; ++q) {
        xi[q] += step[q] / det;
        sz = std::max(sz, std::abs(step[q] / det));
      }
      if (sz < 1e-14) break;
    }
    bool inside = true;
    for (int q = 0; q < D; ++q) inside = inside && std::abs(xi[q]) <= 1.0 + 1e-10;
    if (!inside) continue;
    std::array<int, D> si{};
    Vec<D> xhat{};
    for (int q = 0; q < D; ++q) {
      const double t = (std::clamp(xi[q], -1.0, 1.0) + 1.0) * 0.5 * c.sub[q];
      si[q] = std::min(static_cast<int>(t), c.sub[q] - 1);
      xhat[q] = 2.0 * (t - si[q]) - 1.0;
    }
    const int s = c.subcell_flat(si);
    const auto phi = ref.values(xhat);
    std::array<double, D + 1> w{};
    for (int r = 0; r < D + 1; ++r)
      for (int i = 0; i < ref.num_nodes(); ++i)
        w[r] += phi[i] * state.W(k, r, mesh.local_index(s, i));
    return w;
  }
  return std::nullopt;
}

// --- case setup -----------------------------------------------------------

template <int D>
struct CaseSetup {
  using State = std::array<double, D + 1>;
  std::shared_ptr<const Macromesh<D>> mesh;
  std::shared_ptr<const MacroSource<D>> source;
  std::function<State(const Vec<D>&)> initial;
  std::function<State(const Vec<D>&)> boundary;
  std::function<State(const Vec<D>&)> exact;  // empty when unknown
};

template <int D>
std::shared_ptr<const Macromesh<D>> make_mesh(const RunConfig& cfg) {
  Vec<D> lo, hi;
  std::array<int, D> macro, sub;
  for (int k = 0; k < D; ++k) {
    lo[k] = cfg.mesh.lo[k];
    hi[k] = cfg.mesh.hi[k];
    macro[k] = cfg.mesh.macro[k];
    sub[k] = cfg.mesh.sub[k];
  }
  return std::make_shared<const Macromesh<D>>(
      build_box_macromesh<D>(lo, hi, macro, sub, cfg.mesh.degree));
}

/// Hydrostatic profile rho0 exp(-g y / c^2), u = 0, y the last axis.
template <int D>
std::array<double, D + 1> hydrostatic(const RunConfig& cfg, const Vec<D>& x) {
  const double c = cfg.lambda / std::sqrt(3.0);
  std::array<double, D + 1> w{};
  w[0] = cfg.gravity.rho0 * std::exp(-cfg.gravity.g * x[D - 1] / (c * c));
  return w;
}

template <int D>
CaseSetup<D> make_case(const RunConfig& cfg) {
  using State = std::array<double, D + 1>;
  CaseSetup<D> s;
  s.mesh = make_mesh<D>(cfg);
  if (cfg.case_name == "gravity") {
    s.source = std::make_shared<GravitySource<D>>(cfg.gravity.g);
    s.exact = [cfg](const Vec<D>& x) { return hydrostatic<D>(cfg, x); };
    s.initial = s.exact;
    s.boundary = s.exact;
  } else if (cfg.case_name == "cylinder") {
    State ws{}, in{};
    Vec<D> xc{};
    for (int r = 0; r < D + 1; ++r) ws[r] = cfg.cylinder.w_s[r];
    for (int q = 0; q < D; ++q) xc[q] = cfg.cylinder.x_c[q];
    in[0] = cfg.cylinder.inflow[0];
    for (int q = 0; q < D; ++q) in[q + 1] = cfg.cylinder.inflow[0] * cfg.cylinder.inflow[q + 1];
    s.source = std::make_shared<PenalizationSource<D>>(cfg.cylinder.k_s, cfg.cylinder.kappa, xc, ws);
    s.initial = [in](const Vec<D>&) { return in; };
    s.boundary = s.initial;
  } else {
    // density pulse at rest in the middle of the box
    Vec<D> mid;
    for (int q = 0; q < D; ++q) mid[q] = 0.5 * (cfg.mesh.lo[q] + cfg.mesh.hi[q]);
    const double a = cfg.pulse.amplitude, wdt = cfg.pulse.width;
    s.initial = [mid, a, wdt](const Vec<D>& x) {
      double r2 = 0.0;
      for (int q = 0; q < D; ++q) r2 += (x[q] - mid[q]) * (x[q] - mid[q]);
      State w{};
      w[0] = 1.0 + a * std::exp(-r2 / (wdt * wdt));
      return w;
    };
    s.boundary = [](const Vec<D>&) {
      State w{};
      w[0] = 1.0;
      return w;
    };
  }
  return s;
}

template <int D>
std::unique_ptr<KineticSolver<D>> make_solver(const RunConfig& cfg, const CaseSetup<D>& setup) {
  auto model = make_model<D>(cfg.model, cfg.lambda, cfg.tau);
  SolverOptions opt;
  opt.workers = cfg.workers;
  opt.scheduler = rt::parse_scheduler(cfg.scheduler);
  opt.deterministic = cfg.deterministic;
  opt.cache_blocks = cfg.cache_blocks;
  opt.picard_tol = cfg.picard_tol;
  opt.picard_max = cfg.picard_max;
  auto bnd = setup.boundary;
  typename KineticSolver<D>::BoundaryData fb = [model, bnd](const Vec<D>& x, int v) {
    return model.equilibrium(bnd(x), v);
  };
  auto solver = std::make_unique<KineticSolver<D>>(setup.mesh, model, fb, setup.source, opt);
  solver->set_initial(setup.initial);
  return solver;
}

// --- monitors and output --------------------------------------------------

/// Throws NonpositiveDensity naming the first offending node.
template <int D>
double check_density(const Macromesh<D>& mesh, const FieldState& st) {
  double lo = std::numeric_limits<double>::infinity();
  for (int k = 0; k < mesh.num_macrocells(); ++k)
    for (int n = 0; n < mesh.nodes_per_macrocell(); ++n) {
      const double rho = st.W(k, 0, n);
      if (!(rho > 0.0)) {
        std::ostringstream os;
        os << "rho = " << rho << " at x = (";
        for (int q = 0; q < D; ++q) os << (q ? ", " : "") << mesh.point(k, n)[q];
        os << "), t = " << st.time;
        throw NonpositiveDensity(os.str());
      }
      lo = std::min(lo, rho);
    }
  return lo;
}

/// rho, u and |curl u| at every GL node.
template <int D>
void write_snapshot(std::ostream& os, const Macromesh<D>& mesh, const FieldState& st,
                    const std::string& title) {
  const int nloc = mesh.nodes_per_macrocell();
  VtkScalar rho{"rho", {}}, vort{"vorticity", {}};
  VtkVector vel{"u", {}};
  for (int k = 0; k < mesh.num_macrocells(); ++k) {
    std::vector<std::vector<double>> u(D, std::vector<double>(nloc));
    for (int n = 0; n < nloc; ++n)
      for (int q = 0; q < D; ++q) u[q][n] = st.W(k, q + 1, n) / st.W(k, 0, n);
    std::vector<std::vector<Vec<D>>> grad;
    for (int q = 0; q < D; ++q) grad.push_back(dg_gradient<D>(mesh, k, u[q]));
    for (int n = 0; n < nloc; ++n) {
      rho.values.push_back(st.W(k, 0, n));
      std::array<double, 3> uv{};
      for (int q = 0; q < D; ++q) uv[q] = u[q][n];
      vel.values.push_back(uv);
      double w = 0.0;
      if constexpr (D == 2) {
        w = std::abs(grad[1][n][0] - grad[0][n][1]);
      } else if constexpr (D == 3) {
        const double a = grad[2][n][1] - grad[1][n][2];
        const double b = grad[0][n][2] - grad[2][n][0];
        const double c = grad[1][n][0] - grad[0][n][1];
        w = std::sqrt(a * a + b * b + c * c);
      }
      vort.values.push_back(w);
    }
  }
  write_vtk<D>(os, title, mesh_points(mesh), {rho, vort}, {vel});
}

inline json reproducibility_header(const RunConfig& cfg) {
  const double c = cfg.lambda / std::sqrt(3.0);
  json derived{{"sound_speed", c}, {"steps", cfg.num_steps()}};
  if (cfg.case_name == "cylinder") {
    const auto& in = cfg.cylinder.inflow;
    double u = 0.0;
    for (std::size_t q = 1; q < in.size(); ++q) u += in[q] * in[q];
    derived["mach"] = std::sqrt(u) / c;
  } else {
    derived["mach"] = 0.0;
  }
  return json{{"program", "kdg"},
              {"version", kdg::version},
              {"revision", kdg::git_revision},
              {"config", to_json(cfg)},
              {"derived", derived}};
}

// --- running a case -------------------------------------------------------

struct CaseReport {
  ErrorReport error;       // empty eps_var when there is no exact solution
  int steps = 0;
  double time = 0.0;
  double min_rho = 0.0;
  double max_u_deviation = 0.0;  // max |u - u_inflow| over nodes (cylinder)
  double u_at_xc = std::numeric_limits<double>::quiet_NaN();  // |u(x_c)| (cylinder)
  double mach = 0.0;
  int picard_iterations = 0;
  std::vector<std::string> snapshots;
  std::vector<std::vector<double>> w_final;  // W blocks at the end of the run
};

struct CaseHooks {
  /// Directory for snapshots, the header and timing CSV; empty = no files.
  std::string out_dir;
  /// Overrides the configured initial state (e.g. a previous run's W).
  std::function<void(FieldState&)> after_init;
};

template <int D>
CaseReport run_case(const RunConfig& cfg, const CaseHooks& hooks = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const CaseSetup<D> setup = make_case<D>(cfg);
  auto solver = make_solver<D>(cfg, setup);
  if (hooks.after_init) hooks.after_init(solver->state());
  const Macromesh<D>& mesh = *setup.mesh;
  const SplitScheme scheme = make_scheme(cfg.scheme);
  const int n_steps = cfg.num_steps();

  CaseReport rep;
  rep.mach = reproducibility_header(cfg)["derived"]["mach"].get<double>();
  std::ofstream timing;
  AdvanceOptions aopt;
  if (!hooks.out_dir.empty()) {
    std::filesystem::create_directories(hooks.out_dir);
    std::ofstream(hooks.out_dir + "/run_header.json") << reproducibility_header(cfg).dump(2)
                                                     << "\n";
    if (cfg.output.timing) {
      timing.open(hooks.out_dir + "/timing.csv");
      aopt.timing_csv = &timing;
    }
  }
  auto snapshot = [&](int step) {
    if (hooks.out_dir.empty()) return;
    const std::string path = hooks.out_dir + "/snapshot_" + std::to_string(step) + ".vtk";
    std::ofstream os(path);
    write_snapshot<D>(os, mesh, solver->state(), cfg.case_name + " t=" +
                                                     std::to_string(solver->state().time));
    rep.snapshots.push_back(path);
  };

  std::array<double, D> u_in{};
  if (cfg.case_name == "cylinder")
    for (int q = 0; q < D; ++q) u_in[q] = cfg.cylinder.inflow[q + 1];
  rep.min_rho = check_density<D>(mesh, solver->state());
  if (cfg.output.vtk_every > 0) snapshot(0);

  aopt.on_step = [&](int step) {
    rep.min_rho = std::min(rep.min_rho, check_density<D>(mesh, solver->state()));
    if (cfg.case_name == "cylinder") {
      const auto& st = solver->state();
      for (int k = 0; k < mesh.num_macrocells(); ++k)
        for (int n = 0; n < mesh.nodes_per_macrocell(); ++n) {
          double d2 = 0.0;
          for (int q = 0; q < D; ++q) {
            const double d = st.W(k, q + 1, n) / st.W(k, 0, n) - u_in[q];
            d2 += d * d;
          }
          rep.max_u_deviation = std::max(rep.max_u_deviation, std::sqrt(d2));
        }
    }
    if (cfg.output.vtk_every > 0 && (step + 1) % cfg.output.vtk_every == 0) snapshot(step + 1);
  };
  advance<D>(*solver, scheme, cfg.dt, n_steps, aopt);
  if (cfg.output.vtk_every == 0) snapshot(n_steps);

  rep.steps = n_steps;
  rep.time = solver->state().time;
  rep.picard_iterations = solver->max_picard_iterations();
  rep.w_final = solver->state().w;
  if (setup.exact) rep.error = l2_error<D>(mesh, solver->state(), setup.exact);
  rep.error.dt = cfg.dt;
  rep.error.nodes = mesh.num_nodes();
  if (cfg.case_name == "cylinder") {
    Vec<D> xc;
    for (int q = 0; q < D; ++q) xc[q] = cfg.cylinder.x_c[q];
    if (auto w = evaluate_at<D>(mesh, solver->state(), xc)) {
      double u2 = 0.0;
      for (int q = 0; q < D; ++q) u2 += ((*w)[q + 1] / (*w)[0]) * ((*w)[q + 1] / (*w)[0]);
      rep.u_at_xc = std::sqrt(u2);
    }
  }
  rep.error.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

/// Dimension dispatch on the configured model.
inline CaseReport run_case(const RunConfig& cfg, const CaseHooks& hooks = {}) {
  switch (cfg.dimension()) {
    case 1: return run_case<1>(cfg, hooks);
    case 2: return run_case<2>(cfg, hooks);
    case 3: return run_case<3>(cfg, hooks);
  }
  throw UnknownModel("'" + cfg.model + "'");
}

// --- convergence study ----------------------------------------------------

struct ConvergenceRow {
  double dt;
  int steps;
  double eps;
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  double slope = std::numeric_limits<double>::quiet_NaN();
  bool at_floor = false;
};

/// Least-squares slope of log(eps) against log(dt).
inline double fit_slope(const std::vector<ConvergenceRow>& rows) {
  const double n = static_cast<double>(rows.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& r : rows) {
    const double x = std::log(r.dt), y = std::log(r.eps);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Errors below this are treated as round-off; no slope is fitted.
inline constexpr double error_floor = 1e-12;

enum class Reference {
  analytic,  // the case's exact solution
  self       // the same scheme at dt / 2^(halvings + 2)
};

/// Runs the case at dt, dt/2, ... dt/2^halvings over the same horizon.
inline ConvergenceTable convergence_study(RunConfig cfg, int halvings,
                                          std::ostream* csv = nullptr,
                                          Reference reference = Reference::analytic) {
  if (cfg.case_name != "gravity") throw ConfigError("convergence needs the gravity case");
  if (cfg.dimension() != 2) throw ConfigError("convergence needs a 2D model");
  const double dt0 = cfg.dt;
  const int n0 = cfg.num_steps();
  auto at_level = [&](int h) {
    RunConfig c = cfg;
    c.dt = dt0 / std::ldexp(1.0, h);
    c.t_max = c.dt * n0 * std::ldexp(1.0, h);
    return c;
  };
  std::vector<std::vector<double>> ref;
  if (reference == Reference::self) ref = run_case<2>(at_level(halvings + 2)).w_final;
  const auto mesh = make_mesh<2>(cfg);

  ConvergenceTable tab;
  if (csv) *csv << "dt,steps,eps\n";
  for (int h = 0; h <= halvings; ++h) {
    const RunConfig c = at_level(h);
    const CaseReport r = run_case<2>(c);
    const double eps =
        reference == Reference::self ? l2_difference<2>(*mesh, r.w_final, ref).eps : r.error.eps;
    tab.rows.push_back({c.dt, r.steps, eps});
    if (csv) *csv << c.dt << "," << r.steps << "," << eps << "\n";
  }
  for (const auto& r : tab.rows)
    if (!(r.eps > error_floor)) tab.at_floor = true;
  if (!tab.at_floor && tab.rows.size() >= 2) tab.slope = fit_slope(tab.rows);
  return tab;
}

// --- scaling benchmark ----------------------------------------------------

struct BenchRow {
  int workers;
  double wall_seconds;
  double speedup;
  double efficiency;
  double max_rel_diff;  // against the first entry
};

template <int D>
std::vector<BenchRow> scaling_bench(const RunConfig& cfg, const std::vector<int>& workers,
                                    double tol = 1e-12) {
  std::vector<BenchRow> rows;
  std::vector<std::vector<double>> ref;
  const CaseSetup<D> setup = make_case<D>(cfg);
  const SplitScheme scheme = make_scheme(cfg.scheme);
  for (int w : workers) {
    RunConfig c = cfg;
    c.workers = w;
    auto solver = make_solver<D>(c, setup);
    const auto t0 = std::chrono::steady_clock::now();
    advance<D>(*solver, scheme, c.dt, c.num_steps());
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    double diff = 0.0;
    if (ref.empty()) {
      ref = solver->state().f;
    } else {
      double scale = 0.0;
      for (std::size_t b = 0; b < ref.size(); ++b)
        for (std::size_t i = 0; i < ref[b].size(); ++i) {
          scale = std::max(scale, std::abs(ref[b][i]));
          diff = std::max(diff, std::abs(ref[b][i] - solver->state().f[b][i]));
        }
      diff /= scale > 0.0 ? scale : 1.0;
      if (diff > tol)
        throw ResultMismatch(std::to_string(w) + " workers differ from " +
                             std::to_string(workers.front()) + " by " + std::to_string(diff));
    }
    const double base = rows.empty() ? wall : rows.front().wall_seconds;
    const double sp = base / wall;
    rows.push_back({w, wall, sp, sp * workers.front() / w, diff});
  }
  return rows;
}

inline std::vector<BenchRow> scaling_bench(const RunConfig& cfg, const std::vector<int>& workers,
                                           double tol = 1e-12) {
  switch (cfg.dimension()) {
    case 1: return scaling_bench<1>(cfg, workers, tol);
    case 2: return scaling_bench<2>(cfg, workers, tol);
    case 3: return scaling_bench<3>(cfg, workers, tol);
  }
  throw UnknownModel("'" + cfg.model + "'");
}

inline void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows) {
  os << "workers,wall_s,speedup,efficiency,max_rel_diff\n";
  for (const auto& r : rows)
    os << r.workers << "," << r.wall_seconds << "," << r.speedup << "," << r.efficiency << ","
       << r.max_rel_diff << "\n";
}

}  // namespace kdg::app
