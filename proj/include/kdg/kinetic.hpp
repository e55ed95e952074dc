#pragma once

// Lattice kinetic models with isothermal quadratic equilibria, the BGK
// collision integrator, macroscopic sources and their kinetic lift.

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "kdg/errors.hpp"
#include "kdg/mesh.hpp"

namespace kdg {

template <int D>
class KineticModel {
public:
  static constexpr int dim = D;
  static constexpr int m = D + 1;  // rho, rho u_1 .. rho u_D

  KineticModel(std::string name, std::vector<std::array<int, D>> dirs,
               std::vector<double> lattice_weights, double lambda, double tau)
      : name_(std::move(name)), dirs_(std::move(dirs)),
        lattice_weights_(std::move(lattice_weights)), lambda_(lambda), tau_(tau) {
    c_ = lambda_ / std::sqrt(3.0);
    velocities_.resize(dirs_.size());
    for (std::size_t i = 0; i < dirs_.size(); ++i)
      for (int k = 0; k < D; ++k) velocities_[i][k] = lambda_ * dirs_[i][k];
  }

  const std::string& name() const { return name_; }
  int num_velocities() const { return static_cast<int>(dirs_.size()); }
  int num_conserved() const { return m; }
  double lambda() const { return lambda_; }
  double sound_speed() const { return c_; }
  double tau() const { return tau_; }
  void set_tau(double tau) { tau_ = tau; }

  const Vec<D>& velocity(int i) const { return velocities_[i]; }
  const std::array<int, D>& direction(int i) const { return dirs_[i]; }
  double lattice_weight(int i) const { return lattice_weights_[i]; }

  /// Entry (r, i) of the projection matrix P.
  double projection(int r, int i) const {
    return r == 0 ? 1.0 : velocities_[i][r - 1];
  }

  /// w = P f
  std::array<double, m> project(std::span<const double> f) const {
    std::array<double, m> w{};
    for (int i = 0; i < num_velocities(); ++i) {
      w[0] += f[i];
      for (int k = 0; k < D; ++k) w[k + 1] += velocities_[i][k] * f[i];
    }
    return w;
  }

  /// Component i of the equilibrium
  ///   f_i = w_i rho (1 + u.v_i/c^2 + (u.v_i)^2/(2c^4) - u.u/(2c^2)),
  /// evaluated in extended precision so that P f^eq = w to about one ulp.
  double equilibrium(std::span<const double> w, int i) const {
    using ld = long double;
    const double rho = w[0];
    if (!(rho > 0.0))
      throw NonpositiveDensity("rho = " + std::to_string(rho));
    ld uv = 0.0L, uu = 0.0L;
    for (int k = 0; k < D; ++k) {
      const ld u = static_cast<ld>(w[k + 1]) / rho;
      uv += u * static_cast<ld>(dirs_[i][k]);
      uu += u * u;
    }
    uv *= lambda_;
    const ld c2 = static_cast<ld>(lambda_) * lambda_ / 3.0L;
    return static_cast<double>(static_cast<ld>(lattice_weights_[i]) * rho *
                               (1.0L + uv / c2 + uv * uv / (2.0L * c2 * c2) - uu / (2.0L * c2)));
  }

  std::vector<double> equilibrium(std::span<const double> w) const {
    std::vector<double> f(num_velocities());
    for (int i = 0; i < num_velocities(); ++i) f[i] = equilibrium(w, i);
    return f;
  }

  /// Kinetic source g with P g = s: g_i = w_i (s_rho + v_i . s_rhou / c^2).
  double lift_source(std::span<const double> s, int i) const {
    double vs = 0.0;
    for (int k = 0; k < D; ++k) vs += velocities_[i][k] * s[k + 1];
    return lattice_weights_[i] * (s[0] + vs / (c_ * c_));
  }

  std::vector<double> lift_source(std::span<const double> s) const {
    std::vector<double> g(num_velocities());
    for (int i = 0; i < num_velocities(); ++i) g[i] = lift_source(s, i);
    return g;
  }

private:
  std::string name_;
  std::vector<std::array<int, D>> dirs_;
  std::vector<double> lattice_weights_;
  std::vector<Vec<D>> velocities_;
  double lambda_;
  double c_;
  double tau_;
};

/// Velocity sets: "d1q3", "d2q9", "d3q15", "d3q19", "d3q27". D3Q* tables
/// are ordered rest, axes, edges, corners.
template <int D>
KineticModel<D> make_model(const std::string& name, double lambda, double tau) {
  using Dirs = std::vector<std::array<int, D>>;
  if constexpr (D == 1) {
    if (name == "d1q3")
      return {name, Dirs{{0}, {1}, {-1}}, {2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0}, lambda, tau};
  } else if constexpr (D == 2) {
    if (name == "d2q9") {
      Dirs dirs{{0, 0}, {1, 0}, {0, 1}, {-1, 0}, {0, -1},
                {1, 1}, {-1, 1}, {-1, -1}, {1, -1}};
      std::vector<double> w{4.0 / 9.0};
      for (int i = 0; i < 4; ++i) w.push_back(1.0 / 9.0);
      for (int i = 0; i < 4; ++i) w.push_back(1.0 / 36.0);
      return {name, dirs, w, lambda, tau};
    }
  } else {
    const Dirs axes{{1, 0, 0}, {0, 1, 0}, {-1, 0, 0}, {0, -1, 0}, {0, 0, -1}, {0, 0, 1}};
    const Dirs edges{{1, 1, 0},  {-1, 1, 0}, {-1, -1, 0}, {1, -1, 0},
                     {1, 0, 1},  {0, 1, 1},  {-1, 0, 1},  {0, -1, 1},
                     {1, 0, -1}, {0, 1, -1}, {-1, 0, -1}, {0, -1, -1}};
    const Dirs corners{{1, 1, 1},  {-1, 1, 1},  {-1, -1, 1},  {1, -1, 1},
                       {1, 1, -1}, {-1, 1, -1}, {-1, -1, -1}, {1, -1, -1}};
    auto build = [&](double w0, double wa, double we, double wc, bool use_edges,
                     bool use_corners) {
      Dirs dirs{{0, 0, 0}};
      std::vector<double> w{w0};
      for (const auto& d : axes) { dirs.push_back(d); w.push_back(wa); }
      if (use_edges)
        for (const auto& d : edges) { dirs.push_back(d); w.push_back(we); }
      if (use_corners)
        for (const auto& d : corners) { dirs.push_back(d); w.push_back(wc); }
      return KineticModel<3>(name, dirs, w, lambda, tau);
    };
    if (name == "d3q15") return build(2.0 / 9.0, 1.0 / 9.0, 0.0, 1.0 / 72.0, false, true);
    if (name == "d3q19") return build(1.0 / 3.0, 1.0 / 18.0, 1.0 / 36.0, 0.0, true, false);
    if (name == "d3q27")
      return build(8.0 / 27.0, 2.0 / 27.0, 1.0 / 54.0, 1.0 / 216.0, true, true);
  }
  throw UnknownModel("'" + name + "' is not a " + std::to_string(D) + "D velocity set");
}

/// Spatial dimension of a named model, 0 if unknown.
inline int model_dimension(const std::string& name) {
  if (name == "d1q3") return 1;
  if (name == "d2q9") return 2;
  if (name == "d3q15" || name == "d3q19" || name == "d3q27") return 3;
  return 0;
}

/// theta-weighted BGK step for one value:
///   f' = ((tau - (1-theta) dt) f + dt feq) / (tau + theta dt).
/// theta = 1/2 is the Crank-Nicolson map C2, theta = 1 the implicit C1.
/// Evaluated in extended precision; P is then conserved to a few ulps of
/// sum_j |P_ij f_j| even when the result nearly cancels.
inline double relax(double f, double feq, double dt, double tau, double theta) {
  using ld = long double;
  const ld t = tau, h = dt;
  return static_cast<double>(((t - (1.0L - theta) * h) * f + h * feq) / (t + theta * h));
}

/// Macroscopic source s(x, w) with an optional Jacobian ds/dw. A source
/// that leaves the Jacobian at zero is solved by plain Picard iteration.
template <int D>
class MacroSource {
public:
  static constexpr int m = D + 1;
  using State = std::array<double, m>;
  using Jacobian = std::array<std::array<double, m>, m>;

  virtual ~MacroSource() = default;
  virtual State eval(const Vec<D>& x, const State& w) const = 0;
  virtual Jacobian jacobian(const Vec<D>& /*x*/, const State& /*w*/) const { return {}; }
};

/// Constant gravity along the last axis: s = (0, .., 0, -rho g).
template <int D>
class GravitySource final : public MacroSource<D> {
public:
  using typename MacroSource<D>::State;
  using typename MacroSource<D>::Jacobian;
  explicit GravitySource(double g) : g_(g) {}
  State eval(const Vec<D>&, const State& w) const override {
    State s{};
    s[D] = -w[0] * g_;
    return s;
  }
  Jacobian jacobian(const Vec<D>&, const State&) const override {
    Jacobian j{};
    j[D][0] = -g_;
    return j;
  }

private:
  double g_;
};

/// Volume penalization s = K(x) (w_s - w), K(x) = K_s exp(-kappa |x - x_c|^2).
template <int D>
class PenalizationSource final : public MacroSource<D> {
public:
  using typename MacroSource<D>::State;
  using typename MacroSource<D>::Jacobian;
  PenalizationSource(double k_s, double kappa, Vec<D> center, State target)
      : k_s_(k_s), kappa_(kappa), center_(center), target_(target) {}

  double rate(const Vec<D>& x) const {
    double r2 = 0.0;
    for (int k = 0; k < D; ++k) r2 += (x[k] - center_[k]) * (x[k] - center_[k]);
    return k_s_ * std::exp(-kappa_ * r2);
  }
  State eval(const Vec<D>& x, const State& w) const override {
    const double k = rate(x);
    State s{};
    for (int r = 0; r < D + 1; ++r) s[r] = k * (target_[r] - w[r]);
    return s;
  }
  Jacobian jacobian(const Vec<D>& x, const State&) const override {
    const double k = rate(x);
    Jacobian j{};
    for (int r = 0; r < D + 1; ++r) j[r][r] = -k;
    return j;
  }

private:
  double k_s_;
  double kappa_;
  Vec<D> center_;
  State target_;
};

struct LocalSolveResult {
  int iterations = 0;
};

/// Nodewise implicit source update
///   w* - theta dt s(w*) = w + (1-theta) dt s(w)
/// by fixed-point iteration preconditioned with (I - theta dt ds/dw). On
/// return w holds w*. iterations counts the updates that changed w.
template <int D>
LocalSolveResult solve_source_node(const MacroSource<D>& src, const Vec<D>& x,
                                   typename MacroSource<D>::State& w, double dt, double theta,
                                   double tol, int max_iter) {
  constexpr int m = D + 1;
  using State = typename MacroSource<D>::State;
  const State s0 = src.eval(x, w);
  State rhs{};
  for (int r = 0; r < m; ++r) rhs[r] = w[r] + (1.0 - theta) * dt * s0[r];

  for (int it = 0; it <= max_iter; ++it) {
    const State s = src.eval(x, w);
    auto jac = src.jacobian(x, w);
    // residual and system matrix A = I - theta dt J
    State res{};
    std::array<std::array<double, m>, m> a{};
    double scale = 1.0;
    for (int r = 0; r < m; ++r) {
      res[r] = w[r] - theta * dt * s[r] - rhs[r];
      for (int c = 0; c < m; ++c) a[r][c] = (r == c ? 1.0 : 0.0) - theta * dt * jac[r][c];
      scale = std::max(scale, std::abs(w[r]));
    }
    // Gaussian elimination with partial pivoting on the (D+1)x(D+1) system
    State delta = res;
    for (int col = 0; col < m; ++col) {
      int piv = col;
      for (int r = col + 1; r < m; ++r)
        if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
      std::swap(a[piv], a[col]);
      std::swap(delta[piv], delta[col]);
      if (std::abs(a[col][col]) < 1e-300) throw PicardDiverged("singular local system");
      for (int r = col + 1; r < m; ++r) {
        const double f = a[r][col] / a[col][col];
        for (int c = col; c < m; ++c) a[r][c] -= f * a[col][c];
        delta[r] -= f * delta[col];
      }
    }
    for (int r = m - 1; r >= 0; --r) {
      for (int c = r + 1; c < m; ++c) delta[r] -= a[r][c] * delta[c];
      delta[r] /= a[r][r];
    }
    double step = 0.0;
    for (int r = 0; r < m; ++r) {
      w[r] -= delta[r];
      step = std::max(step, std::abs(delta[r]));
    }
    if (!std::isfinite(step)) throw PicardDiverged("non-finite iterate");
    if (step <= tol * scale) return {it};
  }
  throw PicardDiverged("no convergence after " + std::to_string(max_iter) + " iterations");
}

}  // namespace kdg
