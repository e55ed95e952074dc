#pragma once

// Gauss-Lobatto quadrature and nodal Lagrange tables on the reference cell
// ]-1,1[^D. Everything here is immutable once built.

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "kdg/errors.hpp"

namespace kdg {

inline constexpr int max_degree = 8;

struct GaussLobatto1D {
  int degree = 0;
  std::vector<double> points;   // increasing, points.front() == -1
  std::vector<double> weights;
};

namespace detail {

inline void check_degree(int d) {
  if (d < 1 || d > max_degree)
    throw DegreeOutOfRange("degree " + std::to_string(d) + " not in [1, " +
                           std::to_string(max_degree) + "]");
}

// Legendre P_n(x) and P_n'(x) by the three-term recurrence.
inline std::array<double, 2> legendre(int n, double x) {
  double p0 = 1.0, p1 = x;
  if (n == 0) return {1.0, 0.0};
  for (int k = 2; k <= n; ++k) {
    const double pk = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
    p0 = p1;
    p1 = pk;
  }
  // derivative from (1-x^2) P_n' = n (P_{n-1} - x P_n), valid off the endpoints
  const double dp = n * (p0 - x * p1) / (1.0 - x * x);
  return {p1, dp};
}

}  // namespace detail

/// Gauss-Lobatto points and weights of degree d (d+1 points). Interior
/// points are the roots of P_d', found by Newton iteration from the
/// Chebyshev-Lobatto guesses.
inline GaussLobatto1D gauss_lobatto_1d(int d) {
  detail::check_degree(d);
  GaussLobatto1D gl;
  gl.degree = d;
  gl.points.assign(d + 1, 0.0);
  gl.weights.assign(d + 1, 0.0);
  gl.points.front() = -1.0;
  gl.points.back() = 1.0;

  for (int i = 1; i < d; ++i) {
    double x = -std::cos(std::numbers::pi * i / d);
    for (int it = 0; it < 100; ++it) {
      const auto [p, dp] = detail::legendre(d, x);
      // P_d'' from the Legendre ODE: (1-x^2) P'' = 2x P' - d(d+1) P
      const double ddp = (2.0 * x * dp - d * (d + 1.0) * p) / (1.0 - x * x);
      const double dx = dp / ddp;
      x -= dx;
      if (std::abs(dx) <= 1e-15) break;
    }
    gl.points[i] = x;
  }
  // exact symmetry
  for (int i = 0; i <= d / 2; ++i) {
    const double a = 0.5 * (gl.points[d - i] - gl.points[i]);
    gl.points[i] = -a;
    gl.points[d - i] = a;
  }
  if (d % 2 == 0) gl.points[d / 2] = 0.0;

  for (int i = 0; i <= d; ++i) {
    const double p = detail::legendre(d, gl.points[i])[0];
    gl.weights[i] = 2.0 / (d * (d + 1.0) * p * p);
  }
  return gl;
}

/// Row-major (d+1)x(d+1) table M with M[j*(d+1)+a] = phi_a'(x_j): row j is
/// the evaluation node, column a the basis function.
inline std::vector<double> lagrange_deriv_1d(int d) {
  detail::check_degree(d);
  const auto gl = gauss_lobatto_1d(d);
  const int n = d + 1;
  const auto& x = gl.points;
  std::vector<double> bary(n, 1.0);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k)
      if (k != j) bary[j] /= (x[j] - x[k]);

  std::vector<double> m(n * n, 0.0);
  for (int j = 0; j < n; ++j) {
    double diag = 0.0;
    for (int a = 0; a < n; ++a) {
      if (a == j) continue;
      const double v = (bary[a] / bary[j]) / (x[j] - x[a]);
      m[j * n + a] = v;
      diag -= v;
    }
    m[j * n + j] = diag;
  }
  return m;
}

/// Lagrange basis values phi_a(x) on the 1D GL nodes.
inline std::vector<double> lagrange_values_1d(const GaussLobatto1D& gl, double x) {
  const int n = gl.degree + 1;
  std::vector<double> v(n, 1.0);
  for (int a = 0; a < n; ++a)
    for (int k = 0; k < n; ++k)
      if (k != a) v[a] *= (x - gl.points[k]) / (gl.points[a] - gl.points[k]);
  return v;
}

/// Tensor-product GL element on ]-1,1[^D. Node index is lexicographic in
/// the per-axis indices with the first axis varying fastest:
///   i = i_0 + (d+1) i_1 + (d+1)^2 i_2.
/// Faces are numbered 2k (x_k = -1) and 2k+1 (x_k = +1).
template <int D>
class RefElement {
  static_assert(D >= 1 && D <= 3);

public:
  using Point = std::array<double, D>;
  using Index = std::array<int, D>;

  static constexpr int dim = D;
  static constexpr int num_faces = 2 * D;

  explicit RefElement(int d) : degree_(d), gl_(gauss_lobatto_1d(d)),
                               deriv_(lagrange_deriv_1d(d)) {
    n1_ = d + 1;
    num_nodes_ = 1;
    for (int k = 0; k < D; ++k) num_nodes_ *= n1_;

    nodes_.resize(num_nodes_);
    weights_.resize(num_nodes_);
    multi_.resize(num_nodes_);
    face_weights_.assign(static_cast<std::size_t>(num_nodes_) * num_faces, 0.0);
    for (int i = 0; i < num_nodes_; ++i) {
      Index mi = unflatten(i);
      multi_[i] = mi;
      double w = 1.0;
      for (int k = 0; k < D; ++k) {
        nodes_[i][k] = gl_.points[mi[k]];
        w *= gl_.weights[mi[k]];
      }
      weights_[i] = w;
      for (int f = 0; f < num_faces; ++f) {
        const int axis = f / 2;
        const int side_index = (f % 2 == 0) ? 0 : d;
        if (mi[axis] != side_index) continue;
        double mu = 1.0;
        for (int k = 0; k < D; ++k)
          if (k != axis) mu *= gl_.weights[mi[k]];
        face_weights_[static_cast<std::size_t>(i) * num_faces + f] = mu;
        face_nodes_[f].push_back(i);
      }
    }

    grad_.assign(static_cast<std::size_t>(num_nodes_) * num_nodes_ * D, 0.0);
    for (int i = 0; i < num_nodes_; ++i)
      for (int j = 0; j < num_nodes_; ++j)
        for (int k = 0; k < D; ++k)
          grad_[(static_cast<std::size_t>(i) * num_nodes_ + j) * D + k] =
              grad_component(i, j, k);
  }

  int degree() const { return degree_; }
  int nodes_per_axis() const { return n1_; }
  int num_nodes() const { return num_nodes_; }
  const GaussLobatto1D& gl() const { return gl_; }
  /// 1D derivative table, see lagrange_deriv_1d.
  const std::vector<double>& deriv_1d() const { return deriv_; }

  const Point& node(int i) const { return nodes_[i]; }
  double weight(int i) const { return weights_[i]; }
  const Index& multi_index(int i) const { return multi_[i]; }

  int flatten(const Index& mi) const {
    int i = 0;
    for (int k = D - 1; k >= 0; --k) i = i * n1_ + mi[k];
    return i;
  }

  Index unflatten(int i) const {
    Index mi{};
    for (int k = 0; k < D; ++k) {
      mi[k] = i % n1_;
      i /= n1_;
    }
    return mi;
  }

  /// d/dx_k of basis function i evaluated at node j.
  double grad(int i, int j, int k) const {
    return grad_[(static_cast<std::size_t>(i) * num_nodes_ + j) * D + k];
  }

  /// mu_i^f; zero when node i is not on face f.
  double face_weight(int i, int f) const {
    return face_weights_[static_cast<std::size_t>(i) * num_faces + f];
  }

  const std::vector<int>& face_nodes(int f) const { return face_nodes_[f]; }

  static Point face_normal(int f) {
    Point n{};
    n[f / 2] = (f % 2 == 0) ? -1.0 : 1.0;
    return n;
  }

  static int opposite_face(int f) { return f ^ 1; }

  /// Node on the neighbouring cell across face f that coincides with node i
  /// (same multi-index except along the face axis, which is flipped).
  int mirror_node(int i, int f) const {
    Index mi = multi_[i];
    mi[f / 2] = (f % 2 == 0) ? n1_ - 1 : 0;
    return flatten(mi);
  }

  /// Basis values phi_i(x) for all i at an arbitrary reference point.
  std::vector<double> values(const Point& x) const {
    std::array<std::vector<double>, D> axis;
    for (int k = 0; k < D; ++k) axis[k] = lagrange_values_1d(gl_, x[k]);
    std::vector<double> v(num_nodes_, 1.0);
    for (int i = 0; i < num_nodes_; ++i)
      for (int k = 0; k < D; ++k) v[i] *= axis[k][multi_[i][k]];
    return v;
  }

private:
  double grad_component(int i, int j, int k) const {
    const Index& a = multi_[i];
    const Index& b = multi_[j];
    for (int l = 0; l < D; ++l)
      if (l != k && a[l] != b[l]) return 0.0;
    return deriv_[b[k] * n1_ + a[k]];
  }

  int degree_;
  GaussLobatto1D gl_;
  std::vector<double> deriv_;
  int n1_ = 0;
  int num_nodes_ = 0;
  std::vector<Point> nodes_;
  std::vector<double> weights_;
  std::vector<Index> multi_;
  std::vector<double> face_weights_;
  std::array<std::vector<int>, 2 * D> face_nodes_;
  std::vector<double> grad_;
};

/// Checked factory with the runtime dimension used by configuration code.
template <int D>
RefElement<D> build_ref_element(int d) {
  detail::check_degree(d);
  return RefElement<D>(d);
}

inline void check_dimension(int dim) {
  if (dim < 1 || dim > 3)
    throw DimensionOutOfRange("dimension " + std::to_string(dim) + " not in {1,2,3}");
}

}  // namespace kdg
