#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "kdg/basis.hpp"

using namespace kdg;

TEST(GaussLobatto, DegreeOne) {
  const auto gl = gauss_lobatto_1d(1);
  ASSERT_EQ(gl.points.size(), 2u);
  EXPECT_DOUBLE_EQ(gl.points[0], -1.0);
  EXPECT_DOUBLE_EQ(gl.points[1], 1.0);
  EXPECT_DOUBLE_EQ(gl.weights[0], 1.0);
  EXPECT_DOUBLE_EQ(gl.weights[1], 1.0);
}

// Moment conditions sum w_i x_i^k = int x^k for k = 0..3 solved by hand give
// points {-1, 0, 1} and weights {1/3, 4/3, 1/3}.
TEST(GaussLobatto, DegreeTwoMatchesMomentSolution) {
  const auto gl = gauss_lobatto_1d(2);
  EXPECT_NEAR(gl.points[0], -1.0, 1e-15);
  EXPECT_NEAR(gl.points[1], 0.0, 1e-15);
  EXPECT_NEAR(gl.points[2], 1.0, 1e-15);
  EXPECT_NEAR(gl.weights[0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(gl.weights[1], 4.0 / 3.0, 1e-15);
  EXPECT_NEAR(gl.weights[2], 1.0 / 3.0, 1e-15);
}

TEST(GaussLobatto, InvariantsAllDegrees) {
  for (int d = 1; d <= max_degree; ++d) {
    const auto gl = gauss_lobatto_1d(d);
    ASSERT_EQ(static_cast<int>(gl.points.size()), d + 1);
    EXPECT_EQ(gl.points.front(), -1.0);
    EXPECT_EQ(gl.points.back(), 1.0);
    double sum = 0.0;
    for (int i = 0; i <= d; ++i) {
      if (i > 0) {
        EXPECT_LT(gl.points[i - 1], gl.points[i]);
      }
      EXPECT_GT(gl.weights[i], 0.0);
      sum += gl.weights[i];
    }
    EXPECT_NEAR(sum, 2.0, 1e-14) << "d=" << d;
    // exact for x^k, k <= 2d - 1
    for (int k = 0; k <= 2 * d - 1; ++k) {
      double q = 0.0;
      for (int i = 0; i <= d; ++i) q += gl.weights[i] * std::pow(gl.points[i], k);
      const double exact = (k % 2 == 1) ? 0.0 : 2.0 / (k + 1);
      EXPECT_NEAR(q, exact, 1e-14) << "d=" << d << " k=" << k;
    }
  }
}

TEST(GaussLobatto, DegreeOutOfRange) {
  EXPECT_THROW(gauss_lobatto_1d(0), DegreeOutOfRange);
  EXPECT_THROW(gauss_lobatto_1d(max_degree + 1), DegreeOutOfRange);
  EXPECT_THROW(build_ref_element<2>(0), DegreeOutOfRange);
  EXPECT_THROW(check_dimension(4), DimensionOutOfRange);
  EXPECT_THROW(check_dimension(0), DimensionOutOfRange);
  EXPECT_NO_THROW(check_dimension(3));
}

// Differentiating the interpolant of a degree-d polynomial is exact.
TEST(Lagrange, DerivativeExactOnPolynomials) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int d = 1; d <= max_degree; ++d) {
    const auto gl = gauss_lobatto_1d(d);
    const auto der = lagrange_deriv_1d(d);
    std::vector<double> c(d + 1);
    for (auto& x : c) x = u(rng);
    auto p = [&](double x) {
      double s = 0.0;
      for (int k = d; k >= 0; --k) s = s * x + c[k];
      return s;
    };
    auto dp = [&](double x) {
      double s = 0.0;
      for (int k = d; k >= 1; --k) s = s * x + k * c[k];
      return s;
    };
    for (int j = 0; j <= d; ++j) {
      double v = 0.0, row = 0.0;
      for (int a = 0; a <= d; ++a) {
        v += der[j * (d + 1) + a] * p(gl.points[a]);
        row += der[j * (d + 1) + a];
      }
      EXPECT_NEAR(v, dp(gl.points[j]), 1e-11) << "d=" << d << " j=" << j;
      EXPECT_NEAR(row, 0.0, 1e-11);
    }
  }
}

template <int D>
void check_ref_element(int d) {
  const RefElement<D> ref(d);
  const int n = ref.num_nodes();
  EXPECT_EQ(n, static_cast<int>(std::pow(d + 1, D)));
  double wsum = 0.0;
  for (int i = 0; i < n; ++i) wsum += ref.weight(i);
  EXPECT_NEAR(wsum, std::pow(2.0, D), 1e-13);

  // interpolation property
  for (int j = 0; j < n; ++j) {
    const auto phi = ref.values(ref.node(j));
    for (int i = 0; i < n; ++i) EXPECT_NEAR(phi[i], i == j ? 1.0 : 0.0, 1e-13);
  }

  // lexicographic ordering, first axis fastest
  for (int i = 0; i < n; ++i) {
    EXPECT_EQ(ref.flatten(ref.multi_index(i)), i);
    EXPECT_EQ(ref.unflatten(i), ref.multi_index(i));
  }

  // gradient table against central differences of values()
  const double h = 1e-6;
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < D; ++k) {
      auto xp = ref.node(j), xm = ref.node(j);
      xp[k] += h;
      xm[k] -= h;
      const auto vp = ref.values(xp), vm = ref.values(xm);
      for (int i = 0; i < n; ++i)
        EXPECT_NEAR(ref.grad(i, j, k), (vp[i] - vm[i]) / (2 * h), 2e-6 * (1 + d * d));
    }

  // face tables
  for (int f = 0; f < 2 * D; ++f) {
    EXPECT_EQ(static_cast<int>(ref.face_nodes(f).size()), static_cast<int>(std::pow(d + 1, D - 1)));
    double msum = 0.0;
    for (int i = 0; i < n; ++i) {
      const bool on = std::abs(ref.node(i)[f / 2] - ref.face_normal(f)[f / 2]) < 1e-15;
      if (!on) EXPECT_EQ(ref.face_weight(i, f), 0.0);
      else EXPECT_GT(ref.face_weight(i, f), 0.0);
      msum += ref.face_weight(i, f);
    }
    EXPECT_NEAR(msum, std::pow(2.0, D - 1), 1e-13);
    for (int i : ref.face_nodes(f)) {
      // mirror node sits on the opposite face with the same tangential coordinates
      const int m = ref.mirror_node(i, f);
      EXPECT_GT(ref.face_weight(m, RefElement<D>::opposite_face(f)), 0.0);
      for (int k = 0; k < D; ++k) {
        if (k != f / 2) {
          EXPECT_EQ(ref.node(i)[k], ref.node(m)[k]);
        }
      }
      EXPECT_EQ(ref.mirror_node(m, RefElement<D>::opposite_face(f)), i);
    }
  }
  // in 1D the face "quadrature" is the point value
  if constexpr (D == 1) {
    EXPECT_EQ(ref.face_weight(0, 0), 1.0);
    EXPECT_EQ(ref.face_weight(d, 1), 1.0);
  }
}

TEST(RefElement, InvariantsAcrossDimensionsAndDegrees) {
  for (int d = 1; d <= 4; ++d) {
    check_ref_element<1>(d);
    check_ref_element<2>(d);
    check_ref_element<3>(d);
  }
  check_ref_element<2>(max_degree);
}
