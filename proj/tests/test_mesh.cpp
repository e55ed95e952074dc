#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <random>
#include <sstream>

#include "kdg/mesh.hpp"

using namespace kdg;

template <int D>
Mat<D> random_mat(std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat<D> m;
  for (auto& r : m)
    for (auto& x : r) x = u(rng);
  for (int k = 0; k < D; ++k) m[k][k] += 2.0;
  return m;
}

template <int D>
void check_cofactor(std::mt19937& rng) {
  for (int t = 0; t < 50; ++t) {
    const Mat<D> a = random_mat<D>(rng);
    Eigen::Matrix<double, D, D> e;
    for (int r = 0; r < D; ++r)
      for (int c = 0; c < D; ++c) e(r, c) = a[r][c];
    EXPECT_NEAR(determinant<D>(a), e.determinant(), 1e-13);
    const Eigen::Matrix<double, D, D> co = e.determinant() * e.inverse().transpose();
    const Mat<D> mine = cofactor<D>(a);
    for (int r = 0; r < D; ++r)
      for (int c = 0; c < D; ++c) EXPECT_NEAR(mine[r][c], co(r, c), 1e-12);
  }
}

TEST(Geometry, CofactorMatchesEigen) {
  std::mt19937 rng(1);
  check_cofactor<1>(rng);
  check_cofactor<2>(rng);
  check_cofactor<3>(rng);
}

// Area of a convex quadrilateral by the shoelace formula.
double shoelace(const std::array<Vec<2>, 4>& corners) {
  // corner bits: 0=(-,-) 1=(+,-) 2=(-,+) 3=(+,+); walk 0,1,3,2
  const int ord[4] = {0, 1, 3, 2};
  double a = 0.0;
  for (int i = 0; i < 4; ++i) {
    const auto& p = corners[ord[i]];
    const auto& q = corners[ord[(i + 1) % 4]];
    a += p[0] * q[1] - q[0] * p[1];
  }
  return 0.5 * a;
}

TEST(Geometry, SubcellVolumesSumToCellArea) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  for (int t = 0; t < 20; ++t) {
    Macromesh<2> mesh(3, {3, 2});
    // affine parallelogram
    const Vec<2> o{u(rng), u(rng)}, e1{1.0 + u(rng), u(rng)}, e2{u(rng), 1.0 + u(rng)};
    std::array<Vec<2>, 4> c;
    for (int b = 0; b < 4; ++b)
      for (int k = 0; k < 2; ++k) c[b][k] = o[k] + ((b & 1) ? e1[k] : 0.0) + ((b & 2) ? e2[k] : 0.0);
    mesh.add_macrocell(c);
    double total = 0.0;
    for (int s = 0; s < mesh.subcells_per_macrocell(); ++s) {
      const double v = mesh.volume(0, s);
      EXPECT_NEAR(v, shoelace(c) / 6.0, 1e-12);
      total += v;
    }
    EXPECT_NEAR(total, shoelace(c), 1e-12);
  }
}

TEST(Geometry, BoxMeshVolumes3D) {
  const auto mesh = build_box_macromesh<3>({0, 0, 0}, {2, 1, 3}, {2, 1, 3}, {2, 2, 1}, 2);
  double total = 0.0;
  for (int k = 0; k < mesh.num_macrocells(); ++k)
    for (int s = 0; s < mesh.subcells_per_macrocell(); ++s) total += mesh.volume(k, s);
  EXPECT_NEAR(total, 6.0, 1e-12);
  EXPECT_EQ(mesh.num_macrocells(), 6);
  EXPECT_EQ(mesh.nodes_per_macrocell(), 4 * 27);
}

TEST(Geometry, DegenerateInput) {
  Macromesh<2> mesh(2, {1, 1});
  std::array<Vec<2>, 4> flipped{{{1, 0}, {0, 0}, {1, 1}, {0, 1}}};
  EXPECT_THROW(mesh.add_macrocell(flipped), DegenerateBox);
  std::array<Vec<2>, 4> flat{{{0, 0}, {1, 0}, {0, 0}, {1, 0}}};
  EXPECT_THROW(mesh.add_macrocell(flat), DegenerateBox);
  EXPECT_THROW((build_box_macromesh<2>({0, 0}, {0, 1}, {1, 1}, {1, 1}, 1)), DegenerateBox);
  EXPECT_THROW((build_box_macromesh<2>({0, 0}, {1, 1}, {0, 1}, {1, 1}, 1)), DegenerateBox);
  EXPECT_THROW((build_box_macromesh<2>({0, 0}, {1, 1}, {1, 1}, {1, 1}, 0)), DegreeOutOfRange);
}

template <int D>
void check_interfaces(const Macromesh<D>& mesh) {
  for (const auto& iface : mesh.interfaces()) {
    EXPECT_EQ(iface.pairs.size(), mesh.macro_face_nodes(iface.left_face).size());
    for (const auto& [l, r] : iface.pairs) {
      const auto& pl = mesh.point(iface.left, l);
      const auto& pr = mesh.point(iface.right, r);
      for (int k = 0; k < D; ++k) EXPECT_NEAR(pl[k], pr[k], 1e-12);
      // outward normals are opposite
      const auto nl = scaled_normal<D>(mesh, iface.left, l, iface.left_face);
      const auto nr = scaled_normal<D>(mesh, iface.right, r, iface.right_face);
      for (int k = 0; k < D; ++k) EXPECT_NEAR(nl[k], -nr[k], 1e-12);
    }
  }
  // every macro face is either an interface or a boundary face
  const int faces = 2 * D * mesh.num_macrocells();
  EXPECT_EQ(faces, static_cast<int>(2 * mesh.interfaces().size() + mesh.boundary_faces().size()));
}

TEST(Interfaces, BoxMeshPairsCoincide) {
  check_interfaces(build_box_macromesh<1>({0}, {1}, {4}, {3}, 3));
  check_interfaces(build_box_macromesh<2>({0, 0}, {1, 2}, {3, 2}, {2, 3}, 2));
  check_interfaces(build_box_macromesh<3>({0, 0, 0}, {1, 1, 1}, {2, 2, 2}, {1, 2, 1}, 2));
}

TEST(Interfaces, MatchingIsPermutationAndInvolutive) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec<2>> a(30);
  for (auto& p : a) p = {u(rng), u(rng)};
  auto b = a;
  std::shuffle(b.begin(), b.end(), rng);
  const auto m = match_interface_nodes<2>(a, b);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i], b[m[i]]);
  }
  const auto back = match_interface_nodes<2>(b, a);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(back[m[i]], static_cast<int>(i));

  auto c = a;
  c.pop_back();
  EXPECT_THROW(match_interface_nodes<2>(a, c), NonConformalInterface);
  auto d = a;
  d[3][0] += 0.01;
  EXPECT_THROW(match_interface_nodes<2>(a, d), NonConformalInterface);
}

TEST(Normals, InteriorNodeRejected) {
  const auto mesh = build_box_macromesh<2>({0, 0}, {1, 1}, {1, 1}, {1, 1}, 2);
  // node 4 is the centre of the 3x3 subcell
  EXPECT_THROW(scaled_normal<2>(mesh, 0, {0, 4}, 0), NodeNotOnFace);
  const auto n = scaled_normal<2>(mesh, 0, {0, 0}, 0);
  EXPECT_LT(n[0], 0.0);
  EXPECT_EQ(n[1], 0.0);
}

// Sum of mu_i^f c_i n_f over a closed subcell vanishes (discrete Gauss for
// constants), equivalently sum_j w_j c_j grad phi_i(x_j) summed over i.
TEST(Geometry, ClosedSurfaceIdentity) {
  Macromesh<2> mesh(3, {2, 2});
  mesh.add_macrocell({{{0, 0}, {1.2, 0.1}, {0.2, 0.9}, {1.5, 1.3}}});
  const auto& ref = mesh.ref();
  for (int s = 0; s < mesh.subcells_per_macrocell(); ++s) {
    Vec<2> sum{};
    for (int f = 0; f < 4; ++f)
      for (int i : ref.face_nodes(f)) {
        const auto n = scaled_normal<2>(mesh, 0, {s, i}, f);
        for (int k = 0; k < 2; ++k) sum[k] += ref.face_weight(i, f) * n[k];
      }
    EXPECT_NEAR(sum[0], 0.0, 1e-12);
    EXPECT_NEAR(sum[1], 0.0, 1e-12);
  }
}

TEST(Summary, ListsCellsAndInterfaces) {
  const auto mesh = build_box_macromesh<2>({0, 0}, {1, 1}, {2, 2}, {1, 1}, 1);
  std::ostringstream os;
  write_mesh_summary(os, mesh);
  const std::string s = os.str();
  EXPECT_NE(s.find("macrocells=4"), std::string::npos);
  EXPECT_NE(s.find("interfaces=4"), std::string::npos);
  EXPECT_NE(s.find("interface 3"), std::string::npos);
}
