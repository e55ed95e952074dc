#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "kdg/app/cases.hpp"

using namespace kdg;
using namespace kdg::app;

namespace {

RunConfig small_gravity() {
  return parse_config(json::parse(R"({
    "case": "gravity", "model": "d2q9", "lambda": 1.0, "tau": 1e-4,
    "dt": 0.024, "t_max": 0.048, "scheme": "m2s",
    "mesh": {"lo": [0,0], "hi": [1,1], "macro": [2,2], "sub": [2,2], "degree": 2}
  })"));
}

// Minimal legacy-VTK reader: point count and named scalar arrays.
struct VtkFile {
  std::size_t points = 0;
  std::map<std::string, std::vector<double>> scalars;
  std::map<std::string, std::vector<std::array<double, 3>>> vectors;
};

VtkFile read_vtk(std::istream& is) {
  VtkFile out;
  std::string tok;
  while (is >> tok) {
    if (tok == "POINTS") {
      std::string type;
      is >> out.points >> type;
      double x;
      for (std::size_t i = 0; i < 3 * out.points; ++i) is >> x;
    } else if (tok == "SCALARS") {
      std::string name, type, lt, def;
      int comps;
      is >> name >> type >> comps >> lt >> def;
      auto& v = out.scalars[name];
      v.resize(out.points);
      for (auto& x : v) is >> x;
    } else if (tok == "VECTORS") {
      std::string name, type;
      is >> name >> type;
      auto& v = out.vectors[name];
      v.resize(out.points);
      for (auto& a : v) is >> a[0] >> a[1] >> a[2];
    }
  }
  return out;
}

}  // namespace

TEST(Config, ParsesAndRoundTrips) {
  const RunConfig c = small_gravity();
  EXPECT_EQ(c.dimension(), 2);
  EXPECT_EQ(c.num_steps(), 2);
  EXPECT_EQ(c.mesh.degree, 2);
  const RunConfig back = parse_config(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
}

TEST(Config, RejectsBadInput) {
  auto bad = [](const char* text) { return json::parse(text); };
  EXPECT_THROW(parse_config(bad(R"({"case": "gravity", "colour": 1})")), ConfigError);
  EXPECT_THROW(parse_config(bad(R"({"mesh": {"degre": 2}})")), ConfigError);
  EXPECT_THROW(parse_config(bad(R"({"dt": -1})")), ConfigError);
  EXPECT_THROW(parse_config(bad(R"({"dt": "fast"})")), ConfigError);
  EXPECT_THROW(parse_config(bad(R"({"case": "vortex"})")), ConfigError);
  EXPECT_THROW(parse_config(bad(R"({"model": "d2q7"})")), UnknownModel);
  EXPECT_THROW(parse_config(bad(R"({"scheduler": "fifo"})")), ConfigError);
  EXPECT_THROW(parse_config(bad(R"({"mesh": {"lo": [0,0,0]}})")), ConfigError);
  EXPECT_THROW(parse_config(bad(R"({"case": "gravity", "model": "d3q19"})")), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/x.json"), ConfigError);
  // cylinder defaults put x_c inside the domain
  const auto cyl = parse_config(bad(R"({"case": "cylinder"})"));
  EXPECT_LT(cyl.mesh.lo[0], cyl.cylinder.x_c[0]);
  EXPECT_GT(cyl.mesh.hi[0], cyl.cylinder.x_c[0]);
}

TEST(Config, SampleConfigsLoad) {
  const std::filesystem::path dir = std::filesystem::path(KDG_SOURCE_DIR) / "configs";
  int n = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() != ".json") continue;
    EXPECT_NO_THROW(load_config(e.path().string())) << e.path();
    ++n;
  }
  EXPECT_GE(n, 4);
}

TEST(Norms, L2ErrorHandCases) {
  const auto mesh = build_box_macromesh<2>({0, 0}, {2, 1}, {2, 1}, {1, 1}, 2);
  FieldState st(9, mesh.num_macrocells(), mesh.nodes_per_macrocell(), 3);
  for (int k = 0; k < st.num_cells; ++k)
    for (int n = 0; n < st.nodes_per_cell; ++n) {
      st.W(k, 0, n) = 1.1;  // 10 % off in rho
      st.W(k, 1, n) = 0.0;
      st.W(k, 2, n) = 0.5;  // exact momentum is zero: absolute error over area 2
    }
  const auto rep = l2_error<2>(mesh, st, [](const Vec<2>&) { return std::array<double, 3>{1, 0, 0}; });
  EXPECT_NEAR(rep.eps_var[0], 0.1, 1e-14);
  EXPECT_NEAR(rep.eps_var[1], 0.0, 1e-14);
  EXPECT_NEAR(rep.eps_var[2], 0.5 * std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(rep.eps, std::sqrt((0.01 + 0.5) / 3.0), 1e-14);
  EXPECT_EQ(rep.nodes, mesh.num_nodes());
  const auto same = l2_difference<2>(mesh, st.w, st.w);
  EXPECT_EQ(same.eps, 0.0);
}

TEST(Gravity, ZeroGravityStaysAtFloor) {
  RunConfig c = small_gravity();
  c.gravity.g = 0.0;
  const auto r = run_case(c);
  EXPECT_LT(r.error.eps, error_floor);
  EXPECT_EQ(r.steps, 2);
}

TEST(Gravity, SmallRunIsAccurate) {
  const auto r = run_case(small_gravity());
  EXPECT_LT(r.error.eps, 0.05);
  EXPECT_GT(r.min_rho, 0.0);
  EXPECT_EQ(r.picard_iterations, 1);
}

TEST(PostProcessing, GradientAndPointEvaluationOnPolynomials) {
  RunConfig c = small_gravity();
  c.mesh.macro = {2, 3};
  c.mesh.sub = {2, 1};
  c.mesh.degree = 3;
  const auto mesh = make_mesh<2>(c);
  const int nloc = mesh->nodes_per_macrocell();
  auto p = [](const Vec<2>& x) { return 1.0 + x[0] * x[0] * x[1] - 2.0 * x[1] * x[1] * x[1]; };
  FieldState st(9, mesh->num_macrocells(), nloc, 3);
  for (int k = 0; k < mesh->num_macrocells(); ++k) {
    std::vector<double> u(nloc);
    for (int n = 0; n < nloc; ++n) {
      u[n] = p(mesh->point(k, n));
      st.W(k, 0, n) = u[n];
      st.W(k, 1, n) = 2.0 * u[n];
    }
    const auto g = dg_gradient<2>(*mesh, k, u);
    for (int n = 0; n < nloc; ++n) {
      const auto& x = mesh->point(k, n);
      EXPECT_NEAR(g[n][0], 2.0 * x[0] * x[1], 1e-11);
      EXPECT_NEAR(g[n][1], x[0] * x[0] - 6.0 * x[1] * x[1], 1e-11);
    }
  }
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    const Vec<2> x{u(rng), u(rng)};
    const auto w = evaluate_at<2>(*mesh, st, x);
    ASSERT_TRUE(w.has_value());
    EXPECT_NEAR((*w)[0], p(x), 1e-12);
    EXPECT_NEAR((*w)[1], 2.0 * p(x), 1e-12);
  }
  EXPECT_FALSE(evaluate_at<2>(*mesh, st, {1.5, 0.5}).has_value());
}

TEST(Output, SnapshotRoundTrip) {
  RunConfig c = small_gravity();
  const auto setup = make_case<2>(c);
  auto solver = make_solver<2>(c, setup);
  std::stringstream ss;
  write_snapshot<2>(ss, *setup.mesh, solver->state(), "test");
  const VtkFile f = read_vtk(ss);
  EXPECT_EQ(f.points, setup.mesh->num_nodes());
  ASSERT_EQ(f.scalars.count("rho"), 1u);
  ASSERT_EQ(f.scalars.count("vorticity"), 1u);
  ASSERT_EQ(f.vectors.count("u"), 1u);
  const auto pts = mesh_points(*setup.mesh);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    EXPECT_NEAR(f.scalars.at("rho")[i], hydrostatic<2>(c, pts[i])[0], 1e-10);
    EXPECT_NEAR(f.scalars.at("vorticity")[i], 0.0, 1e-12);
  }
}

TEST(Output, RunWritesFiles) {
  const std::string dir = testing::TempDir() + "kdg_run_files";
  std::filesystem::remove_all(dir);
  RunConfig c = small_gravity();
  c.output.timing = true;
  CaseHooks hooks;
  hooks.out_dir = dir;
  const auto r = run_case(c, hooks);
  EXPECT_TRUE(std::filesystem::exists(dir + "/run_header.json"));
  EXPECT_TRUE(std::filesystem::exists(dir + "/timing.csv"));
  ASSERT_EQ(r.snapshots.size(), 1u);
  EXPECT_TRUE(std::filesystem::exists(r.snapshots[0]));
  std::ifstream h(dir + "/run_header.json");
  const json header = json::parse(h);
  EXPECT_EQ(header["version"], kdg::version);
  EXPECT_EQ(header["config"]["dt"].get<double>(), 0.024);
  EXPECT_EQ(header["derived"]["steps"].get<int>(), 2);
}

TEST(Cylinder, NoPenalizationKeepsUniformFlow) {
  RunConfig c = parse_config(json::parse(R"({"case": "cylinder", "tau": 1e-3, "dt": 0.02,
      "t_max": 0.2, "cylinder": {"K_s": 0}})"));
  c.mesh.macro = {4, 2};
  const auto r = run_case(c);
  EXPECT_LT(r.max_u_deviation, 1e-12);
  EXPECT_NEAR(r.mach, 0.03 * std::sqrt(3.0), 1e-14);
  EXPECT_NEAR(r.u_at_xc, 0.03, 1e-12);
}

TEST(Cylinder, PenalizationSlowsFlowNearCentre) {
  RunConfig c = parse_config(json::parse(R"({"case": "cylinder", "tau": 1e-3, "dt": 0.02,
      "t_max": 0.4})"));
  c.mesh.macro = {8, 4};
  const auto r = run_case(c);
  EXPECT_LT(r.u_at_xc, 0.015);
  EXPECT_GT(r.min_rho, 0.9);
}

TEST(Bench, RowsAndMismatch) {
  RunConfig c = small_gravity();
  const auto rows = scaling_bench(c, {1, 1});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1].max_rel_diff, 0.0);
  EXPECT_EQ(rows[0].speedup, 1.0);
  std::ostringstream os;
  write_bench_csv(os, rows);
  EXPECT_EQ(os.str().rfind("workers,wall_s,speedup,efficiency,max_rel_diff\n", 0), 0u);
  EXPECT_THROW(scaling_bench(c, {1, 1}, -1.0), ResultMismatch);
}

TEST(Monitor, DensityCheckNamesLocation) {
  const auto mesh = build_box_macromesh<2>({0, 0}, {1, 1}, {1, 1}, {1, 1}, 1);
  FieldState st(9, 1, mesh.nodes_per_macrocell(), 3);
  for (int n = 0; n < st.nodes_per_cell; ++n) st.W(0, 0, n) = 1.0;
  EXPECT_EQ(check_density<2>(mesh, st), 1.0);
  st.W(0, 0, 3) = -0.5;
  try {
    check_density<2>(mesh, st);
    FAIL();
  } catch (const NonpositiveDensity& e) {
    EXPECT_NE(std::string(e.what()).find("x = (1, 1)"), std::string::npos) << e.what();
  }
}

TEST(Convergence, FitSlopeAndFloor) {
  std::vector<ConvergenceRow> rows{{0.1, 1, 0.01}, {0.05, 2, 0.0025}, {0.025, 4, 0.000625}};
  EXPECT_NEAR(fit_slope(rows), 2.0, 1e-12);
  RunConfig c = small_gravity();
  c.gravity.g = 0.0;
  const auto tab = convergence_study(c, 1);
  EXPECT_TRUE(tab.at_floor);
  EXPECT_TRUE(std::isnan(tab.slope));
  RunConfig cyl = parse_config(json::parse(R"({"case": "cylinder"})"));
  EXPECT_THROW(convergence_study(cyl, 1), ConfigError);
}
