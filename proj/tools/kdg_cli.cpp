// kdg command line driver: run, converge, bench, graph.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kdg/app/cases.hpp"
#include "kdg/graph.hpp"

namespace {

using kdg::app::RunConfig;

int exit_code(const kdg::Error& e) {
  switch (e.category()) {
    case kdg::Error::Category::config: return 2;
    case kdg::Error::Category::mismatch: return 4;
    case kdg::Error::Category::numerical:
    case kdg::Error::Category::logic: return 3;
  }
  return 3;
}

std::vector<int> parse_workers(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw kdg::ConfigError("bad worker list '" + s + "'");
    }
    if (out.back() < 1) throw kdg::ConfigError("worker counts must be >= 1");
  }
  if (out.empty()) throw kdg::ConfigError("empty worker list");
  return out;
}

void print_report(const RunConfig& cfg, const kdg::app::CaseReport& r) {
  std::cout << "case " << cfg.case_name << "  model " << cfg.model << "  scheme " << cfg.scheme
            << "\n";
  std::cout << "steps " << r.steps << "  t " << r.time << "  dt " << cfg.dt << "  nodes "
            << r.error.nodes << "  wall " << r.error.wall_seconds << " s\n";
  std::cout << "min rho " << r.min_rho << "  max source iterations " << r.picard_iterations
            << "\n";
  if (!r.error.eps_var.empty()) {
    std::cout << "eps " << r.error.eps << "  per variable";
    for (double e : r.error.eps_var) std::cout << " " << e;
    std::cout << "\n";
  }
  if (cfg.case_name == "cylinder")
    std::cout << "mach " << r.mach << "  |u(x_c)| " << r.u_at_xc << "  max |u - u_in| "
              << r.max_u_deviation << "\n";
}

template <int D>
void dump_graph(const RunConfig& cfg, int velocity, const std::string& path) {
  auto mesh = kdg::app::make_mesh<D>(cfg);
  const auto model = kdg::make_model<D>(cfg.model, cfg.lambda, cfg.tau);
  if (velocity < 0 || velocity >= model.num_velocities())
    throw kdg::ConfigError("velocity index out of range");
  const auto g = kdg::build_dep_graph<D>(*mesh, model.velocity(velocity),
                                          kdg::Granularity::macrocell, velocity);
  std::ofstream os(path);
  if (!os) throw kdg::ConfigError("cannot write '" + path + "'");
  kdg::write_dot(os, g);
  const auto order = kdg::topological_order(g);
  const auto levels = kdg::parallel_levels(g, order);
  std::cout << "velocity " << velocity << ": " << g.num_vertices << " macrocells, "
            << g.edges.size() << " edges, " << levels.size() << " levels\n";
  for (std::size_t l = 0; l < levels.size(); ++l) {
    std::cout << "  level " << l << ":";
    for (int v : levels[l]) std::cout << " " << v;
    std::cout << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Implicit kinetic DG solver on a task-graph runtime"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", scheduler, dot_path, workers_list = "1,2,4";
  std::string reference = "analytic";
  int workers = 0, halvings = 4, velocity = 0;
  bool deterministic = false;

  auto* run = app.add_subcommand("run", "Run one case");
  run->add_option("--config", config_path, "JSON configuration")->required();
  run->add_option("--workers", workers, "Worker threads");
  run->add_option("--scheduler", scheduler, "eager or priority");
  run->add_flag("--deterministic", deterministic, "Serialize commutative updates");
  run->add_option("--out", out_dir, "Output directory");

  auto* conv = app.add_subcommand("converge", "Time convergence study");
  conv->add_option("--config", config_path, "JSON configuration")->required();
  conv->add_option("--halvings", halvings, "Number of dt halvings");
  conv->add_option("--reference", reference, "analytic or self")
      ->check(CLI::IsMember({"analytic", "self"}));
  conv->add_option("--out", out_dir, "Output directory");

  auto* bench = app.add_subcommand("bench", "Multithread scaling benchmark");
  bench->add_option("--config", config_path, "JSON configuration")->required();
  bench->add_option("--workers", workers_list, "Comma separated worker counts");
  bench->add_option("--out", out_dir, "Output directory");

  auto* graph = app.add_subcommand("graph", "Dump a macrocell dependency graph");
  graph->add_option("--config", config_path, "JSON configuration")->required();
  graph->add_option("--velocity", velocity, "Velocity index");
  graph->add_option("--dot", dot_path, "Output .dot file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg = kdg::app::load_config(config_path);
    if (workers > 0) cfg.workers = workers;
    if (!scheduler.empty()) cfg.scheduler = scheduler;
    if (deterministic) cfg.deterministic = true;
    cfg.output.dir = out_dir;
    cfg.validate();

    if (*run) {
      kdg::app::CaseHooks hooks;
      hooks.out_dir = out_dir;
      const auto r = kdg::app::run_case(cfg, hooks);
      print_report(cfg, r);
    } else if (*conv) {
      std::filesystem::create_directories(out_dir);
      std::ofstream csv(out_dir + "/convergence.csv");
      const auto tab = kdg::app::convergence_study(
          cfg, halvings, &csv,
          reference == "self" ? kdg::app::Reference::self : kdg::app::Reference::analytic);
      for (const auto& row : tab.rows)
        std::cout << "dt " << row.dt << "  steps " << row.steps << "  eps " << row.eps << "\n";
      if (tab.at_floor) std::cout << "slope: at floor\n";
      else std::cout << "slope " << tab.slope << "\n";
    } else if (*bench) {
      std::filesystem::create_directories(out_dir);
      const auto rows = kdg::app::scaling_bench(cfg, parse_workers(workers_list));
      std::ofstream csv(out_dir + "/bench.csv");
      kdg::app::write_bench_csv(csv, rows);
      kdg::app::write_bench_csv(std::cout, rows);
    } else if (*graph) {
      switch (cfg.dimension()) {
        case 1: dump_graph<1>(cfg, velocity, dot_path); break;
        case 2: dump_graph<2>(cfg, velocity, dot_path); break;
        case 3: dump_graph<3>(cfg, velocity, dot_path); break;
      }
    }
  } catch (const kdg::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
