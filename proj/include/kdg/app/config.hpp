#pragma once

// Run configuration: one JSON document, unknown keys rejected.
//
// {
//   "case": "gravity" | "cylinder" | "pulse",
//   "model": "d2q9", "lambda": 1.0, "tau": 1e-4,
//   "dt": 0.024, "t_max": 0.12, "scheme": "m2s",
//   "mesh": {"lo": [0,0], "hi": [1,1], "macro": [4,4], "sub": [8,8], "degree": 3},
//   "workers": 1, "scheduler": "eager", "deterministic": false, "cache_blocks": false,
//   "picard": {"tol": 1e-14, "max_iter": 50},
//   "output": {"dir": "out", "vtk_every": 0, "timing": false},
//   "gravity": {"g": 1.0, "rho0": 1.0},
//   "cylinder": {"K_s": 300, "kappa": 40, "x_c": [-4,0], "w_s": [1,0,0], "inflow": [1,0.03,0]},
//   "pulse": {"amplitude": 0.01, "width": 0.1}
// }

#include <cmath>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "kdg/errors.hpp"
#include "kdg/kinetic.hpp"

namespace kdg::app {

using nlohmann::json;

struct MeshConfig {
  std::vector<double> lo{0.0, 0.0};
  std::vector<double> hi{1.0, 1.0};
  std::vector<int> macro{4, 4};
  std::vector<int> sub{8, 8};
  int degree = 3;
};

struct GravityConfig {
  double g = 1.0;
  double rho0 = 1.0;
};

struct CylinderConfig {
  double k_s = 300.0;
  double kappa = 40.0;
  std::vector<double> x_c{-4.0, 0.0};
  std::vector<double> w_s{1.0, 0.0, 0.0};
  std::vector<double> inflow{1.0, 0.03, 0.0};  // rho, u_x, u_y (velocities, not momenta)
};

struct PulseConfig {
  double amplitude = 0.01;
  double width = 0.1;
};

struct OutputConfig {
  std::string dir = "out";
  int vtk_every = 0;  // steps between snapshots, 0 = final only
  bool timing = false;
};

struct RunConfig {
  std::string case_name = "gravity";
  std::string model = "d2q9";
  double lambda = 1.0;
  double tau = 1e-4;
  double dt = 0.024;
  double t_max = 0.12;
  std::string scheme = "m2s";
  MeshConfig mesh;
  int workers = 1;
  std::string scheduler = "eager";
  bool deterministic = false;
  bool cache_blocks = false;
  double picard_tol = 1e-14;
  int picard_max = 50;
  OutputConfig output;
  GravityConfig gravity;
  CylinderConfig cylinder;
  PulseConfig pulse;

  int dimension() const { return model_dimension(model); }
  int num_steps() const { return static_cast<int>(std::llround(t_max / dt)); }

  void validate() const;
};

namespace detail {

inline void reject_unknown(const json& j, const std::set<std::string>& allowed,
                           const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ConfigError("unknown key '" + where + k + "'");
}

template <class T>
void get(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("bad value for '" + where + key + "': " + e.what());
  }
}

inline void check_finite(double v, const std::string& name) {
  if (!std::isfinite(v)) throw ConfigError(name + " must be finite");
}

}  // namespace detail

inline void RunConfig::validate() const {
  using detail::check_finite;
  if (case_name != "gravity" && case_name != "cylinder" && case_name != "pulse")
    throw ConfigError("unknown case '" + case_name + "'");
  const int dim = dimension();
  if (dim == 0) throw UnknownModel("'" + model + "'");
  for (double v : {lambda, tau, dt, t_max, gravity.g, gravity.rho0, cylinder.k_s,
                   cylinder.kappa, pulse.amplitude, pulse.width, picard_tol})
    check_finite(v, "parameter");
  if (!(lambda > 0.0)) throw ConfigError("lambda must be > 0");
  if (tau < 0.0) throw ConfigError("tau must be >= 0");
  if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
  if (t_max < dt) throw ConfigError("t_max must be >= dt");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (scheduler != "eager" && scheduler != "priority")
    throw ConfigError("unknown scheduler '" + scheduler + "'");
  auto dims = [&](std::size_t n, const char* what) {
    if (static_cast<int>(n) != dim)
      throw ConfigError(std::string("mesh.") + what + " needs " + std::to_string(dim) +
                        " entries for model " + model);
  };
  dims(mesh.lo.size(), "lo");
  dims(mesh.hi.size(), "hi");
  dims(mesh.macro.size(), "macro");
  dims(mesh.sub.size(), "sub");
  if ((case_name == "gravity" || case_name == "cylinder") && dim != 2)
    throw ConfigError("case '" + case_name + "' needs a 2D model");
  if (case_name == "cylinder") {
    if (cylinder.x_c.size() != 2 || cylinder.w_s.size() != 3 || cylinder.inflow.size() != 3)
      throw ConfigError("cylinder.x_c / w_s / inflow have wrong sizes");
    if (!(cylinder.inflow[0] > 0.0)) throw ConfigError("cylinder inflow density must be > 0");
  }
  if (case_name == "gravity" && !(gravity.rho0 > 0.0))
    throw ConfigError("gravity.rho0 must be > 0");
}

inline RunConfig parse_config(const json& j) {
  using detail::get;
  detail::reject_unknown(j,
                         {"case", "model", "lambda", "tau", "dt", "t_max", "scheme", "mesh",
                          "workers", "scheduler", "deterministic", "cache_blocks", "picard",
                          "output", "gravity", "cylinder", "pulse"},
                         "");
  RunConfig c;
  get(j, "case", c.case_name, "");
  get(j, "model", c.model, "");
  get(j, "lambda", c.lambda, "");
  get(j, "tau", c.tau, "");
  get(j, "dt", c.dt, "");
  get(j, "t_max", c.t_max, "");
  get(j, "scheme", c.scheme, "");
  get(j, "workers", c.workers, "");
  get(j, "scheduler", c.scheduler, "");
  get(j, "deterministic", c.deterministic, "");
  get(j, "cache_blocks", c.cache_blocks, "");
  if (c.case_name == "cylinder" && !j.contains("mesh")) {
    c.mesh.lo = {-5.0, -1.0};
    c.mesh.hi = {5.0, 1.0};
    c.mesh.macro = {8, 8};
    c.mesh.sub = {2, 1};
    c.mesh.degree = 2;
  }
  if (j.contains("mesh")) {
    const json& m = j["mesh"];
    detail::reject_unknown(m, {"lo", "hi", "macro", "sub", "degree"}, "mesh.");
    get(m, "lo", c.mesh.lo, "mesh.");
    get(m, "hi", c.mesh.hi, "mesh.");
    get(m, "macro", c.mesh.macro, "mesh.");
    get(m, "sub", c.mesh.sub, "mesh.");
    get(m, "degree", c.mesh.degree, "mesh.");
  }
  if (j.contains("picard")) {
    const json& p = j["picard"];
    detail::reject_unknown(p, {"tol", "max_iter"}, "picard.");
    get(p, "tol", c.picard_tol, "picard.");
    get(p, "max_iter", c.picard_max, "picard.");
  }
  if (j.contains("output")) {
    const json& o = j["output"];
    detail::reject_unknown(o, {"dir", "vtk_every", "timing"}, "output.");
    get(o, "dir", c.output.dir, "output.");
    get(o, "vtk_every", c.output.vtk_every, "output.");
    get(o, "timing", c.output.timing, "output.");
  }
  if (j.contains("gravity")) {
    const json& g = j["gravity"];
    detail::reject_unknown(g, {"g", "rho0"}, "gravity.");
    get(g, "g", c.gravity.g, "gravity.");
    get(g, "rho0", c.gravity.rho0, "gravity.");
  }
  if (j.contains("cylinder")) {
    const json& g = j["cylinder"];
    detail::reject_unknown(g, {"K_s", "kappa", "x_c", "w_s", "inflow"}, "cylinder.");
    get(g, "K_s", c.cylinder.k_s, "cylinder.");
    get(g, "kappa", c.cylinder.kappa, "cylinder.");
    get(g, "x_c", c.cylinder.x_c, "cylinder.");
    get(g, "w_s", c.cylinder.w_s, "cylinder.");
    get(g, "inflow", c.cylinder.inflow, "cylinder.");
  }
  if (j.contains("pulse")) {
    const json& g = j["pulse"];
    detail::reject_unknown(g, {"amplitude", "width"}, "pulse.");
    get(g, "amplitude", c.pulse.amplitude, "pulse.");
    get(g, "width", c.pulse.width, "pulse.");
  }
  if (!j.contains("mesh") && c.dimension() != 2 && c.dimension() != 0) {
    const int d = c.dimension();
    c.mesh.lo.assign(d, 0.0);
    c.mesh.hi.assign(d, 1.0);
    c.mesh.macro.assign(d, 2);
    c.mesh.sub.assign(d, 2);
    c.mesh.degree = 2;
  }
  c.validate();
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

inline json to_json(const RunConfig& c) {
  return json{{"case", c.case_name},
              {"model", c.model},
              {"lambda", c.lambda},
              {"tau", c.tau},
              {"dt", c.dt},
              {"t_max", c.t_max},
              {"scheme", c.scheme},
              {"mesh",
               {{"lo", c.mesh.lo},
                {"hi", c.mesh.hi},
                {"macro", c.mesh.macro},
                {"sub", c.mesh.sub},
                {"degree", c.mesh.degree}}},
              {"workers", c.workers},
              {"scheduler", c.scheduler},
              {"deterministic", c.deterministic},
              {"cache_blocks", c.cache_blocks},
              {"picard", {{"tol", c.picard_tol}, {"max_iter", c.picard_max}}},
              {"output",
               {{"dir", c.output.dir},
                {"vtk_every", c.output.vtk_every},
                {"timing", c.output.timing}}},
              {"gravity", {{"g", c.gravity.g}, {"rho0", c.gravity.rho0}}},
              {"cylinder",
               {{"K_s", c.cylinder.k_s},
                {"kappa", c.cylinder.kappa},
                {"x_c", c.cylinder.x_c},
                {"w_s", c.cylinder.w_s},
                {"inflow", c.cylinder.inflow}}},
              {"pulse", {{"amplitude", c.pulse.amplitude}, {"width", c.pulse.width}}}};
}

}  // namespace kdg::app
