#pragma once

// Splitting schemes composed from transport (T), collision (C) and source
// (S) substeps, and the time-stepping driver on top of KineticSolver.

#include <algorithm>
#include <chrono>
#include <functional>
#include <cmath>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "kdg/errors.hpp"
#include "kdg/solver.hpp"

namespace kdg {

enum class Op { transport, collision, source };

inline char op_letter(Op o) {
  switch (o) {
    case Op::transport: return 'T';
    case Op::collision: return 'C';
    case Op::source: return 'S';
  }
  return '?';
}

struct Substep {
  Op op = Op::transport;
  double fraction = 1.0;  // of the global dt
  double theta = 0.5;
};

struct SplitScheme {
  std::string name;
  std::vector<Substep> steps;
  /// Fuse the trailing T of one step with the leading T of the next.
  bool collapse = false;

  bool palindromic() const {
    const std::size_t n = steps.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Substep& a = steps[i];
      const Substep& b = steps[n - 1 - i];
      if (a.op != b.op || std::abs(a.fraction - b.fraction) > 1e-14 || a.theta != b.theta)
        return false;
    }
    return true;
  }

  double total_fraction(Op o) const {
    double s = 0.0;
    for (const auto& st : steps)
      if (st.op == o) s += st.fraction;
    return s;
  }

  std::string describe() const {
    std::string s;
    for (const auto& st : steps) {
      if (!s.empty()) s += " ";
      s += op_letter(st.op);
      s += "(" + std::to_string(st.fraction) + ")";
    }
    return s;
  }
};

/// Concatenates copies of a palindromic base scheme with each copy's
/// fractions scaled by one coefficient.
inline SplitScheme compose_palindromic(const SplitScheme& base,
                                       const std::vector<double>& coefficients) {
  if (!base.palindromic()) throw NonPalindromicInput("base scheme '" + base.name + "'");
  const std::size_t n = coefficients.size();
  if (n == 0) throw NonPalindromicInput("empty coefficient list");
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(coefficients[i] - coefficients[n - 1 - i]) > 1e-14)
      throw NonPalindromicInput("coefficients are not symmetric");
    sum += coefficients[i];
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw NonPalindromicInput("coefficients sum to " + std::to_string(sum));
  SplitScheme out;
  out.name = base.name;
  if (n > 1) out.name += "_x" + std::to_string(n);
  for (double c : coefficients)
    for (Substep s : base.steps) {
      s.fraction *= c;
      out.steps.push_back(s);
    }
  return out;
}

inline double triple_jump_gamma() { return 1.0 / (2.0 - std::cbrt(2.0)); }

inline SplitScheme make_scheme(const std::string& name) {
  const Op T = Op::transport, C = Op::collision, S = Op::source;
  if (name == "m1") return {name, {{T, 1.0, 1.0}, {S, 1.0, 1.0}, {C, 1.0, 1.0}}, false};
  if (name == "m1_2") return {name, {{T, 1.0, 0.5}, {S, 1.0, 0.5}, {C, 1.0, 0.5}}, false};
  if (name == "m2") return {name, {{T, 0.5, 0.5}, {C, 1.0, 0.5}, {T, 0.5, 0.5}}, false};
  if (name == "m2s" || name == "m2s_collapsed")
    return {name,
            {{T, 0.5, 0.5}, {S, 0.5, 0.5}, {C, 1.0, 0.5}, {S, 0.5, 0.5}, {T, 0.5, 0.5}},
            name == "m2s_collapsed"};
  if (name == "m2kin")
    return {name,
            {{T, 0.25, 0.5}, {C, 0.5, 0.5}, {T, 0.5, 0.5}, {C, 0.5, 0.5}, {T, 0.25, 0.5}},
            false};
  if (name == "m4") {
    const double g = triple_jump_gamma();
    SplitScheme s = compose_palindromic(make_scheme("m2s"), {g, 1.0 - 2.0 * g, g});
    s.name = name;
    return s;
  }
  throw UnknownScheme("'" + name + "'");
}

/// Simulated time accumulated per operator, for the fraction audit.
struct OperatorClock {
  double t = 0.0, c = 0.0, s = 0.0;
  void add(Op o, double dt) {
    (o == Op::transport ? t : o == Op::collision ? c : s) += dt;
  }
};

struct AdvanceOptions {
  /// Per-substep timing rows (step, substep, op, dt, tasks, busy_s, span_s).
  std::ostream* timing_csv = nullptr;
  OperatorClock* clock = nullptr;
  /// Called after every completed step with the step index.
  std::function<void(int)> on_step;
};

/// Applies n_steps of the scheme. W is reduced from F before every C and S
/// substep and at the end of every step; each step is submitted in full and
/// executed by a single runtime run.
template <int D>
void advance(KineticSolver<D>& solver, const SplitScheme& scheme, double dt, int n_steps,
             const AdvanceOptions& opt = {}) {
  if (scheme.steps.empty()) return;
  const bool collapse = scheme.collapse && scheme.steps.size() >= 2 &&
                        scheme.steps.front().op == Op::transport &&
                        scheme.steps.back().op == Op::transport;
  if (opt.timing_csv && opt.timing_csv->tellp() <= 0)
    *opt.timing_csv << "step,substep,op,dt,tasks,busy_s,span_s\n";

  for (int step = 0; step < n_steps; ++step) {
    std::size_t first = 0, last = scheme.steps.size();
    if (collapse && step > 0) first = 1;  // fused into the previous step
    struct Span {
      std::size_t sub;
      Op op;
      double dt;
      std::size_t begin, end;
    };
    std::vector<Span> spans;
    for (std::size_t i = first; i < last; ++i) {
      const Substep& s = scheme.steps[i];
      double sdt = s.fraction * dt;
      if (collapse && i + 1 == last && step + 1 < n_steps)
        sdt += scheme.steps.front().fraction * dt;
      const std::size_t begin = solver.runtime().pending();
      const std::string tag = std::string(1, op_letter(s.op)) + std::to_string(i);
      switch (s.op) {
        case Op::transport:
          solver.submit_transport(sdt, s.theta, tag);
          break;
        case Op::collision:
          solver.submit_reduce(tag + ":reduce");
          solver.submit_collision(sdt, s.theta, tag);
          break;
        case Op::source:
          solver.submit_reduce(tag + ":reduce");
          solver.submit_source(sdt, s.theta, tag);
          break;
      }
      spans.push_back({i, s.op, sdt, begin, solver.runtime().pending()});
      if (opt.clock) opt.clock->add(s.op, sdt);
    }
    solver.submit_reduce();
    const rt::TaskGraphRun run = solver.run();
    solver.state().time += dt;

    if (opt.timing_csv) {
      for (const auto& sp : spans) {
        double busy = 0.0, t0 = 1e300, t1 = -1e300;
        for (std::size_t t = sp.begin; t < sp.end; ++t) {
          const auto& e = run.trace[t];
          busy += e.t_end - e.t_start;
          t0 = std::min(t0, e.t_start);
          t1 = std::max(t1, e.t_end);
        }
        *opt.timing_csv << step << "," << sp.sub << "," << op_letter(sp.op) << "," << sp.dt
                        << "," << (sp.end - sp.begin) << "," << busy << ","
                        << (sp.end > sp.begin ? t1 - t0 : 0.0) << "\n";
      }
    }
    if (opt.on_step) opt.on_step(step);
  }
}

}  // namespace kdg
