#pragma once

#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "msim/calibration/nelder_mead.hpp"
#include "msim/calibration/targets.hpp"
#include "msim/engine/io.hpp"
#include "msim/engine/simulator.hpp"

namespace msim {

struct FreeParameter {
  std::string name;
  std::optional<double> lower;
  std::optional<double> upper;
};

/// Maps a finished run (and the state it started from) to predictions laid
/// out like TargetTable::values().
using OutputFunction = std::function<std::vector<double>(const SimulationRecord&, const State&)>;
using ObjectiveFunction = std::function<double(const TargetTable&, const std::vector<double>&)>;

struct CalibrationProblem {
  Simulator simulator;
  State start;
  RunPlan plan;
  std::vector<StepHook> hooks;
  std::vector<FreeParameter> free;
  OutputFunction output;
  TargetTable targets;
  ObjectiveFunction objective = objective_wlsq_log;
  NelderMeadOptions optimizer;
};

struct CalibrationEval {
  std::size_t eval = 0;
  std::vector<double> x;  // free parameters, in problem order
  double f = 0.0;
  double best = 0.0;
};

struct CalibrationResult {
  ParameterVector theta;
  double objective = 0.0;
  double initial_objective = 0.0;
  std::size_t evals = 0;
  std::vector<CalibrationEval> trace;
  std::vector<std::string> rejected;  // messages of failed candidate runs
};

/// Objective at θ: configure the start state, run with the problem's fixed
/// seed, map the record to predictions and score them.
inline double evaluate_objective(const CalibrationProblem& p, const ParameterVector& theta) {
  const State start = configure(p.start, theta);
  const auto rec = run(p.simulator, start, p.plan, p.hooks);
  return p.objective(p.targets, p.output(rec, start));
}

inline ParameterVector with_free(const CalibrationProblem& p, const std::vector<double>& x) {
  ParameterVector theta = p.start.theta;
  for (std::size_t i = 0; i < p.free.size(); ++i) theta = theta.with(p.free[i].name, x[i]);
  return theta;
}

inline CalibrationResult calibrate(const CalibrationProblem& p) {
  const auto& domain = p.start.population.domain();
  for (const auto& fp : p.free) {
    if (!domain.find_parameter(fp.name)) {
      throw DomainError("free parameter '" + fp.name + "' is not a domain parameter");
    }
  }
  if (!p.output) throw DomainError("calibration problem has no output function");
  p.targets.validate();

  CalibrationResult res{p.start.theta, 0.0, 0.0, 0, {}, {}};
  std::vector<double> x0;
  NelderMeadOptions opt = p.optimizer;
  opt.lower.clear();
  opt.upper.clear();
  const bool any_lower = std::any_of(p.free.begin(), p.free.end(), [](auto& f) { return f.lower.has_value(); });
  const bool any_upper = std::any_of(p.free.begin(), p.free.end(), [](auto& f) { return f.upper.has_value(); });
  for (const auto& fp : p.free) {
    x0.push_back(p.start.theta.at(fp.name));
    if (any_lower) opt.lower.push_back(fp.lower.value_or(-std::numeric_limits<double>::infinity()));
    if (any_upper) opt.upper.push_back(fp.upper.value_or(std::numeric_limits<double>::infinity()));
  }

  bool first = true;
  auto f = [&](const std::vector<double>& x) {
    double v;
    try {
      v = evaluate_objective(p, with_free(p, x));
    } catch (const std::exception& e) {
      if (first) throw;
      res.rejected.push_back(e.what());
      v = std::numeric_limits<double>::infinity();
    }
    if (first) res.initial_objective = v;
    first = false;
    return v;
  };
  auto nm = nelder_mead(f, x0, opt);
  res.theta = with_free(p, nm.x);
  res.objective = nm.f;
  res.evals = nm.evals;
  for (auto& s : nm.trace) res.trace.push_back({s.eval, std::move(s.x), s.f, s.best});
  return res;
}

/// eval_index, one column per free parameter, f
inline void write_trace_csv(const CalibrationProblem& p, const CalibrationResult& r,
                            std::ostream& os) {
  os << "eval_index";
  for (const auto& fp : p.free) os << ',' << fp.name;
  os << ",f\n";
  for (const auto& e : r.trace) {
    os << e.eval;
    for (double v : e.x) os << ',' << format_double(v);
    os << ',' << format_double(e.f) << '\n';
  }
}

}  // namespace msim
