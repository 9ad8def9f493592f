#ifndef MTCRF_OPTIM_HPP
#define MTCRF_OPTIM_HPP

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mtcrf/objective.hpp"

namespace mtcrf {

struct OptimizerConfig {
  int memory = 10;
  int max_iters = 500;
  double gradient_tolerance = 1e-5;  // on the infinity norm
  double relative_tolerance = 1e-14;  // |f_k - f_{k-1}| / max(1, |f_k|)
  double sufficient_increase = 1e-4;
  int max_backtracks = 50;
  int alternate_rounds = 200;
};

void validate(const OptimizerConfig& cfg);

enum class Termination {
  GradientTolerance,
  RelativeChange,
  IterationLimit,
  RoundLimit,
  LineSearchFailed,
};

const char* termination_name(Termination t);

struct TraceEntry {
  int iteration = 0;
  double objective = 0.0;
  double gradient_norm = 0.0;
  // Alternating runs: 0 for a step on the task-1 objective, 1 for task 2.
  // Joint runs leave it at -1.
  int sub_objective = -1;
  // Value of the stepped objective before the step (alternating runs).
  double objective_before = 0.0;

  friend bool operator==(const TraceEntry&, const TraceEntry&) = default;
};

struct TrainReport {
  std::vector<TraceEntry> trace;  // entry 0 is the starting point for joint runs
  Termination reason = Termination::IterationLimit;
  int accepted_steps = 0;
  double wall_seconds = 0.0;
};

/// `iteration TAB objective TAB gradnorm`, one line per trace entry.
void write_trace(const TrainReport& report, std::ostream& out);

using Evaluator = std::function<Objective(std::span<const double>)>;

/// Limited-memory quasi-Newton ascent with a backtracking line search.
std::pair<std::vector<double>, TrainReport> maximize(const Evaluator& f, std::vector<double> x0,
                                                     const OptimizerConfig& cfg);

/// Alternates one line-searched quasi-Newton step on `f_y` with one on `f_z`
/// for cfg.alternate_rounds rounds, each objective keeping its own curvature
/// history. Stops early once both gradients are below tolerance.
std::pair<std::vector<double>, TrainReport> alternate(const Evaluator& f_y, const Evaluator& f_z,
                                                      std::vector<double> x0, const OptimizerConfig& cfg);

double infinity_norm(std::span<const double> v);

}  // namespace mtcrf

#endif  // MTCRF_OPTIM_HPP
