#include "mtcrf/optim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <ostream>

#include "mtcrf/core.hpp"

namespace mtcrf {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Curvature history for ascent. Pairs are stored for the minimization of -f:
// s = x_{k+1} - x_k, y = g_k - g_{k+1}, so that s.y > 0 near a maximum.
class Curvature {
 public:
  explicit Curvature(int memory) : memory_(static_cast<std::size_t>(memory)) {}

  bool empty() const { return pairs_.empty(); }
  void clear() { pairs_.clear(); }

  void update(std::span<const double> x_old, std::span<const double> x_new, std::span<const double> g_old,
              std::span<const double> g_new) {
    Pair p;
    p.s.resize(x_old.size());
    p.y.resize(x_old.size());
    for (std::size_t i = 0; i < x_old.size(); ++i) {
      p.s[i] = x_new[i] - x_old[i];
      p.y[i] = g_old[i] - g_new[i];
    }
    const double sy = dot(p.s, p.y);
    if (!(sy > 1e-12 * std::sqrt(dot(p.s, p.s) * dot(p.y, p.y)))) return;
    p.rho = 1.0 / sy;
    pairs_.push_back(std::move(p));
    if (pairs_.size() > memory_) pairs_.pop_front();
  }

  // Two-loop recursion: approximate inverse curvature applied to g.
  std::vector<double> direction(std::span<const double> g) const {
    std::vector<double> q(g.begin(), g.end());
    std::vector<double> alpha(pairs_.size());
    for (std::size_t i = pairs_.size(); i-- > 0;) {
      const auto& p = pairs_[i];
      alpha[i] = p.rho * dot(p.s, q);
      for (std::size_t j = 0; j < q.size(); ++j) q[j] -= alpha[i] * p.y[j];
    }
    if (!pairs_.empty()) {
      const auto& last = pairs_.back();
      const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
      for (double& v : q) v *= gamma;
    }
    for (std::size_t i = 0; i < pairs_.size(); ++i) {
      const auto& p = pairs_[i];
      const double beta = p.rho * dot(p.y, q);
      for (std::size_t j = 0; j < q.size(); ++j) q[j] += p.s[j] * (alpha[i] - beta);
    }
    return q;
  }

 private:
  struct Pair {
    std::vector<double> s, y;
    double rho = 0.0;
  };
  std::size_t memory_;
  std::deque<Pair> pairs_;
};

Objective checked(const Evaluator& f, std::span<const double> x) {
  Objective o = f(x);
  if (o.gradient.size() != x.size()) throw Error("objective gradient has the wrong dimension");
  return o;
}

bool finite(const Objective& o) {
  if (!std::isfinite(o.value)) return false;
  return std::all_of(o.gradient.begin(), o.gradient.end(), [](double v) { return std::isfinite(v); });
}

struct Step {
  bool accepted = false;
  std::vector<double> x;
  Objective at;
};

// One quasi-Newton ascent step from (x, cur) with halving backtracking under
// the sufficient-increase condition. Falls back to steepest ascent once
// before giving up.
Step ascent_step(const Evaluator& f, const std::vector<double>& x, const Objective& cur, Curvature& mem,
                 const OptimizerConfig& cfg) {
  for (int attempt = 0; attempt < 2; ++attempt) {
    std::vector<double> d = mem.empty() ? cur.gradient : mem.direction(cur.gradient);
    double slope = dot(cur.gradient, d);
    if (!(slope > 0.0)) {
      mem.clear();
      d = cur.gradient;
      slope = dot(d, d);
    }
    double step = mem.empty() ? 1.0 / std::max(1.0, std::sqrt(dot(d, d))) : 1.0;
    std::vector<double> trial(x.size());
    for (int k = 0; k <= cfg.max_backtracks; ++k, step *= 0.5) {
      for (std::size_t i = 0; i < x.size(); ++i) trial[i] = x[i] + step * d[i];
      Objective o = checked(f, trial);
      if (finite(o) && o.value >= cur.value + cfg.sufficient_increase * step * slope) {
        mem.update(x, trial, cur.gradient, o.gradient);
        return {true, std::move(trial), std::move(o)};
      }
    }
    if (mem.empty()) break;
    mem.clear();
  }
  return {};
}

double relative_change(double before, double after) {
  return std::abs(after - before) / std::max(1.0, std::abs(after));
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

void validate(const OptimizerConfig& cfg) {
  if (cfg.memory < 1) throw Error("optimizer memory must be at least 1");
  if (cfg.max_iters < 1) throw Error("max_iters must be at least 1");
  if (!(cfg.gradient_tolerance > 0.0) || !(cfg.relative_tolerance > 0.0))
    throw Error("optimizer tolerances must be positive");
  if (!(cfg.sufficient_increase > 0.0 && cfg.sufficient_increase < 1.0))
    throw Error("sufficient-increase constant must lie in (0, 1)");
  if (cfg.max_backtracks < 0) throw Error("max_backtracks must be non-negative");
  if (cfg.alternate_rounds < 0) throw Error("alternate_rounds must be non-negative");
}

const char* termination_name(Termination t) {
  switch (t) {
    case Termination::GradientTolerance: return "gradient_tolerance";
    case Termination::RelativeChange: return "relative_change";
    case Termination::IterationLimit: return "iteration_limit";
    case Termination::RoundLimit: return "round_limit";
    case Termination::LineSearchFailed: return "line_search_failed";
  }
  return "?";
}

double infinity_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

void write_trace(const TrainReport& report, std::ostream& out) {
  const auto old = out.precision(17);
  for (const auto& e : report.trace) out << e.iteration << '\t' << e.objective << '\t' << e.gradient_norm << '\n';
  out.precision(old);
}

std::pair<std::vector<double>, TrainReport> maximize(const Evaluator& f, std::vector<double> x,
                                                     const OptimizerConfig& cfg) {
  validate(cfg);
  const auto start = Clock::now();
  TrainReport report;
  Objective cur = checked(f, x);
  if (!finite(cur)) throw Error("objective is not finite at the starting point");
  double gnorm = infinity_norm(cur.gradient);
  report.trace.push_back({0, cur.value, gnorm});

  Curvature mem(cfg.memory);
  report.reason = Termination::IterationLimit;
  if (gnorm < cfg.gradient_tolerance) {
    report.reason = Termination::GradientTolerance;
  } else {
    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
      Step s = ascent_step(f, x, cur, mem, cfg);
      if (!s.accepted) {
        report.reason = Termination::LineSearchFailed;
        break;
      }
      const double change = relative_change(cur.value, s.at.value);
      x = std::move(s.x);
      cur = std::move(s.at);
      gnorm = infinity_norm(cur.gradient);
      ++report.accepted_steps;
      report.trace.push_back({iter, cur.value, gnorm});
      if (gnorm < cfg.gradient_tolerance) {
        report.reason = Termination::GradientTolerance;
        break;
      }
      if (change < cfg.relative_tolerance) {
        report.reason = Termination::RelativeChange;
        break;
      }
    }
  }
  report.wall_seconds = seconds_since(start);
  return {std::move(x), std::move(report)};
}

std::pair<std::vector<double>, TrainReport> alternate(const Evaluator& f_y, const Evaluator& f_z,
                                                      std::vector<double> x, const OptimizerConfig& cfg) {
  validate(cfg);
  const auto start = Clock::now();
  TrainReport report;
  report.reason = Termination::RoundLimit;
  const Evaluator* fs[2] = {&f_y, &f_z};
  Curvature mem[2] = {Curvature(cfg.memory), Curvature(cfg.memory)};
  int step_no = 0;

  for (int round = 0; round < cfg.alternate_rounds; ++round) {
    bool converged[2] = {false, false};
    for (int sub = 0; sub < 2; ++sub) {
      Objective cur = checked(*fs[sub], x);
      if (!finite(cur)) throw Error("objective is not finite at the current point");
      if (infinity_norm(cur.gradient) < cfg.gradient_tolerance) {
        converged[sub] = true;
        continue;
      }
      Step s = ascent_step(*fs[sub], x, cur, mem[sub], cfg);
      if (!s.accepted) {
        report.reason = Termination::LineSearchFailed;
        report.wall_seconds = seconds_since(start);
        return {std::move(x), std::move(report)};
      }
      x = std::move(s.x);
      ++report.accepted_steps;
      report.trace.push_back({++step_no, s.at.value, infinity_norm(s.at.gradient), sub, cur.value});
    }
    if (converged[0] && converged[1]) {
      report.reason = Termination::GradientTolerance;
      break;
    }
  }
  report.wall_seconds = seconds_since(start);
  return {std::move(x), std::move(report)};
}

}  // namespace mtcrf
