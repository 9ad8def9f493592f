#include "mtcrf/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mtcrf::oracle {

namespace {

double clique_sum(std::span<const int> ids, std::span<const double> w) {
  double s = 0.0;
  for (int id : ids) s += w[id];
  return s;
}

bool row_in_model(ModelKind kind, int task) {
  switch (kind) {
    case ModelKind::ChainY: return task == 0;
    case ModelKind::ChainZ: return task == 1;
    default: return true;
  }
}

bool chain_in_model(ModelKind kind, int task) {
  switch (kind) {
    case ModelKind::ChainY:
    case ModelKind::TaskY: return task == 0;
    case ModelKind::ChainZ:
    case ModelKind::TaskZ: return task == 1;
    case ModelKind::Factorial: return true;
  }
  return false;
}

bool dependency_in_model(ModelKind kind) { return kind != ModelKind::ChainY && kind != ModelKind::ChainZ; }

MarginalSet empty_tables(const FiringTable& f, ModelKind kind) {
  MarginalSet m;
  for (int task = 0; task < 2; ++task) {
    if (!chain_in_model(kind, task)) continue;
    for (const auto& cells : f.transition[task]) m.transition[task].emplace_back(cells.rows(), cells.cols());
  }
  if (dependency_in_model(kind))
    for (const auto& cells : f.dependency) m.dependency.emplace_back(cells.rows(), cells.cols());
  return m;
}

}  // namespace

std::size_t assignment_count(const FiringTable& firings, ModelKind kind, EnumerationBudget budget) {
  if (budget.max_assignments == 0) throw Error("enumeration budget must be positive");
  std::size_t count = 1;
  bool over = false;
  for (int task = 0; task < 2; ++task) {
    if (!row_in_model(kind, task)) continue;
    for (std::size_t t = 0; t < firings.length; ++t) {
      const auto n = static_cast<std::size_t>(firings.label_counts[task]);
      if (count > budget.max_assignments / n) over = true;
      if (!over) count *= n;
    }
  }
  if (over) {
    double needed = 0.0;
    for (int task = 0; task < 2; ++task)
      if (row_in_model(kind, task))
        needed += static_cast<double>(firings.length) * std::log10(static_cast<double>(firings.label_counts[task]));
    throw Error("enumeration needs about 10^" + std::to_string(needed) + " assignments, budget is " +
                std::to_string(budget.max_assignments));
  }
  return count;
}

PotentialWeights raw_weights(const ModelParameters& params, ModelKind kind, std::vector<double>& scratch) {
  PotentialWeights w;
  if (chain_in_model(kind, 0)) w.transition_y = params.block(BlockId::ThetaY);
  if (chain_in_model(kind, 1)) w.transition_z = params.block(BlockId::ThetaZ);
  if (!dependency_in_model(kind)) return w;
  const bool y = kind == ModelKind::TaskY;
  if (params.has(BlockId::Psi)) {
    w.dependency = params.block(BlockId::Psi);
  } else if (params.has(BlockId::PsiY) && kind != ModelKind::Factorial) {
    w.dependency = params.block(y ? BlockId::PsiY : BlockId::PsiZ);
  } else if (params.has(BlockId::PsiO) && kind != ModelKind::Factorial) {
    const auto o = params.block(BlockId::PsiO);
    const auto nu = params.block(y ? BlockId::NuY : BlockId::NuZ);
    scratch.assign(o.size(), 0.0);
    for (std::size_t k = 0; k < o.size(); ++k) scratch[k] = o[k] + nu[k];
    w.dependency = scratch;
  } else {
    throw Error(std::string("oracle: the ") + variant_name(params.variant()) + " variant has no such model");
  }
  return w;
}

double score_assignment(const FiringTable& f, const PotentialWeights& w, ModelKind kind, const Assignment& a) {
  const std::array<std::span<const double>, 2> tw{w.transition_y, w.transition_z};
  double s = 0.0;
  for (int task = 0; task < 2; ++task) {
    if (!chain_in_model(kind, task)) continue;
    const auto& row = a.rows[task];
    for (std::size_t t = 0; t < f.length; ++t)
      s += clique_sum(f.transition[task][t].at(t == 0 ? 0 : row[t - 1], row[t]), tw[task]);
  }
  if (dependency_in_model(kind))
    for (std::size_t t = 0; t < f.length; ++t)
      s += clique_sum(f.dependency[t].at(a.rows[0][t], a.rows[1][t]), w.dependency);
  return s;
}

void for_each_assignment(const FiringTable& f, ModelKind kind, EnumerationBudget budget,
                         const std::function<void(const Assignment&)>& visit) {
  assignment_count(f, kind, budget);
  const std::size_t T = f.length;
  // Odometer over the concatenated rows; the last slot turns fastest.
  std::vector<std::pair<int, std::size_t>> slots;
  for (int task = 0; task < 2; ++task)
    if (row_in_model(kind, task))
      for (std::size_t t = 0; t < T; ++t) slots.emplace_back(task, t);
  Assignment a;
  for (int task = 0; task < 2; ++task)
    if (row_in_model(kind, task)) a.rows[task].assign(T, 0);
  while (true) {
    visit(a);
    std::size_t k = slots.size();
    while (k > 0) {
      auto [task, t] = slots[k - 1];
      if (++a.rows[task][t] < f.label_counts[task]) break;
      a.rows[task][t] = 0;
      --k;
    }
    if (k == 0) return;
  }
}

double enumerate_partition(const FiringTable& f, const PotentialWeights& w, ModelKind kind, EnumerationBudget budget) {
  std::vector<double> scores;
  for_each_assignment(f, kind, budget, [&](const Assignment& a) { scores.push_back(score_assignment(f, w, kind, a)); });
  const double m = *std::max_element(scores.begin(), scores.end());
  double s = 0.0;
  for (double x : scores) s += std::exp(x - m);
  return m + std::log(s);
}

MarginalSet enumerate_marginals(const FiringTable& f, const PotentialWeights& w, ModelKind kind,
                                EnumerationBudget budget) {
  MarginalSet m = empty_tables(f, kind);
  m.log_partition = enumerate_partition(f, w, kind, budget);
  for_each_assignment(f, kind, budget, [&](const Assignment& a) {
    const double p = std::exp(score_assignment(f, w, kind, a) - m.log_partition);
    for (int task = 0; task < 2; ++task) {
      if (!chain_in_model(kind, task)) continue;
      const auto& row = a.rows[task];
      for (std::size_t t = 0; t < f.length; ++t) m.transition[task][t](t == 0 ? 0 : row[t - 1], row[t]) += p;
    }
    if (dependency_in_model(kind))
      for (std::size_t t = 0; t < f.length; ++t) m.dependency[t](a.rows[0][t], a.rows[1][t]) += p;
  });
  return m;
}

Decoded enumerate_argmax(const FiringTable& f, const PotentialWeights& w, ModelKind kind, EnumerationBudget budget) {
  double best = -std::numeric_limits<double>::infinity();
  for_each_assignment(f, kind, budget, [&](const Assignment& a) { best = std::max(best, score_assignment(f, w, kind, a)); });
  const double threshold = best - tie_tolerance(best);
  Decoded out;
  bool found = false;
  for_each_assignment(f, kind, budget, [&](const Assignment& a) {
    if (found) return;
    const double s = score_assignment(f, w, kind, a);
    if (s >= threshold) {
      out.assignment = a;
      out.score = s;
      found = true;
    }
  });
  return out;
}

double enumerate_partition(const FiringTable& f, const ModelParameters& params, ModelKind kind,
                           EnumerationBudget budget) {
  std::vector<double> scratch;
  return enumerate_partition(f, raw_weights(params, kind, scratch), kind, budget);
}

MarginalSet enumerate_marginals(const FiringTable& f, const ModelParameters& params, ModelKind kind,
                                EnumerationBudget budget) {
  std::vector<double> scratch;
  return enumerate_marginals(f, raw_weights(params, kind, scratch), kind, budget);
}

Decoded enumerate_argmax(const FiringTable& f, const ModelParameters& params, ModelKind kind,
                         EnumerationBudget budget) {
  std::vector<double> scratch;
  return enumerate_argmax(f, raw_weights(params, kind, scratch), kind, budget);
}

std::vector<double> finite_diff_gradient(const std::function<double(std::span<const double>)>& f,
                                         std::span<const double> x, double step) {
  if (!(step > 0.0)) throw Error("finite difference step must be positive");
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> g(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    probe[j] = x[j] + step;
    const double up = f(probe);
    probe[j] = x[j] - step;
    const double down = f(probe);
    probe[j] = x[j];
    g[j] = (up - down) / (2.0 * step);
  }
  return g;
}

}  // namespace mtcrf::oracle
