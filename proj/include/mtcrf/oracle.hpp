#ifndef MTCRF_ORACLE_HPP
#define MTCRF_ORACLE_HPP

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "mtcrf/features.hpp"
#include "mtcrf/graph.hpp"
#include "mtcrf/models.hpp"

// Exhaustive-enumeration references. Scores come straight from firing lists
// and raw parameter blocks; nothing here goes through FactorGraph or the
// chain recursions in graph.cpp. Desk scale only.
namespace mtcrf::oracle {

struct EnumerationBudget {
  std::size_t max_assignments = 200000;
};

/// Joint assignments the model ranges over; throws when above the budget.
std::size_t assignment_count(const FiringTable& firings, ModelKind kind, EnumerationBudget budget = {});

/// Raw blocks of `params` feeding `kind`. Variance dependency weights are
/// summed here into `scratch`.
PotentialWeights raw_weights(const ModelParameters& params, ModelKind kind, std::vector<double>& scratch);

double score_assignment(const FiringTable& firings, const PotentialWeights& w, ModelKind kind, const Assignment& a);

double enumerate_partition(const FiringTable& firings, const PotentialWeights& w, ModelKind kind,
                           EnumerationBudget budget = {});
MarginalSet enumerate_marginals(const FiringTable& firings, const PotentialWeights& w, ModelKind kind,
                                EnumerationBudget budget = {});
/// Same tie-break as max_inference: first assignment in lexicographic order
/// (task-1 row, then task-2 row) within tie_tolerance of the maximum.
Decoded enumerate_argmax(const FiringTable& firings, const PotentialWeights& w, ModelKind kind,
                         EnumerationBudget budget = {});

/// Visits every assignment of the model in lexicographic order.
void for_each_assignment(const FiringTable& firings, ModelKind kind, EnumerationBudget budget,
                         const std::function<void(const Assignment&)>& visit);

double enumerate_partition(const FiringTable& firings, const ModelParameters& params, ModelKind kind,
                           EnumerationBudget budget = {});
MarginalSet enumerate_marginals(const FiringTable& firings, const ModelParameters& params, ModelKind kind,
                                EnumerationBudget budget = {});
Decoded enumerate_argmax(const FiringTable& firings, const ModelParameters& params, ModelKind kind,
                         EnumerationBudget budget = {});

/// Central differences (f(x + h e_j) - f(x - h e_j)) / 2h for every coordinate.
std::vector<double> finite_diff_gradient(const std::function<double(std::span<const double>)>& f,
                                         std::span<const double> x, double step);

}  // namespace mtcrf::oracle

#endif  // MTCRF_ORACLE_HPP
