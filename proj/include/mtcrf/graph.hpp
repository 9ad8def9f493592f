#ifndef MTCRF_GRAPH_HPP
#define MTCRF_GRAPH_HPP

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "mtcrf/features.hpp"

namespace mtcrf {

// Which distribution a graph represents.
//   ChainY/ChainZ  plain linear-chain CRF over one task's labels
//   TaskY/TaskZ    per-task multitask model: one task's chain with a dependency
//                  factor hanging off every position (a tree)
//   Factorial      both chains rung-connected at every position, one normalizer
enum class ModelKind { ChainY, ChainZ, TaskY, TaskZ, Factorial };

inline bool uses_chain(ModelKind k, int task) {
  switch (k) {
    case ModelKind::ChainY:
    case ModelKind::TaskY: return task == 0;
    case ModelKind::ChainZ:
    case ModelKind::TaskZ: return task == 1;
    case ModelKind::Factorial: return true;
  }
  return false;
}
inline bool uses_dependency(ModelKind k) { return k == ModelKind::TaskY || k == ModelKind::TaskZ || k == ModelKind::Factorial; }
// Tasks whose label row is part of the model's joint assignment.
inline bool assigns_task(ModelKind k, int task) { return uses_chain(k, task) || uses_dependency(k); }

/// Dense row-major table of log values (or probabilities).
struct Table {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Table() = default;
  Table(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}
  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  double sum() const;
};

/// Weight vectors a graph draws on; `dependency` holds the effective weights
/// (e.g. psi or psi0 + nu). Unused blocks may be empty.
struct PotentialWeights {
  std::span<const double> transition_y;
  std::span<const double> transition_z;
  std::span<const double> dependency;
};

struct FactorGraph {
  ModelKind kind = ModelKind::TaskY;
  std::size_t length = 0;
  std::array<int, 2> label_counts{0, 0};
  // Log potentials. transition[task][t] mirrors FiringTable (1 row at t = 0);
  // left empty for chains the model does not contain.
  std::array<std::vector<Table>, 2> transition;
  std::vector<Table> dependency;
};

/// Every table cell is the sum of the weights of the features firing there.
FactorGraph assemble(const FiringTable& firings, const PotentialWeights& weights, ModelKind kind);

struct MarginalSet {
  double log_partition = 0.0;
  std::array<std::vector<Table>, 2> transition;  // p(prev, cur | x), START row at t = 0
  std::vector<Table> dependency;                 // p(y_t, z_t | x)
};

/// Exact log-partition and clique marginals.
MarginalSet sum_inference(const FactorGraph& g);

/// Joint label assignment. Rows a model does not cover are left empty.
struct Assignment {
  std::array<std::vector<int>, 2> rows;
  friend bool operator==(const Assignment&, const Assignment&) = default;
};

struct Decoded {
  Assignment assignment;
  double score = 0.0;
};

/// Scores within this distance of the maximum count as ties.
double tie_tolerance(double max_score);

/// Highest-scoring assignment; ties go to the lexicographically smallest
/// label-index vector (task-1 row, then task-2 row, left to right).
Decoded max_inference(const FactorGraph& g);

/// Unnormalized log score of an assignment under the graph's potentials.
double score(const FactorGraph& g, const Assignment& a);

}  // namespace mtcrf

#endif  // MTCRF_GRAPH_HPP
