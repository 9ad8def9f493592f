#ifndef MTCRF_MODELS_HPP
#define MTCRF_MODELS_HPP

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mtcrf/features.hpp"
#include "mtcrf/graph.hpp"
#include "mtcrf/objective.hpp"

namespace mtcrf {

enum class Variant { Crf, Factorial, Unshared, Shared, Variance };

const char* variant_name(Variant v);
Variant parse_variant(const std::string& name);

// A variant together with how it is fitted: JOSP/AOSP are the shared model
// trained jointly or alternately, JOVM/AOVM the same for the variance model.
enum class Method { Crf, Factorial, Unshared, Josp, Aosp, Jovm, Aovm };

const char* method_name(Method m);
Method parse_method(const std::string& name);
Variant method_variant(Method m);
bool method_alternates(Method m);

// Parameter blocks. Transition blocks align with FeatureIndex's transition
// blocks; every dependency-type block aligns with its dependency block.
enum class BlockId { ThetaY, ThetaZ, Psi, PsiY, PsiZ, PsiO, NuY, NuZ };

const char* block_id_name(BlockId b);
BlockId parse_block_id(const std::string& name);

/// Blocks of a variant in flattened order:
///   Crf        theta_y theta_z
///   Factorial  theta_y theta_z psi
///   Unshared   theta_y psi_y theta_z psi_z
///   Shared     theta_y theta_z psi
///   Variance   theta_y theta_z nu_y nu_z psi_o
std::vector<BlockId> variant_blocks(Variant v);

/// One flattened vector with named block views.
class ModelParameters {
 public:
  ModelParameters() = default;
  ModelParameters(Variant v, std::size_t transition_y, std::size_t transition_z, std::size_t dependency);
  ModelParameters(Variant v, const FeatureIndex& idx);

  Variant variant() const { return variant_; }
  const std::vector<BlockId>& blocks() const { return blocks_; }
  bool has(BlockId b) const;
  std::size_t offset(BlockId b) const;
  std::size_t block_size(BlockId b) const;

  std::span<double> block(BlockId b);
  std::span<const double> block(BlockId b) const;

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  /// Copies x into the flattened vector; sizes must match.
  void assign(std::span<const double> x);

  friend bool operator==(const ModelParameters&, const ModelParameters&) = default;

 private:
  Variant variant_ = Variant::Shared;
  std::vector<BlockId> blocks_;
  std::vector<std::size_t> offsets_;  // one past the last block as well
  std::vector<double> values_;
};

/// Gaussian prior precisions. lambda only affects the variance model.
struct RegularizationConfig {
  double eta_y = 1.0;
  double eta_z = 1.0;
  double eta_o = 1.0;
  double lambda = 1.0;
};

void validate(const RegularizationConfig& reg);

/// A training sequence reduced to what the objectives read.
struct ExtractedSequence {
  FiringTable firings;
  std::array<std::vector<int>, 2> gold;
};
using Corpus = std::vector<ExtractedSequence>;

Corpus extract_corpus(const Dataset& d, const FeatureIndex& idx, std::span<const FeatureTemplate> templates);

/// Weights of the distribution `kind` under `params`. The variance model
/// materializes psi_o + nu into `scratch`, which must outlive the result.
PotentialWeights potential_weights(const ModelParameters& params, ModelKind kind, std::vector<double>& scratch);

/// Model kind serving a task under a variant (ChainY, TaskY, Factorial...).
ModelKind model_for(Variant v, Task task);

// Which part of the likelihood to evaluate. TaskY/TaskZ are the per-task
// objectives used by alternating optimization; Joint sums both.
enum class ObjectivePart { Joint, TaskY, TaskZ };

struct EvalOptions {
  int threads = 1;  // fixed chunking keeps the reduction order deterministic
};

/// Regularized log-likelihood and gradient for any variant and part:
///   Crf        part selects the chain(s); each theta has its eta
///   Factorial  Joint only; one normalizer over both rows
///   Unshared   task models with their own psi blocks, eta_o on each
///   Shared     Joint = l_y + l_z with eta_o applied once; TaskY/TaskZ apply it in full
///   Variance   dependency weights psi_o + nu; lambda on nu, eta_o on psi_o
Objective evaluate(const ModelParameters& params, const Corpus& data, const RegularizationConfig& reg,
                   ObjectivePart part, const EvalOptions& opts = {});

Objective loglik_task_y(const ModelParameters& params, const Corpus& data, const RegularizationConfig& reg);
Objective loglik_task_z(const ModelParameters& params, const Corpus& data, const RegularizationConfig& reg);
Objective loglik_joint_shared(const ModelParameters& params, const Corpus& data, const RegularizationConfig& reg);
Objective loglik_variance(const ModelParameters& params, const Corpus& data, const RegularizationConfig& reg,
                          ObjectivePart mode);
Objective loglik_factorial(const ModelParameters& params, const Corpus& data, const RegularizationConfig& reg);
Objective loglik_single_crf(const ModelParameters& params, const Corpus& data, const RegularizationConfig& reg,
                            Task task);

/// log p(gold | x) of one sequence under the model serving `task`
/// (the factorial model ignores `task`).
double sequence_log_probability(const ModelParameters& params, const ExtractedSequence& seq, Task task);

/// Label rows: task 1 from the model serving task 1, task 2 from the model
/// serving task 2; the factorial model decodes both jointly.
std::array<std::vector<int>, 2> predict(const ModelParameters& params, const FiringTable& firings);

}  // namespace mtcrf

#endif  // MTCRF_MODELS_HPP
