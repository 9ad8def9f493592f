#ifndef MTCRF_TRAIN_HPP
#define MTCRF_TRAIN_HPP

#include <array>
#include <optional>
#include <vector>

#include "mtcrf/data.hpp"
#include "mtcrf/models.hpp"
#include "mtcrf/optim.hpp"

namespace mtcrf {

struct TrainConfig {
  Method method = Method::Josp;
  std::optional<Task> crf_task;  // crf only: fit a single chain, leaving the other at zero
  RegularizationConfig reg;
  OptimizerConfig optimizer;
  std::vector<FeatureTemplate> templates = default_templates();
  int threads = 1;
};

struct TrainResult {
  ModelArtifact model;
  TrainReport report;
};

/// Builds the feature index from `train`, then fits the method: alternating
/// methods step their two per-task objectives in turn, all others maximize
/// one joint objective from zero.
TrainResult train(const Dataset& train, const TrainConfig& cfg);

using LabelRows = std::array<std::vector<int>, 2>;

/// Label rows for every sequence; only the tokens of `sequences` are read.
std::vector<LabelRows> predict_all(const ModelArtifact& m, const std::vector<TaskedSequence>& sequences);

}  // namespace mtcrf

#endif  // MTCRF_TRAIN_HPP
