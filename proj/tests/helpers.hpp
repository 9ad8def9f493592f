#ifndef MTCRF_TEST_HELPERS_HPP
#define MTCRF_TEST_HELPERS_HPP

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "mtcrf/core.hpp"
#include "mtcrf/features.hpp"
#include "mtcrf/graph.hpp"
#include "mtcrf/models.hpp"

namespace testutil {

using namespace mtcrf;

// Small random problem: bias features on every clique, plus word-conditioned
// features so firings differ by position.
struct Instance {
  Dataset data;
  std::vector<FeatureTemplate> templates;
  FeatureIndex index;
  Corpus corpus;
};

inline std::vector<FeatureTemplate> small_templates() {
  return {
      {"trans.bias", Family::Transition, -1, LabelBinding::Pair, "bias"},
      {"trans.word", Family::Transition, -1, LabelBinding::Current, "word"},
      {"trans.prev", Family::Transition, 0, LabelBinding::Pair, "word@-1"},
      {"dep.bias", Family::Dependency, -1, LabelBinding::Pair, "bias"},
      {"dep.word", Family::Dependency, -1, LabelBinding::Pair, "word"},
  };
}

inline std::vector<std::string> names(const char* prefix, int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

inline Instance random_instance(std::mt19937_64& rng, std::size_t sequences, int min_len, int max_len, int ny, int nz,
                                int vocabulary = 3) {
  Instance inst;
  inst.data.alphabets = {LabelAlphabet("task1", names("Y", ny)), LabelAlphabet("task2", names("Z", nz))};
  std::uniform_int_distribution<int> len(min_len, max_len), word(0, vocabulary - 1), yl(0, ny - 1), zl(0, nz - 1);
  for (std::size_t s = 0; s < sequences; ++s) {
    TaskedSequence seq;
    seq.label_rows.resize(2);
    const int T = len(rng);
    for (int t = 0; t < T; ++t) {
      seq.tokens.push_back({"w" + std::to_string(word(rng)), {}});
      seq.label_rows[0].push_back(yl(rng));
      seq.label_rows[1].push_back(zl(rng));
    }
    inst.data.sequences.push_back(std::move(seq));
  }
  inst.templates = small_templates();
  inst.index = build_index(inst.data, inst.templates);
  inst.corpus = extract_corpus(inst.data, inst.index, inst.templates);
  return inst;
}

inline void randomize(ModelParameters& p, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : p.values()) v = u(rng);
}

inline ModelParameters random_params(Variant v, const FeatureIndex& idx, std::mt19937_64& rng, double lo = -1.0,
                                     double hi = 1.0) {
  ModelParameters p(v, idx);
  randomize(p, rng, lo, hi);
  return p;
}

inline std::vector<ModelKind> kinds_of(Variant v) {
  if (v == Variant::Factorial) return {ModelKind::Factorial};
  return {model_for(v, Task::Y), model_for(v, Task::Z)};
}

inline double max_abs_diff(const Table& a, const Table& b) {
  if (a.rows != b.rows || a.cols != b.cols) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) m = std::max(m, std::abs(a.values[i] - b.values[i]));
  return m;
}

// Largest deviation between two marginal sets (infinite on shape mismatch).
inline double max_abs_diff(const MarginalSet& a, const MarginalSet& b) {
  double m = std::abs(a.log_partition - b.log_partition);
  for (int task = 0; task < 2; ++task) {
    if (a.transition[task].size() != b.transition[task].size()) return INFINITY;
    for (std::size_t t = 0; t < a.transition[task].size(); ++t)
      m = std::max(m, max_abs_diff(a.transition[task][t], b.transition[task][t]));
  }
  if (a.dependency.size() != b.dependency.size()) return INFINITY;
  for (std::size_t t = 0; t < a.dependency.size(); ++t) m = std::max(m, max_abs_diff(a.dependency[t], b.dependency[t]));
  return m;
}

// Per-coordinate |a - n| / max(|a|, |n|, 1e-3), maximized.
inline double max_relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  double m = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double d = std::abs(analytic[i] - numeric[i]);
    m = std::max(m, d / std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-3}));
  }
  return m;
}

}  // namespace testutil

#endif  // MTCRF_TEST_HELPERS_HPP
