#include "mtcrf/train.hpp"

namespace mtcrf {

TrainResult train(const Dataset& data, const TrainConfig& cfg) {
  validate(cfg.reg);
  validate(cfg.optimizer);
  const Variant variant = method_variant(cfg.method);
  if (cfg.crf_task && cfg.method != Method::Crf) throw Error("a single task can only be chosen for the crf variant");

  TrainResult out;
  ModelArtifact& m = out.model;
  m.method = cfg.method;
  m.templates = cfg.templates;
  m.alphabets = data.alphabets;
  m.index = build_index(data, m.templates);
  m.params = ModelParameters(variant, m.index);
  const Corpus corpus = extract_corpus(data, m.index, m.templates);

  const EvalOptions opts{cfg.threads};
  ModelParameters work = m.params;
  auto objective = [&](ObjectivePart part) -> Evaluator {
    return [&, part](std::span<const double> x) {
      work.assign(x);
      return evaluate(work, corpus, cfg.reg, part, opts);
    };
  };

  std::vector<double> x0(m.params.values().begin(), m.params.values().end());
  std::pair<std::vector<double>, TrainReport> fit;
  if (method_alternates(cfg.method)) {
    fit = alternate(objective(ObjectivePart::TaskY), objective(ObjectivePart::TaskZ), std::move(x0), cfg.optimizer);
  } else {
    ObjectivePart part = ObjectivePart::Joint;
    if (cfg.crf_task) part = *cfg.crf_task == Task::Y ? ObjectivePart::TaskY : ObjectivePart::TaskZ;
    fit = maximize(objective(part), std::move(x0), cfg.optimizer);
  }
  m.params.assign(fit.first);
  out.report = std::move(fit.second);
  return out;
}

std::vector<LabelRows> predict_all(const ModelArtifact& m, const std::vector<TaskedSequence>& sequences) {
  std::vector<LabelRows> out;
  out.reserve(sequences.size());
  for (const auto& s : sequences) {
    if (s.length() == 0) throw Error("cannot label an empty sequence");
    out.push_back(predict(m.params, extract(s, m.index, m.templates)));
  }
  return out;
}

}  // namespace mtcrf
