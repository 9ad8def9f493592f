#include "mtcrf/models.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace mtcrf {

namespace {

struct BlockInfo {
  BlockId id;
  const char* name;
};

constexpr BlockInfo kBlocks[] = {
    {BlockId::ThetaY, "theta_y"}, {BlockId::ThetaZ, "theta_z"}, {BlockId::Psi, "psi"},
    {BlockId::PsiY, "psi_y"},     {BlockId::PsiZ, "psi_z"},     {BlockId::PsiO, "psi_o"},
    {BlockId::NuY, "nu_y"},       {BlockId::NuZ, "nu_z"},
};

// Blocks that receive the dependency-factor gradient of one model kind.
std::vector<BlockId> dependency_targets(Variant v, ModelKind kind) {
  const bool y = kind == ModelKind::TaskY;
  switch (v) {
    case Variant::Crf: return {};
    case Variant::Factorial:
    case Variant::Shared: return {BlockId::Psi};
    case Variant::Unshared: return {y ? BlockId::PsiY : BlockId::PsiZ};
    case Variant::Variance: return {y ? BlockId::NuY : BlockId::NuZ, BlockId::PsiO};
  }
  return {};
}

std::vector<ModelKind> kinds_for(Variant v, ObjectivePart part) {
  if (v == Variant::Factorial) {
    if (part != ObjectivePart::Joint) throw Error("the factorial model has no per-task objectives");
    return {ModelKind::Factorial};
  }
  std::vector<ModelKind> out;
  if (part != ObjectivePart::TaskZ) out.push_back(model_for(v, Task::Y));
  if (part != ObjectivePart::TaskY) out.push_back(model_for(v, Task::Z));
  return out;
}

// (block, precision) pairs penalized by a variant's objective part.
std::vector<std::pair<BlockId, double>> penalties(Variant v, ObjectivePart part, const RegularizationConfig& r) {
  const bool y = part != ObjectivePart::TaskZ, z = part != ObjectivePart::TaskY;
  std::vector<std::pair<BlockId, double>> out;
  if (y) out.emplace_back(BlockId::ThetaY, r.eta_y);
  if (z) out.emplace_back(BlockId::ThetaZ, r.eta_z);
  switch (v) {
    case Variant::Crf: break;
    case Variant::Factorial:
    case Variant::Shared: out.emplace_back(BlockId::Psi, r.eta_o); break;
    case Variant::Unshared:
      if (y) out.emplace_back(BlockId::PsiY, r.eta_o);
      if (z) out.emplace_back(BlockId::PsiZ, r.eta_o);
      break;
    case Variant::Variance:
      if (y) out.emplace_back(BlockId::NuY, r.lambda);
      if (z) out.emplace_back(BlockId::NuZ, r.lambda);
      out.emplace_back(BlockId::PsiO, r.eta_o);
      break;
  }
  return out;
}

Assignment gold_assignment(const ExtractedSequence& s) { return Assignment{{s.gold[0], s.gold[1]}}; }

void add_firings(std::span<double> grad, std::size_t offset, std::span<const int> ids, double w) {
  for (int id : ids) grad[offset + id] += w;
}

// log p(gold) for one sequence under one model kind, with observed minus
// expected feature counts added to `grad`.
double accumulate(const ModelParameters& p, const ExtractedSequence& s, ModelKind kind, const PotentialWeights& w,
                  std::span<double> grad) {
  const FactorGraph g = assemble(s.firings, w, kind);
  const MarginalSet m = sum_inference(g);
  const double value = score(g, gold_assignment(s)) - m.log_partition;
  const std::size_t T = s.firings.length;

  for (int task = 0; task < 2; ++task) {
    if (!uses_chain(kind, task)) continue;
    const std::size_t off = p.offset(task == 0 ? BlockId::ThetaY : BlockId::ThetaZ);
    const auto& row = s.gold[task];
    for (std::size_t t = 0; t < T; ++t) {
      const CellFirings& cells = s.firings.transition[task][t];
      add_firings(grad, off, cells.at(t == 0 ? 0 : row[t - 1], row[t]), 1.0);
      const Table& marg = m.transition[task][t];
      for (std::size_t r = 0; r < cells.rows(); ++r)
        for (std::size_t c = 0; c < cells.cols(); ++c) {
          const double pr = marg(r, c);
          if (pr != 0.0) add_firings(grad, off, cells.at(r, c), -pr);
        }
    }
  }
  if (uses_dependency(kind)) {
    for (BlockId target : dependency_targets(p.variant(), kind)) {
      const std::size_t off = p.offset(target);
      for (std::size_t t = 0; t < T; ++t) {
        const CellFirings& cells = s.firings.dependency[t];
        add_firings(grad, off, cells.at(s.gold[0][t], s.gold[1][t]), 1.0);
        const Table& marg = m.dependency[t];
        for (std::size_t a = 0; a < cells.rows(); ++a)
          for (std::size_t b = 0; b < cells.cols(); ++b) {
            const double pr = marg(a, b);
            if (pr != 0.0) add_firings(grad, off, cells.at(a, b), -pr);
          }
      }
    }
  }
  return value;
}

void check_variant(const ModelParameters& p, std::initializer_list<Variant> allowed, const char* what) {
  if (std::find(allowed.begin(), allowed.end(), p.variant()) == allowed.end())
    throw Error(std::string(what) + ": not defined for the " + variant_name(p.variant()) + " variant");
}

}  // namespace

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Crf: return "crf";
    case Variant::Factorial: return "factorial";
    case Variant::Unshared: return "unshared";
    case Variant::Shared: return "shared";
    case Variant::Variance: return "variance";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  for (Variant v : {Variant::Crf, Variant::Factorial, Variant::Unshared, Variant::Shared, Variant::Variance})
    if (name == variant_name(v)) return v;
  throw Error("unknown model variant '" + name + "'");
}

const char* method_name(Method m) {
  switch (m) {
    case Method::Crf: return "crf";
    case Method::Factorial: return "factorial";
    case Method::Unshared: return "unshared";
    case Method::Josp: return "josp";
    case Method::Aosp: return "aosp";
    case Method::Jovm: return "jovm";
    case Method::Aovm: return "aovm";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::Crf, Method::Factorial, Method::Unshared, Method::Josp, Method::Aosp, Method::Jovm,
                   Method::Aovm})
    if (name == method_name(m)) return m;
  throw Error("unknown variant '" + name + "' (expected crf, factorial, unshared, josp, aosp, jovm or aovm)");
}

Variant method_variant(Method m) {
  switch (m) {
    case Method::Crf: return Variant::Crf;
    case Method::Factorial: return Variant::Factorial;
    case Method::Unshared: return Variant::Unshared;
    case Method::Josp:
    case Method::Aosp: return Variant::Shared;
    case Method::Jovm:
    case Method::Aovm: return Variant::Variance;
  }
  return Variant::Shared;
}

bool method_alternates(Method m) { return m == Method::Aosp || m == Method::Aovm; }

const char* block_id_name(BlockId b) {
  for (const auto& info : kBlocks)
    if (info.id == b) return info.name;
  return "?";
}

BlockId parse_block_id(const std::string& name) {
  for (const auto& info : kBlocks)
    if (name == info.name) return info.id;
  throw Error("unknown parameter block '" + name + "'");
}

std::vector<BlockId> variant_blocks(Variant v) {
  switch (v) {
    case Variant::Crf: return {BlockId::ThetaY, BlockId::ThetaZ};
    case Variant::Factorial:
    case Variant::Shared: return {BlockId::ThetaY, BlockId::ThetaZ, BlockId::Psi};
    case Variant::Unshared: return {BlockId::ThetaY, BlockId::PsiY, BlockId::ThetaZ, BlockId::PsiZ};
    case Variant::Variance: return {BlockId::ThetaY, BlockId::ThetaZ, BlockId::NuY, BlockId::NuZ, BlockId::PsiO};
  }
  return {};
}

ModelParameters::ModelParameters(Variant v, std::size_t transition_y, std::size_t transition_z, std::size_t dependency)
    : variant_(v), blocks_(variant_blocks(v)) {
  std::size_t off = 0;
  for (BlockId b : blocks_) {
    offsets_.push_back(off);
    off += b == BlockId::ThetaY ? transition_y : b == BlockId::ThetaZ ? transition_z : dependency;
  }
  offsets_.push_back(off);
  values_.assign(off, 0.0);
}

ModelParameters::ModelParameters(Variant v, const FeatureIndex& idx)
    : ModelParameters(v, idx.block_size(Block::TransitionY), idx.block_size(Block::TransitionZ),
                      idx.block_size(Block::Dependency)) {}

bool ModelParameters::has(BlockId b) const { return std::find(blocks_.begin(), blocks_.end(), b) != blocks_.end(); }

std::size_t ModelParameters::offset(BlockId b) const {
  auto it = std::find(blocks_.begin(), blocks_.end(), b);
  if (it == blocks_.end())
    throw Error(std::string("the ") + variant_name(variant_) + " variant has no block " + block_id_name(b));
  return offsets_[it - blocks_.begin()];
}

std::size_t ModelParameters::block_size(BlockId b) const {
  auto it = std::find(blocks_.begin(), blocks_.end(), b);
  if (it == blocks_.end())
    throw Error(std::string("the ") + variant_name(variant_) + " variant has no block " + block_id_name(b));
  const auto i = static_cast<std::size_t>(it - blocks_.begin());
  return offsets_[i + 1] - offsets_[i];
}

std::span<double> ModelParameters::block(BlockId b) {
  return std::span<double>(values_).subspan(offset(b), block_size(b));
}

std::span<const double> ModelParameters::block(BlockId b) const {
  return std::span<const double>(values_).subspan(offset(b), block_size(b));
}

void ModelParameters::assign(std::span<const double> x) {
  if (x.size() != values_.size())
    throw Error("parameter vector has " + std::to_string(x.size()) + " entries, expected " +
                std::to_string(values_.size()));
  std::copy(x.begin(), x.end(), values_.begin());
}

void validate(const RegularizationConfig& reg) {
  for (double v : {reg.eta_y, reg.eta_z, reg.eta_o, reg.lambda})
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error("regularization strengths must be finite and non-negative");
}

Corpus extract_corpus(const Dataset& d, const FeatureIndex& idx, std::span<const FeatureTemplate> templates) {
  require_valid(d);
  if (d.task_count() != 2) throw Error("models require exactly two tasks");
  Corpus out;
  out.reserve(d.size());
  for (const auto& s : d.sequences)
    out.push_back({extract(s, idx, templates), {s.label_rows[0], s.label_rows[1]}});
  return out;
}

ModelKind model_for(Variant v, Task task) {
  const bool y = task == Task::Y;
  switch (v) {
    case Variant::Crf: return y ? ModelKind::ChainY : ModelKind::ChainZ;
    case Variant::Factorial: return ModelKind::Factorial;
    default: return y ? ModelKind::TaskY : ModelKind::TaskZ;
  }
}

PotentialWeights potential_weights(const ModelParameters& p, ModelKind kind, std::vector<double>& scratch) {
  PotentialWeights w;
  if (uses_chain(kind, 0)) w.transition_y = p.block(BlockId::ThetaY);
  if (uses_chain(kind, 1)) w.transition_z = p.block(BlockId::ThetaZ);
  if (!uses_dependency(kind)) return w;
  switch (p.variant()) {
    case Variant::Crf: throw Error("the crf variant has no dependency factor");
    case Variant::Factorial:
    case Variant::Shared: w.dependency = p.block(BlockId::Psi); break;
    case Variant::Unshared:
      if (kind == ModelKind::Factorial) throw Error("the unshared variant has no factorial model");
      w.dependency = p.block(kind == ModelKind::TaskY ? BlockId::PsiY : BlockId::PsiZ);
      break;
    case Variant::Variance: {
      if (kind == ModelKind::Factorial) throw Error("the variance variant has no factorial model");
      auto shared = p.block(BlockId::PsiO);
      auto own = p.block(kind == ModelKind::TaskY ? BlockId::NuY : BlockId::NuZ);
      scratch.resize(shared.size());
      for (std::size_t i = 0; i < shared.size(); ++i) scratch[i] = shared[i] + own[i];
      w.dependency = scratch;
      break;
    }
  }
  return w;
}

Objective evaluate(const ModelParameters& params, const Corpus& data, const RegularizationConfig& reg,
                   ObjectivePart part, const EvalOptions& opts) {
  validate(reg);
  const auto kinds = kinds_for(params.variant(), part);
  std::vector<std::vector<double>> scratch(kinds.size());
  std::vector<PotentialWeights> weights;
  for (std::size_t k = 0; k < kinds.size(); ++k) weights.push_back(potential_weights(params, kinds[k], scratch[k]));

  const std::size_t n = data.size();
  const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1, opts.threads)), 1,
                                                      std::max<std::size_t>(n, 1));
  std::vector<double> values(workers, 0.0);
  std::vector<std::vector<double>> grads(workers, std::vector<double>(params.size(), 0.0));
  auto run = [&](std::size_t w) {
    const std::size_t lo = n * w / workers, hi = n * (w + 1) / workers;
    for (std::size_t i = lo; i < hi; ++i)
      for (std::size_t k = 0; k < kinds.size(); ++k) values[w] += accumulate(params, data[i], kinds[k], weights[k], grads[w]);
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w);
    for (auto& th : pool) th.join();
  }

  Objective out{0.0, std::vector<double>(params.size(), 0.0)};
  for (std::size_t w = 0; w < workers; ++w) {
    out.value += values[w];
    for (std::size_t j = 0; j < out.gradient.size(); ++j) out.gradient[j] += grads[w][j];
  }
  for (const auto& [b, eta] : penalties(params.variant(), part, reg)) {
    const auto x = params.block(b);
    const std::size_t off = params.offset(b);
    double sq = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      sq += x[j] * x[j];
      out.gradient[off + j] -= eta * x[j];
    }
    out.value -= 0.5 * eta * sq;
  }
  return out;
}

Objective loglik_task_y(const ModelParameters& params, const Corpus& data, const RegularizationConfig& reg) {
  check_variant(params, {Variant::Unshared, Variant::Shared, Variant::Variance}, "loglik_task_y");
  return evaluate(params, data, reg, ObjectivePart::TaskY);
}

Objective loglik_task_z(const ModelParameters& params, const Corpus& data, const RegularizationConfig& reg) {
  check_variant(params, {Variant::Unshared, Variant::Shared, Variant::Variance}, "loglik_task_z");
  return evaluate(params, data, reg, ObjectivePart::TaskZ);
}

Objective loglik_joint_shared(const ModelParameters& params, const Corpus& data, const RegularizationConfig& reg) {
  check_variant(params, {Variant::Shared}, "loglik_joint_shared");
  return evaluate(params, data, reg, ObjectivePart::Joint);
}

Objective loglik_variance(const ModelParameters& params, const Corpus& data, const RegularizationConfig& reg,
                          ObjectivePart mode) {
  check_variant(params, {Variant::Variance}, "loglik_variance");
  return evaluate(params, data, reg, mode);
}

Objective loglik_factorial(const ModelParameters& params, const Corpus& data, const RegularizationConfig& reg) {
  check_variant(params, {Variant::Factorial}, "loglik_factorial");
  return evaluate(params, data, reg, ObjectivePart::Joint);
}

Objective loglik_single_crf(const ModelParameters& params, const Corpus& data, const RegularizationConfig& reg,
                            Task task) {
  check_variant(params, {Variant::Crf}, "loglik_single_crf");
  return evaluate(params, data, reg, task == Task::Y ? ObjectivePart::TaskY : ObjectivePart::TaskZ);
}

double sequence_log_probability(const ModelParameters& params, const ExtractedSequence& seq, Task task) {
  const ModelKind kind = model_for(params.variant(), task);
  std::vector<double> scratch;
  const FactorGraph g = assemble(seq.firings, potential_weights(params, kind, scratch), kind);
  return score(g, gold_assignment(seq)) - sum_inference(g).log_partition;
}

std::array<std::vector<int>, 2> predict(const ModelParameters& params, const FiringTable& firings) {
  std::vector<double> scratch;
  if (params.variant() == Variant::Factorial) {
    const auto g = assemble(firings, potential_weights(params, ModelKind::Factorial, scratch), ModelKind::Factorial);
    return max_inference(g).assignment.rows;
  }
  std::array<std::vector<int>, 2> out;
  for (Task task : {Task::Y, Task::Z}) {
    const ModelKind kind = model_for(params.variant(), task);
    const auto g = assemble(firings, potential_weights(params, kind, scratch), kind);
    out[task_index(task)] = max_inference(g).assignment.rows[task_index(task)];
  }
  return out;
}

}  // namespace mtcrf
