// Acceptance checks; one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "helpers.hpp"
#include "mtcrf/cli.hpp"
#include "mtcrf/eval.hpp"
#include "mtcrf/oracle.hpp"
#include "mtcrf/train.hpp"

using namespace mtcrf;
using testutil::random_instance;
using testutil::random_params;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(const char* name, bool ok, const std::string& detail) {
  std::printf("%s  %-24s %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  failures += !ok;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const Variant kVariants[] = {Variant::Crf, Variant::Factorial, Variant::Unshared, Variant::Shared, Variant::Variance};

struct Draw {
  testutil::Instance inst;
  Variant variant;
  ModelParameters params;
};

// 100 small instances cycling through the variants, weights in [-1, 1].
std::vector<Draw> inference_draws() {
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<int> labels(2, 3);
  std::vector<Draw> out;
  for (int i = 0; i < 100; ++i) {
    const int ny = labels(rng), nz = labels(rng);
    auto inst = random_instance(rng, 1, 1, 4, ny, nz);
    const Variant v = kVariants[i % 5];
    auto p = random_params(v, inst.index, rng);
    out.push_back({std::move(inst), v, std::move(p)});
  }
  return out;
}

void inference_and_decoding() {
  const auto t0 = Clock::now();
  const auto draws = inference_draws();
  double worst = 0.0;
  int decode_mismatch = 0, decodes = 0;
  for (const auto& d : draws) {
    const auto& ft = d.inst.corpus[0].firings;
    for (ModelKind k : testutil::kinds_of(d.variant)) {
      std::vector<double> scratch;
      const FactorGraph g = assemble(ft, potential_weights(d.params, k, scratch), k);
      worst = std::max(worst, testutil::max_abs_diff(sum_inference(g), oracle::enumerate_marginals(ft, d.params, k)));
      ++decodes;
      decode_mismatch += max_inference(g).assignment.rows != oracle::enumerate_argmax(ft, d.params, k).assignment.rows;
    }
  }
  const double secs = seconds_since(t0);
  report("inference-exactness", worst < 1e-10 && secs < 10.0,
         fmt("max abs error %.3g over 100 instances, %.2f s", worst, secs));
  report("decode-exactness", decode_mismatch == 0, fmt("%d of %d decodes differ from enumeration", decode_mismatch, decodes));
}

void gradients() {
  const auto t0 = Clock::now();
  struct Case {
    const char* name;
    Variant v;
    ObjectivePart part;
  };
  const Case cases[] = {
      {"crf", Variant::Crf, ObjectivePart::Joint},
      {"factorial", Variant::Factorial, ObjectivePart::Joint},
      {"unshared-y", Variant::Unshared, ObjectivePart::TaskY},
      {"unshared-z", Variant::Unshared, ObjectivePart::TaskZ},
      {"shared-joint", Variant::Shared, ObjectivePart::Joint},
      {"shared-y", Variant::Shared, ObjectivePart::TaskY},
      {"shared-z", Variant::Shared, ObjectivePart::TaskZ},
      {"variance-joint", Variant::Variance, ObjectivePart::Joint},
      {"variance-y", Variant::Variance, ObjectivePart::TaskY},
      {"variance-z", Variant::Variance, ObjectivePart::TaskZ},
  };
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> prec(0.1, 2.0);
  double worst = 0.0;
  const char* worst_case = "";
  for (const auto& c : cases) {
    for (int draw = 0; draw < 20; ++draw) {
      const auto inst = random_instance(rng, 2, 1, 4, 3, 3);
      auto p = random_params(c.v, inst.index, rng);
      const RegularizationConfig reg{prec(rng), prec(rng), prec(rng), prec(rng)};
      const auto analytic = evaluate(p, inst.corpus, reg, c.part).gradient;
      const std::vector<double> x(p.values().begin(), p.values().end());
      const auto numeric = oracle::finite_diff_gradient(
          [&](std::span<const double> v) {
            p.assign(v);
            return evaluate(p, inst.corpus, reg, c.part).value;
          },
          x, 1e-5);
      const double e = testutil::max_relative_error(analytic, numeric);
      if (e > worst) {
        worst = e;
        worst_case = c.name;
      }
    }
  }
  const double secs = seconds_since(t0);
  report("gradient-suite", worst < 1e-4 && secs < 30.0,
         fmt("max relative error %.3g (%s), 10 objectives x 20 draws, %.2f s", worst, worst_case, secs));
}

// Observed minus model expectation of dependency counts, by enumeration.
std::vector<double> dependency_counts(const ModelParameters& p, const ExtractedSequence& s, ModelKind kind) {
  std::vector<double> e(s.firings.block_sizes[2], 0.0);
  const auto m = oracle::enumerate_marginals(s.firings, p, kind);
  for (std::size_t t = 0; t < s.firings.length; ++t)
    for (std::size_t a = 0; a < m.dependency[t].rows; ++a)
      for (std::size_t b = 0; b < m.dependency[t].cols; ++b)
        for (int id : s.firings.dependency[t].at(a, b)) e[id] += m.dependency[t](a, b);
  return e;
}

void psi_gradient_structure() {
  std::mt19937_64 rng(91);
  double worst = 0.0;
  for (int draw = 0; draw < 20; ++draw) {
    const auto inst = random_instance(rng, 2, 1, 4, 3, 3);
    const auto p = random_params(Variant::Shared, inst.index, rng);
    const RegularizationConfig reg{0.8, 1.2, 0.6, 1.0};
    const auto g = loglik_joint_shared(p, inst.corpus, reg).gradient;
    const auto psi = p.block(BlockId::Psi);
    std::vector<double> expect(psi.size(), 0.0);
    for (const auto& s : inst.corpus) {
      const auto ey = dependency_counts(p, s, ModelKind::TaskY);
      const auto ez = dependency_counts(p, s, ModelKind::TaskZ);
      for (std::size_t t = 0; t < s.firings.length; ++t)
        for (int id : s.firings.dependency[t].at(s.gold[0][t], s.gold[1][t])) expect[id] += 2.0;
      for (std::size_t i = 0; i < psi.size(); ++i) expect[i] -= ey[i] + ez[i];
    }
    for (std::size_t i = 0; i < psi.size(); ++i)
      worst = std::max(worst, std::abs(g[p.offset(BlockId::Psi) + i] - (expect[i] - reg.eta_o * psi[i])));
  }
  report("psi-gradient-structure", worst < 1e-8, fmt("max abs error %.3g over 20 draws", worst));
}

void factorial_vs_shared() {
  std::mt19937_64 rng(123);
  double worst = 0.0;
  for (int draw = 0; draw < 20; ++draw) {
    const auto inst = random_instance(rng, 1, 1, 4, 3, 3);
    const auto& ft = inst.corpus[0].firings;
    const auto shared = random_params(Variant::Shared, inst.index, rng);
    ModelParameters fact(Variant::Factorial, inst.index);
    fact.assign(shared.values());
    for (double& v : fact.block(BlockId::Psi)) v *= 2.0;
    std::vector<double> s1, s2, s3;
    const auto wf = oracle::raw_weights(fact, ModelKind::Factorial, s1);
    const auto wy = oracle::raw_weights(shared, ModelKind::TaskY, s2);
    const auto wz = oracle::raw_weights(shared, ModelKind::TaskZ, s3);
    oracle::for_each_assignment(ft, ModelKind::Factorial, {}, [&](const Assignment& a) {
      const double lhs = oracle::score_assignment(ft, wf, ModelKind::Factorial, a);
      const double rhs =
          oracle::score_assignment(ft, wy, ModelKind::TaskY, a) + oracle::score_assignment(ft, wz, ModelKind::TaskZ, a);
      worst = std::max(worst, std::abs(lhs - rhs));
    });
  }

  int separated = 0;
  for (int draw = 0; draw < 100; ++draw) {
    const auto inst = random_instance(rng, 1, 1, 4, 3, 3);
    const auto& ft = inst.corpus[0].firings;
    const auto shared = random_params(Variant::Shared, inst.index, rng);
    ModelParameters fact(Variant::Factorial, inst.index);
    fact.assign(shared.values());
    for (double& v : fact.block(BlockId::Psi)) v *= 2.0;
    const double z = oracle::enumerate_partition(ft, fact, ModelKind::Factorial);
    const double uy = oracle::enumerate_partition(ft, shared, ModelKind::TaskY);
    const double uz = oracle::enumerate_partition(ft, shared, ModelKind::TaskZ);
    separated += std::abs(z - uy - uz) > 1e-6;
  }
  report("factorial-vs-shared", worst < 1e-12 && separated >= 95,
         fmt("score identity error %.3g on 20 instances; normalizers differ in %d/100 draws", worst, separated));
}

void reductions() {
  std::mt19937_64 rng(131);
  double var_err = 0.0, crf_err = 0.0;
  for (int draw = 0; draw < 20; ++draw) {
    const auto inst = random_instance(rng, 3, 1, 4, 3, 3);
    const auto shared = random_params(Variant::Shared, inst.index, rng);
    ModelParameters var(Variant::Variance, inst.index);
    auto copy = [](std::span<const double> from, std::span<double> to) { std::copy(from.begin(), from.end(), to.begin()); };
    copy(shared.block(BlockId::ThetaY), var.block(BlockId::ThetaY));
    copy(shared.block(BlockId::ThetaZ), var.block(BlockId::ThetaZ));
    copy(shared.block(BlockId::Psi), var.block(BlockId::PsiO));
    for (const auto& s : inst.corpus)
      for (Task t : {Task::Y, Task::Z})
        var_err = std::max(var_err, std::abs(sequence_log_probability(var, s, t) - sequence_log_probability(shared, s, t)));

    auto zero_psi = shared;
    std::fill(zero_psi.block(BlockId::Psi).begin(), zero_psi.block(BlockId::Psi).end(), 0.0);
    ModelParameters crf(Variant::Crf, inst.index);
    copy(shared.block(BlockId::ThetaY), crf.block(BlockId::ThetaY));
    copy(shared.block(BlockId::ThetaZ), crf.block(BlockId::ThetaZ));
    for (const auto& s : inst.corpus) {
      std::vector<double> s1, s2;
      const auto a = sum_inference(assemble(s.firings, potential_weights(zero_psi, ModelKind::TaskY, s1), ModelKind::TaskY));
      const auto b = sum_inference(assemble(s.firings, potential_weights(crf, ModelKind::ChainY, s2), ModelKind::ChainY));
      for (std::size_t t = 0; t < a.transition[0].size(); ++t)
        crf_err = std::max(crf_err, testutil::max_abs_diff(a.transition[0][t], b.transition[0][t]));
    }
  }
  report("reductions", var_err < 1e-10 && crf_err < 1e-10,
         fmt("variance(nu=0) vs shared %.3g; shared(psi=0) vs chain %.3g", var_err, crf_err));
}

Dataset synthetic(std::size_t n, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.n = n;
  spec.seed = seed;
  return generate_synthetic(spec);
}

void optimizer() {
  const Dataset d = synthetic(20, 3);
  const auto t0 = Clock::now();
  TrainConfig cfg;
  cfg.method = Method::Josp;
  cfg.optimizer.max_iters = 500;
  const auto r = train(d, cfg);
  const double secs = seconds_since(t0);
  bool monotone = true;
  for (std::size_t i = 1; i < r.report.trace.size(); ++i)
    monotone = monotone && r.report.trace[i].objective >= r.report.trace[i - 1].objective;
  const double g = r.report.trace.back().gradient_norm;
  report("optimizer", monotone && g < 1e-4 && r.report.accepted_steps <= 500 && secs < 60.0,
         fmt("%s trace, final gradient %.3g after %d steps (%s), %.2f s", monotone ? "non-decreasing" : "DECREASING", g,
             r.report.accepted_steps, termination_name(r.report.reason), secs));
}

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void variance_knobs() {
  const Dataset d = synthetic(40, 5);
  TrainConfig cfg;
  cfg.method = Method::Jovm;
  cfg.reg.lambda = 1e6;
  cfg.reg.eta_o = 1.0;
  const auto tight = train(d, cfg).model.params;
  const double nu = norm(tight.block(BlockId::NuY)) + norm(tight.block(BlockId::NuZ));
  cfg.reg.lambda = 1e-6;
  cfg.reg.eta_o = 1e4;
  const auto loose = train(d, cfg).model.params;
  const double psi = norm(loose.block(BlockId::PsiO));
  report("variance-knobs", nu < 1e-2 && psi < 1e-2,
         fmt("lambda=1e6: |nu_y|+|nu_z| = %.3g; lambda=1e-6, eta_o=1e4: |psi_o| = %.3g", nu, psi));
}

void mtl_benefit() {
  std::vector<double> josp, unshared;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto [train_set, test_set] = split(synthetic(220, 1000 + seed), 20.0 / 220.0, seed);
    for (Method m : {Method::Josp, Method::Unshared}) {
      TrainConfig cfg;
      cfg.method = m;
      const auto model = train(train_set, cfg).model;
      const Dataset gold = align_labels(test_set, model.alphabets);
      const double acc = score(predict_all(model, gold.sequences), gold).tasks[0].accuracy;
      (m == Method::Josp ? josp : unshared).push_back(acc);
    }
  }
  const double a = mean(josp), b = mean(unshared);
  report("mtl-benefit", a >= b,
         fmt("task-1 accuracy josp %.4f (sd %.4f) vs unshared %.4f (sd %.4f), gap %+.4f over 10 seeds", a,
             sample_std(josp), b, sample_std(unshared), a - b));
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void cli_pipeline() {
  namespace fs = std::filesystem;
  const std::string toy = MTCRF_TEST_DATA "/toy.conll";
  std::string pred[2], csv[2];
  bool ok = true;
  for (int run = 0; run < 2; ++run) {
    const fs::path dir = fs::temp_directory_path() / ("mtcrf_acceptance_" + std::to_string(run));
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ostringstream out, err;
    auto call = [&](std::vector<std::string> args) {
      args.insert(args.begin(), "mtcrf");
      const int rc = run_cli(args, out, err);
      if (rc != 0) std::fprintf(stderr, "%s", err.str().c_str());
      ok = ok && rc == 0;
    };
    call({"train", "--variant", "josp", "--train", toy, "--out", (dir / "model").string(), "--seed", "1"});
    call({"predict", "--model", (dir / "model").string(), "--test", toy, "--out", (dir / "pred").string()});
    call({"eval", "--model", (dir / "model").string(), "--test", toy, "--out", (dir / "eval.csv").string()});
    pred[run] = slurp(dir / "pred");
    csv[run] = slurp(dir / "eval.csv");
    fs::remove_all(dir);
  }
  ok = ok && !pred[0].empty() && !csv[0].empty();
  report("cli-determinism", ok && pred[0] == pred[1] && csv[0] == csv[1],
         fmt("predictions %s, eval csv %s", pred[0] == pred[1] ? "identical" : "DIFFER",
             csv[0] == csv[1] ? "identical" : "DIFFER"));
}

}  // namespace

int main() {
  try {
    inference_and_decoding();
    gradients();
    psi_gradient_structure();
    factorial_vs_shared();
    reductions();
    optimizer();
    variance_knobs();
    mtl_benefit();
    cli_pipeline();
  } catch (const std::exception& e) {
    std::printf("FAIL  aborted: %s\n", e.what());
    return 1;
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
