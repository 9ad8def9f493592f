#include "mtcrf/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "mtcrf/data.hpp"
#include "mtcrf/eval.hpp"
#include "mtcrf/oracle.hpp"
#include "mtcrf/train.hpp"

namespace mtcrf {

namespace {

// Bad flags or flag combinations; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string columns = "0,1,2";
  std::string templates = "default";
  double eta_y = 1.0, eta_z = 1.0, eta_o = 1.0;
  std::optional<double> lambda;
  int max_iters = OptimizerConfig{}.max_iters;
  int alternate_rounds = OptimizerConfig{}.alternate_rounds;
  std::uint64_t seed = 1;
  int threads = 1;
  std::size_t first = 0;  // 0 keeps every training sequence
};

void add_data_options(CLI::App* app, CommonOptions& o) {
  app->add_option("--columns", o.columns, "token field then one label field per task, e.g. 0,1,2")
      ->capture_default_str();
}

void add_train_options(CLI::App* app, CommonOptions& o) {
  app->add_option("--templates", o.templates, "feature template file, or 'default'")->capture_default_str();
  app->add_option("--eta-y", o.eta_y, "prior precision of task-1 transition weights")->capture_default_str();
  app->add_option("--eta-z", o.eta_z, "prior precision of task-2 transition weights")->capture_default_str();
  app->add_option("--eta-o", o.eta_o, "prior precision of dependency weights")->capture_default_str();
  app->add_option("--lambda", o.lambda, "prior precision of per-task deviations (jovm, aovm only)");
  app->add_option("--max-iters", o.max_iters, "quasi-Newton iteration limit")->capture_default_str();
  app->add_option("--alternate-rounds", o.alternate_rounds, "rounds for aosp/aovm")->capture_default_str();
  app->add_option("--threads", o.threads, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--first", o.first, "keep only the first N training sequences (e.g. 350 of a CoNLL train file)")
      ->check(CLI::PositiveNumber);
}

Dataset read_training(const std::string& path, const ColumnSpec& columns, const CommonOptions& o) {
  Dataset d = read_conll(path, columns);
  return o.first ? head(d, o.first) : d;
}

ColumnSpec columns_of(const CommonOptions& o) {
  try {
    return parse_columns(o.columns);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

bool is_variance(Method m) { return m == Method::Jovm || m == Method::Aovm; }

Method method_of(const std::string& name) {
  try {
    return parse_method(name);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

// lambda must be given exactly when a variance method is trained.
void check_lambda(const CommonOptions& o, const std::vector<Method>& methods) {
  const bool any_variance = std::any_of(methods.begin(), methods.end(), is_variance);
  if (any_variance && !o.lambda) throw UsageError("--lambda is required for jovm and aovm");
  if (!any_variance && o.lambda) throw UsageError("--lambda only applies to jovm and aovm");
}

TrainConfig train_config(const CommonOptions& o, Method method) {
  TrainConfig cfg;
  cfg.method = method;
  cfg.reg = {o.eta_y, o.eta_z, o.eta_o, o.lambda.value_or(RegularizationConfig{}.lambda)};
  cfg.optimizer.max_iters = o.max_iters;
  cfg.optimizer.alternate_rounds = o.alternate_rounds;
  cfg.threads = o.threads;
  try {
    validate(cfg.reg);
    validate(cfg.optimizer);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  cfg.templates = load_templates(o.templates);
  return cfg;
}

template <class T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    std::istringstream ps(part);
    T v{};
    if (!(ps >> v) || !(ps >> std::ws).eof()) throw UsageError(std::string("bad ") + what + " list '" + text + "'");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError(std::string("empty ") + what + " list");
  return out;
}

// Writes to `path`, or to `fallback` when path is empty.
template <class F>
void emit(const std::string& path, std::ostream& fallback, F&& write) {
  if (path.empty()) {
    write(fallback);
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  write(f);
  if (!f) throw Error("failed writing '" + path + "'");
}

void print_train_summary(const TrainResult& r, std::ostream& out) {
  const auto& last = r.report.trace.empty() ? TraceEntry{} : r.report.trace.back();
  out << "variant " << method_name(r.model.method) << ", " << r.model.params.size() << " parameters\n"
      << "stopped: " << termination_name(r.report.reason) << " after " << r.report.accepted_steps << " steps\n"
      << "objective " << last.objective << ", gradient norm " << last.gradient_norm << '\n';
}

const char* kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::ChainY: return "chain-1";
    case ModelKind::ChainZ: return "chain-2";
    case ModelKind::TaskY: return "task-1";
    case ModelKind::TaskZ: return "task-2";
    case ModelKind::Factorial: return "factorial";
  }
  return "?";
}

// Moves `--config FILE` (or --config=FILE) out of the argument list and
// returns its key=value lines as `--key=value` arguments. Lines starting with
// '#' or ';' and [section] headers are skipped.
std::vector<std::string> take_config(std::vector<std::string>& args) {
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file");
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (!path) return {};
  std::ifstream in(*path);
  if (!in) throw UsageError("cannot read config file '" + *path + "'");
  std::vector<std::string> out;
  std::string line;
  int line_no = 0;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return std::string();
    const auto b = s.find_last_not_of(" \t\r");
    s = s.substr(a, b - a + 1);
    if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) s = s.substr(1, s.size() - 2);
    return s;
  };
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';' || t[0] == '[') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw UsageError(*path + ":" + std::to_string(line_no) + ": expected key=value");
    std::string key = trim(t.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    out.push_back("--" + key + "=" + trim(t.substr(eq + 1)));
  }
  return out;
}

}  // namespace

int run_cli(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multitask sequence labeling with conditional random fields"};
  app.name(raw_args.empty() ? "mtcrf" : raw_args[0]);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every command");

  CommonOptions o;

  // train
  std::string variant, train_path, out_path, trace_path;
  int task_number = 0;
  double fraction = 1.0;
  auto* train_cmd = app.add_subcommand("train", "fit a model and save it");
  train_cmd->add_option("--variant", variant, "crf, factorial, unshared, josp, aosp, jovm or aovm")->required();
  train_cmd->add_option("--train", train_path, "training data (CoNLL)")->required();
  train_cmd->add_option("--out", out_path, "model file to write")->required();
  train_cmd->add_option("--trace", trace_path, "objective trace file");
  train_cmd->add_option("--task", task_number, "crf only: train a single task (1 or 2)")->check(CLI::Range(1, 2));
  train_cmd->add_option("--fraction", fraction, "train on this fraction of the sequences")->capture_default_str();
  train_cmd->add_option("--seed", o.seed, "seed for --fraction")->capture_default_str();
  add_data_options(train_cmd, o);
  add_train_options(train_cmd, o);

  // predict
  std::string model_path, input_path;
  auto* predict_cmd = app.add_subcommand("predict", "append predicted label columns to a CoNLL file");
  predict_cmd->add_option("--model", model_path, "model file")->required();
  predict_cmd->add_option("--test", input_path, "input file; only the token field is read")->required();
  predict_cmd->add_option("--out", out_path, "output file (default: stdout)");
  add_data_options(predict_cmd, o);

  // eval
  std::string csv_path;
  auto* eval_cmd = app.add_subcommand("eval", "token accuracy of a model on labeled data");
  eval_cmd->add_option("--model", model_path, "model file")->required();
  eval_cmd->add_option("--test", input_path, "labeled test data (CoNLL)")->required();
  eval_cmd->add_option("--out", csv_path, "also write the accuracies as CSV");
  add_data_options(eval_cmd, o);

  // sweep
  std::string test_path, fractions_text = "0.1,0.3,0.5", variants_text = "unshared,josp", seeds_text;
  int runs = 10;
  auto* sweep_cmd = app.add_subcommand("sweep", "accuracy over training sizes, variants and seeds as CSV");
  sweep_cmd->add_option("--train", train_path, "data to draw training sets from")->required();
  sweep_cmd->add_option("--test", test_path, "fixed test set (default: the held-out part of --train)");
  sweep_cmd->add_option("--fractions", fractions_text, "comma-separated training fractions")->capture_default_str();
  sweep_cmd->add_option("--variants", variants_text, "comma-separated variants")->capture_default_str();
  sweep_cmd->add_option("--seeds", seeds_text, "comma-separated seeds (default: seed .. seed+runs-1)");
  sweep_cmd->add_option("--runs", runs, "runs per cell when --seeds is absent")->capture_default_str()->check(
      CLI::PositiveNumber);
  sweep_cmd->add_option("--seed", o.seed, "first seed when --seeds is absent")->capture_default_str();
  sweep_cmd->add_option("--out", out_path, "CSV file (default: stdout)");
  add_data_options(sweep_cmd, o);
  add_train_options(sweep_cmd, o);

  // synth
  SyntheticSpec spec;
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic two-task data set");
  synth_cmd->add_option("--n", spec.n, "number of sequences")->capture_default_str();
  synth_cmd->add_option("--min-length", spec.min_length, "shortest sequence")->capture_default_str();
  synth_cmd->add_option("--max-length", spec.max_length, "longest sequence")->capture_default_str();
  synth_cmd->add_option("--labels-y", spec.labels_y, "task-1 label count")->capture_default_str();
  synth_cmd->add_option("--labels-z", spec.labels_z, "task-2 label count")->capture_default_str();
  synth_cmd->add_option("--emission", spec.emission_strength, "probability of emitting an own-label word")
      ->capture_default_str();
  synth_cmd->add_option("--transition", spec.transition_strength, "preferred-successor logit")->capture_default_str();
  synth_cmd->add_option("--rho", spec.rho, "probability that task 2 follows task 1")->capture_default_str();
  synth_cmd->add_option("--words", spec.words_per_label, "vocabulary per label")->capture_default_str();
  synth_cmd->add_option("--seed", spec.seed, "random seed")->capture_default_str();
  synth_cmd->add_option("--out", out_path, "output file (default: stdout)");
  add_data_options(synth_cmd, o);

  // oracle: brute-force cross-check of inference on small inputs
  std::size_t budget = oracle::EnumerationBudget{}.max_assignments;
  auto* oracle_cmd = app.add_subcommand("oracle", "");
  oracle_cmd->group("");
  oracle_cmd->add_option("--model", model_path)->required();
  oracle_cmd->add_option("--test", input_path)->required();
  oracle_cmd->add_option("--budget", budget);
  add_data_options(oracle_cmd, o);

  try {
    std::vector<std::string> args(raw_args.begin() + (raw_args.empty() ? 0 : 1), raw_args.end());
    auto file_args = take_config(args);
    if (!file_args.empty()) {
      if (args.empty()) throw UsageError("--config needs a command before it");
      args.insert(args.begin() + 1, file_args.begin(), file_args.end());
    }
    std::reverse(args.begin(), args.end());  // CLI11 takes arguments in reverse order
    app.parse(args);

    if (*train_cmd) {
      const Method method = method_of(variant);
      check_lambda(o, {method});
      if (task_number && method != Method::Crf) throw UsageError("--task only applies to --variant crf");
      if (!(fraction > 0.0 && fraction <= 1.0)) throw UsageError("--fraction must lie in (0, 1]");
      const ColumnSpec columns = columns_of(o);
      TrainConfig cfg = train_config(o, method);
      if (task_number) cfg.crf_task = task_number == 1 ? Task::Y : Task::Z;
      Dataset data = read_training(train_path, columns, o);
      if (fraction < 1.0) data = subsample(data, fraction, o.seed);
      const TrainResult r = train(data, cfg);
      save_model(r.model, out_path);
      if (!trace_path.empty()) emit(trace_path, out, [&](std::ostream& s) { write_trace(r.report, s); });
      print_train_summary(r, out);
      if (r.report.reason == Termination::LineSearchFailed) {
        err << "warning: line search failed; the saved model is the last accepted iterate\n";
      }
    } else if (*predict_cmd) {
      const ColumnSpec columns = columns_of(o);
      const ModelArtifact m = load_model(model_path);
      const auto blocks = read_conll_fields(input_path, static_cast<std::size_t>(columns.token) + 1);
      if (blocks.empty()) throw UsageError("'" + input_path + "' holds no sequences");
      const auto rows = predict_all(m, token_sequences(blocks, columns.token));
      emit(out_path, out, [&](std::ostream& s) {
        for (std::size_t b = 0; b < blocks.size(); ++b) {
          if (b > 0) s << '\n';
          for (std::size_t t = 0; t < blocks[b].size(); ++t) {
            for (const auto& f : blocks[b][t]) s << f << ' ';
            s << m.alphabets[0].label_of(rows[b][0][t]) << ' ' << m.alphabets[1].label_of(rows[b][1][t]) << '\n';
          }
        }
      });
    } else if (*eval_cmd) {
      const ColumnSpec columns = columns_of(o);
      const ModelArtifact m = load_model(model_path);
      const Dataset gold = align_labels(read_conll(input_path, columns), m.alphabets);
      const EvalReport r = score(predict_all(m, gold.sequences), gold);
      print_report(r, gold.alphabets, out);
      if (!csv_path.empty()) emit(csv_path, out, [&](std::ostream& s) { write_report_csv(r, gold.alphabets, s); });
    } else if (*sweep_cmd) {
      std::vector<Method> methods;
      for (const auto& name : parse_list<std::string>(variants_text, "variant")) methods.push_back(method_of(name));
      check_lambda(o, methods);
      const auto fractions = parse_list<double>(fractions_text, "fraction");
      std::vector<std::uint64_t> seeds;
      if (!seeds_text.empty()) {
        seeds = parse_list<std::uint64_t>(seeds_text, "seed");
      } else {
        for (int i = 0; i < runs; ++i) seeds.push_back(o.seed + static_cast<std::uint64_t>(i));
      }
      const ColumnSpec columns = columns_of(o);
      TrainConfig cfg = train_config(o, methods.front());
      const Dataset data = read_training(train_path, columns, o);
      std::optional<Dataset> test;
      if (!test_path.empty()) test = read_conll(test_path, columns);
      // Cells run in parallel; each training stays single-threaded.
      const int workers = cfg.threads;
      cfg.threads = 1;
      const SweepReport r = sweep(data, fractions, methods, seeds, cfg, test ? &*test : nullptr, workers);
      emit(out_path, out, [&](std::ostream& s) { write_sweep_csv(r, s); });
    } else if (*synth_cmd) {
      const ColumnSpec columns = columns_of(o);
      if (columns.labels.size() != 2) throw UsageError("synthetic data has two label fields");
      try {
        validate(spec);
      } catch (const Error& e) {
        throw UsageError(e.what());
      }
      const Dataset d = generate_synthetic(spec);
      emit(out_path, out, [&](std::ostream& s) { write_conll(d, s, columns); });
    } else if (*oracle_cmd) {
      const ColumnSpec columns = columns_of(o);
      const ModelArtifact m = load_model(model_path);
      const auto blocks = read_conll_fields(input_path, static_cast<std::size_t>(columns.token) + 1);
      if (blocks.empty()) throw UsageError("'" + input_path + "' holds no sequences");
      const auto seqs = token_sequences(blocks, columns.token);
      const Variant v = m.params.variant();
      std::vector<ModelKind> kinds;
      if (v == Variant::Factorial) kinds = {ModelKind::Factorial};
      else kinds = {model_for(v, Task::Y), model_for(v, Task::Z)};
      const auto old = out.precision(17);
      for (std::size_t i = 0; i < seqs.size(); ++i) {
        const FiringTable ft = extract(seqs[i], m.index, m.templates);
        for (ModelKind k : kinds) {
          std::vector<double> scratch;
          const FactorGraph g = assemble(ft, potential_weights(m.params, k, scratch), k);
          const double dp = sum_inference(g).log_partition;
          const double brute = oracle::enumerate_partition(ft, m.params, k, {budget});
          const Decoded a = max_inference(g), b = oracle::enumerate_argmax(ft, m.params, k, {budget});
          out << "sequence " << i << ' ' << kind_name(k) << ": logZ " << dp << " enumerated " << brute
              << " diff " << std::abs(dp - brute) << ", argmax "
              << (a.assignment.rows == b.assignment.rows ? "agrees" : "DIFFERS") << '\n';
        }
      }
      out.precision(old);
    }
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);  // --help
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace mtcrf
