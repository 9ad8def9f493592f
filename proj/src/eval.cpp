#include "mtcrf/eval.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

namespace mtcrf {

namespace {

std::string number(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

EvalReport score(const std::vector<LabelRows>& predictions, const Dataset& gold) {
  require_valid(gold);
  if (gold.task_count() != 2) throw Error("scoring needs two gold label rows");
  if (predictions.size() != gold.size())
    throw Error("got predictions for " + std::to_string(predictions.size()) + " sequences, gold has " +
                std::to_string(gold.size()));
  EvalReport r;
  r.sequences = gold.size();
  r.tokens = gold.token_count();
  r.tasks.resize(2);
  for (int task = 0; task < 2; ++task) {
    auto& ts = r.tasks[task];
    int n = gold.alphabets[task].size();
    for (const auto& p : predictions)
      for (int v : p[task]) n = std::max(n, v + 1);
    ts.confusion.assign(n, std::vector<std::size_t>(n, 0));
    for (std::size_t s = 0; s < gold.size(); ++s) {
      const auto& g = gold.sequences[s].label_rows[task];
      const auto& p = predictions[s][task];
      if (p.size() != g.size())
        throw Error("sequence " + std::to_string(s) + ": predicted " + std::to_string(p.size()) + " labels for " +
                    std::to_string(g.size()) + " tokens");
      for (std::size_t t = 0; t < g.size(); ++t) {
        if (p[t] < 0) throw Error("sequence " + std::to_string(s) + ": negative label index");
        ++ts.confusion[g[t]][p[t]];
        ts.correct += g[t] == p[t];
      }
      ts.total += g.size();
    }
    ts.accuracy = static_cast<double>(ts.correct) / static_cast<double>(ts.total);
  }
  return r;
}

void print_report(const EvalReport& r, const std::vector<LabelAlphabet>& alphabets, std::ostream& out) {
  out << "sequences " << r.sequences << ", tokens " << r.tokens << "\n\n";
  out << std::left << std::setw(10) << "task" << std::right << std::setw(10) << "correct" << std::setw(10) << "total"
      << std::setw(12) << "accuracy" << '\n';
  for (std::size_t i = 0; i < r.tasks.size(); ++i) {
    const auto& ts = r.tasks[i];
    out << std::left << std::setw(10) << alphabets.at(i).task_name() << std::right << std::setw(10) << ts.correct
        << std::setw(10) << ts.total << std::setw(12) << std::fixed << std::setprecision(4) << ts.accuracy << '\n';
  }
  out.unsetf(std::ios::fixed);

  for (std::size_t i = 0; i < r.tasks.size(); ++i) {
    const auto& conf = r.tasks[i].confusion;
    auto name = [&](std::size_t l) {
      return l < static_cast<std::size_t>(alphabets[i].size()) ? alphabets[i].label_of(static_cast<int>(l))
                                                                : "#" + std::to_string(l);
    };
    int w = 6;
    for (std::size_t l = 0; l < conf.size(); ++l) w = std::max(w, static_cast<int>(name(l).size()) + 1);
    for (const auto& row : conf)
      for (auto c : row) w = std::max(w, static_cast<int>(std::to_string(c).size()) + 1);
    out << "\nconfusion " << alphabets[i].task_name() << " (rows gold, columns predicted)\n" << std::setw(w) << "";
    for (std::size_t l = 0; l < conf.size(); ++l) out << std::setw(w) << name(l);
    out << '\n';
    for (std::size_t g = 0; g < conf.size(); ++g) {
      out << std::setw(w) << name(g);
      for (auto c : conf[g]) out << std::setw(w) << c;
      out << '\n';
    }
  }
}

void write_report_csv(const EvalReport& r, const std::vector<LabelAlphabet>& alphabets, std::ostream& out) {
  out << "task,correct,total,accuracy\n";
  for (std::size_t i = 0; i < r.tasks.size(); ++i)
    out << alphabets.at(i).task_name() << ',' << r.tasks[i].correct << ',' << r.tasks[i].total << ','
        << number(r.tasks[i].accuracy) << '\n';
}

double mean(const std::vector<double>& v) {
  if (v.empty()) throw Error("mean of no runs");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

SweepReport sweep(const Dataset& data, const std::vector<double>& fractions, const std::vector<Method>& methods,
                  const std::vector<std::uint64_t>& seeds, const TrainConfig& config, const Dataset* test,
                  int workers) {
  if (fractions.empty() || methods.empty() || seeds.empty())
    throw Error("sweep needs at least one fraction, variant and seed");
  require_valid(data);
  SweepReport r;
  for (const auto& a : data.alphabets) r.task_names.push_back(a.task_name());
  for (double f : fractions)
    for (Method m : methods) {
      SweepCell c;
      c.fraction = f;
      c.method = m;
      c.accuracy[0].resize(seeds.size());
      c.accuracy[1].resize(seeds.size());
      r.cells.push_back(std::move(c));
    }

  // One job per (cell, seed); results land in fixed slots, so the order of
  // completion does not matter.
  const std::size_t jobs = r.cells.size() * seeds.size();
  auto run = [&](std::size_t job) {
    SweepCell& cell = r.cells[job / seeds.size()];
    const std::size_t k = job % seeds.size();
    Dataset train_set, test_set;
    if (test) {
      train_set = subsample(data, cell.fraction, seeds[k]);
      test_set = *test;
    } else {
      std::tie(train_set, test_set) = split(data, cell.fraction, seeds[k]);
    }
    TrainConfig cfg = config;
    cfg.method = cell.method;
    if (cell.method != Method::Crf) cfg.crf_task.reset();
    const auto trained = train(train_set, cfg);
    const Dataset gold = align_labels(test_set, trained.model.alphabets);
    const auto report = score(predict_all(trained.model, gold.sequences), gold);
    cell.accuracy[0][k] = report.tasks[0].accuracy;
    cell.accuracy[1][k] = report.tasks[1].accuracy;
  };

  const std::size_t pool_size = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1, workers)), 1, jobs);
  if (pool_size == 1) {
    for (std::size_t j = 0; j < jobs; ++j) run(j);
    return r;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < pool_size; ++w)
    pool.emplace_back([&] {
      for (std::size_t j; (j = next++) < jobs;) {
        try {
          run(j);
        } catch (...) {
          errors[j] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return r;
}

void write_sweep_csv(const SweepReport& r, std::ostream& out) {
  out << "fraction,variant,task,mean_acc,std_acc,runs\n";
  for (const auto& c : r.cells)
    for (int task = 0; task < 2; ++task)
      out << number(c.fraction) << ',' << method_name(c.method) << ',' << r.task_names.at(task) << ','
          << number(mean(c.accuracy[task])) << ',' << number(sample_std(c.accuracy[task])) << ','
          << c.accuracy[task].size() << '\n';
}

std::string sweep_csv(const SweepReport& r) {
  std::ostringstream s;
  write_sweep_csv(r, s);
  return s.str();
}

}  // namespace mtcrf
