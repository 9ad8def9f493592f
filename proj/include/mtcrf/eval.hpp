#ifndef MTCRF_EVAL_HPP
#define MTCRF_EVAL_HPP

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mtcrf/train.hpp"

namespace mtcrf {

struct TaskScore {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // [gold][predicted]
};

struct EvalReport {
  std::vector<TaskScore> tasks;
  std::size_t sequences = 0;
  std::size_t tokens = 0;
};

/// Token accuracy per task. Prediction rows must align with the gold rows.
EvalReport score(const std::vector<LabelRows>& predictions, const Dataset& gold);

/// Accuracy table followed by one confusion matrix per task.
void print_report(const EvalReport& r, const std::vector<LabelAlphabet>& alphabets, std::ostream& out);

/// `task,correct,total,accuracy` rows.
void write_report_csv(const EvalReport& r, const std::vector<LabelAlphabet>& alphabets, std::ostream& out);

struct SweepCell {
  double fraction = 0.0;
  Method method = Method::Josp;
  std::array<std::vector<double>, 2> accuracy;  // one entry per seed
};

struct SweepReport {
  std::vector<std::string> task_names;
  std::vector<SweepCell> cells;  // fraction-major, then method, in the order given
};

double mean(const std::vector<double>& v);
/// Sample standard deviation; 0 for a single run.
double sample_std(const std::vector<double>& v);

/// For every (fraction, method, seed): with no `test` set, split `data` with
/// that fraction and seed; otherwise train on subsample(data, fraction, seed)
/// and score on `test`. Cells run on up to `workers` threads.
SweepReport sweep(const Dataset& data, const std::vector<double>& fractions, const std::vector<Method>& methods,
                  const std::vector<std::uint64_t>& seeds, const TrainConfig& config, const Dataset* test = nullptr,
                  int workers = 1);

/// Header `fraction,variant,task,mean_acc,std_acc,runs`, one row per cell and task.
void write_sweep_csv(const SweepReport& r, std::ostream& out);
std::string sweep_csv(const SweepReport& r);

}  // namespace mtcrf

#endif  // MTCRF_EVAL_HPP
