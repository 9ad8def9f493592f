#ifndef MTCRF_CORE_HPP
#define MTCRF_CORE_HPP

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace mtcrf {

/// Raised for malformed input, contract violations and unusable configurations.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two-task models index their tasks with these.
enum class Task : int { Y = 0, Z = 1 };

inline constexpr int task_index(Task t) { return static_cast<int>(t); }

/// Ordered set of distinct label strings for one task.
class LabelAlphabet {
 public:
  LabelAlphabet() = default;
  explicit LabelAlphabet(std::string task_name, std::vector<std::string> labels = {});

  /// Returns the index of `label`, appending it when unseen.
  int add(std::string_view label);

  std::optional<int> find(std::string_view label) const;
  int index_of(std::string_view label) const;
  const std::string& label_of(int index) const;

  int size() const { return static_cast<int>(labels_.size()); }
  const std::string& task_name() const { return task_name_; }
  const std::vector<std::string>& labels() const { return labels_; }

  friend bool operator==(const LabelAlphabet& a, const LabelAlphabet& b) {
    return a.task_name_ == b.task_name_ && a.labels_ == b.labels_;
  }

 private:
  std::string task_name_;
  std::vector<std::string> labels_;
  std::unordered_map<std::string, int> index_;
};

struct Token {
  std::string surface;
  std::vector<std::pair<std::string, std::string>> attributes;

  /// nullptr when the token carries no attribute of that name.
  const std::string* attribute(std::string_view name) const;

  friend bool operator==(const Token&, const Token&) = default;
};

/// One observed token sequence with k aligned label rows.
struct TaskedSequence {
  std::vector<Token> tokens;
  std::vector<std::vector<int>> label_rows;

  std::size_t length() const { return tokens.size(); }
  std::size_t task_count() const { return label_rows.size(); }
  const std::vector<int>& labels(Task t) const { return label_rows.at(task_index(t)); }

  friend bool operator==(const TaskedSequence&, const TaskedSequence&) = default;
};

struct Dataset {
  std::vector<LabelAlphabet> alphabets;
  std::vector<TaskedSequence> sequences;

  std::size_t size() const { return sequences.size(); }
  std::size_t task_count() const { return alphabets.size(); }
  std::size_t token_count() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// One entry per broken invariant; empty when the dataset is well formed.
std::vector<std::string> validate_dataset(const Dataset& d);

/// Throws Error listing the first violations when validate_dataset is non-empty.
void require_valid(const Dataset& d);

}  // namespace mtcrf

#endif  // MTCRF_CORE_HPP
