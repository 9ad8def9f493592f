#ifndef MTCRF_FEATURES_HPP
#define MTCRF_FEATURES_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mtcrf/core.hpp"

namespace mtcrf {

// Clique families. A transition template scores (y_{t-1}, y_t, x_t) for one
// task; a dependency template scores (y_t, z_t, x_t).
enum class Family { Transition, Dependency };

// Which label slots of the clique a template conditions on. `Current` ignores
// the previous label of a transition clique (a state feature).
enum class LabelBinding { Pair, Current };

struct FeatureTemplate {
  std::string id;
  Family family = Family::Transition;
  int task = -1;  // transition only: 0 or 1, -1 instantiates the template for every task
  LabelBinding binding = LabelBinding::Pair;
  // Observation rule: bias, word, lower, prefix:N, suffix:N, init_caps,
  // all_caps, has_digit, word@-1, word@+1, attr:NAME.
  std::string extractor = "bias";

  bool applies_to(int task_id) const { return family == Family::Transition && (task < 0 || task == task_id); }
  friend bool operator==(const FeatureTemplate&, const FeatureTemplate&) = default;
};

/// Word identity, lowercase, affixes up to 3, shape flags, neighbouring words,
/// and unconditioned transition/dependency biases.
std::vector<FeatureTemplate> default_templates();

/// Line format: `id family binding extractor`, where family is `transition`,
/// `transition:1`, `transition:2` or `dependency`. Blank lines and `#` comments
/// are skipped.
std::vector<FeatureTemplate> parse_templates(std::istream& in);
std::vector<FeatureTemplate> load_templates(const std::string& path);
std::string format_template(const FeatureTemplate& t);
void validate_templates(std::span<const FeatureTemplate> templates);

/// Observation strings the template produces at position t; empty when the
/// rule does not fire (e.g. a flag that is false).
std::vector<std::string> observations(const FeatureTemplate& tpl, const TaskedSequence& seq, std::size_t t);

inline constexpr int kStartLabel = -1;  // virtual previous label at t = 0
inline constexpr int kAnyLabel = -2;    // slot ignored by a Current binding

enum class Block : int { TransitionY = 0, TransitionZ = 1, Dependency = 2 };
inline constexpr std::size_t kBlockCount = 3;

inline Block transition_block(int task) { return task == 0 ? Block::TransitionY : Block::TransitionZ; }
const char* block_name(Block b);

// For transition blocks (first, second) = (previous, current); for the
// dependency block (first, second) = (task-1 label, task-2 label).
struct FeatureKey {
  std::string template_id;
  std::string observation;
  int first = 0;
  int second = 0;

  friend bool operator==(const FeatureKey&, const FeatureKey&) = default;
};

class FeatureIndex {
 public:
  struct Entry {
    int first;
    int second;
    int id;
  };

  FeatureIndex() = default;
  explicit FeatureIndex(std::array<int, 2> label_counts);

  /// Registers a key in a block; returns its block-local id. Throws once frozen.
  int add(Block b, const FeatureKey& key);
  void freeze();
  bool frozen() const { return frozen_; }

  std::optional<int> find(Block b, const FeatureKey& key) const;

  /// All keys of a block sharing (template, observation), used by extraction.
  std::span<const Entry> entries(Block b, const std::string& template_id, const std::string& observation) const;

  std::size_t block_size(Block b) const { return keys_[static_cast<int>(b)].size(); }
  std::size_t block_offset(Block b) const;
  std::size_t dimension() const;
  const std::vector<FeatureKey>& keys(Block b) const { return keys_[static_cast<int>(b)]; }
  int label_count(int task) const { return label_counts_.at(task); }
  std::array<int, 2> label_counts() const { return label_counts_; }

  friend bool operator==(const FeatureIndex& a, const FeatureIndex& b) {
    return a.label_counts_ == b.label_counts_ && a.keys_ == b.keys_ && a.frozen_ == b.frozen_;
  }

 private:
  std::array<int, 2> label_counts_{0, 0};
  std::array<std::vector<FeatureKey>, kBlockCount> keys_;
  std::array<std::unordered_map<std::string, int>, kBlockCount> lookup_;
  std::array<std::unordered_map<std::string, std::vector<Entry>>, kBlockCount> by_observation_;
  bool frozen_ = false;
};

/// Indexes every key fired by the gold labels plus all unconditioned label
/// pairs of bias templates. Requires a valid two-task dataset.
FeatureIndex build_index(const Dataset& d, std::span<const FeatureTemplate> templates);

/// Firing lists for a rows x cols grid of label assignments, stored CSR.
class CellFirings {
 public:
  CellFirings() = default;
  CellFirings(std::size_t rows, std::size_t cols, const std::vector<std::vector<int>>& cells);

  std::span<const int> at(std::size_t r, std::size_t c) const {
    std::size_t k = r * cols_ + c;
    return {ids_.data() + offsets_[k], ids_.data() + offsets_[k + 1]};
  }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::span<const int> all_ids() const { return ids_; }

  friend bool operator==(const CellFirings&, const CellFirings&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint32_t> offsets_{0};
  std::vector<int> ids_;
};

// transition[task][t] has one row (previous = START) at t = 0 and |labels|
// rows afterwards; dependency[t] is |Y| x |Z|. Ids are block-local.
struct FiringTable {
  std::size_t length = 0;
  std::array<int, 2> label_counts{0, 0};
  std::array<std::size_t, kBlockCount> block_sizes{0, 0, 0};
  std::array<std::vector<CellFirings>, 2> transition;
  std::vector<CellFirings> dependency;

  friend bool operator==(const FiringTable&, const FiringTable&) = default;
};

FiringTable extract(const TaskedSequence& seq, const FeatureIndex& idx, std::span<const FeatureTemplate> templates);

}  // namespace mtcrf

#endif  // MTCRF_FEATURES_HPP
