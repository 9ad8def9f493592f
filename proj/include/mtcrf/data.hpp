#ifndef MTCRF_DATA_HPP
#define MTCRF_DATA_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "mtcrf/core.hpp"
#include "mtcrf/features.hpp"
#include "mtcrf/models.hpp"

namespace mtcrf {

/// Field positions of a CoNLL line: the token, then one label field per task.
/// Lines carry exactly field_count() fields; positions not named here are
/// skipped on read and written as "_".
struct ColumnSpec {
  int token = 0;
  std::vector<int> labels{1, 2};

  std::size_t field_count() const;
};

/// Parses "0,1,2" (token first, then label fields).
ColumnSpec parse_columns(const std::string& text);
std::string format_columns(const ColumnSpec& c);

/// Reads blank-line separated blocks; every non-blank line must have exactly
/// 1 + k whitespace-separated fields. Alphabets follow first appearance.
Dataset read_conll(const std::string& path, const ColumnSpec& columns);
Dataset read_conll(std::istream& in, const ColumnSpec& columns, const std::string& source = "<stream>");

void write_conll(const Dataset& d, const std::string& path, const ColumnSpec& columns);
void write_conll(const Dataset& d, std::ostream& out, const ColumnSpec& columns);

using FieldBlock = std::vector<std::vector<std::string>>;

/// Raw blocks of whitespace-split fields, for prediction inputs whose label
/// columns are optional. Every line needs at least `min_fields` fields.
std::vector<FieldBlock> read_conll_fields(const std::string& path, std::size_t min_fields = 1);

/// Token-only sequences (no label rows) built from raw blocks.
std::vector<TaskedSequence> token_sequences(const std::vector<FieldBlock>& blocks, int token_column);

/// Re-indexes the labels of `d` into `alphabets`, appending labels the
/// alphabets have not seen.
Dataset align_labels(const Dataset& d, std::vector<LabelAlphabet> alphabets);

struct SyntheticSpec {
  std::size_t n = 100;
  std::size_t min_length = 5;
  std::size_t max_length = 15;
  int labels_y = 8;
  int labels_z = 3;
  double emission_strength = 0.7;    // probability a token comes from its own label's word list
  double transition_strength = 2.0;  // logit bonus of the preferred successor label
  double rho = 0.95;                 // probability that z_t = y_t mod |Z|
  int words_per_label = 6;
  std::uint64_t seed = 1;
};

void validate(const SyntheticSpec& spec);

/// Two correlated tasks: y follows a first-order Markov chain, tokens are
/// emitted from y, z is a fixed relabeling of y with probability rho and
/// uniform otherwise. A pure function of the spec.
Dataset generate_synthetic(const SyntheticSpec& spec);

/// Sequence-level random partition; train gets round(fraction * n) sequences.
std::pair<Dataset, Dataset> split(const Dataset& d, double train_fraction, std::uint64_t seed);
Dataset subsample(const Dataset& d, double fraction, std::uint64_t seed);

/// The first n sequences (all of them when n exceeds the size). Used to cut a
/// fixed-size subset from the front of a public corpus, e.g. 350 sentences.
Dataset head(const Dataset& d, std::size_t n);

inline constexpr int kModelFormatVersion = 1;

struct ModelArtifact {
  int version = kModelFormatVersion;
  Method method = Method::Josp;
  std::vector<FeatureTemplate> templates;
  std::vector<LabelAlphabet> alphabets;
  FeatureIndex index;
  ModelParameters params;

  friend bool operator==(const ModelArtifact&, const ModelArtifact&) = default;
};

void save_model(const ModelArtifact& m, const std::string& path);
void save_model(const ModelArtifact& m, std::ostream& out);
ModelArtifact load_model(const std::string& path);
ModelArtifact load_model(std::istream& in);

/// Thrown by load_model for a readable artifact written by another format version.
class VersionMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace mtcrf

#endif  // MTCRF_DATA_HPP
