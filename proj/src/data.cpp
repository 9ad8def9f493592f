#include "mtcrf/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <system_error>

namespace mtcrf {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::string task_label_name(std::size_t i) { return "task" + std::to_string(i + 1); }

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  return out;
}

// Percent-escaping for the model file: whitespace, '%' and control bytes
// become %XX; the empty string is a lone '%'.
std::string escape(const std::string& s) {
  if (s.empty()) return "%";
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (c <= 0x20 || c == 0x7f || c == '%') {
      out += '%';
      out += hex[c >> 4];
      out += hex[c & 15];
    } else {
      out += static_cast<char>(c);
    }
  }
  return out;
}

int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

std::string unescape(const std::string& s) {
  if (s == "%") return {};
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '%') {
      out += s[i];
      continue;
    }
    if (i + 2 >= s.size()) throw Error("model file: truncated escape in '" + s + "'");
    const int hi = hex_digit(s[i + 1]), lo = hex_digit(s[i + 2]);
    if (hi < 0 || lo < 0) throw Error("model file: bad escape in '" + s + "'");
    out += static_cast<char>(hi * 16 + lo);
    i += 2;
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// Line-oriented reader for the model format with line numbers in errors.
class ModelReader {
 public:
  explicit ModelReader(std::istream& in) : in_(in) {}

  std::vector<std::string> fields() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      strip_cr(line);
      auto f = split_fields(line);
      if (!f.empty()) return f;
    }
    fail("unexpected end of file");
  }

  std::vector<std::string> expect(const std::string& keyword, std::size_t count) {
    auto f = fields();
    if (f[0] != keyword || f.size() != count) fail("expected '" + keyword + "' with " + std::to_string(count - 1) + " value(s)");
    return f;
  }

  std::size_t to_size(const std::string& s) {
    std::size_t v = 0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) fail("bad count '" + s + "'");
    return v;
  }

  int to_int(const std::string& s) {
    int v = 0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) fail("bad integer '" + s + "'");
    return v;
  }

  double to_double(const std::string& s) {
    double v = 0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) fail("bad number '" + s + "'");
    return v;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error("model file line " + std::to_string(line_no_) + ": " + what);
  }

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
};

constexpr const char* kMagic = "mtcrf-model";

}  // namespace

std::size_t ColumnSpec::field_count() const {
  int m = token;
  for (int c : labels) m = std::max(m, c);
  return static_cast<std::size_t>(m) + 1;
}

ColumnSpec parse_columns(const std::string& text) {
  std::vector<int> cols;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    int v = -1;
    auto r = std::from_chars(part.data(), part.data() + part.size(), v);
    if (part.empty() || r.ec != std::errc() || r.ptr != part.data() + part.size() || v < 0)
      throw Error("bad column spec '" + text + "': expected comma-separated field numbers");
    cols.push_back(v);
  }
  if (cols.size() < 2) throw Error("column spec '" + text + "' needs a token field and at least one label field");
  auto sorted = cols;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw Error("column spec '" + text + "' repeats a field");
  ColumnSpec c;
  c.token = cols[0];
  c.labels.assign(cols.begin() + 1, cols.end());
  return c;
}

std::string format_columns(const ColumnSpec& c) {
  std::string out = std::to_string(c.token);
  for (int l : c.labels) out += "," + std::to_string(l);
  return out;
}

Dataset read_conll(const std::string& path, const ColumnSpec& columns) {
  auto in = open_in(path);
  return read_conll(in, columns, path);
}

Dataset read_conll(std::istream& in, const ColumnSpec& columns, const std::string& source) {
  (void)parse_columns(format_columns(columns));  // rejects repeated or negative fields
  const std::size_t width = columns.field_count();
  const std::size_t k = columns.labels.size();
  Dataset d;
  for (std::size_t i = 0; i < k; ++i) d.alphabets.emplace_back(task_label_name(i));

  TaskedSequence cur;
  cur.label_rows.resize(k);
  auto flush = [&] {
    if (cur.tokens.empty()) return;
    d.sequences.push_back(std::move(cur));
    cur = TaskedSequence{};
    cur.label_rows.resize(k);
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    auto f = split_fields(line);
    if (f.empty()) {
      flush();
      continue;
    }
    if (f.size() != width)
      throw Error(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(width) + " fields, found " +
                  std::to_string(f.size()));
    cur.tokens.push_back(Token{f[columns.token], {}});
    for (std::size_t i = 0; i < k; ++i) cur.label_rows[i].push_back(d.alphabets[i].add(f[columns.labels[i]]));
  }
  flush();
  if (d.sequences.empty()) throw Error(source + ": no sequences");
  return d;
}

void write_conll(const Dataset& d, const std::string& path, const ColumnSpec& columns) {
  auto out = open_out(path);
  write_conll(d, out, columns);
  if (!out) throw Error("failed writing '" + path + "'");
}

void write_conll(const Dataset& d, std::ostream& out, const ColumnSpec& columns) {
  require_valid(d);
  if (columns.labels.size() != d.task_count())
    throw Error("column spec names " + std::to_string(columns.labels.size()) + " label fields, dataset has " +
                std::to_string(d.task_count()) + " tasks");
  const std::size_t width = columns.field_count();
  std::vector<std::string> fields(width);
  for (std::size_t s = 0; s < d.size(); ++s) {
    const auto& seq = d.sequences[s];
    if (s > 0) out << '\n';
    for (std::size_t t = 0; t < seq.length(); ++t) {
      std::fill(fields.begin(), fields.end(), "_");
      fields[columns.token] = seq.tokens[t].surface;
      for (std::size_t i = 0; i < columns.labels.size(); ++i)
        fields[columns.labels[i]] = d.alphabets[i].label_of(seq.label_rows[i][t]);
      for (std::size_t c = 0; c < width; ++c) out << (c ? " " : "") << fields[c];
      out << '\n';
    }
  }
}

std::vector<FieldBlock> read_conll_fields(const std::string& path, std::size_t min_fields) {
  auto in = open_in(path);
  std::vector<FieldBlock> blocks;
  FieldBlock cur;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    auto f = split_fields(line);
    if (f.empty()) {
      if (!cur.empty()) blocks.push_back(std::move(cur));
      cur.clear();
      continue;
    }
    if (f.size() < min_fields)
      throw Error(path + ":" + std::to_string(line_no) + ": expected at least " + std::to_string(min_fields) +
                  " fields, found " + std::to_string(f.size()));
    cur.push_back(std::move(f));
  }
  if (!cur.empty()) blocks.push_back(std::move(cur));
  return blocks;
}

std::vector<TaskedSequence> token_sequences(const std::vector<FieldBlock>& blocks, int token_column) {
  std::vector<TaskedSequence> out;
  out.reserve(blocks.size());
  for (const auto& b : blocks) {
    TaskedSequence s;
    for (const auto& f : b) s.tokens.push_back(Token{f.at(static_cast<std::size_t>(token_column)), {}});
    out.push_back(std::move(s));
  }
  return out;
}

Dataset align_labels(const Dataset& d, std::vector<LabelAlphabet> alphabets) {
  if (d.task_count() != alphabets.size())
    throw Error("dataset has " + std::to_string(d.task_count()) + " tasks, model has " +
                std::to_string(alphabets.size()));
  Dataset out;
  out.sequences = d.sequences;
  for (std::size_t i = 0; i < alphabets.size(); ++i) {
    std::vector<int> map(d.alphabets[i].size());
    for (int l = 0; l < d.alphabets[i].size(); ++l) map[l] = alphabets[i].add(d.alphabets[i].label_of(l));
    for (auto& s : out.sequences)
      for (int& v : s.label_rows[i]) v = map.at(v);
  }
  out.alphabets = std::move(alphabets);
  return out;
}

void validate(const SyntheticSpec& spec) {
  if (spec.n == 0) throw Error("synthetic: n must be positive");
  if (spec.min_length == 0 || spec.min_length > spec.max_length)
    throw Error("synthetic: lengths need 1 <= min <= max");
  if (spec.labels_y < 2 || spec.labels_z < 2) throw Error("synthetic: label set sizes must be at least 2");
  if (spec.words_per_label < 1) throw Error("synthetic: words_per_label must be positive");
  if (!(spec.rho >= 0.0 && spec.rho <= 1.0)) throw Error("synthetic: rho must lie in [0, 1]");
  if (!(spec.emission_strength >= 0.0 && spec.emission_strength <= 1.0))
    throw Error("synthetic: emission strength must lie in [0, 1]");
  if (!std::isfinite(spec.transition_strength)) throw Error("synthetic: transition strength must be finite");
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  std::mt19937_64 rng(spec.seed);
  const int ny = spec.labels_y, nz = spec.labels_z;

  Dataset d;
  std::vector<std::string> ylabels, zlabels;
  for (int i = 0; i < ny; ++i) ylabels.push_back("Y" + std::to_string(i));
  for (int i = 0; i < nz; ++i) zlabels.push_back("Z" + std::to_string(i));
  d.alphabets = {LabelAlphabet(task_label_name(0), ylabels), LabelAlphabet(task_label_name(1), zlabels)};

  // Each label prefers the next one: logit transition_strength vs 0 elsewhere.
  std::vector<std::discrete_distribution<int>> next;
  for (int a = 0; a < ny; ++a) {
    std::vector<double> w(ny, 1.0);
    w[(a + 1) % ny] = std::exp(spec.transition_strength);
    next.emplace_back(w.begin(), w.end());
  }
  std::uniform_int_distribution<std::size_t> length(spec.min_length, spec.max_length);
  std::uniform_int_distribution<int> any_y(0, ny - 1), other_y(0, ny - 2), any_z(0, nz - 1);
  std::uniform_int_distribution<int> word(0, spec.words_per_label - 1);
  std::bernoulli_distribution own_word(spec.emission_strength), mapped(spec.rho);

  for (std::size_t s = 0; s < spec.n; ++s) {
    TaskedSequence seq;
    seq.label_rows.resize(2);
    const std::size_t T = length(rng);
    int y = any_y(rng);
    for (std::size_t t = 0; t < T; ++t) {
      if (t > 0) y = next[y](rng);
      int source = y;
      if (!own_word(rng)) {
        source = other_y(rng);
        if (source >= y) ++source;
      }
      const int z = mapped(rng) ? y % nz : any_z(rng);
      seq.tokens.push_back(Token{"w" + std::to_string(source) + "_" + std::to_string(word(rng)), {}});
      seq.label_rows[0].push_back(y);
      seq.label_rows[1].push_back(z);
    }
    d.sequences.push_back(std::move(seq));
  }
  return d;
}

namespace {

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

Dataset pick(const Dataset& d, std::vector<std::size_t> which) {
  std::sort(which.begin(), which.end());
  Dataset out;
  out.alphabets = d.alphabets;
  for (std::size_t i : which) out.sequences.push_back(d.sequences[i]);
  return out;
}

std::size_t portion(std::size_t n, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw Error("fraction must lie in (0, 1]");
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

}  // namespace

std::pair<Dataset, Dataset> split(const Dataset& d, double train_fraction, std::uint64_t seed) {
  const std::size_t n_train = portion(d.size(), train_fraction);
  if (n_train == 0) throw Error("split leaves no training sequences");
  if (n_train >= d.size()) throw Error("split leaves no test sequences");
  auto idx = shuffled_indices(d.size(), seed);
  std::vector<std::size_t> a(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> b(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  return {pick(d, std::move(a)), pick(d, std::move(b))};
}

Dataset head(const Dataset& d, std::size_t n) {
  if (n == 0) throw Error("head keeps no sequences");
  Dataset out;
  out.alphabets = d.alphabets;
  out.sequences.assign(d.sequences.begin(), d.sequences.begin() + static_cast<std::ptrdiff_t>(std::min(n, d.size())));
  return out;
}

Dataset subsample(const Dataset& d, double fraction, std::uint64_t seed) {
  const std::size_t n = portion(d.size(), fraction);
  if (n == 0) throw Error("subsample keeps no sequences");
  auto idx = shuffled_indices(d.size(), seed);
  idx.resize(n);
  return pick(d, std::move(idx));
}

void save_model(const ModelArtifact& m, const std::string& path) {
  auto out = open_out(path);
  save_model(m, out);
  if (!out) throw Error("failed writing '" + path + "'");
}

void save_model(const ModelArtifact& m, std::ostream& out) {
  if (m.alphabets.size() != 2) throw Error("model artifacts hold exactly two alphabets");
  out << kMagic << ' ' << m.version << '\n';
  out << "method " << method_name(m.method) << '\n';
  out << "variant " << variant_name(m.params.variant()) << '\n';

  out << "templates " << m.templates.size() << '\n';
  for (const auto& t : m.templates) out << format_template(t) << '\n';

  for (const auto& a : m.alphabets) {
    out << "alphabet " << escape(a.task_name()) << ' ' << a.size() << '\n';
    for (const auto& l : a.labels()) out << escape(l) << '\n';
  }

  for (std::size_t b = 0; b < kBlockCount; ++b) {
    const auto& keys = m.index.keys(static_cast<Block>(b));
    out << "features " << block_name(static_cast<Block>(b)) << ' ' << keys.size() << '\n';
    for (const auto& k : keys)
      out << escape(k.template_id) << ' ' << escape(k.observation) << ' ' << k.first << ' ' << k.second << '\n';
  }

  for (BlockId b : m.params.blocks()) {
    const auto vals = m.params.block(b);
    out << "params " << block_id_name(b) << ' ' << vals.size() << '\n';
    for (double v : vals) out << format_double(v) << '\n';
  }
  out << "end\n";
}

ModelArtifact load_model(const std::string& path) {
  auto in = open_in(path);
  return load_model(in);
}

ModelArtifact load_model(std::istream& in) {
  ModelReader r(in);
  ModelArtifact m;

  std::vector<std::string> head;
  try {
    head = r.fields();
  } catch (const Error&) {
    throw Error("not a model file: missing header");
  }
  if (head.size() != 2 || head[0] != kMagic) throw Error("not a model file: corrupted header");
  m.version = r.to_int(head[1]);
  if (m.version != kModelFormatVersion)
    throw VersionMismatch("model format version " + head[1] + " is not supported (expected " +
                          std::to_string(kModelFormatVersion) + ")");

  const auto method_field = r.expect("method", 2)[1];
  try {
    m.method = parse_method(method_field);
  } catch (const Error& e) {
    r.fail(e.what());
  }
  const auto variant_field = r.expect("variant", 2)[1];
  if (variant_field != variant_name(method_variant(m.method)))
    r.fail("variant '" + variant_field + "' does not match method '" + method_name(m.method) + "'");

  const std::size_t n_templates = r.to_size(r.expect("templates", 2)[1]);
  std::string text;
  for (std::size_t i = 0; i < n_templates; ++i) {
    auto f = r.fields();
    for (std::size_t j = 0; j < f.size(); ++j) text += (j ? " " : "") + f[j];
    text += '\n';
  }
  std::istringstream tin(text);
  m.templates = parse_templates(tin);
  if (m.templates.size() != n_templates) r.fail("template count mismatch");

  for (int a = 0; a < 2; ++a) {
    auto f = r.expect("alphabet", 3);
    const std::size_t n = r.to_size(f[2]);
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < n; ++i) {
      auto lf = r.fields();
      if (lf.size() != 1) r.fail("expected one label per line");
      labels.push_back(unescape(lf[0]));
    }
    m.alphabets.emplace_back(unescape(f[1]), std::move(labels));
  }

  m.index = FeatureIndex({m.alphabets[0].size(), m.alphabets[1].size()});
  for (std::size_t b = 0; b < kBlockCount; ++b) {
    auto f = r.expect("features", 3);
    if (f[1] != block_name(static_cast<Block>(b))) r.fail("expected feature block '" + std::string(block_name(static_cast<Block>(b))) + "'");
    const std::size_t n = r.to_size(f[2]);
    for (std::size_t i = 0; i < n; ++i) {
      auto kf = r.fields();
      if (kf.size() != 4) r.fail("expected 'template observation first second'");
      FeatureKey key{unescape(kf[0]), unescape(kf[1]), r.to_int(kf[2]), r.to_int(kf[3])};
      if (m.index.add(static_cast<Block>(b), key) != static_cast<int>(i)) r.fail("duplicate feature key");
    }
  }
  m.index.freeze();

  m.params = ModelParameters(method_variant(m.method), m.index);
  for (BlockId b : m.params.blocks()) {
    auto f = r.expect("params", 3);
    if (f[1] != block_id_name(b)) r.fail("expected parameter block '" + std::string(block_id_name(b)) + "'");
    const std::size_t n = r.to_size(f[2]);
    auto vals = m.params.block(b);
    if (n != vals.size()) r.fail("parameter block '" + f[1] + "' has the wrong length");
    for (std::size_t i = 0; i < n; ++i) {
      auto vf = r.fields();
      if (vf.size() != 1) r.fail("expected one value per line");
      vals[i] = r.to_double(vf[0]);
    }
  }
  r.expect("end", 1);
  return m;
}

}  // namespace mtcrf
