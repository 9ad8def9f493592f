#include "mtcrf/features.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

namespace mtcrf {

namespace {

constexpr char kSep = '\x1f';

std::string lookup_key(const std::string& tid, const std::string& obs) {
  std::string k;
  k.reserve(tid.size() + obs.size() + 1);
  k += tid;
  k += kSep;
  k += obs;
  return k;
}

std::string full_key(const FeatureKey& key) {
  std::string k = lookup_key(key.template_id, key.observation);
  k += kSep;
  k += std::to_string(key.first);
  k += kSep;
  k += std::to_string(key.second);
  return k;
}

// Byte offsets of UTF-8 code point starts.
std::vector<std::size_t> code_points(const std::string& s) {
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < s.size(); ++i)
    if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) starts.push_back(i);
  return starts;
}

bool is_upper(char c) { return std::isupper(static_cast<unsigned char>(c)) != 0; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

struct Rule {
  enum Kind { Bias, Word, Lower, Prefix, Suffix, InitCaps, AllCaps, HasDigit, PrevWord, NextWord, Attribute } kind;
  int n = 0;
  std::string name = {};
};

Rule parse_rule(const std::string& spec) {
  auto affix = [&](const std::string& head, Rule::Kind kind) -> std::optional<Rule> {
    if (spec.rfind(head, 0) != 0) return std::nullopt;
    std::string num = spec.substr(head.size());
    if (num.empty() || num.size() > 2 || !std::all_of(num.begin(), num.end(), is_digit))
      throw Error("bad affix length in extractor '" + spec + "'");
    int n = std::stoi(num);
    if (n < 1) throw Error("bad affix length in extractor '" + spec + "'");
    return Rule{kind, n, {}};
  };
  if (spec == "bias") return {Rule::Bias};
  if (spec == "word") return {Rule::Word};
  if (spec == "lower") return {Rule::Lower};
  if (spec == "init_caps") return {Rule::InitCaps};
  if (spec == "all_caps") return {Rule::AllCaps};
  if (spec == "has_digit") return {Rule::HasDigit};
  if (spec == "word@-1") return {Rule::PrevWord};
  if (spec == "word@+1") return {Rule::NextWord};
  if (auto r = affix("prefix:", Rule::Prefix)) return *r;
  if (auto r = affix("suffix:", Rule::Suffix)) return *r;
  if (spec.rfind("attr:", 0) == 0 && spec.size() > 5) return {Rule::Attribute, 0, spec.substr(5)};
  throw Error("unknown extractor '" + spec + "'");
}

bool has_whitespace(const std::string& s) {
  return std::any_of(s.begin(), s.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; });
}

}  // namespace

std::vector<FeatureTemplate> default_templates() {
  const std::vector<std::pair<std::string, std::string>> obs = {
      {"word", "word"},       {"lower", "lower"},       {"pre1", "prefix:1"},  {"pre2", "prefix:2"},
      {"pre3", "prefix:3"},   {"suf1", "suffix:1"},     {"suf2", "suffix:2"},  {"suf3", "suffix:3"},
      {"icap", "init_caps"},  {"acap", "all_caps"},     {"digit", "has_digit"}, {"prev", "word@-1"},
      {"next", "word@+1"},
  };
  std::vector<FeatureTemplate> out;
  out.push_back({"trans.bias", Family::Transition, -1, LabelBinding::Pair, "bias"});
  out.push_back({"dep.bias", Family::Dependency, -1, LabelBinding::Pair, "bias"});
  for (const auto& [name, rule] : obs) out.push_back({"trans." + name, Family::Transition, -1, LabelBinding::Current, rule});
  for (const auto& [name, rule] : obs) out.push_back({"dep." + name, Family::Dependency, -1, LabelBinding::Pair, rule});
  return out;
}

void validate_templates(std::span<const FeatureTemplate> templates) {
  if (templates.empty()) throw Error("no templates");
  std::set<std::string> ids;
  for (const auto& t : templates) {
    if (t.id.empty() || has_whitespace(t.id)) throw Error("template id must be non-empty without whitespace");
    if (!ids.insert(t.id).second) throw Error("duplicate template id '" + t.id + "'");
    parse_rule(t.extractor);
    if (t.family == Family::Dependency && t.binding != LabelBinding::Pair)
      throw Error("dependency template '" + t.id + "' must bind both labels");
    if (t.family == Family::Transition && (t.task < -1 || t.task > 1))
      throw Error("transition template '" + t.id + "' names an unknown task");
  }
}

std::string format_template(const FeatureTemplate& t) {
  std::string family = t.family == Family::Dependency ? "dependency"
                       : t.task < 0                   ? "transition"
                                                      : "transition:" + std::to_string(t.task + 1);
  return t.id + " " + family + " " + (t.binding == LabelBinding::Pair ? "pair" : "cur") + " " + t.extractor;
}

std::vector<FeatureTemplate> parse_templates(std::istream& in) {
  std::vector<FeatureTemplate> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::vector<std::string> f;
    for (std::string w; fields >> w;) f.push_back(w);
    if (f.empty()) continue;
    auto fail = [&](const std::string& why) { throw Error("templates line " + std::to_string(lineno) + ": " + why); };
    if (f.size() != 4) fail("expected 4 fields (id family binding extractor)");
    FeatureTemplate t;
    t.id = f[0];
    if (f[1] == "dependency") {
      t.family = Family::Dependency;
    } else if (f[1] == "transition") {
      t.family = Family::Transition;
    } else if (f[1] == "transition:1" || f[1] == "transition:2") {
      t.family = Family::Transition;
      t.task = f[1].back() - '1';
    } else {
      fail("unknown family '" + f[1] + "'");
    }
    if (f[2] == "pair")
      t.binding = LabelBinding::Pair;
    else if (f[2] == "cur")
      t.binding = LabelBinding::Current;
    else
      fail("unknown binding '" + f[2] + "'");
    t.extractor = f[3];
    try {
      parse_rule(t.extractor);
    } catch (const Error& e) {
      fail(e.what());
    }
    out.push_back(std::move(t));
  }
  validate_templates(out);
  return out;
}

std::vector<FeatureTemplate> load_templates(const std::string& path) {
  if (path == "default") return default_templates();
  std::ifstream in(path);
  if (!in) throw Error("cannot open template file '" + path + "'");
  return parse_templates(in);
}

std::vector<std::string> observations(const FeatureTemplate& tpl, const TaskedSequence& seq, std::size_t t) {
  const Rule rule = parse_rule(tpl.extractor);
  const std::string& w = seq.tokens[t].surface;
  switch (rule.kind) {
    case Rule::Bias:
      return {"bias"};
    case Rule::Word:
      return {"w=" + w};
    case Rule::Lower: {
      std::string l = w;
      for (auto& c : l) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      return {"lw=" + l};
    }
    case Rule::Prefix:
    case Rule::Suffix: {
      auto cps = code_points(w);
      if (static_cast<int>(cps.size()) < rule.n) return {};
      std::string tag = (rule.kind == Rule::Prefix ? "p" : "s") + std::to_string(rule.n) + "=";
      if (rule.kind == Rule::Prefix) {
        std::size_t end = static_cast<int>(cps.size()) == rule.n ? w.size() : cps[rule.n];
        return {tag + w.substr(0, end)};
      }
      return {tag + w.substr(cps[cps.size() - rule.n])};
    }
    case Rule::InitCaps:
      return is_upper(w.front()) ? std::vector<std::string>{"init_caps"} : std::vector<std::string>{};
    case Rule::AllCaps: {
      bool letters = false, all = true;
      for (char c : w) {
        if (!is_alpha(c)) continue;
        letters = true;
        all = all && is_upper(c);
      }
      return letters && all ? std::vector<std::string>{"all_caps"} : std::vector<std::string>{};
    }
    case Rule::HasDigit:
      return std::any_of(w.begin(), w.end(), is_digit) ? std::vector<std::string>{"has_digit"}
                                                       : std::vector<std::string>{};
    case Rule::PrevWord:
      return {"w-1=" + (t == 0 ? std::string("<BOS>") : seq.tokens[t - 1].surface)};
    case Rule::NextWord:
      return {"w+1=" + (t + 1 == seq.length() ? std::string("<EOS>") : seq.tokens[t + 1].surface)};
    case Rule::Attribute:
      if (const std::string* v = seq.tokens[t].attribute(rule.name)) return {rule.name + "=" + *v};
      return {};
  }
  return {};
}

const char* block_name(Block b) {
  switch (b) {
    case Block::TransitionY: return "transition_y";
    case Block::TransitionZ: return "transition_z";
    case Block::Dependency: return "dependency";
  }
  return "?";
}

FeatureIndex::FeatureIndex(std::array<int, 2> label_counts) : label_counts_(label_counts) {}

int FeatureIndex::add(Block b, const FeatureKey& key) {
  if (frozen_) throw Error("feature index is frozen");
  const int bi = static_cast<int>(b);
  auto [it, inserted] = lookup_[bi].emplace(full_key(key), static_cast<int>(keys_[bi].size()));
  if (inserted) {
    keys_[bi].push_back(key);
    by_observation_[bi][lookup_key(key.template_id, key.observation)].push_back({key.first, key.second, it->second});
  }
  return it->second;
}

void FeatureIndex::freeze() { frozen_ = true; }

std::optional<int> FeatureIndex::find(Block b, const FeatureKey& key) const {
  const auto& m = lookup_[static_cast<int>(b)];
  auto it = m.find(full_key(key));
  if (it == m.end()) return std::nullopt;
  return it->second;
}

std::span<const FeatureIndex::Entry> FeatureIndex::entries(Block b, const std::string& template_id,
                                                           const std::string& observation) const {
  const auto& m = by_observation_[static_cast<int>(b)];
  auto it = m.find(lookup_key(template_id, observation));
  if (it == m.end()) return {};
  return it->second;
}

std::size_t FeatureIndex::block_offset(Block b) const {
  std::size_t off = 0;
  for (int i = 0; i < static_cast<int>(b); ++i) off += keys_[i].size();
  return off;
}

std::size_t FeatureIndex::dimension() const {
  std::size_t n = 0;
  for (const auto& k : keys_) n += k.size();
  return n;
}

FeatureIndex build_index(const Dataset& d, std::span<const FeatureTemplate> templates) {
  validate_templates(templates);
  require_valid(d);
  if (d.task_count() != 2) throw Error("feature indexing requires exactly two tasks");

  FeatureIndex idx({d.alphabets[0].size(), d.alphabets[1].size()});
  const auto ny = d.alphabets[0].size(), nz = d.alphabets[1].size();

  // Unconditioned keys over every label combination.
  for (const auto& tpl : templates) {
    if (tpl.extractor != "bias") continue;
    if (tpl.family == Family::Dependency) {
      for (int a = 0; a < ny; ++a)
        for (int b = 0; b < nz; ++b) idx.add(Block::Dependency, {tpl.id, "bias", a, b});
      continue;
    }
    for (int task = 0; task < 2; ++task) {
      if (!tpl.applies_to(task)) continue;
      const int n = idx.label_count(task);
      for (int cur = 0; cur < n; ++cur) {
        if (tpl.binding == LabelBinding::Current) {
          idx.add(transition_block(task), {tpl.id, "bias", kAnyLabel, cur});
          continue;
        }
        for (int prev = kStartLabel; prev < n; ++prev) idx.add(transition_block(task), {tpl.id, "bias", prev, cur});
      }
    }
  }

  for (const auto& seq : d.sequences) {
    for (std::size_t t = 0; t < seq.length(); ++t) {
      for (const auto& tpl : templates) {
        if (tpl.extractor == "bias") continue;
        for (const auto& obs : observations(tpl, seq, t)) {
          if (tpl.family == Family::Dependency) {
            idx.add(Block::Dependency, {tpl.id, obs, seq.label_rows[0][t], seq.label_rows[1][t]});
            continue;
          }
          for (int task = 0; task < 2; ++task) {
            if (!tpl.applies_to(task)) continue;
            const auto& row = seq.label_rows[task];
            int prev = tpl.binding == LabelBinding::Current ? kAnyLabel : (t == 0 ? kStartLabel : row[t - 1]);
            idx.add(transition_block(task), {tpl.id, obs, prev, row[t]});
          }
        }
      }
    }
  }
  idx.freeze();
  return idx;
}

CellFirings::CellFirings(std::size_t rows, std::size_t cols, const std::vector<std::vector<int>>& cells)
    : rows_(rows), cols_(cols) {
  offsets_.reserve(cells.size() + 1);
  for (const auto& c : cells) {
    ids_.insert(ids_.end(), c.begin(), c.end());
    offsets_.push_back(static_cast<std::uint32_t>(ids_.size()));
  }
}

FiringTable extract(const TaskedSequence& seq, const FeatureIndex& idx, std::span<const FeatureTemplate> templates) {
  if (!idx.frozen()) throw Error("extract requires a frozen feature index");
  FiringTable ft;
  ft.length = seq.length();
  ft.label_counts = idx.label_counts();
  for (std::size_t b = 0; b < kBlockCount; ++b) ft.block_sizes[b] = idx.block_size(static_cast<Block>(b));

  // Observations depend only on the tokens; compute them once per position.
  std::vector<std::vector<std::vector<std::string>>> obs(ft.length);
  for (std::size_t t = 0; t < ft.length; ++t) {
    obs[t].reserve(templates.size());
    for (const auto& tpl : templates) obs[t].push_back(observations(tpl, seq, t));
  }

  for (int task = 0; task < 2; ++task) {
    const auto n = static_cast<std::size_t>(ft.label_counts[task]);
    const Block block = transition_block(task);
    ft.transition[task].reserve(ft.length);
    for (std::size_t t = 0; t < ft.length; ++t) {
      const std::size_t rows = t == 0 ? 1 : n;
      std::vector<std::vector<int>> cells(rows * n);
      for (std::size_t k = 0; k < templates.size(); ++k) {
        const auto& tpl = templates[k];
        if (!tpl.applies_to(task)) continue;
        for (const auto& o : obs[t][k]) {
          for (const auto& e : idx.entries(block, tpl.id, o)) {
            if (e.first == kAnyLabel) {
              for (std::size_t r = 0; r < rows; ++r) cells[r * n + e.second].push_back(e.id);
            } else if (e.first == kStartLabel) {
              if (t == 0) cells[e.second].push_back(e.id);
            } else if (t > 0) {
              cells[e.first * n + e.second].push_back(e.id);
            }
          }
        }
      }
      ft.transition[task].emplace_back(rows, n, cells);
    }
  }

  const auto ny = static_cast<std::size_t>(ft.label_counts[0]), nz = static_cast<std::size_t>(ft.label_counts[1]);
  ft.dependency.reserve(ft.length);
  for (std::size_t t = 0; t < ft.length; ++t) {
    std::vector<std::vector<int>> cells(ny * nz);
    for (std::size_t k = 0; k < templates.size(); ++k) {
      const auto& tpl = templates[k];
      if (tpl.family != Family::Dependency) continue;
      for (const auto& o : obs[t][k])
        for (const auto& e : idx.entries(Block::Dependency, tpl.id, o)) cells[e.first * nz + e.second].push_back(e.id);
    }
    ft.dependency.emplace_back(ny, nz, cells);
  }
  return ft;
}

}  // namespace mtcrf
