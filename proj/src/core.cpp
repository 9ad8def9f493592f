#include "mtcrf/core.hpp"

#include <set>
#include <sstream>

namespace mtcrf {

LabelAlphabet::LabelAlphabet(std::string task_name, std::vector<std::string> labels)
    : task_name_(std::move(task_name)) {
  for (auto& l : labels) {
    if (l.empty()) throw Error("alphabet '" + task_name_ + "': empty label");
    if (index_.count(l)) throw Error("alphabet '" + task_name_ + "': duplicate label '" + l + "'");
    add(l);
  }
}

int LabelAlphabet::add(std::string_view label) {
  if (label.empty()) throw Error("alphabet '" + task_name_ + "': empty label");
  std::string key(label);
  auto it = index_.find(key);
  if (it != index_.end()) return it->second;
  int id = size();
  labels_.push_back(key);
  index_.emplace(std::move(key), id);
  return id;
}

std::optional<int> LabelAlphabet::find(std::string_view label) const {
  auto it = index_.find(std::string(label));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int LabelAlphabet::index_of(std::string_view label) const {
  auto id = find(label);
  if (!id) throw Error("alphabet '" + task_name_ + "': unknown label '" + std::string(label) + "'");
  return *id;
}

const std::string& LabelAlphabet::label_of(int index) const {
  if (index < 0 || index >= size())
    throw Error("alphabet '" + task_name_ + "': label index " + std::to_string(index) + " out of range");
  return labels_[index];
}

const std::string* Token::attribute(std::string_view name) const {
  for (const auto& [k, v] : attributes)
    if (k == name) return &v;
  return nullptr;
}

std::size_t Dataset::token_count() const {
  std::size_t n = 0;
  for (const auto& s : sequences) n += s.length();
  return n;
}

std::vector<std::string> validate_dataset(const Dataset& d) {
  std::vector<std::string> out;
  auto report = [&](std::size_t i, const std::string& why) {
    out.push_back("sequence " + std::to_string(i) + ": " + why);
  };
  if (d.alphabets.empty()) out.emplace_back("dataset has no label alphabets");
  for (std::size_t a = 0; a < d.alphabets.size(); ++a)
    if (d.alphabets[a].size() < 1) out.push_back("alphabet " + std::to_string(a) + " is empty");
  if (d.sequences.empty()) out.emplace_back("dataset has no sequences");

  const std::size_t k = d.alphabets.size();
  for (std::size_t i = 0; i < d.sequences.size(); ++i) {
    const auto& s = d.sequences[i];
    const std::size_t T = s.length();
    if (T == 0) report(i, "empty sequence");
    for (std::size_t t = 0; t < T; ++t) {
      const auto& tok = s.tokens[t];
      if (tok.surface.empty()) report(i, "token " + std::to_string(t) + " has an empty surface");
      std::set<std::string_view> names;
      for (const auto& [name, value] : tok.attributes)
        if (!names.insert(name).second)
          report(i, "token " + std::to_string(t) + " repeats attribute '" + name + "'");
    }
    if (s.label_rows.size() != k) {
      report(i, "has " + std::to_string(s.label_rows.size()) + " label rows, expected " + std::to_string(k));
      continue;
    }
    for (std::size_t r = 0; r < k; ++r) {
      const auto& row = s.label_rows[r];
      if (row.size() != T) {
        report(i, "label row " + std::to_string(r) + " has " + std::to_string(row.size()) +
                      " entries, expected " + std::to_string(T));
        continue;
      }
      for (std::size_t t = 0; t < T; ++t)
        if (row[t] < 0 || row[t] >= d.alphabets[r].size())
          report(i, "label row " + std::to_string(r) + " position " + std::to_string(t) + ": index " +
                        std::to_string(row[t]) + " outside alphabet of size " +
                        std::to_string(d.alphabets[r].size()));
    }
  }
  return out;
}

void require_valid(const Dataset& d) {
  auto v = validate_dataset(d);
  if (v.empty()) return;
  std::ostringstream msg;
  msg << "invalid dataset (" << v.size() << " violation" << (v.size() == 1 ? "" : "s") << ")";
  for (std::size_t i = 0; i < v.size() && i < 5; ++i) msg << "; " << v[i];
  throw Error(msg.str());
}

}  // namespace mtcrf
