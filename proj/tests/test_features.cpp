#include <doctest.h>

#include <set>
#include <sstream>

#include "helpers.hpp"
#include "mtcrf/features.hpp"

using namespace mtcrf;

namespace {

Dataset the_cat() {
  Dataset d;
  d.alphabets = {LabelAlphabet("pos", {"DT", "NN"}), LabelAlphabet("chunk", {"B", "I"})};
  d.sequences.push_back({{{"The", {}}, {"cat", {}}}, {{0, 1}, {0, 1}}});
  return d;
}

std::vector<FeatureTemplate> bias_only() {
  return {{"trans.bias", Family::Transition, -1, LabelBinding::Pair, "bias"},
          {"dep.bias", Family::Dependency, -1, LabelBinding::Pair, "bias"}};
}

std::vector<std::string> obs(const std::string& extractor, const TaskedSequence& s, std::size_t t) {
  FeatureTemplate tpl{"x", Family::Transition, -1, LabelBinding::Current, extractor};
  return observations(tpl, s, t);
}

}  // namespace

TEST_CASE("bias keys for a two-token sentence") {
  // Per task: prev in {START, DT, NN} times cur in {DT, NN}; dependency: all 2x2 pairs.
  const auto idx = build_index(the_cat(), bias_only());
  CHECK(idx.block_size(Block::TransitionY) == 6);
  CHECK(idx.block_size(Block::TransitionZ) == 6);
  CHECK(idx.block_size(Block::Dependency) == 4);
  CHECK(idx.dimension() == 16);
  CHECK(idx.block_offset(Block::TransitionZ) == 6);
  CHECK(idx.block_offset(Block::Dependency) == 12);
  CHECK(idx.find(Block::TransitionY, {"trans.bias", "bias", kStartLabel, 1}).has_value());
  CHECK(idx.find(Block::Dependency, {"dep.bias", "bias", 1, 0}).has_value());
  CHECK_FALSE(idx.find(Block::Dependency, {"dep.bias", "bias", 2, 0}).has_value());
}

TEST_CASE("firing table of the two-token sentence matches hand enumeration") {
  const auto d = the_cat();
  const auto tpls = bias_only();
  const auto idx = build_index(d, tpls);
  const auto ft = extract(d.sequences[0], idx, tpls);
  REQUIRE(ft.length == 2);
  for (int task = 0; task < 2; ++task) {
    const Block b = transition_block(task);
    REQUIRE(ft.transition[task].size() == 2);
    const auto& t0 = ft.transition[task][0];
    CHECK(t0.rows() == 1);
    CHECK(t0.cols() == 2);
    for (int c = 0; c < 2; ++c) {
      const auto ids = t0.at(0, c);
      REQUIRE(ids.size() == 1);
      CHECK(ids[0] == *idx.find(b, {"trans.bias", "bias", kStartLabel, c}));
    }
    const auto& t1 = ft.transition[task][1];
    CHECK(t1.rows() == 2);
    for (int p = 0; p < 2; ++p)
      for (int c = 0; c < 2; ++c) {
        const auto ids = t1.at(p, c);
        REQUIRE(ids.size() == 1);
        CHECK(ids[0] == *idx.find(b, {"trans.bias", "bias", p, c}));
      }
  }
  for (std::size_t t = 0; t < 2; ++t)
    for (int a = 0; a < 2; ++a)
      for (int c = 0; c < 2; ++c) {
        const auto ids = ft.dependency[t].at(a, c);
        REQUIRE(ids.size() == 1);
        CHECK(ids[0] == *idx.find(Block::Dependency, {"dep.bias", "bias", a, c}));
      }
}

TEST_CASE("index construction preconditions and determinism") {
  CHECK_THROWS_AS(build_index(the_cat(), std::vector<FeatureTemplate>{}), Error);
  const auto tpls = default_templates();
  const auto a = build_index(the_cat(), tpls);
  const auto b = build_index(the_cat(), tpls);
  CHECK(a == b);
  for (std::size_t k = 0; k < kBlockCount; ++k) CHECK(a.keys(static_cast<Block>(k)) == b.keys(static_cast<Block>(k)));
}

TEST_CASE("frozen index never grows") {
  auto idx = build_index(the_cat(), bias_only());
  CHECK(idx.frozen());
  CHECK_THROWS_AS(idx.add(Block::Dependency, {"dep.bias", "unseen", 0, 0}), Error);
  TaskedSequence unseen{{{"dog", {}}, {"barks", {}}, {"loudly", {}}}, {}};
  const auto before = idx.dimension();
  const auto ft = extract(unseen, idx, default_templates());
  CHECK(idx.dimension() == before);
  CHECK(ft.length == 3);
}

TEST_CASE("attribute template fires for every label pair it binds") {
  Dataset d;
  d.alphabets = {LabelAlphabet("y", {"A", "B"}), LabelAlphabet("z", {"X", "Y", "W"})};
  d.sequences.push_back({{{"Paris", {{"init_caps", "true"}}}, {"is", {{"init_caps", "false"}}}}, {{0, 1}, {2, 0}}});
  const std::vector<FeatureTemplate> tpls = {
      {"t.cap", Family::Transition, 0, LabelBinding::Current, "attr:init_caps"},
      {"d.cap", Family::Dependency, -1, LabelBinding::Pair, "attr:init_caps"},
  };
  const auto idx = build_index(d, tpls);
  const auto ft = extract(d.sequences[0], idx, tpls);
  const int cur_key = *idx.find(Block::TransitionY, {"t.cap", "init_caps=false", kAnyLabel, 1});
  // Position 1, current label B: fires whatever the previous label.
  for (int p = 0; p < 2; ++p) {
    const auto ids = ft.transition[0][1].at(p, 1);
    CHECK(std::find(ids.begin(), ids.end(), cur_key) != ids.end());
    CHECK(ft.transition[0][1].at(p, 0).empty());
  }
  // Dependency template fires only for the gold pair seen in training.
  const int dep_key = *idx.find(Block::Dependency, {"d.cap", "init_caps=true", 0, 2});
  CHECK(ft.dependency[0].at(0, 2).size() == 1);
  CHECK(ft.dependency[0].at(0, 2)[0] == dep_key);
  CHECK(ft.dependency[0].at(1, 2).empty());
  // The task-1-only template creates nothing for task 2.
  CHECK(idx.block_size(Block::TransitionZ) == 0);
}

TEST_CASE("first position uses the start label as previous") {
  Dataset d = the_cat();
  const std::vector<FeatureTemplate> tpls = {{"t.word", Family::Transition, -1, LabelBinding::Pair, "word"}};
  const auto idx = build_index(d, tpls);
  CHECK(idx.find(Block::TransitionY, {"t.word", "w=The", kStartLabel, 0}).has_value());
  CHECK(idx.find(Block::TransitionY, {"t.word", "w=cat", 0, 1}).has_value());
  const auto ft = extract(d.sequences[0], idx, tpls);
  CHECK(ft.transition[0][0].rows() == 1);
  CHECK(ft.transition[0][0].at(0, 0).size() == 1);
  CHECK(ft.transition[0][0].at(0, 1).empty());
}

TEST_CASE("observation extractors") {
  TaskedSequence s{{{"Über", {}}, {"USA2", {}}, {"x", {{"pos", "NN"}}}}, {}};
  CHECK(obs("bias", s, 0) == std::vector<std::string>{"bias"});
  CHECK(obs("word", s, 0) == std::vector<std::string>{"w=Über"});
  CHECK(obs("lower", s, 1) == std::vector<std::string>{"lw=usa2"});
  CHECK(obs("prefix:1", s, 0) == std::vector<std::string>{"p1=Ü"});
  CHECK(obs("suffix:3", s, 0) == std::vector<std::string>{"s3=ber"});
  CHECK(obs("prefix:3", s, 2).empty());
  CHECK(obs("init_caps", s, 1) == std::vector<std::string>{"init_caps"});
  CHECK(obs("init_caps", s, 2).empty());
  CHECK(obs("all_caps", s, 1) == std::vector<std::string>{"all_caps"});
  CHECK(obs("has_digit", s, 1) == std::vector<std::string>{"has_digit"});
  CHECK(obs("has_digit", s, 0).empty());
  CHECK(obs("word@-1", s, 0) == std::vector<std::string>{"w-1=<BOS>"});
  CHECK(obs("word@+1", s, 2) == std::vector<std::string>{"w+1=<EOS>"});
  CHECK(obs("word@+1", s, 0) == std::vector<std::string>{"w+1=USA2"});
  CHECK(obs("attr:pos", s, 2) == std::vector<std::string>{"pos=NN"});
  CHECK(obs("attr:pos", s, 0).empty());
  CHECK_THROWS_AS(obs("nonsense", s, 0), Error);
}

TEST_CASE("template files") {
  std::istringstream in(
      "# comment\n"
      "tb transition pair bias\n"
      "\n"
      "t1 transition:1 cur suffix:2  # trailing comment\n"
      "db dependency pair bias\n");
  const auto t = parse_templates(in);
  REQUIRE(t.size() == 3);
  CHECK(t[1].task == 0);
  CHECK(t[1].binding == LabelBinding::Current);
  CHECK(t[1].extractor == "suffix:2");
  CHECK(format_template(t[1]) == "t1 transition:1 cur suffix:2");

  std::ostringstream out;
  for (const auto& x : default_templates()) out << format_template(x) << '\n';
  std::istringstream back(out.str());
  CHECK(parse_templates(back) == default_templates());

  std::istringstream dup("a transition pair bias\na dependency pair bias\n");
  CHECK_THROWS_AS(parse_templates(dup), Error);
  std::istringstream cur_dep("a dependency cur bias\n");
  CHECK_THROWS_AS(parse_templates(cur_dep), Error);
  std::istringstream bad("a transition pair\n");
  CHECK_THROWS_AS(parse_templates(bad), Error);
  std::istringstream empty("# nothing\n");
  CHECK_THROWS_AS(parse_templates(empty), Error);
}

TEST_CASE("extraction properties on random data") {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    auto inst = testutil::random_instance(rng, 3, 1, 5, 3, 2);
    for (std::size_t s = 0; s < inst.data.size(); ++s) {
      const auto& seq = inst.data.sequences[s];
      const auto ft = extract(seq, inst.index, inst.templates);
      CHECK(ft == inst.corpus[s].firings);  // deterministic
      // Closure: ids stay inside their block.
      for (int task = 0; task < 2; ++task)
        for (const auto& cells : ft.transition[task])
          for (int id : cells.all_ids()) CHECK((id >= 0 && static_cast<std::size_t>(id) < ft.block_sizes[task]));
      for (const auto& cells : ft.dependency)
        for (int id : cells.all_ids()) CHECK((id >= 0 && static_cast<std::size_t>(id) < ft.block_sizes[2]));
      // Completeness: every gold clique has at least one firing.
      for (int task = 0; task < 2; ++task) {
        const auto& row = seq.label_rows[task];
        for (std::size_t t = 0; t < seq.length(); ++t)
          CHECK_FALSE(ft.transition[task][t].at(t == 0 ? 0 : row[t - 1], row[t]).empty());
      }
      for (std::size_t t = 0; t < seq.length(); ++t)
        CHECK_FALSE(ft.dependency[t].at(seq.label_rows[0][t], seq.label_rows[1][t]).empty());
    }
  }
}

TEST_CASE("default template set on a real sentence") {
  Dataset d = the_cat();
  const auto tpls = default_templates();
  CHECK(tpls.size() == 28);
  const auto idx = build_index(d, tpls);
  // Gold-fired keys are present with their label binding.
  CHECK(idx.find(Block::TransitionY, {"trans.suf2", "s2=at", kAnyLabel, 1}).has_value());
  CHECK(idx.find(Block::Dependency, {"dep.icap", "init_caps", 0, 0}).has_value());
  CHECK_FALSE(idx.find(Block::Dependency, {"dep.icap", "init_caps", 1, 1}).has_value());
}
