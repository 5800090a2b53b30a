#include <doctest.h>

#include <random>

#include "d2cc/ccg_tree.hpp"
#include "d2cc/dep_tree.hpp"
#include "d2cc/errors.hpp"
#include "oracles.hpp"

using namespace d2cc;

namespace {

Category C(const char* s) { return parse_category(s); }

std::string conllu_line(int id, const std::string& form, const std::string& pos, int head, const std::string& label) {
  return std::to_string(id) + "\t" + form + "\t_\t" + pos + "\t_\t_\t" + std::to_string(head) + "\t" + label +
         "\t_\t_\n";
}

CCGTree leaf(int i, const char* cat) { return CCGTree::terminal(i, "w" + std::to_string(i), C(cat)); }

// Random binary bracketing over tokens [start, end] with arbitrary categories;
// Head First extraction does not look at categories.
CCGTree random_shape(std::mt19937_64& rng, int start, int end) {
  if (start == end) return leaf(start, "N");
  const int split = std::uniform_int_distribution<int>(start, end - 1)(rng);
  CCGTree t = CCGTree::binary(random_shape(rng, start, split), random_shape(rng, split + 1, end), C("NP"),
                              RuleKind::Unknown);
  if (rng() % 4 == 0) t = CCGTree::unary(t, C("NP"), RuleKind::Unknown);
  return t;
}

// Parent of token k: the lowest binary node covering both k-1 and k splits
// them apart, and k's head is the first token of its left child.
std::vector<int> parents_by_lowest_split(const CCGTree& t) {
  std::vector<int> out{0};
  for (int k = 2; k <= t.end(); ++k) {
    const CCGTree* node = &t;
    while (true) {
      if (node->kind() == CCGTree::Kind::Unary) {
        node = &node->child();
        continue;
      }
      const CCGTree& l = node->left();
      const CCGTree& r = node->right();
      if (l.end() == k - 1) {
        out.push_back(l.start());
        break;
      }
      node = k <= l.end() ? &l : &r;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("reading a two-token CoNLL-U sentence") {
  const std::string text = conllu_line(1, "dogs", "NOUN", 2, "nsubj") + conllu_line(2, "bark", "VERB", 0, "root");
  auto trees = read_conllu(text);
  REQUIRE(trees.size() == 1);
  CHECK(trees[0].size() == 2);
  CHECK(trees[0].heads == std::vector<int>{2, 0});
  CHECK(trees[0].words == std::vector<std::string>{"dogs", "bark"});
  CHECK(trees[0].pos == std::vector<std::string>{"NOUN", "VERB"});
  CHECK(trees[0].labels == std::vector<std::string>{"nsubj", "root"});
  CHECK(trees[0].children(2) == std::vector<int>{1});
}

TEST_CASE("cyclic heads are rejected with the sentence ordinal") {
  const std::string ok = conllu_line(1, "a", "X", 0, "root") + "\n";
  const std::string cyc = conllu_line(1, "a", "X", 2, "dep") + conllu_line(2, "b", "X", 1, "dep") +
                          conllu_line(3, "c", "X", 0, "root");
  try {
    read_conllu(ok + cyc);
    FAIL("expected a cycle error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("sentence 2") != std::string::npos);
    CHECK(std::string(e.what()).find("cycle") != std::string::npos);
  }
}

TEST_CASE("root count is checked") {
  CHECK_THROWS_AS(read_conllu(conllu_line(1, "a", "X", 0, "root") + conllu_line(2, "b", "X", 0, "root")), DataError);
  CHECK_THROWS_AS(read_conllu(conllu_line(1, "a", "X", 2, "dep") + conllu_line(2, "b", "X", 1, "dep")), DataError);
  CHECK_THROWS_AS(read_conllu(conllu_line(1, "a", "X", 5, "root")), DataError);
}

TEST_CASE("multiword and empty nodes are skipped") {
  const std::string text = "# text = dont go\n1-2\tdont\t_\t_\t_\t_\t_\t_\t_\t_\n" +
                           conllu_line(1, "do", "AUX", 3, "aux") + conllu_line(2, "nt", "PART", 3, "advmod") +
                           conllu_line(3, "go", "VERB", 0, "root") + "3.1\tgo\t_\t_\t_\t_\t_\t_\t_\t_\n";
  auto trees = read_conllu(text);
  REQUIRE(trees.size() == 1);
  CHECK(trees[0].words == std::vector<std::string>{"do", "nt", "go"});
}

TEST_CASE("CoNLL-U writer round trip") {
  auto trees = read_conllu(oracle::slurp(oracle::data_dir() / "synthetic" / "train.conllu"));
  REQUIRE(trees.size() == 64);
  auto again = read_conllu(write_conllu(trees));
  REQUIRE(again.size() == trees.size());
  for (std::size_t i = 0; i < trees.size(); ++i) {
    CHECK(again[i].words == trees[i].words);
    CHECK(again[i].pos == trees[i].pos);
    CHECK(again[i].heads == trees[i].heads);
    CHECK(again[i].labels == trees[i].labels);
  }
}

TEST_CASE("AUTO leaf") {
  CCGTree t = parse_auto_tree("(<L NP NNP NNP Kyle NP>)");
  CHECK(t.is_terminal());
  CHECK(t.word() == "Kyle");
  CHECK(t.category() == C("NP"));
  CHECK(t.pos() == "NNP");
  CHECK(t.start() == 1);
}

TEST_CASE("AUTO arity mismatch") {
  CHECK_THROWS_AS(parse_auto_tree("(<T NP 0 2> (<L N NN NN dog N>) )"), ParseError);
  CHECK_THROWS_AS(parse_auto_tree("(<T NP 0 2> (<L N NN NN dog N>)"), ParseError);
  CHECK_THROWS_AS(read_auto("ID=1\n(<L NP NNP NNP Kyle NP>) junk\n"), ParseError);
}

TEST_CASE("AUTO reader infers rules") {
  auto t = read_auto(oracle::slurp(oracle::data_dir() / "fixtures" / "relative_clause.auto")).at(0);
  CHECK(t.category() == C("NP"));
  CHECK(t.left().rule() == RuleKind::UnaryTypeChange);
  const CCGTree& rel = t.right();
  CHECK(rel.rule() == RuleKind::ForwardApply);
  const CCGTree& sdcl = rel.right();
  CHECK(sdcl.left().rule() == RuleKind::TypeRaise);
  CHECK(sdcl.rule() == RuleKind::ForwardCompose);
  CHECK(sdcl.right().rule() == RuleKind::ForwardCompose);
  CHECK(t.words() == std::vector<std::string>{"cats", "that", "Kyle", "wants", "to", "see"});
}

TEST_CASE("math derivation fixture round trips and validates") {
  const std::string text = oracle::slurp(oracle::data_dir() / "fixtures" / "math_derivation.auto");
  auto trees = read_auto(text);
  REQUIRE(trees.size() == 1);
  CHECK(write_auto(trees) == text);
  Grammar g(Grammar::default_grammar().unary_rules(),
            Grammar::load_root_set(oracle::data_dir() / "fixtures" / "math_roots.txt"));
  CHECK(validate_tree(trees[0], g).empty());
  CHECK(extract_headfirst(trees[0]).parents == std::vector<int>{0, 1, 2, 3, 2, 5, 6, 7, 1, 9, 10, 9});
  // Under the default roots only the root category is objected to.
  auto v = validate_tree(trees[0], Grammar::default_grammar());
  REQUIRE(v.size() == 1);
  CHECK(v[0].start == 1);
  CHECK(v[0].end == 12);
}

TEST_CASE("Head First examples") {
  CHECK(extract_headfirst(leaf(1, "NP")).parents == std::vector<int>{0});
  CCGTree t = CCGTree::binary(leaf(1, "NP"), CCGTree::binary(leaf(2, "NP"), leaf(3, "NP"), C("NP"), RuleKind::Unknown),
                              C("NP"), RuleKind::Unknown);
  CHECK(extract_headfirst(t).parents == std::vector<int>{0, 1, 2});
  auto relcl = read_auto(oracle::slurp(oracle::data_dir() / "fixtures" / "relative_clause.auto")).at(0);
  CHECK(extract_headfirst(relcl).parents == std::vector<int>{0, 1, 2, 3, 4, 5});
}

TEST_CASE("Head First property over random shapes") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 12)(rng);
    CCGTree t = random_shape(rng, 1, n);
    auto p = extract_headfirst(t).parents;
    REQUIRE(static_cast<int>(p.size()) == n);
    CHECK(p[0] == 0);
    for (int i = 2; i <= n; ++i) {
      CHECK(p[static_cast<std::size_t>(i - 1)] >= 1);
      CHECK(p[static_cast<std::size_t>(i - 1)] < i);
    }
    CHECK(p == parents_by_lowest_split(t));
    CHECK(p == oracle::headfirst_by_spans(t));
  }
}

TEST_CASE("validation") {
  auto g = Grammar::default_grammar();
  SUBCASE("N with S\\NP") {
    CCGTree bad = CCGTree::binary(leaf(1, "N"), leaf(2, "S[dcl]\\NP"), C("S[dcl]"), RuleKind::BackwardApply);
    auto v = validate_tree(bad, g);
    REQUIRE(v.size() == 1);
    CHECK(v[0].start == 1);
    CHECK(v[0].end == 2);
  }
  SUBCASE("PP root") {
    CCGTree pp = CCGTree::binary(leaf(1, "PP/NP"), leaf(2, "NP"), C("PP"), RuleKind::ForwardApply);
    auto v = validate_tree(pp, g);
    REQUIRE(v.size() == 1);
    CHECK(v[0].message.find("root") != std::string::npos);
  }
  SUBCASE("licensed tree") {
    CCGTree ok = CCGTree::binary(leaf(1, "NP/N"), leaf(2, "N"), C("NP"), RuleKind::ForwardApply);
    CHECK(validate_tree(ok, g).empty());
  }
  SUBCASE("every shipped synthetic tree is licensed") {
    for (const auto& t : read_auto(oracle::slurp(oracle::data_dir() / "synthetic" / "train.auto"))) {
      CHECK(validate_tree(t, g).empty());
    }
  }
}

TEST_CASE("AUTO round trip of the synthetic treebank") {
  const std::string text = oracle::slurp(oracle::data_dir() / "synthetic" / "train.auto");
  CHECK(write_auto(read_auto(text)) == text);
}

TEST_CASE("JSON round trip keeps rules") {
  auto relcl = read_auto(oracle::slurp(oracle::data_dir() / "fixtures" / "relative_clause.auto")).at(0);
  CCGTree back = tree_from_json(tree_to_json(relcl));
  CHECK(back == relcl);
  CHECK(back.right().right().rule() == RuleKind::ForwardCompose);
  CHECK_THROWS_AS(tree_from_json(nlohmann::json{{"type", "bogus"}}), DataError);
}

TEST_CASE("removing dummy tokens") {
  auto g = Grammar::default_grammar();
  g.set_x_absorption(true);
  // uh Kim sleeps um
  CCGTree uh = CCGTree::terminal(1, "uh", Category::dummy());
  CCGTree kim = CCGTree::terminal(2, "Kim", C("NP"));
  CCGTree sleeps = CCGTree::terminal(3, "sleeps", C("S[dcl]\\NP"));
  CCGTree um = CCGTree::terminal(4, "um", Category::dummy());
  CCGTree np = CCGTree::binary(uh, kim, C("NP"), RuleKind::XAbsorbRight);
  CCGTree vp = CCGTree::binary(sleeps, um, C("S[dcl]\\NP"), RuleKind::XAbsorbLeft);
  CCGTree s = CCGTree::binary(np, vp, C("S[dcl]"), RuleKind::BackwardApply);
  CHECK(validate_tree(s, g).empty());
  auto stripped = strip_dummy(s);
  REQUIRE(stripped.has_value());
  CHECK(stripped->words() == std::vector<std::string>{"Kim", "sleeps"});
  CHECK(stripped->start() == 1);
  CHECK(stripped->end() == 2);
  CHECK(validate_tree(*stripped, Grammar::default_grammar()).empty());
  CHECK_FALSE(strip_dummy(uh).has_value());
}
