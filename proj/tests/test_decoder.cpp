#include <doctest.h>

#include <cmath>
#include <random>

#include "d2cc/decoder.hpp"
#include "d2cc/errors.hpp"
#include "oracles.hpp"

using namespace d2cc;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Category C(const char* s) { return parse_category(s); }

DecodeOptions exact() {
  DecodeOptions o;
  o.beam = kNegInf;
  return o;
}

// Probabilities given per row; zeros become -inf.
Eigen::MatrixXd log_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double p : r) m(i, j++) = p > 0 ? std::log(p) : kNegInf;
    ++i;
  }
  return m;
}

ScoreMatrices two_token(std::initializer_list<std::initializer_list<double>> tags, std::vector<Category> cats) {
  ScoreMatrices m;
  m.tokens = {"a", "b"};
  m.categories = std::move(cats);
  m.tag_logp = log_rows(tags);
  m.dep_logp = log_rows({{0.8, 0.0, 0.2}, {0.3, 0.7, 0.0}});
  return m;
}

// Tokens [start, end] form a constituent whose category equals, or has a
// unary rule into, `category`.
bool has_constituent(const CCGTree& t, const Constraint& c, const Grammar& g) {
  if (t.start() == c.start && t.end() == c.end) {
    if (!c.category) return true;
    if (matches(t.category(), *c.category) || g.unary_reaches(t.category(), *c.category)) return true;
  }
  for (const auto& child : t.children()) {
    if (has_constituent(child, c, g)) return true;
  }
  return false;
}

struct Instance {
  ScoreMatrices m;
  std::vector<Constraint> constraints;
};

// Random constraints drawn from spans and categories the grammar can build;
// kept only when the exhaustive oracle finds a satisfying tree.
std::optional<Instance> constrained_instance(std::mt19937_64& rng, const Grammar& g) {
  const int n = std::uniform_int_distribution<int>(2, 6)(rng);
  const int c = std::uniform_int_distribution<int>(4, 12)(rng);
  ScoreMatrices m = oracle::random_matrices(rng, n, c);
  auto items = oracle::all_constituents(m, g);
  if (items.empty()) return std::nullopt;
  const int k = std::uniform_int_distribution<int>(1, 3)(rng);
  std::vector<Constraint> cons;
  for (int t = 0; t < k; ++t) {
    const auto& item = items[rng() % items.size()];
    Constraint con{item.category, item.start, item.end};
    if (rng() % 4 == 0) con.category.reset();
    cons.push_back(con);
  }
  ScoreMatrices fixed;
  try {
    fixed = apply_terminal_constraints(m, cons);
  } catch (const DataError&) {
    return std::nullopt;
  }
  if (oracle::best_tree_score(fixed, g, oracle::constraint_filter(cons, g)) == kNegInf) return std::nullopt;
  return Instance{m, cons};
}

}  // namespace

TEST_CASE("heuristic examples") {
  std::mt19937_64 rng(1);
  ScoreMatrices m = oracle::random_matrices(rng, 4, 6);
  for (int h = 1; h <= 4; ++h) CHECK(heuristic(m, 1, 4, h) == m.dep_logp.row(h - 1).maxCoeff());
  ScoreMatrices one;
  one.categories = {C("NP"), C("N")};
  one.tag_logp = log_rows({{0.5, 0.5}});
  one.dep_logp = log_rows({{1.0, 0.0}});
  CHECK(heuristic(one, 1, 1, 1) == 0.0);
  // Outside tokens contribute their best tag and head.
  const double outside = m.tag_logp.row(3).maxCoeff() + m.dep_logp.row(3).maxCoeff();
  CHECK(heuristic(m, 1, 3, 1) == doctest::Approx(outside + m.dep_logp.row(0).maxCoeff()));
}

TEST_CASE("two-token determiner phrase") {
  ScoreMatrices m = two_token({{0.9, 0.1}, {0.1, 0.9}}, {C("NP/N"), C("N")});
  auto g = Grammar::default_grammar();
  DecodeResult r = astar_parse(m, g, {}, exact());
  CHECK(r.tree.category() == C("NP"));
  CHECK(r.tree.rule() == RuleKind::ForwardApply);
  CHECK(r.tree.supertags() == std::vector<Category>{C("NP/N"), C("N")});
  const double expected = 2 * std::log(0.9) + std::log(0.8) + std::log(0.7);
  CHECK(r.score == doctest::Approx(expected).epsilon(1e-12));
  CHECK(r.score == doctest::Approx(oracle::best_tree_score(m, g)).epsilon(1e-12));
}

TEST_CASE("best tags that cannot combine give way to a second choice") {
  auto g = Grammar::default_grammar();
  ScoreMatrices m = two_token({{0.6, 0.4, 0.0, 0.0}, {0.0, 0.0, 0.7, 0.3}},
                              {C("NP"), C("NP/N"), C("N"), C("S[dcl]\\NP")});
  DecodeResult r = astar_parse(m, g, {}, exact());
  CHECK(r.tree.supertags() == std::vector<Category>{C("NP/N"), C("N")});
  CHECK(r.score == doctest::Approx(oracle::best_tree_score(m, g)).epsilon(1e-12));
}

TEST_CASE("no valid parse") {
  auto g = Grammar::default_grammar();
  ScoreMatrices m = two_token({{1.0, 0.0}, {1.0, 0.0}}, {C("PP"), C("S[dcl]")});
  try {
    astar_parse(m, g, {}, exact());
    FAIL("expected no parse");
  } catch (const NoParseError& e) {
    CHECK(e.cause() == NoParseError::Cause::Grammar);
  }
}

TEST_CASE("constraint acceptance cases") {
  auto g = Grammar::default_grammar();
  const std::vector<Constraint> np12{{C("NP"), 1, 2}};
  CHECK(check_constraint(C("S"), 1, 3, np12, g));
  CHECK_FALSE(check_constraint(C("S"), 2, 3, np12, g));
  CHECK(check_constraint(C("N"), 1, 1, {{C("NP"), 1, 1}}, g));
  CHECK_FALSE(check_constraint(C("S"), 1, 1, {{C("NP"), 1, 1}}, g));
  // Mirror image of the overlap and the span-only form.
  CHECK_FALSE(check_constraint(C("NP"), 1, 2, {{C("NP"), 2, 3}}, g));
  CHECK_FALSE(check_constraint(C("NP"), 1, 2, {{std::nullopt, 2, 3}}, g));
  CHECK(check_constraint(C("S"), 2, 3, {{std::nullopt, 2, 3}}, g));
  CHECK(check_constraint(C("NP[nb]"), 1, 2, np12, g));
}

TEST_CASE("terminal constraints rewrite tag rows") {
  std::mt19937_64 rng(2);
  ScoreMatrices m = oracle::random_matrices(rng, 3, 5);
  CHECK(apply_terminal_constraints(m, {}).tag_logp == m.tag_logp);
  const Category target = m.categories[2];
  ScoreMatrices f = apply_terminal_constraints(m, {{target, 2, 2}, {C("NP"), 1, 3}});
  CHECK(f.tag_logp.row(0) == m.tag_logp.row(0));
  CHECK(f.tag_logp.row(2) == m.tag_logp.row(2));
  for (int c = 0; c < 5; ++c) {
    if (c == 2) {
      CHECK(f.tag_logp(1, c) == 0.0);
    } else {
      CHECK(f.tag_logp(1, c) == kNegInf);
    }
  }
  CHECK(f.dep_logp == m.dep_logp);
  CHECK_THROWS_AS(apply_terminal_constraints(m, {{m.categories[0], 1, 1}, {m.categories[1], 1, 1}}), DataError);
  CHECK_THROWS_AS(apply_terminal_constraints(m, {{C("((S\\S)/S)/S"), 1, 1}}), VocabularyError);
  CHECK_THROWS_AS(apply_terminal_constraints(m, {{m.categories[0], 4, 4}}), DataError);
}

TEST_CASE("constraint JSON") {
  Constraint c{C("NP"), 2, 4};
  CHECK(constraint_from_json(constraint_to_json(c)) == c);
  auto j = nlohmann::json::parse(R"([{"category": null, "start": 1, "end": 3}, {"category": "S[dcl]", "start": 1, "end": 1}])");
  auto cs = constraints_from_json(j);
  REQUIRE(cs.size() == 2);
  CHECK_FALSE(cs[0].category.has_value());
  CHECK(cs[1].is_terminal());
  CHECK_THROWS_AS(constraint_from_json(nlohmann::json::parse(R"({"category": "NP"})")), DataError);
  CHECK_THROWS_AS(check_constraint_span(Constraint{C("NP"), 3, 2}, 5), DataError);
}

TEST_CASE("A* matches exhaustive search") {
  auto g = Grammar::default_grammar();
  std::mt19937_64 rng(3);
  int parsed = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 6)(rng);
    const int c = std::uniform_int_distribution<int>(2, 12)(rng);
    ScoreMatrices m = oracle::random_matrices(rng, n, c);
    const double best = oracle::best_tree_score(m, g);
    if (best == kNegInf) {
      CHECK_THROWS_AS(astar_parse(m, g, {}, exact()), NoParseError);
      continue;
    }
    ++parsed;
    DecodeResult r = astar_parse(m, g, {}, exact());
    CHECK(std::abs(r.score - best) <= 1e-9);
    CHECK(r.score == tree_score(m, r.tree));
    CHECK(validate_tree(r.tree, g).empty());
    CHECK(r.tree.size() == n);
  }
  CHECK(parsed > 20);
}

TEST_CASE("constrained A* matches exhaustive constrained search") {
  auto g = Grammar::default_grammar();
  std::mt19937_64 rng(4);
  int done = 0;
  while (done < 30) {
    auto inst = constrained_instance(rng, g);
    if (!inst) continue;
    ++done;
    const double best = oracle::best_tree_score(inst->m, g, oracle::constraint_filter(inst->constraints, g));
    DecodeResult r = astar_parse(inst->m, g, inst->constraints, exact());
    CHECK(std::abs(r.score - best) <= 1e-9);
    CHECK(validate_tree(r.tree, g).empty());
    for (const auto& con : inst->constraints) CHECK(has_constituent(r.tree, con, g));
    // Constraints only remove trees.
    const double free_best = oracle::best_tree_score(inst->m, g);
    CHECK(best <= free_best + 1e-12);
  }
}

TEST_CASE("unsatisfiable constraints are reported as such") {
  auto g = Grammar::default_grammar();
  ScoreMatrices m = two_token({{0.9, 0.1}, {0.1, 0.9}}, {C("NP/N"), C("N")});
  try {
    astar_parse(m, g, {{C("S[dcl]"), 1, 2}}, exact());
    FAIL("expected no parse");
  } catch (const NoParseError& e) {
    CHECK(e.cause() == NoParseError::Cause::Constraints);
  }
  CHECK(oracle::best_tree_score(m, g, oracle::constraint_filter({{C("S[dcl]"), 1, 2}}, g)) == kNegInf);
}

TEST_CASE("constraint that is already satisfied changes nothing") {
  auto g = Grammar::default_grammar();
  std::mt19937_64 rng(5);
  int done = 0;
  while (done < 10) {
    ScoreMatrices m = oracle::random_matrices(rng, 5, 10);
    std::optional<DecodeResult> found;
    try {
      found = astar_parse(m, g, {}, exact());
    } catch (const NoParseError&) {
      continue;
    }
    const DecodeResult& free_result = *found;
    if (free_result.tree.is_terminal()) continue;
    const CCGTree& left = free_result.tree.kind() == CCGTree::Kind::Binary ? free_result.tree.left()
                                                                             : free_result.tree.child();
    DecodeResult again = astar_parse(m, g, {{left.category(), left.start(), left.end()}}, exact());
    CHECK(again.score == free_result.score);
    CHECK(again.tree == free_result.tree);
    ++done;
  }
}

TEST_CASE("heuristic is admissible") {
  auto g = Grammar::default_grammar();
  std::mt19937_64 rng(6);
  int compared = 0;
  for (int trial = 0; trial < 8; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 4)(rng);
    ScoreMatrices m = oracle::random_matrices(rng, n, 8);
    for (const auto& item : oracle::all_constituents(m, g)) {
      const double completion = oracle::best_completion(m, g, item.start, item.end, item.category, item.depth);
      if (completion == kNegInf) continue;
      ++compared;
      CHECK(heuristic(m, item.start, item.end, item.start) >= completion - 1e-12);
    }
  }
  CHECK(compared > 20);
}

TEST_CASE("pruning and budget") {
  auto g = Grammar::default_grammar();
  std::mt19937_64 rng(7);
  int checked = 0;
  for (int trial = 0; trial < 30; ++trial) {
    ScoreMatrices m = oracle::random_matrices(rng, 5, 10, 3.0);
    double exact_score;
    try {
      exact_score = astar_parse(m, g, {}, exact()).score;
    } catch (const NoParseError&) {
      continue;
    }
    try {
      DecodeResult pruned = astar_parse(m, g);
      CHECK(pruned.score <= exact_score + 1e-12);
      CHECK(validate_tree(pruned.tree, g).empty());
      ++checked;
    } catch (const NoParseError&) {
    }
    DecodeOptions tiny = exact();
    tiny.budget = 3;
    CHECK_THROWS_AS(astar_parse(m, g, {}, tiny), ResourceError);
  }
  CHECK(checked > 5);
}

TEST_CASE("decoding is deterministic") {
  auto g = Grammar::default_grammar();
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    ScoreMatrices m = oracle::random_matrices(rng, 6, 12);
    try {
      DecodeResult a = astar_parse(m, g, {}, exact());
      DecodeResult b = astar_parse(m, g, {}, exact());
      CHECK(a.tree == b.tree);
      CHECK(a.pops == b.pops);
      CHECK(write_auto_tree(a.tree) == write_auto_tree(b.tree));
    } catch (const NoParseError&) {
    }
  }
}

TEST_CASE("dummy tokens are absorbed when enabled") {
  auto g = Grammar::default_grammar();
  g.set_x_absorption(true);
  ScoreMatrices m;
  m.tokens = {"uh", "Kim", "sleeps"};
  m.categories = {C("NP"), C("S[dcl]\\NP"), C("N")};
  m.tag_logp = log_rows({{0.4, 0.3, 0.3}, {0.8, 0.1, 0.1}, {0.1, 0.8, 0.1}});
  m.dep_logp = log_rows({{0.5, 0.0, 0.3, 0.2}, {0.3, 0.5, 0.0, 0.2}, {0.2, 0.3, 0.5, 0.0}});
  m.categories.push_back(Category::dummy());
  Eigen::MatrixXd tags(3, 4);
  tags << m.tag_logp, Eigen::VectorXd::Constant(3, kNegInf);
  m.tag_logp = tags;
  const std::vector<Constraint> cons{{Category::dummy(), 1, 1}};
  DecodeResult r = astar_parse(apply_terminal_constraints(m, cons), g, cons, exact());
  CHECK(r.tree.supertags()[0] == Category::dummy());
  CHECK(validate_tree(r.tree, g).empty());
  auto stripped = strip_dummy(r.tree);
  REQUIRE(stripped.has_value());
  CHECK(stripped->words() == std::vector<std::string>{"Kim", "sleeps"});
}
