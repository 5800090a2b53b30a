#include <doctest.h>

#include <random>
#include <unordered_set>

#include "d2cc/category.hpp"
#include "d2cc/errors.hpp"

using namespace d2cc;

namespace {

Category random_category(std::mt19937_64& rng, int depth) {
  static const std::vector<std::string> atoms{"S", "NP", "N", "PP", "conj", ",", ".", "X"};
  static const std::vector<std::string> features{"dcl", "b", "ng", "pt", "adj", "q", "nb", "X"};
  std::uniform_int_distribution<int> coin(0, 2);
  if (depth == 0 || coin(rng) == 0) {
    const std::string& name = atoms[std::uniform_int_distribution<std::size_t>(0, atoms.size() - 1)(rng)];
    if (name != "X" && coin(rng) == 0) {
      return Category::atom(name, features[std::uniform_int_distribution<std::size_t>(0, features.size() - 1)(rng)]);
    }
    return Category::atom(name);
  }
  Category result = random_category(rng, depth - 1);
  Category argument = random_category(rng, depth - 1);
  return Category::functor(result, coin(rng) == 0 ? Slash::Forward : Slash::Backward, argument);
}

bool structurally_equal(const Category& a, const Category& b) {
  if (a.is_atomic() != b.is_atomic()) return false;
  if (a.is_atomic()) return a.name() == b.name() && a.feature() == b.feature();
  return a.slash() == b.slash() && structurally_equal(a.result(), b.result()) &&
         structurally_equal(a.argument(), b.argument());
}

}  // namespace

TEST_CASE("parse transitive verb category") {
  Category c = parse_category("(S[dcl]\\NP)/NP");
  REQUIRE(c.is_functor());
  CHECK(c.slash() == Slash::Forward);
  CHECK(c.argument().str() == "NP");
  REQUIRE(c.result().is_functor());
  CHECK(c.result().slash() == Slash::Backward);
  CHECK(c.result().result().name() == "S");
  CHECK(c.result().result().feature() == std::optional<std::string>("dcl"));
  CHECK(c.result().argument().name() == "NP");
  CHECK(c.arity() == 2);
}

TEST_CASE("parse atomic category") {
  Category c = parse_category("NP");
  CHECK(c.is_atomic());
  CHECK(c.name() == "NP");
  CHECK_FALSE(c.feature().has_value());
  CHECK(c.arity() == 0);
}

TEST_CASE("conditional category has a modifier as its result") {
  Category c = parse_category("((S\\NP)/(S\\NP))/S[dcl]");
  CHECK(c.arity() == 2);
  CHECK(c.argument().str() == "S[dcl]");
  CHECK(c.result().is_modifier());
  CHECK_FALSE(c.is_modifier());
}

TEST_CASE("slashes at equal depth associate left") {
  Category c = parse_category("A/B\\C");
  CHECK(c.slash() == Slash::Backward);
  CHECK(c.result().str() == "A/B");
  CHECK(c.str() == "(A/B)\\C");
}

TEST_CASE("malformed categories report a position") {
  for (const char* bad : {"(S\\NP", "S\\", "", "S[dcl", "()", "S/(NP", "X[dcl]", "NP)"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(parse_category(bad), ParseError);
  }
  try {
    parse_category("(S\\NP)/");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.position() == 7);
  }
}

TEST_CASE("printing") {
  CHECK(print_category(Category::atom("N")) == "N");
  CHECK(print_category(Category::functor(parse_category("S[dcl]\\NP"), Slash::Forward, Category::atom("NP"))) ==
        "(S[dcl]\\NP)/NP");
  CHECK(print_category(Category::dummy()) == "X");
  CHECK(Category::dummy().is_dummy());
}

TEST_CASE("round trip of random categories") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 10000; ++i) {
    Category c = random_category(rng, 5);
    Category back = parse_category(print_category(c));
    REQUIRE(structurally_equal(c, back));
    REQUIRE(c == back);
    REQUIRE(std::hash<Category>{}(c) == std::hash<Category>{}(back));
  }
}

TEST_CASE("equality is structural and hashing agrees") {
  Category a = parse_category("(S\\NP)/NP");
  Category b = Category::functor(Category::functor(Category::atom("S"), Slash::Backward, Category::atom("NP")),
                                 Slash::Forward, Category::atom("NP"));
  CHECK(a == b);
  CHECK(std::hash<Category>{}(a) == std::hash<Category>{}(b));
  CHECK_FALSE(a == parse_category("(S\\NP)\\NP"));
  CHECK_FALSE(parse_category("S[dcl]") == parse_category("S"));
  std::unordered_set<Category> set{a, b, parse_category("NP")};
  CHECK(set.size() == 2);
}

TEST_CASE("structural queries") {
  CHECK(parse_category(",").is_punctuation());
  CHECK(parse_category(".").is_punctuation());
  CHECK_FALSE(parse_category("NP").is_punctuation());
  CHECK(parse_category("conj").is_conj());
  CHECK(parse_category("S").has_feature_variable());
  CHECK(parse_category("NP[X]").has_feature_variable());
  CHECK_FALSE(parse_category("S[dcl]").has_feature_variable());
  CHECK(parse_category("(S\\NP)\\(S\\NP)").is_modifier());
  CHECK(parse_category("(S[dcl]\\NP)/(S[b]\\NP)").is_modifier());
  CHECK(parse_category("(S\\NP)/NP").without_features() == parse_category("(S\\NP)/NP"));
  CHECK(parse_category("(S[dcl]\\NP[nb])/NP").without_features() == parse_category("(S\\NP)/NP"));
  CHECK(parse_category("((S\\NP)/(S\\NP))/S[dcl]").depth() == 3);
  CHECK(parse_category("(S\\NP)\\(S\\NP)").arity() == 1);
  CHECK(parse_category("((S\\NP)/NP)/PP").arity() == 3);
  CHECK(parse_category("((S\\NP)/(S\\NP))/S[dcl]").atom_count() == 5);
}

TEST_CASE("feature unification") {
  SUBCASE("absent feature binds") {
    auto s = unify_features(parse_category("S[dcl]"), parse_category("S"));
    REQUIRE(s.has_value());
    CHECK(s->bindings.at(Side::Right) == "dcl");
    CHECK(s->apply(Side::Right, parse_category("S")) == parse_category("S[dcl]"));
  }
  SUBCASE("concrete mismatch fails") {
    CHECK_FALSE(unify_features(parse_category("S[dcl]"), parse_category("S[b]")).has_value());
  }
  SUBCASE("recursive") {
    auto s = unify_features(parse_category("(S\\NP)/NP"), parse_category("(S[dcl]\\NP)/NP"));
    REQUIRE(s.has_value());
    CHECK(s->bindings.at(Side::Left) == "dcl");
    CHECK(s->apply(Side::Left, parse_category("(S\\NP)/NP")) == parse_category("(S[dcl]\\NP)/NP"));
  }
  SUBCASE("shape mismatch fails") {
    CHECK_FALSE(matches(parse_category("S\\NP"), parse_category("S/NP")));
    CHECK_FALSE(matches(parse_category("NP"), parse_category("N")));
  }
  SUBCASE("one variable per instance") {
    // Both S slots of the left operand are the same variable.
    CHECK_FALSE(matches(parse_category("S\\S"), parse_category("S[dcl]\\S[b]")));
    CHECK(matches(parse_category("S\\S"), parse_category("S[dcl]\\S[dcl]")));
  }
  SUBCASE("featureless non-S atoms match any feature") {
    CHECK(matches(parse_category("NP"), parse_category("NP[nb]")));
  }
  SUBCASE("empty substitution is the identity") {
    FeatureSubstitution empty;
    Category c = parse_category("(S\\NP)/NP");
    CHECK(empty.apply(Side::Left, c) == c);
  }
}

TEST_CASE("unification is symmetric and equalizes both sides") {
  std::mt19937_64 rng(5);
  int successes = 0;
  for (int i = 0; i < 20000; ++i) {
    Category a = random_category(rng, 2);
    Category b = random_category(rng, 2);
    if (i % 2 == 0) b = a.without_features();  // make successes common
    auto ab = unify_features(a, b);
    auto ba = unify_features(b, a);
    REQUIRE(ab.has_value() == ba.has_value());
    if (!ab) continue;
    ++successes;
    Category sa = ab->apply(Side::Left, a);
    Category sb = ab->apply(Side::Right, b);
    auto again = unify_features(sa, sb);
    REQUIRE(again.has_value());
    CHECK(again->empty());
    // Application is idempotent.
    CHECK(ab->apply(Side::Left, sa) == sa);
  }
  CHECK(successes > 5000);
}
