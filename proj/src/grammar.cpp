#include "d2cc/grammar.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include "d2cc/errors.hpp"

namespace d2cc {

namespace {

struct RuleNameEntry {
  RuleKind rule;
  std::string_view name;
};

constexpr std::array<RuleNameEntry, 15> kRuleNames = {{
    {RuleKind::ForwardApply, ">"},
    {RuleKind::BackwardApply, "<"},
    {RuleKind::ForwardCompose, ">B"},
    {RuleKind::BackwardCompose, "<B"},
    {RuleKind::BackwardCrossCompose, "<Bx"},
    {RuleKind::GeneralizedForwardCompose, ">B2"},
    {RuleKind::Conjunction, "conj"},
    {RuleKind::RemovePunctLeft, "lp"},
    {RuleKind::RemovePunctRight, "rp"},
    {RuleKind::UnaryTypeChange, "un"},
    {RuleKind::TypeRaise, "tr"},
    {RuleKind::XAbsorbLeft, "xl"},
    {RuleKind::XAbsorbRight, "xr"},
    {RuleKind::Lexicon, "lex"},
    {RuleKind::Unknown, "?"},
}};

std::string strip_comment(std::string line) {
  if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
  auto not_space = [](unsigned char ch) { return !std::isspace(ch); };
  line.erase(line.begin(), std::find_if(line.begin(), line.end(), not_space));
  line.erase(std::find_if(line.rbegin(), line.rend(), not_space).base(), line.end());
  return line;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RuleKind classify_unary(const Category& from, const Category& to) {
  if (to.is_functor() && to.argument().is_functor() &&
      same_shape(to.result(), to.argument().result()) && same_shape(to.argument().argument(), from) &&
      to.slash() != to.argument().slash()) {
    return RuleKind::TypeRaise;
  }
  return RuleKind::UnaryTypeChange;
}

void add_unique(std::vector<Derivation>& out, Category c, RuleKind rule) {
  Derivation d{std::move(c), rule};
  if (std::find(out.begin(), out.end(), d) == out.end()) out.push_back(std::move(d));
}

}  // namespace

std::string_view rule_name(RuleKind rule) {
  for (const auto& e : kRuleNames) {
    if (e.rule == rule) return e.name;
  }
  return "?";
}

RuleKind rule_from_name(std::string_view name) {
  for (const auto& e : kRuleNames) {
    if (e.name == name) return e.rule;
  }
  throw DataError("unknown rule name '" + std::string(name) + "'");
}

bool is_unary_rule(RuleKind rule) {
  return rule == RuleKind::UnaryTypeChange || rule == RuleKind::TypeRaise;
}

bool pattern_matches(const Category& pattern, const Category& c) {
  if (pattern.is_functor() != c.is_functor()) return false;
  if (pattern.is_functor()) {
    return pattern.slash() == c.slash() && pattern_matches(pattern.result(), c.result()) &&
           pattern_matches(pattern.argument(), c.argument());
  }
  if (pattern.name() != c.name()) return false;
  if (!pattern.feature() || *pattern.feature() == Category::kVariableFeature) return true;
  return c.feature() == pattern.feature();
}

Grammar::Grammar(std::vector<UnaryRule> unary, std::vector<Category> roots)
    : unary_(std::move(unary)), roots_(std::move(roots)) {}

Grammar Grammar::default_grammar() {
  static constexpr std::string_view kUnary =
      "N -> NP\n"
      "S[pss]\\NP -> NP\\NP\n"
      "S[ng]\\NP -> NP\\NP\n"
      "S[adj]\\NP -> NP\\NP\n"
      "S[to]\\NP -> NP\\NP\n"
      "S[dcl]/NP -> NP\\NP\n"
      "NP -> S/(S\\NP)\n"
      "NP -> (S\\NP)\\((S\\NP)/NP)\n";
  static constexpr std::string_view kRoots = "S[dcl]\nS[q]\nS[wq]\nS[b]\nNP\n";
  return Grammar(parse_unary_table(kUnary), parse_root_set(kRoots));
}

std::vector<UnaryRule> Grammar::parse_unary_table(std::string_view text) {
  std::vector<UnaryRule> rules;
  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = strip_comment(raw);
    if (line.empty()) continue;
    auto arrow = line.find("->");
    if (arrow == std::string::npos) {
      throw DataError("unary table line " + std::to_string(lineno) + ": expected 'FROM -> TO'");
    }
    Category from = parse_category(strip_comment(line.substr(0, arrow)));
    Category to = parse_category(strip_comment(line.substr(arrow + 2)));
    rules.push_back({from, to, classify_unary(from, to)});
  }
  return rules;
}

std::vector<Category> Grammar::parse_root_set(std::string_view text) {
  std::vector<Category> roots;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    std::string line = strip_comment(raw);
    if (!line.empty()) roots.push_back(parse_category(line));
  }
  return roots;
}

std::set<std::pair<std::string, std::string>> Grammar::parse_seen_rules(std::string_view text) {
  std::set<std::pair<std::string, std::string>> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    std::istringstream fields(strip_comment(raw));
    std::string left, right;
    if (fields >> left >> right) {
      seen.emplace(parse_category(left).without_features().str(),
                   parse_category(right).without_features().str());
    }
  }
  return seen;
}

std::vector<UnaryRule> Grammar::load_unary_table(const std::filesystem::path& path) {
  return parse_unary_table(read_file(path));
}

std::vector<Category> Grammar::load_root_set(const std::filesystem::path& path) {
  return parse_root_set(read_file(path));
}

std::vector<Derivation> Grammar::apply_binary(const Category& left, const Category& right) const {
  std::vector<Derivation> out;

  if (x_absorption_) {
    if (right.is_dummy()) add_unique(out, left, RuleKind::XAbsorbLeft);
    if (left.is_dummy()) add_unique(out, right, RuleKind::XAbsorbRight);
  }
  if (seen_rules_ && !seen_rules_->contains({left.without_features().str(), right.without_features().str()})) {
    return out;
  }

  if (left.is_punctuation()) add_unique(out, right, RuleKind::RemovePunctLeft);
  if (right.is_punctuation()) add_unique(out, left, RuleKind::RemovePunctRight);

  if (left.is_conj() && !right.is_punctuation() && !right.is_conj() && !right.is_dummy()) {
    add_unique(out, Category::functor(right, Slash::Backward, right), RuleKind::Conjunction);
  }

  // X/Y  Y  =>  X
  if (left.is_functor() && left.slash() == Slash::Forward) {
    if (auto s = unify_features(left.argument(), right)) {
      add_unique(out, s->apply(Side::Left, left.result()), RuleKind::ForwardApply);
    }
  }
  // Y  X\Y  =>  X
  if (right.is_functor() && right.slash() == Slash::Backward) {
    if (auto s = unify_features(left, right.argument())) {
      add_unique(out, s->apply(Side::Right, right.result()), RuleKind::BackwardApply);
    }
  }
  // X/Y  Y/Z  =>  X/Z
  if (left.is_functor() && left.slash() == Slash::Forward && right.is_functor() &&
      right.slash() == Slash::Forward) {
    if (auto s = unify_features(left.argument(), right.result())) {
      add_unique(out,
                 Category::functor(s->apply(Side::Left, left.result()), Slash::Forward,
                                   s->apply(Side::Right, right.argument())),
                 RuleKind::ForwardCompose);
    }
  }
  // Y\Z  X\Y  =>  X\Z
  if (left.is_functor() && left.slash() == Slash::Backward && right.is_functor() &&
      right.slash() == Slash::Backward) {
    if (auto s = unify_features(left.result(), right.argument())) {
      add_unique(out,
                 Category::functor(s->apply(Side::Right, right.result()), Slash::Backward,
                                   s->apply(Side::Left, left.argument())),
                 RuleKind::BackwardCompose);
    }
  }
  // Y/Z  X\Y  =>  X/Z
  if (left.is_functor() && left.slash() == Slash::Forward && right.is_functor() &&
      right.slash() == Slash::Backward) {
    if (auto s = unify_features(left.result(), right.argument())) {
      add_unique(out,
                 Category::functor(s->apply(Side::Right, right.result()), Slash::Forward,
                                   s->apply(Side::Left, left.argument())),
                 RuleKind::BackwardCrossCompose);
    }
  }
  // X/Y  (Y/Z)/W  =>  (X/Z)/W
  if (left.is_functor() && left.slash() == Slash::Forward && right.is_functor() &&
      right.slash() == Slash::Forward && right.result().is_functor() &&
      right.result().slash() == Slash::Forward) {
    const Category& inner = right.result();
    if (auto s = unify_features(left.argument(), inner.result())) {
      Category xz = Category::functor(s->apply(Side::Left, left.result()), Slash::Forward,
                                      s->apply(Side::Right, inner.argument()));
      add_unique(out, Category::functor(std::move(xz), Slash::Forward, s->apply(Side::Right, right.argument())),
                 RuleKind::GeneralizedForwardCompose);
    }
  }
  return out;
}

std::vector<Derivation> Grammar::apply_unary(const Category& c) const {
  std::vector<Derivation> out;
  for (const auto& rule : unary_) {
    if (pattern_matches(rule.from, c)) add_unique(out, rule.to, rule.rule);
  }
  return out;
}

bool Grammar::is_root(const Category& c) const {
  return std::any_of(roots_.begin(), roots_.end(), [&](const Category& r) { return pattern_matches(r, c); });
}

bool Grammar::unary_reaches(const Category& from, const Category& target) const {
  for (const auto& d : apply_unary(from)) {
    if (matches(d.category, target)) return true;
  }
  return false;
}

}  // namespace d2cc
