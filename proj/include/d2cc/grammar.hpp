#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "d2cc/category.hpp"

namespace d2cc {

enum class RuleKind {
  ForwardApply,
  BackwardApply,
  ForwardCompose,
  BackwardCompose,
  BackwardCrossCompose,
  GeneralizedForwardCompose,
  Conjunction,
  RemovePunctLeft,
  RemovePunctRight,
  UnaryTypeChange,
  TypeRaise,
  XAbsorbLeft,
  XAbsorbRight,
  Lexicon,  // terminals
  Unknown,  // read from a lossy format and licensed by no rule
};

std::string_view rule_name(RuleKind rule);
RuleKind rule_from_name(std::string_view name);
bool is_unary_rule(RuleKind rule);

struct Derivation {
  Category category;
  RuleKind rule;
  friend bool operator==(const Derivation&, const Derivation&) = default;
};

struct UnaryRule {
  Category from;
  Category to;
  RuleKind rule;  // UnaryTypeChange or TypeRaise
};

/// The combinatory rule system. Immutable after construction.
class Grammar {
 public:
  /// Unary table and root set matching data/grammar/{unary,roots}.txt.
  static Grammar default_grammar();

  Grammar(std::vector<UnaryRule> unary, std::vector<Category> roots);

  /// Reads "FROM -> TO" lines; '#' starts a comment.
  static std::vector<UnaryRule> parse_unary_table(std::string_view text);
  /// One category per line; '#' starts a comment.
  static std::vector<Category> parse_root_set(std::string_view text);
  static std::vector<UnaryRule> load_unary_table(const std::filesystem::path& path);
  static std::vector<Category> load_root_set(const std::filesystem::path& path);

  Grammar& set_x_absorption(bool enabled) {
    x_absorption_ = enabled;
    return *this;
  }
  /// Restricts binary combination to the given (left, right) pairs, compared
  /// with features stripped. X-absorption is not filtered.
  Grammar& set_seen_rules(std::set<std::pair<std::string, std::string>> seen) {
    seen_rules_ = std::move(seen);
    return *this;
  }
  static std::set<std::pair<std::string, std::string>> parse_seen_rules(std::string_view text);

  bool x_absorption() const { return x_absorption_; }
  const std::vector<UnaryRule>& unary_rules() const { return unary_; }
  const std::vector<Category>& roots() const { return roots_; }

  std::vector<Derivation> apply_binary(const Category& left, const Category& right) const;
  std::vector<Derivation> apply_unary(const Category& c) const;
  bool is_root(const Category& c) const;

  /// Some unary rule rewrites `from` into a category matching `target`.
  bool unary_reaches(const Category& from, const Category& target) const;

 private:
  std::vector<UnaryRule> unary_;
  std::vector<Category> roots_;
  std::optional<std::set<std::pair<std::string, std::string>>> seen_rules_;
  bool x_absorption_ = false;
};

/// `pattern` matches `c` when shapes agree and every concrete feature of the
/// pattern is present in `c`. Featureless pattern slots accept anything.
bool pattern_matches(const Category& pattern, const Category& c);

}  // namespace d2cc
