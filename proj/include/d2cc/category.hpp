#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

namespace d2cc {

enum class Slash : char { Forward = '/', Backward = '\\' };

/// A CCG category: either an atom with an optional feature (S[dcl], NP, conj)
/// or a functor result|argument. Immutable; copies share structure.
///
/// Equality is structural. Every node caches its canonical text, so equality
/// and hashing reduce to string comparison.
class Category {
 public:
  /// Feature text that marks an explicit feature variable, as in S[X].
  static constexpr std::string_view kVariableFeature = "X";
  /// Reserved name of the dummy category that absorbs disfluent tokens.
  static constexpr std::string_view kDummyName = "X";

  static Category atom(std::string name, std::optional<std::string> feature = std::nullopt);
  static Category functor(Category result, Slash slash, Category argument);
  static Category dummy() { return atom(std::string(kDummyName)); }

  bool is_atomic() const { return !node_->result; }
  bool is_functor() const { return static_cast<bool>(node_->result); }

  // Atom accessors; empty for functors.
  const std::string& name() const { return node_->name; }
  const std::optional<std::string>& feature() const { return node_->feature; }

  // Functor accessors; precondition is_functor().
  const Category& result() const { return *node_->result; }
  const Category& argument() const { return *node_->argument; }
  Slash slash() const { return node_->slash; }

  /// Number of arguments along the outermost functor spine. The spine stops
  /// at a modifier X|X, which counts as a single argument.
  int arity() const { return node_->arity; }
  int depth() const { return node_->depth; }
  /// Number of atoms, counted left to right.
  int atom_count() const { return node_->atoms; }

  bool is_dummy() const;
  bool is_punctuation() const;
  bool is_conj() const;
  /// True when the feature slot acts as a variable (absent on S, or [X]).
  bool has_feature_variable() const;
  /// R|A where R equals A ignoring features.
  bool is_modifier() const;

  /// Canonical text; outermost parentheses omitted.
  const std::string& str() const { return node_->text; }
  Category without_features() const;

  friend bool operator==(const Category& a, const Category& b) {
    return a.node_ == b.node_ || a.node_->text == b.node_->text;
  }
  friend bool operator<(const Category& a, const Category& b) { return a.str() < b.str(); }

 private:
  struct Node {
    std::string name;
    std::optional<std::string> feature;
    std::shared_ptr<const Category> result;
    std::shared_ptr<const Category> argument;
    Slash slash = Slash::Forward;
    int arity = 0;
    int depth = 0;
    int atoms = 1;
    std::string text;
  };
  explicit Category(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

/// Structural equality ignoring every feature.
bool same_shape(const Category& a, const Category& b);

Category parse_category(std::string_view text);
std::string print_category(const Category& c);

/// Which operand of a unification a feature variable belongs to.
enum class Side { Left, Right };

/// Binding of the per-instance anonymous feature variable of each operand.
struct FeatureSubstitution {
  std::map<Side, std::string> bindings;

  bool empty() const { return bindings.empty(); }
  /// Fills the variable feature slots of `c` (an instance on `side`).
  Category apply(Side side, const Category& c) const;
  friend bool operator==(const FeatureSubstitution&, const FeatureSubstitution&) = default;
};

/// Succeeds iff `a` and `b` have the same shape and every pair of concrete
/// features agrees. Each operand owns one anonymous variable occupying its
/// featureless S slots and explicit [X] slots; other featureless atoms are
/// wildcards that match without binding.
std::optional<FeatureSubstitution> unify_features(const Category& a, const Category& b);

/// True when unify_features succeeds.
bool matches(const Category& a, const Category& b);

}  // namespace d2cc

template <>
struct std::hash<d2cc::Category> {
  std::size_t operator()(const d2cc::Category& c) const noexcept {
    return std::hash<std::string>{}(c.str());
  }
};
