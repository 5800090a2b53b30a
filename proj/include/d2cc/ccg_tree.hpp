#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "d2cc/category.hpp"
#include "d2cc/grammar.hpp"

namespace d2cc {

/// A CCG derivation. Terminals are numbered 1..N left to right. Immutable;
/// copies share subtrees.
class CCGTree {
 public:
  enum class Kind { Terminal, Unary, Binary };

  static CCGTree terminal(int index, std::string word, Category category, std::string pos = "_");
  static CCGTree unary(CCGTree child, Category category, RuleKind rule);
  static CCGTree binary(CCGTree left, CCGTree right, Category category, RuleKind rule);

  Kind kind() const { return node_->kind; }
  bool is_terminal() const { return node_->kind == Kind::Terminal; }
  const Category& category() const { return node_->category; }
  RuleKind rule() const { return node_->rule; }
  /// 1-based inclusive span.
  int start() const { return node_->start; }
  int end() const { return node_->end; }
  int size() const { return end() - start() + 1; }

  // Terminal payload.
  const std::string& word() const { return node_->word; }
  const std::string& pos() const { return node_->pos; }

  const CCGTree& child() const { return node_->children.at(0); }
  const CCGTree& left() const { return node_->children.at(0); }
  const CCGTree& right() const { return node_->children.at(1); }
  const std::vector<CCGTree>& children() const { return node_->children; }

  /// Terminals in sentence order.
  std::vector<CCGTree> leaves() const;
  std::vector<std::string> words() const;
  std::vector<Category> supertags() const;
  /// Number of unary nodes in the tree.
  int unary_count() const;
  /// Bracketed debug form, e.g. "(NP (NP/N the) (N dog))".
  std::string to_string() const;

  friend bool operator==(const CCGTree& a, const CCGTree& b);

 private:
  struct Node {
    Kind kind;
    Category category;
    RuleKind rule;
    int start;
    int end;
    std::string word;
    std::string pos;
    std::vector<CCGTree> children;
  };
  explicit CCGTree(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

/// Parent of each token under the Head First convention: every arc goes from
/// the head of a left constituent to the head (first token) of its right
/// sibling. parents[i-1] is d_i; token 1 has parent 0.
struct HeadFirstDeps {
  std::vector<int> parents;
  friend bool operator==(const HeadFirstDeps&, const HeadFirstDeps&) = default;
};

HeadFirstDeps extract_headfirst(const CCGTree& tree);

struct Violation {
  int start;
  int end;
  std::string message;
};

/// Empty iff every node is licensed by the grammar and the root is in the root set.
std::vector<Violation> validate_tree(const CCGTree& tree, const Grammar& grammar);

/// CCGbank AUTO serialization. Each tree is preceded by an "ID=" line.
/// Rules are not stored; the reader infers them from the categories.
std::vector<CCGTree> read_auto(std::string_view text);
std::string write_auto(const std::vector<CCGTree>& trees);
std::string write_auto_tree(const CCGTree& tree);
CCGTree parse_auto_tree(std::string_view text);

/// Rule that licenses `result` from the children, or Unknown. Uses every
/// combinator including X-absorption and the default unary table.
RuleKind infer_binary_rule(const Category& left, const Category& right, const Category& result);
RuleKind infer_unary_rule(const Category& child, const Category& result);

nlohmann::json tree_to_json(const CCGTree& tree);
CCGTree tree_from_json(const nlohmann::json& j);

/// Removes terminals tagged with the dummy category X and collapses the
/// absorbing nodes; remaining terminals are renumbered. Empty when nothing
/// but X remains.
std::optional<CCGTree> strip_dummy(const CCGTree& tree);

}  // namespace d2cc
