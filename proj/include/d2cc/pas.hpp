#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "d2cc/category.hpp"
#include "d2cc/ccg_tree.hpp"

namespace d2cc {

/// A category whose atoms (left to right) carry head variables. Some
/// variables are bound to the lexical item's own word; some atoms carry a
/// numbered argument slot.
struct IndexedCategory {
  Category category;
  std::vector<int> vars;          // one per atom
  std::map<int, int> slots;       // atom position -> slot number
  std::vector<int> word_bound;    // variables bound to the entry's word

  /// Canonical markup, e.g. "(S{_}\NP{A}<1>)/NP{B}<2>". Variables are renamed
  /// A, B, ... in order of appearance; "_" marks the word.
  std::string markup() const;
};

/// Category -> markup entries overriding the default indexing.
class CoindexTable {
 public:
  CoindexTable() = default;

  /// Lines of "CATEGORY MARKUP"; '#' starts a comment.
  static CoindexTable parse(std::string_view text);
  static CoindexTable load(const std::filesystem::path& path);
  /// The table shipped in data/pas/coindex.txt.
  static CoindexTable default_table();

  void add(const Category& category, std::string_view markup);
  /// Exact entry, else the first entry whose pattern matches.
  const IndexedCategory* find(const Category& c) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<IndexedCategory> entries_;
};

/// Parses markup such as "(S[dcl]{_}\NP{Z}<1>)/(S[to]{W}<2>\NP{Z})".
/// Variable ids are 0, 1, ... by first appearance; unannotated atoms get
/// their own fresh ids.
IndexedCategory parse_markup(std::string_view markup);

/// Lexical indexing: table entry if any, otherwise the default scheme. Variable
/// ids start at `first_var`.
IndexedCategory index_lexicon(const Category& category, const CoindexTable& table, int first_var = 0);

struct PASDep {
  int predicate;  // 1-based token index
  Category category;
  int slot;
  int argument;  // 1-based token index

  friend bool operator==(const PASDep& a, const PASDep& b) {
    return a.predicate == b.predicate && a.slot == b.slot && a.argument == b.argument && a.category == b.category;
  }
  friend bool operator<(const PASDep& a, const PASDep& b) {
    return std::tie(a.predicate, a.slot, a.argument, a.category) <
           std::tie(b.predicate, b.slot, b.argument, b.category);
  }
};

/// Replays the derivation with variable unification. Sorted, without duplicates.
/// Throws DataError naming the node on a unification clash or an unlicensed node.
std::vector<PASDep> extract_deps(const CCGTree& tree, const CoindexTable& table);

/// "pred slot arg category" lines; sentences separated by blank lines.
std::string write_dep_dump(const std::vector<std::vector<PASDep>>& sentences);
std::vector<std::vector<PASDep>> read_dep_dump(std::string_view text);

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Percentages from match counts; 0 when a denominator is 0.
PRF prf(std::size_t correct, std::size_t predicted, std::size_t gold);

struct CategoryStats {
  std::size_t predicted = 0;
  std::size_t gold = 0;
  std::size_t correct = 0;
};

struct Metrics {
  PRF labeled;
  PRF unlabeled;
  std::size_t predicted = 0;
  std::size_t gold = 0;
  std::size_t labeled_correct = 0;
  std::size_t unlabeled_correct = 0;
  /// Labeled counts keyed by predicate category text.
  std::map<std::string, CategoryStats> per_category;
};

/// Micro-averaged labeled and unlabeled scores over aligned sentences.
Metrics evaluate_deps(const std::vector<std::vector<PASDep>>& predicted, const std::vector<std::vector<PASDep>>& gold);

/// Extracts dependencies from both sides and scores them. Sentences must
/// have identical tokens.
Metrics evaluate(const std::vector<CCGTree>& predicted, const std::vector<CCGTree>& gold, const CoindexTable& table);

}  // namespace d2cc
