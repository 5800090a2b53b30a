#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "d2cc/ccg_tree.hpp"
#include "d2cc/grammar.hpp"
#include "d2cc/scores.hpp"

namespace d2cc {

class ConverterModel;
struct DepTree;

/// A required constituent over tokens [start, end] (1-based, inclusive).
/// Without a category it only forbids crossing brackets.
struct Constraint {
  std::optional<Category> category;
  int start = 1;
  int end = 1;

  bool is_terminal() const { return category && start == end; }
  friend bool operator==(const Constraint&, const Constraint&) = default;
};

/// {"category": "NP" | null, "start": 1, "end": 2}
Constraint constraint_from_json(const nlohmann::json& j);
nlohmann::json constraint_to_json(const Constraint& c);
std::vector<Constraint> constraints_from_json(const nlohmann::json& array);

/// Throws DataError unless 1 <= start <= end <= n.
void check_constraint_span(const Constraint& c, int n);

struct DecodeOptions {
  /// Supertags more than this far below a token's best log prob are skipped.
  /// -inf disables pruning.
  double beam = std::log(1e-4);
  /// Maximum number of agenda pops before a ResourceError.
  std::size_t budget = 1'000'000;
};

struct DecodeResult {
  CCGTree tree;
  /// Σ tag_logp + Σ dep_logp of the tree, recomputed from the tree itself.
  double score;
  std::size_t pops = 0;
};

/// Upper bound on the completion score of an item over [start, end] headed by `head`.
double heuristic(const ScoreMatrices& m, int start, int end, int head);

/// Σ tag_logp[i, c_i] + Σ dep_logp[i, d_i] under Head First parents.
double tree_score(const ScoreMatrices& m, const CCGTree& tree);

/// False when a constituent (category, start, end) cannot be part of a tree
/// satisfying `constraints`.
bool check_constraint(const Category& category, int start, int end, const std::vector<Constraint>& constraints,
                      const Grammar& grammar);
/// Span-only form: the crossing-bracket test alone.
bool crosses(int start, int end, const Constraint& c);

/// Turns each terminal constraint's row of tag_logp into a log-domain one-hot.
ScoreMatrices apply_terminal_constraints(ScoreMatrices m, const std::vector<Constraint>& constraints);

/// Most probable grammatical tree satisfying all constraints. Throws
/// NoParseError when none exists and ResourceError when the budget runs out.
/// `pos` (optional) fills the terminals' POS tags.
DecodeResult astar_parse(const ScoreMatrices& m, const Grammar& grammar, const std::vector<Constraint>& constraints = {},
                         const DecodeOptions& options = {}, const std::vector<std::string>* pos = nullptr);

/// Scores `input` with the model and decodes it.
DecodeResult convert(const ConverterModel& model, const Grammar& grammar, const DepTree& input,
                     const std::vector<Constraint>& constraints = {}, const DecodeOptions& options = {});

}  // namespace d2cc
