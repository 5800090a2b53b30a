#include "d2cc/decoder.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <queue>
#include <tuple>
#include <unordered_map>

#include "d2cc/converter_model.hpp"
#include "d2cc/dep_tree.hpp"
#include "d2cc/errors.hpp"

namespace d2cc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

// ------------------------------------------------------------ Constraints

Constraint constraint_from_json(const nlohmann::json& j) {
  try {
    Constraint c;
    const auto& cat = j.at("category");
    if (!cat.is_null()) c.category = parse_category(cat.get<std::string>());
    c.start = j.at("start").get<int>();
    c.end = j.at("end").get<int>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed constraint: ") + e.what());
  }
}

nlohmann::json constraint_to_json(const Constraint& c) {
  nlohmann::json j;
  j["category"] = c.category ? nlohmann::json(c.category->str()) : nlohmann::json(nullptr);
  j["start"] = c.start;
  j["end"] = c.end;
  return j;
}

std::vector<Constraint> constraints_from_json(const nlohmann::json& array) {
  if (!array.is_array()) throw DataError("constraints must be a JSON array");
  std::vector<Constraint> out;
  for (const auto& j : array) out.push_back(constraint_from_json(j));
  return out;
}

void check_constraint_span(const Constraint& c, int n) {
  if (c.start < 1 || c.start > c.end || c.end > n) {
    throw DataError("constraint span [" + std::to_string(c.start) + ", " + std::to_string(c.end) +
                    "] is outside a sentence of " + std::to_string(n) + " tokens");
  }
}

bool crosses(int start, int end, const Constraint& c) {
  const int i = c.start, j = c.end;
  return (i < start && start <= j && j < end) || (start < i && i <= end && end < j);
}

bool check_constraint(const Category& category, int start, int end, const std::vector<Constraint>& constraints,
                      const Grammar& grammar) {
  for (const auto& c : constraints) {
    if (crosses(start, end, c)) return false;
    if (c.category && c.start == start && c.end == end && !matches(category, *c.category) &&
        !grammar.unary_reaches(category, *c.category)) {
      return false;
    }
  }
  return true;
}

ScoreMatrices apply_terminal_constraints(ScoreMatrices m, const std::vector<Constraint>& constraints) {
  std::map<int, Category> fixed;
  for (const auto& c : constraints) {
    if (!c.is_terminal()) continue;
    check_constraint_span(c, m.size());
    auto [it, inserted] = fixed.emplace(c.start, *c.category);
    if (!inserted && !(it->second == *c.category)) {
      throw DataError("conflicting terminal constraints on token " + std::to_string(c.start) + ": " +
                      it->second.str() + " and " + c.category->str());
    }
  }
  for (const auto& [token, category] : fixed) {
    const int col = m.category_index(category);
    if (col < 0) throw VocabularyError("constrained category " + category.str() + " is not in the inventory");
    m.tag_logp.row(token - 1).setConstant(kNegInf);
    m.tag_logp(token - 1, col) = 0.0;
  }
  return m;
}

// -------------------------------------------------------------- Scoring

double heuristic(const ScoreMatrices& m, int start, int end, int head) {
  double h = m.dep_logp.row(head - 1).maxCoeff();
  for (int k = 1; k <= m.size(); ++k) {
    if (k >= start && k <= end) continue;
    h += m.tag_logp.row(k - 1).maxCoeff() + m.dep_logp.row(k - 1).maxCoeff();
  }
  return h;
}

double tree_score(const ScoreMatrices& m, const CCGTree& tree) {
  const auto tags = tree.supertags();
  const auto parents = extract_headfirst(tree).parents;
  double s = 0.0;
  for (int i = 0; i < static_cast<int>(tags.size()); ++i) {
    const int col = m.category_index(tags[i]);
    s += col < 0 ? kNegInf : m.tag_logp(i, col);
    s += m.dep_logp(i, parents[i]);
  }
  return s;
}

// ------------------------------------------------------------------ A*

namespace {

struct Item {
  int start;
  int end;
  Category category;
  int depth;  // unary steps directly above the last binary/terminal node
  double inside;
  RuleKind rule;
  int left = -1;  // child item ids
  int right = -1;
  int unaries = 0;  // total unary nodes in the derivation
  int tag = -1;     // terminal category column
  bool goal = false;
};

struct ChartKey {
  int start;
  int end;
  std::string category;
  int depth;
  friend bool operator==(const ChartKey&, const ChartKey&) = default;
};

struct ChartKeyHash {
  std::size_t operator()(const ChartKey& k) const {
    std::size_t h = std::hash<std::string>{}(k.category);
    h ^= std::hash<int>{}(k.start * 4099 + k.end * 17 + k.depth) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
  }
};

// Priorities are compared after rounding so that sums taken in different
// orders still tie.
std::int64_t quantize(double priority) { return std::llround(priority * 1e10); }

class Decoder {
 public:
  Decoder(const ScoreMatrices& m, const Grammar& grammar, const std::vector<Constraint>& constraints,
          const DecodeOptions& options, const std::vector<std::string>* pos)
      : m_(m), grammar_(grammar), constraints_(constraints), options_(options), pos_(pos), n_(m.size()) {
    outside_.assign(n_ + 2, 0.0);
    max_dep_.resize(n_ + 1);
    // outside_[k] = Σ_{t<=k} best(t); outside of [i,j] = total - (prefix[j] - prefix[i-1]).
    for (int k = 1; k <= n_; ++k) {
      max_dep_[k] = m.dep_logp.row(k - 1).maxCoeff();
      outside_[k] = outside_[k - 1] + m.tag_logp.row(k - 1).maxCoeff() + max_dep_[k];
    }
    by_start_.resize(n_ + 2);
    by_end_.resize(n_ + 2);
  }

  std::optional<DecodeResult> run() {
    for (int i = 1; i <= n_; ++i) {
      const auto row = m_.tag_logp.row(i - 1);
      const double best = row.maxCoeff();
      for (int c = 0; c < row.size(); ++c) {
        const double s = row(c);
        if (s == kNegInf || s < best + options_.beam) continue;
        const Category& cat = m_.categories[static_cast<std::size_t>(c)];
        if (!check_constraint(cat, i, i, constraints_, grammar_)) continue;
        Item item{i, i, cat, 0, s, RuleKind::Lexicon};
        item.tag = c;
        push(std::move(item));
      }
    }

    std::size_t pops = 0;
    while (!agenda_.empty()) {
      const int id = agenda_.top().id;
      agenda_.pop();
      if (++pops > options_.budget) {
        throw ResourceError("decoder budget of " + std::to_string(options_.budget) + " pops exceeded");
      }
      const Item& item = items_[static_cast<std::size_t>(id)];
      if (item.goal) return DecodeResult{build(item.left), 0.0, pops};

      ChartKey key{item.start, item.end, item.category.str(), item.depth};
      if (!chart_.emplace(key, id).second) continue;
      by_start_[item.start].push_back(id);
      by_end_[item.end].push_back(id);
      expand(id);
    }
    return std::nullopt;
  }

 private:
  struct Entry {
    std::int64_t priority;
    int width;
    int start;
    std::string category;
    int goal;
    int unaries;
    int id;
  };
  struct EntryOrder {
    // std::priority_queue pops the largest element; "larger" means popped first.
    bool operator()(const Entry& a, const Entry& b) const {
      return std::tie(a.priority, b.width, b.start, b.category, a.goal, b.unaries, b.id) <
             std::tie(b.priority, a.width, a.start, a.category, b.goal, a.unaries, a.id);
    }
  };

  double priority(const Item& item) const {
    if (item.goal) return item.inside;
    const double outside = outside_[n_] - (outside_[item.end] - outside_[item.start - 1]);
    return item.inside + outside + max_dep_[item.start];
  }

  void push(Item item) {
    const double p = priority(item);
    if (!std::isfinite(p)) return;
    const int id = static_cast<int>(items_.size());
    agenda_.push(Entry{quantize(p), item.end - item.start + 1, item.start, item.category.str(), item.goal ? 1 : 0,
                       item.unaries, id});
    items_.push_back(std::move(item));
  }

  void expand(int id) {
    // Copy: push() may reallocate items_.
    const Item item = items_[static_cast<std::size_t>(id)];

    if (item.start == 1 && item.end == n_ && grammar_.is_root(item.category)) {
      Item goal = item;
      goal.inside = item.inside + m_.dep_logp(item.start - 1, 0);
      goal.goal = true;
      goal.left = id;
      push(std::move(goal));
    }

    if (item.depth == 0) {
      for (const auto& d : grammar_.apply_unary(item.category)) {
        if (!check_constraint(d.category, item.start, item.end, constraints_, grammar_)) continue;
        Item up{item.start, item.end, d.category, 1, item.inside, d.rule, id};
        up.unaries = item.unaries + 1;
        push(std::move(up));
      }
    }

    // Item on the left.
    if (item.end < n_) {
      const auto partners = by_start_[item.end + 1];
      for (int r : partners) combine(id, r);
    }
    // Item on the right.
    if (item.start > 1) {
      const auto partners = by_end_[item.start - 1];
      for (int l : partners) combine(l, id);
    }
  }

  void combine(int l, int r) {
    const Item& left = items_[static_cast<std::size_t>(l)];
    const Item& right = items_[static_cast<std::size_t>(r)];
    const int start = left.start, end = right.end;
    auto derivations = grammar_.apply_binary(left.category, right.category);
    if (derivations.empty()) return;
    const double inside = left.inside + right.inside + m_.dep_logp(right.start - 1, left.start);
    const int unaries = left.unaries + right.unaries;
    for (auto& d : derivations) {
      if (!check_constraint(d.category, start, end, constraints_, grammar_)) continue;
      Item parent{start, end, std::move(d.category), 0, inside, d.rule, l, r};
      parent.unaries = unaries;
      push(std::move(parent));
    }
  }

  CCGTree build(int id) const {
    const Item& item = items_[static_cast<std::size_t>(id)];
    if (item.rule == RuleKind::Lexicon) {
      const auto k = static_cast<std::size_t>(item.start - 1);
      std::string word = k < m_.tokens.size() ? m_.tokens[k] : "w" + std::to_string(item.start);
      std::string tag = pos_ && k < pos_->size() ? (*pos_)[k] : "_";
      return CCGTree::terminal(item.start, std::move(word), item.category, std::move(tag));
    }
    if (item.right < 0) return CCGTree::unary(build(item.left), item.category, item.rule);
    return CCGTree::binary(build(item.left), build(item.right), item.category, item.rule);
  }

  const ScoreMatrices& m_;
  const Grammar& grammar_;
  const std::vector<Constraint>& constraints_;
  const DecodeOptions& options_;
  const std::vector<std::string>* pos_;
  int n_;

  std::vector<double> outside_;
  std::vector<double> max_dep_;
  std::vector<Item> items_;
  std::priority_queue<Entry, std::vector<Entry>, EntryOrder> agenda_;
  std::unordered_map<ChartKey, int, ChartKeyHash> chart_;
  std::vector<std::vector<int>> by_start_;
  std::vector<std::vector<int>> by_end_;
};

}  // namespace

DecodeResult astar_parse(const ScoreMatrices& m, const Grammar& grammar, const std::vector<Constraint>& constraints,
                         const DecodeOptions& options, const std::vector<std::string>* pos) {
  m.check();
  for (const auto& c : constraints) check_constraint_span(c, m.size());

  auto result = Decoder(m, grammar, constraints, options, pos).run();
  if (!result) {
    auto cause = NoParseError::Cause::Grammar;
    if (!constraints.empty()) {
      try {
        if (Decoder(m, grammar, {}, options, pos).run()) cause = NoParseError::Cause::Constraints;
      } catch (const ResourceError&) {
        cause = NoParseError::Cause::Unknown;
      }
    }
    throw NoParseError(cause == NoParseError::Cause::Constraints ? "no valid parse satisfies the constraints"
                                                                 : "no valid parse",
                       cause);
  }
  result->score = tree_score(m, result->tree);
  return *std::move(result);
}

DecodeResult convert(const ConverterModel& model, const Grammar& grammar, const DepTree& input,
                     const std::vector<Constraint>& constraints, const DecodeOptions& options) {
  ScoreMatrices m = model.predict(input);
  // The dummy category may be imposed even though the model never predicts it.
  for (const auto& c : constraints) {
    if (c.is_terminal() && c.category->is_dummy() && m.category_index(*c.category) < 0) {
      m.categories.push_back(*c.category);
      m.tag_logp.conservativeResize(Eigen::NoChange, m.tag_logp.cols() + 1);
      m.tag_logp.col(m.tag_logp.cols() - 1).setConstant(kNegInf);
    }
  }
  m = apply_terminal_constraints(std::move(m), constraints);
  return astar_parse(m, grammar, constraints, options, &input.pos);
}

}  // namespace d2cc
