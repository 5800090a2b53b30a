#include "d2cc/pas.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "d2cc/errors.hpp"
#include "d2cc/grammar.hpp"

namespace d2cc {

namespace {

bool is_atom_char(char ch) {
  return !std::isspace(static_cast<unsigned char>(ch)) && ch != '(' && ch != ')' && ch != '[' && ch != ']' &&
         ch != '/' && ch != '\\' && ch != '{' && ch != '}' && ch != '<' && ch != '>';
}

std::string var_name(int k) {
  std::string s;
  do {
    s.insert(s.begin(), static_cast<char>('A' + k % 26));
    k = k / 26 - 1;
  } while (k >= 0);
  return s;
}

struct MarkupPrinter {
  const IndexedCategory& ic;
  std::map<int, std::string> names;
  int atom = 0;

  std::string name_of(int var) {
    if (std::find(ic.word_bound.begin(), ic.word_bound.end(), var) != ic.word_bound.end()) return "_";
    auto it = names.find(var);
    if (it == names.end()) {
      it = names.emplace(var, var_name(static_cast<int>(names.size()))).first;
    }
    return it->second;
  }

  std::string print(const Category& c, bool outer) {
    if (c.is_atomic()) {
      std::string s = c.name();
      if (c.feature()) s += "[" + *c.feature() + "]";
      s += "{" + name_of(ic.vars[static_cast<std::size_t>(atom)]) + "}";
      if (auto it = ic.slots.find(atom); it != ic.slots.end()) s += "<" + std::to_string(it->second) + ">";
      ++atom;
      return s;
    }
    // Left to right: atom numbering depends on the order of these calls.
    std::string s = print(c.result(), false);
    s += static_cast<char>(c.slash());
    s += print(c.argument(), false);
    return outer ? s : "(" + s + ")";
  }
};

}  // namespace

std::string IndexedCategory::markup() const {
  MarkupPrinter p{*this, {}, 0};
  return p.print(category, true);
}

IndexedCategory parse_markup(std::string_view markup) {
  std::string plain;
  struct Annotation {
    std::string var;
    int slot = 0;
  };
  std::vector<Annotation> atoms;
  std::size_t i = 0;
  auto fail = [&](const std::string& what) { throw ParseError("markup '" + std::string(markup) + "': " + what, i); };
  while (i < markup.size()) {
    const char ch = markup[i];
    if (std::isspace(static_cast<unsigned char>(ch))) {
      ++i;
      continue;
    }
    if (ch == '(' || ch == ')' || ch == '/' || ch == '\\') {
      plain += ch;
      ++i;
      continue;
    }
    if (!is_atom_char(ch)) fail("unexpected character");
    while (i < markup.size() && is_atom_char(markup[i])) plain += markup[i++];
    if (i < markup.size() && markup[i] == '[') {
      auto close = markup.find(']', i);
      if (close == std::string_view::npos) fail("unterminated feature");
      plain += markup.substr(i, close - i + 1);
      i = close + 1;
    }
    Annotation a;
    if (i < markup.size() && markup[i] == '{') {
      auto close = markup.find('}', i);
      if (close == std::string_view::npos) fail("unterminated variable");
      a.var = std::string(markup.substr(i + 1, close - i - 1));
      if (a.var.empty()) fail("empty variable");
      i = close + 1;
    }
    if (i < markup.size() && markup[i] == '<') {
      auto close = markup.find('>', i);
      if (close == std::string_view::npos) fail("unterminated slot");
      try {
        a.slot = std::stoi(std::string(markup.substr(i + 1, close - i - 1)));
      } catch (const std::exception&) {
        fail("bad slot number");
      }
      if (a.slot < 1) fail("slot numbers start at 1");
      i = close + 1;
    }
    atoms.push_back(std::move(a));
  }

  IndexedCategory ic{parse_category(plain), {}, {}, {}};
  if (ic.category.atom_count() != static_cast<int>(atoms.size())) {
    throw ParseError("markup '" + std::string(markup) + "': annotation count mismatch", 0);
  }
  std::map<std::string, int> ids;
  int next = 0;
  for (std::size_t k = 0; k < atoms.size(); ++k) {
    const auto& a = atoms[k];
    int var;
    if (a.var.empty()) {
      var = next++;
    } else {
      auto [it, inserted] = ids.emplace(a.var, next);
      if (inserted) {
        ++next;
        if (a.var == "_") ic.word_bound.push_back(it->second);
      }
      var = it->second;
    }
    ic.vars.push_back(var);
    if (a.slot > 0) ic.slots[static_cast<int>(k)] = a.slot;
  }
  return ic;
}

// ---------------------------------------------------------------- Table

CoindexTable CoindexTable::parse(std::string_view text) {
  CoindexTable table;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string cat, markup, extra;
    if (!(fields >> cat)) continue;
    if (!(fields >> markup) || (fields >> extra)) {
      throw DataError("coindexation table line " + std::to_string(lineno) + ": expected CATEGORY MARKUP");
    }
    try {
      table.add(parse_category(cat), markup);
    } catch (const DataError& e) {
      throw DataError("coindexation table line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return table;
}

CoindexTable CoindexTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open coindexation table " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

CoindexTable CoindexTable::default_table() {
  static constexpr std::string_view kTable =
      "(S[dcl]\\NP)/(S[to]\\NP)   (S[dcl]{_}\\NP{Z}<1>)/(S[to]{W}<2>\\NP{Z})\n"
      "(S[b]\\NP)/(S[to]\\NP)     (S[b]{_}\\NP{Z}<1>)/(S[to]{W}<2>\\NP{Z})\n"
      "(S[ng]\\NP)/(S[to]\\NP)    (S[ng]{_}\\NP{Z}<1>)/(S[to]{W}<2>\\NP{Z})\n"
      "(S[dcl]\\NP)/(S[b]\\NP)    (S[dcl]{_}\\NP{Z}<1>)/(S[b]{W}<2>\\NP{Z})\n"
      "(S[dcl]\\NP)/(S[ng]\\NP)   (S[dcl]{_}\\NP{Z}<1>)/(S[ng]{W}<2>\\NP{Z})\n"
      "(S[dcl]\\NP)/(S[pss]\\NP)  (S[dcl]{_}\\NP{Z}<1>)/(S[pss]{W}<2>\\NP{Z})\n"
      "(S[dcl]\\NP)/(S[adj]\\NP)  (S[dcl]{_}\\NP{Z}<1>)/(S[adj]{W}<2>\\NP{Z})\n"
      "(NP\\NP)/(S[dcl]/NP)       (NP{X}\\NP{X})/(S[dcl]{Y}/NP{X})\n"
      "(NP\\NP)/(S[dcl]\\NP)      (NP{X}\\NP{X})/(S[dcl]{Y}\\NP{X})\n";
  return parse(kTable);
}

void CoindexTable::add(const Category& category, std::string_view markup) {
  IndexedCategory ic = parse_markup(markup);
  if (!(ic.category == category)) {
    throw DataError("markup '" + std::string(markup) + "' does not spell category " + category.str());
  }
  entries_.push_back(std::move(ic));
}

const IndexedCategory* CoindexTable::find(const Category& c) const {
  for (const auto& e : entries_) {
    if (e.category == c) return &e;
  }
  for (const auto& e : entries_) {
    if (pattern_matches(e.category, c)) return &e;
  }
  return nullptr;
}

// ------------------------------------------------------------- Indexing

namespace {

struct DefaultIndexer {
  IndexedCategory& out;
  int next;
  int word_var = -1;

  std::vector<int> fresh(int n) {
    std::vector<int> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = next++;
    return v;
  }

  std::vector<int> index(const Category& c, int offset) {
    if (c.is_atomic()) {
      if (word_var < 0) {
        word_var = next++;
        out.word_bound.push_back(word_var);
      }
      return {word_var};
    }
    if (c.is_modifier()) {
      auto half = fresh(c.result().atom_count());
      auto v = half;
      v.insert(v.end(), half.begin(), half.end());
      return v;
    }
    auto v = index(c.result(), offset);
    const int arg_offset = offset + c.result().atom_count();
    out.slots[arg_offset] = c.arity();
    auto arg = fresh(c.argument().atom_count());
    v.insert(v.end(), arg.begin(), arg.end());
    return v;
  }
};

}  // namespace

IndexedCategory index_lexicon(const Category& category, const CoindexTable& table, int first_var) {
  if (const IndexedCategory* entry = table.find(category)) {
    IndexedCategory ic = *entry;
    ic.category = category;
    for (auto& v : ic.vars) v += first_var;
    for (auto& v : ic.word_bound) v += first_var;
    return ic;
  }
  IndexedCategory ic{category, {}, {}, {}};
  DefaultIndexer indexer{ic, first_var};
  ic.vars = indexer.index(category, 0);
  return ic;
}

// ------------------------------------------------------------ Extraction

namespace {

class Unifier {
 public:
  int fresh() {
    parent_.push_back(static_cast<int>(parent_.size()));
    word_.push_back(0);
    return static_cast<int>(parent_.size()) - 1;
  }
  std::vector<int> fresh(int n) {
    std::vector<int> v;
    for (int k = 0; k < n; ++k) v.push_back(fresh());
    return v;
  }
  void reserve_until(int var) {
    while (static_cast<int>(parent_.size()) <= var) fresh();
  }
  int find(int v) {
    while (parent_[v] != v) v = parent_[v] = parent_[parent_[v]];
    return v;
  }
  int word(int v) { return word_[find(v)]; }
  // Returns false on a clash of distinct words.
  bool bind(int v, int w) {
    int& slot = word_[find(v)];
    if (slot != 0 && slot != w) return false;
    slot = w;
    return true;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return true;
    if (word_[a] != 0 && word_[b] != 0 && word_[a] != word_[b]) return false;
    if (a > b) std::swap(a, b);
    parent_[b] = a;
    if (word_[a] == 0) word_[a] = word_[b];
    return true;
  }

 private:
  std::vector<int> parent_;
  std::vector<int> word_;  // token index, 0 = unbound
};

struct SlotRecord {
  int predicate;
  Category category;
  int slot;
  int var;
};

using Vars = std::vector<int>;

Vars slice(const Vars& v, std::size_t from, std::size_t count) {
  return Vars(v.begin() + static_cast<long>(from), v.begin() + static_cast<long>(from + count));
}
Vars slice(const Vars& v, std::size_t from) { return Vars(v.begin() + static_cast<long>(from), v.end()); }
Vars concat(Vars a, const Vars& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

class Replay {
 public:
  explicit Replay(const CoindexTable& table) : table_(table) {}

  Vars run(const CCGTree& t) {
    Vars out = visit(t);
    if (static_cast<int>(out.size()) != t.category().atom_count()) fail(t, "variable count does not match category");
    return out;
  }

  std::vector<PASDep> deps() {
    std::set<PASDep> out;
    for (const auto& s : slots_) {
      const int w = u_.word(s.var);
      if (w != 0 && w != s.predicate) out.insert(PASDep{s.predicate, s.category, s.slot, w});
    }
    return {out.begin(), out.end()};
  }

 private:
  [[noreturn]] static void fail(const CCGTree& t, const std::string& what) {
    throw DataError("dependency extraction failed at " + t.category().str() + " over tokens " +
                    std::to_string(t.start()) + ".." + std::to_string(t.end()) + ": " + what);
  }

  void unify(const CCGTree& at, const Vars& a, const Vars& b) {
    if (a.size() != b.size()) fail(at, "mismatched categories");
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (!u_.unite(a[k], b[k])) fail(at, "unification clash");
    }
  }

  static std::size_t atoms(const Category& c) { return static_cast<std::size_t>(c.atom_count()); }

  Vars visit(const CCGTree& t) {
    Vars v = visit_node(t);
    if (v.size() != atoms(t.category())) fail(t, "variable count does not match category");
    return v;
  }

  Vars visit_node(const CCGTree& t) {
    const Category& cat = t.category();
    switch (t.kind()) {
      case CCGTree::Kind::Terminal: {
        const int first = u_.fresh();
        IndexedCategory ic = index_lexicon(cat, table_, first);
        for (int v : ic.vars) u_.reserve_until(v);
        for (int v : ic.word_bound) u_.reserve_until(v);
        for (int v : ic.word_bound) {
          if (!u_.bind(v, t.start())) fail(t, "unification clash");
        }
        for (const auto& [pos, slot] : ic.slots) {
          slots_.push_back(SlotRecord{t.start(), cat, slot, ic.vars[static_cast<std::size_t>(pos)]});
        }
        return ic.vars;
      }
      case CCGTree::Kind::Unary:
        return visit_unary(t, visit(t.child()));
      case CCGTree::Kind::Binary: {
        Vars l = visit(t.left());
        Vars r = visit(t.right());
        return visit_binary(t, l, r);
      }
    }
    fail(t, "unknown node kind");
  }

  Vars visit_unary(const CCGTree& t, const Vars& child) {
    const Category& to = t.category();
    const Category& from = t.child().category();
    if (t.rule() == RuleKind::TypeRaise) {
      const std::size_t nt = atoms(to.result());
      Vars tv = u_.fresh(static_cast<int>(nt));
      return concat(concat(tv, tv), child);
    }
    if (t.rule() != RuleKind::UnaryTypeChange) fail(t, "unlicensed unary node");
    if (same_shape(from, to)) return child;
    if (to.is_modifier()) {
      Vars half;
      if (from.is_functor() && same_shape(from.argument(), to.argument())) {
        half = slice(child, atoms(from.result()));
      } else {
        half = u_.fresh(static_cast<int>(atoms(to.result())));
        unify(t, {half[0]}, {child[0]});
      }
      return concat(half, half);
    }
    Vars out = u_.fresh(static_cast<int>(atoms(to)));
    unify(t, {out[0]}, {child[0]});
    return out;
  }

  Vars visit_binary(const CCGTree& t, const Vars& l, const Vars& r) {
    const Category& lc = t.left().category();
    const Category& rc = t.right().category();
    switch (t.rule()) {
      case RuleKind::ForwardApply: {
        const std::size_t nx = atoms(lc.result());
        unify(t, slice(l, nx), r);
        return slice(l, 0, nx);
      }
      case RuleKind::BackwardApply: {
        const std::size_t nx = atoms(rc.result());
        unify(t, slice(r, nx), l);
        return slice(r, 0, nx);
      }
      case RuleKind::ForwardCompose: {
        const std::size_t nx = atoms(lc.result());
        const std::size_t ny = atoms(rc.result());
        unify(t, slice(l, nx), slice(r, 0, ny));
        return concat(slice(l, 0, nx), slice(r, ny));
      }
      case RuleKind::BackwardCompose:
      case RuleKind::BackwardCrossCompose: {
        const std::size_t nx = atoms(rc.result());
        const std::size_t ny = atoms(lc.result());
        unify(t, slice(r, nx), slice(l, 0, ny));
        return concat(slice(r, 0, nx), slice(l, ny));
      }
      case RuleKind::GeneralizedForwardCompose: {
        const std::size_t nx = atoms(lc.result());
        const std::size_t ny = atoms(rc.result().result());
        unify(t, slice(l, nx), slice(r, 0, ny));
        return concat(slice(l, 0, nx), slice(r, ny));
      }
      case RuleKind::Conjunction: {
        Vars half = u_.fresh(static_cast<int>(r.size()));
        return concat(half, half);
      }
      case RuleKind::RemovePunctLeft:
      case RuleKind::XAbsorbRight:
        return r;
      case RuleKind::RemovePunctRight:
      case RuleKind::XAbsorbLeft:
        return l;
      default:
        fail(t, "unlicensed binary node");
    }
  }

  const CoindexTable& table_;
  Unifier u_;
  std::vector<SlotRecord> slots_;
};

}  // namespace

std::vector<PASDep> extract_deps(const CCGTree& tree, const CoindexTable& table) {
  Replay replay(table);
  replay.run(tree);
  return replay.deps();
}

// ----------------------------------------------------------------- Dumps

std::string write_dep_dump(const std::vector<std::vector<PASDep>>& sentences) {
  std::ostringstream out;
  for (const auto& deps : sentences) {
    for (const auto& d : deps) out << d.predicate << ' ' << d.slot << ' ' << d.argument << ' ' << d.category.str() << '\n';
    out << '\n';
  }
  return out.str();
}

std::vector<std::vector<PASDep>> read_dep_dump(std::string_view text) {
  std::vector<std::vector<PASDep>> out;
  std::vector<PASDep> current;
  bool open = false;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      out.push_back(std::move(current));
      current.clear();
      open = false;
      continue;
    }
    std::istringstream fields(line);
    PASDep d{0, Category::dummy(), 0, 0};
    std::string cat, extra;
    if (!(fields >> d.predicate >> d.slot >> d.argument >> cat) || (fields >> extra)) {
      throw DataError("dependency dump line " + std::to_string(lineno) + ": expected 'pred slot arg category'");
    }
    d.category = parse_category(cat);
    current.push_back(std::move(d));
    open = true;
  }
  if (open) out.push_back(std::move(current));
  return out;
}

// ------------------------------------------------------------ Evaluation

PRF prf(std::size_t correct, std::size_t predicted, std::size_t gold) {
  PRF r;
  r.precision = predicted ? 100.0 * static_cast<double>(correct) / static_cast<double>(predicted) : 0.0;
  r.recall = gold ? 100.0 * static_cast<double>(correct) / static_cast<double>(gold) : 0.0;
  r.f1 = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

Metrics evaluate_deps(const std::vector<std::vector<PASDep>>& predicted, const std::vector<std::vector<PASDep>>& gold) {
  if (predicted.size() != gold.size()) {
    throw DataError("sentence count mismatch: " + std::to_string(predicted.size()) + " predicted, " +
                    std::to_string(gold.size()) + " gold");
  }
  Metrics m;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    std::set<PASDep> p(predicted[s].begin(), predicted[s].end());
    std::set<PASDep> g(gold[s].begin(), gold[s].end());
    // Unlabeled: one-to-one matching on (predicate, argument), so a pair
    // filling two slots counts twice on both sides.
    std::map<std::pair<int, int>, std::pair<std::size_t, std::size_t>> pairs;
    for (const auto& d : p) ++pairs[{d.predicate, d.argument}].first;
    for (const auto& d : g) ++pairs[{d.predicate, d.argument}].second;

    m.predicted += p.size();
    m.gold += g.size();
    for (const auto& d : p) {
      ++m.per_category[d.category.str()].predicted;
      if (g.contains(d)) {
        ++m.labeled_correct;
        ++m.per_category[d.category.str()].correct;
      }
    }
    for (const auto& d : g) ++m.per_category[d.category.str()].gold;
    for (const auto& [key, counts] : pairs) m.unlabeled_correct += std::min(counts.first, counts.second);
  }
  m.labeled = prf(m.labeled_correct, m.predicted, m.gold);
  m.unlabeled = prf(m.unlabeled_correct, m.predicted, m.gold);
  return m;
}

Metrics evaluate(const std::vector<CCGTree>& predicted, const std::vector<CCGTree>& gold, const CoindexTable& table) {
  if (predicted.size() != gold.size()) {
    throw DataError("sentence count mismatch: " + std::to_string(predicted.size()) + " predicted, " +
                    std::to_string(gold.size()) + " gold");
  }
  std::vector<std::vector<PASDep>> p, g;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    if (predicted[s].words() != gold[s].words()) {
      throw DataError("sentence " + std::to_string(s + 1) + ": predicted and gold tokens differ");
    }
    p.push_back(extract_deps(predicted[s], table));
    g.push_back(extract_deps(gold[s], table));
  }
  return evaluate_deps(p, g);
}

}  // namespace d2cc
