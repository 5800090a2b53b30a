#include "d2cc/ccg_tree.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "d2cc/errors.hpp"

namespace d2cc {

CCGTree CCGTree::terminal(int index, std::string word, Category category, std::string pos) {
  if (index < 1) throw DataError("terminal index must be positive");
  return CCGTree(std::make_shared<const Node>(Node{Kind::Terminal, std::move(category), RuleKind::Lexicon,
                                                   index, index, std::move(word), std::move(pos), {}}));
}

CCGTree CCGTree::unary(CCGTree child, Category category, RuleKind rule) {
  int s = child.start(), e = child.end();
  return CCGTree(std::make_shared<const Node>(
      Node{Kind::Unary, std::move(category), rule, s, e, {}, {}, {std::move(child)}}));
}

CCGTree CCGTree::binary(CCGTree left, CCGTree right, Category category, RuleKind rule) {
  if (left.end() + 1 != right.start()) {
    throw DataError("binary node children are not adjacent: [" + std::to_string(left.start()) + "," +
                    std::to_string(left.end()) + "] [" + std::to_string(right.start()) + "," +
                    std::to_string(right.end()) + "]");
  }
  int s = left.start(), e = right.end();
  return CCGTree(std::make_shared<const Node>(
      Node{Kind::Binary, std::move(category), rule, s, e, {}, {}, {std::move(left), std::move(right)}}));
}

std::vector<CCGTree> CCGTree::leaves() const {
  std::vector<CCGTree> out;
  std::vector<const CCGTree*> stack{this};
  while (!stack.empty()) {
    const CCGTree* t = stack.back();
    stack.pop_back();
    if (t->is_terminal()) {
      out.push_back(*t);
      continue;
    }
    for (auto it = t->children().rbegin(); it != t->children().rend(); ++it) stack.push_back(&*it);
  }
  return out;
}

std::vector<std::string> CCGTree::words() const {
  std::vector<std::string> out;
  for (const auto& leaf : leaves()) out.push_back(leaf.word());
  return out;
}

std::vector<Category> CCGTree::supertags() const {
  std::vector<Category> out;
  for (const auto& leaf : leaves()) out.push_back(leaf.category());
  return out;
}

int CCGTree::unary_count() const {
  int n = kind() == Kind::Unary ? 1 : 0;
  for (const auto& c : children()) n += c.unary_count();
  return n;
}

std::string CCGTree::to_string() const {
  if (is_terminal()) return "(" + category().str() + " " + word() + ")";
  std::string s = "(" + category().str();
  for (const auto& c : children()) s += " " + c.to_string();
  return s + ")";
}

bool operator==(const CCGTree& a, const CCGTree& b) {
  if (a.node_ == b.node_) return true;
  return a.kind() == b.kind() && a.category() == b.category() && a.rule() == b.rule() &&
         a.start() == b.start() && a.end() == b.end() && a.word() == b.word() && a.pos() == b.pos() &&
         a.children() == b.children();
}

HeadFirstDeps extract_headfirst(const CCGTree& tree) {
  HeadFirstDeps deps;
  deps.parents.assign(tree.end(), 0);
  std::vector<const CCGTree*> stack{&tree};
  while (!stack.empty()) {
    const CCGTree* t = stack.back();
    stack.pop_back();
    if (t->kind() == CCGTree::Kind::Binary) {
      deps.parents[t->right().start() - 1] = t->left().start();
    }
    for (const auto& c : t->children()) stack.push_back(&c);
  }
  return deps;
}

std::vector<Violation> validate_tree(const CCGTree& tree, const Grammar& grammar) {
  std::vector<Violation> out;
  std::vector<const CCGTree*> stack{&tree};
  while (!stack.empty()) {
    const CCGTree* t = stack.back();
    stack.pop_back();
    for (const auto& c : t->children()) stack.push_back(&c);
    if (t->is_terminal()) continue;

    std::vector<Derivation> licensed = t->kind() == CCGTree::Kind::Unary
                                           ? grammar.apply_unary(t->child().category())
                                           : grammar.apply_binary(t->left().category(), t->right().category());
    Derivation here{t->category(), t->rule()};
    if (std::find(licensed.begin(), licensed.end(), here) != licensed.end()) continue;

    std::string children;
    for (const auto& c : t->children()) children += (children.empty() ? "" : " ") + c.category().str();
    out.push_back({t->start(), t->end(),
                   "node [" + std::to_string(t->start()) + "," + std::to_string(t->end()) + "] " + children +
                       " => " + t->category().str() + " (" + std::string(rule_name(t->rule())) +
                       ") is not licensed"});
  }
  if (!grammar.is_root(tree.category())) {
    out.push_back({tree.start(), tree.end(), "root category " + tree.category().str() + " is not in the root set"});
  }
  return out;
}

RuleKind infer_binary_rule(const Category& left, const Category& right, const Category& result) {
  static const Grammar permissive = [] {
    Grammar g = Grammar::default_grammar();
    g.set_x_absorption(true);
    return g;
  }();
  for (const auto& d : permissive.apply_binary(left, right)) {
    if (d.category == result) return d.rule;
  }
  return RuleKind::Unknown;
}

RuleKind infer_unary_rule(const Category& child, const Category& result) {
  if (result.is_functor() && result.argument().is_functor() &&
      same_shape(result.result(), result.argument().result()) && same_shape(result.argument().argument(), child) &&
      result.slash() != result.argument().slash()) {
    return RuleKind::TypeRaise;
  }
  return RuleKind::UnaryTypeChange;
}

namespace {

class AutoParser {
 public:
  explicit AutoParser(std::string_view text) : text_(text) {}

  CCGTree parse() {
    skip_space();
    CCGTree t = node();
    skip_space();
    if (pos_ != text_.size()) fail("trailing characters after tree");
    return t;
  }

 private:
  CCGTree node() {
    expect('(');
    expect('<');
    if (pos_ >= text_.size()) fail("truncated node");
    char kind = text_[pos_++];
    if (kind == 'L') return leaf();
    if (kind != 'T') fail("expected 'L' or 'T'");

    auto close = text_.find('>', pos_);
    if (close == std::string_view::npos) fail("unterminated node header");
    std::size_t header_at = pos_;
    auto fields = split(text_.substr(pos_, close - pos_));
    pos_ = close + 1;
    if (fields.size() != 3) throw ParseError("internal node header needs 'cat head dtrs'", header_at);
    Category cat = category(fields[0], header_at);
    int dtrs = 0;
    try {
      dtrs = std::stoi(fields[2]);
    } catch (const std::exception&) {
      throw ParseError("bad daughter count '" + fields[2] + "'", header_at);
    }

    std::vector<CCGTree> kids;
    skip_space();
    while (pos_ < text_.size() && text_[pos_] == '(') {
      kids.push_back(node());
      skip_space();
    }
    expect(')');
    if (static_cast<int>(kids.size()) != dtrs) {
      throw ParseError("node declares " + std::to_string(dtrs) + " daughters but has " +
                           std::to_string(kids.size()),
                       header_at);
    }
    if (dtrs == 1) {
      RuleKind rule = infer_unary_rule(kids[0].category(), cat);
      return CCGTree::unary(std::move(kids[0]), std::move(cat), rule);
    }
    if (dtrs == 2) {
      RuleKind rule = infer_binary_rule(kids[0].category(), kids[1].category(), cat);
      return CCGTree::binary(std::move(kids[0]), std::move(kids[1]), std::move(cat), rule);
    }
    throw ParseError("unsupported daughter count " + std::to_string(dtrs), header_at);
  }

  CCGTree leaf() {
    auto close = text_.find(">)", pos_);
    if (close == std::string_view::npos) fail("unterminated leaf");
    std::size_t at = pos_;
    auto fields = split(text_.substr(pos_, close - pos_));
    pos_ = close + 2;
    if (fields.size() < 4) throw ParseError("leaf needs 'cat pos pos word ...'", at);
    return CCGTree::terminal(++next_index_, fields[3], category(fields[0], at), fields[1]);
  }

  Category category(const std::string& text, std::size_t at) {
    try {
      return parse_category(text);
    } catch (const ParseError& e) {
      throw ParseError(std::string("bad category: ") + e.what(), at);
    }
  }

  static std::vector<std::string> split(std::string_view s) {
    std::vector<std::string> out;
    std::istringstream in{std::string(s)};
    std::string f;
    while (in >> f) out.push_back(f);
    return out;
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  void expect(char ch) {
    skip_space();
    if (pos_ >= text_.size() || text_[pos_] != ch) fail(std::string("expected '") + ch + "'");
    ++pos_;
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, pos_); }

  std::string_view text_;
  std::size_t pos_ = 0;
  int next_index_ = 0;
};

void write_node(const CCGTree& t, std::string& out) {
  if (t.is_terminal()) {
    const std::string& cat = t.category().str();
    out += "(<L " + cat + " " + t.pos() + " " + t.pos() + " " + t.word() + " " + cat + ">)";
    return;
  }
  out += "(<T " + t.category().str() + " 0 " + std::to_string(t.children().size()) + "> ";
  for (const auto& c : t.children()) {
    write_node(c, out);
    out += ' ';
  }
  out += ')';
}

}  // namespace

CCGTree parse_auto_tree(std::string_view text) { return AutoParser(text).parse(); }

std::vector<CCGTree> read_auto(std::string_view text) {
  std::vector<CCGTree> trees;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    std::size_t end = nl == std::string_view::npos ? text.size() : nl;
    std::string_view line = text.substr(pos, end - pos);
    std::size_t line_at = pos;
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos || line.starts_with("ID=")) continue;
    try {
      trees.push_back(parse_auto_tree(line));
    } catch (const ParseError& e) {
      throw ParseError("tree " + std::to_string(trees.size() + 1) + ": " + e.what(), line_at + e.position());
    }
  }
  return trees;
}

std::string write_auto_tree(const CCGTree& tree) {
  std::string out;
  write_node(tree, out);
  return out;
}

std::string write_auto(const std::vector<CCGTree>& trees) {
  std::string out;
  for (std::size_t i = 0; i < trees.size(); ++i) {
    out += "ID=" + std::to_string(i + 1) + "\n";
    out += write_auto_tree(trees[i]) + "\n";
  }
  return out;
}

nlohmann::json tree_to_json(const CCGTree& t) {
  nlohmann::json j;
  j["category"] = t.category().str();
  switch (t.kind()) {
    case CCGTree::Kind::Terminal:
      j["type"] = "terminal";
      j["index"] = t.start();
      j["word"] = t.word();
      j["pos"] = t.pos();
      break;
    case CCGTree::Kind::Unary:
      j["type"] = "unary";
      j["rule"] = rule_name(t.rule());
      j["child"] = tree_to_json(t.child());
      break;
    case CCGTree::Kind::Binary:
      j["type"] = "binary";
      j["rule"] = rule_name(t.rule());
      j["left"] = tree_to_json(t.left());
      j["right"] = tree_to_json(t.right());
      break;
  }
  return j;
}

CCGTree tree_from_json(const nlohmann::json& j) {
  try {
    const std::string type = j.at("type");
    Category cat = parse_category(j.at("category").get<std::string>());
    if (type == "terminal") {
      return CCGTree::terminal(j.at("index"), j.at("word"), cat, j.value("pos", "_"));
    }
    RuleKind rule = rule_from_name(j.at("rule").get<std::string>());
    if (type == "unary") return CCGTree::unary(tree_from_json(j.at("child")), cat, rule);
    if (type == "binary") return CCGTree::binary(tree_from_json(j.at("left")), tree_from_json(j.at("right")), cat, rule);
    throw DataError("unknown node type '" + type + "'");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed JSON tree: ") + e.what());
  }
}

namespace {

std::optional<CCGTree> strip_node(const CCGTree& t, const std::vector<int>& renumber) {
  switch (t.kind()) {
    case CCGTree::Kind::Terminal:
      if (t.category().is_dummy()) return std::nullopt;
      return CCGTree::terminal(renumber[t.start()], t.word(), t.category(), t.pos());
    case CCGTree::Kind::Unary: {
      auto child = strip_node(t.child(), renumber);
      if (!child) return std::nullopt;
      return CCGTree::unary(std::move(*child), t.category(), t.rule());
    }
    case CCGTree::Kind::Binary: {
      auto l = strip_node(t.left(), renumber);
      auto r = strip_node(t.right(), renumber);
      if (!l) return r;
      if (!r) return l;
      return CCGTree::binary(std::move(*l), std::move(*r), t.category(), t.rule());
    }
  }
  return std::nullopt;
}

}  // namespace

std::optional<CCGTree> strip_dummy(const CCGTree& tree) {
  std::vector<int> renumber(tree.end() + 1, 0);
  int next = 0;
  for (const auto& leaf : tree.leaves()) {
    if (!leaf.category().is_dummy()) renumber[leaf.start()] = ++next;
  }
  return strip_node(tree, renumber);
}

}  // namespace d2cc
