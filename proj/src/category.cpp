#include "d2cc/category.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "d2cc/errors.hpp"

namespace d2cc {

namespace {

constexpr std::array<std::string_view, 6> kPunctuation = {",", ".", ":", ";", "LRB", "RRB"};

std::string wrap(const Category& c) { return c.is_functor() ? "(" + c.str() + ")" : c.str(); }

bool is_name_char(char ch) {
  return ch != '(' && ch != ')' && ch != '[' && ch != ']' && ch != '/' && ch != '\\' &&
         !std::isspace(static_cast<unsigned char>(ch));
}

class CategoryParser {
 public:
  explicit CategoryParser(std::string_view text) : text_(text) {}

  Category parse() {
    if (text_.empty()) throw ParseError("empty category", 0);
    Category c = expression();
    if (pos_ != text_.size()) {
      throw ParseError("unexpected '" + std::string(1, text_[pos_]) + "' in category '" +
                           std::string(text_) + "'",
                       pos_);
    }
    return c;
  }

 private:
  Category expression() {
    Category left = term();
    while (pos_ < text_.size() && (text_[pos_] == '/' || text_[pos_] == '\\')) {
      Slash slash = text_[pos_] == '/' ? Slash::Forward : Slash::Backward;
      ++pos_;
      left = Category::functor(std::move(left), slash, term());
    }
    return left;
  }

  Category term() {
    if (pos_ >= text_.size()) fail("missing argument");
    if (text_[pos_] == '(') {
      ++pos_;
      Category inner = expression();
      if (pos_ >= text_.size() || text_[pos_] != ')') fail("unbalanced parenthesis");
      ++pos_;
      return inner;
    }
    std::size_t start = pos_;
    while (pos_ < text_.size() && is_name_char(text_[pos_])) ++pos_;
    if (start == pos_) fail("empty atom");
    std::string name(text_.substr(start, pos_ - start));
    std::optional<std::string> feature;
    if (pos_ < text_.size() && text_[pos_] == '[') {
      std::size_t close = text_.find(']', pos_);
      if (close == std::string_view::npos) fail("unterminated feature");
      if (close == pos_ + 1) fail("empty feature");
      feature = std::string(text_.substr(pos_ + 1, close - pos_ - 1));
      if (name == Category::kDummyName) {
        throw ParseError("dummy category X cannot carry a feature", start);
      }
      pos_ = close + 1;
    }
    return Category::atom(std::move(name), std::move(feature));
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(what + " in category '" + std::string(text_) + "'", pos_);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

// Unification state: binding per side plus whether the two variables were
// forced equal.
struct UnifyState {
  std::optional<std::string> left, right;
  bool linked = false;

  bool bind(std::optional<std::string>& slot, const std::string& feature) {
    if (slot && *slot != feature) return false;
    slot = feature;
    return true;
  }
};

bool unify_into(const Category& a, const Category& b, UnifyState& st) {
  if (a.is_functor() != b.is_functor()) return false;
  if (a.is_functor()) {
    return a.slash() == b.slash() && unify_into(a.result(), b.result(), st) &&
           unify_into(a.argument(), b.argument(), st);
  }
  if (a.name() != b.name()) return false;
  bool va = a.has_feature_variable();
  bool vb = b.has_feature_variable();
  if (va && vb) {
    st.linked = true;
    return true;
  }
  if (va) return b.feature() ? st.bind(st.left, *b.feature()) : true;
  if (vb) return a.feature() ? st.bind(st.right, *a.feature()) : true;
  if (a.feature() && b.feature()) return *a.feature() == *b.feature();
  return true;  // a featureless non-S atom is a wildcard
}

}  // namespace

Category Category::atom(std::string name, std::optional<std::string> feature) {
  auto node = std::make_shared<Node>();
  node->text = name;
  if (feature) node->text += "[" + *feature + "]";
  node->name = std::move(name);
  node->feature = std::move(feature);
  return Category(std::move(node));
}

Category Category::functor(Category result, Slash slash, Category argument) {
  auto node = std::make_shared<Node>();
  node->text = wrap(result) + static_cast<char>(slash) + wrap(argument);
  node->slash = slash;
  // A modifier-shaped functor takes one argument however deep its result is.
  node->arity = same_shape(result, argument) ? 1 : result.arity() + 1;
  node->depth = 1 + std::max(result.depth(), argument.depth());
  node->atoms = result.atom_count() + argument.atom_count();
  node->result = std::make_shared<const Category>(std::move(result));
  node->argument = std::make_shared<const Category>(std::move(argument));
  return Category(std::move(node));
}

bool Category::is_dummy() const { return is_atomic() && name() == kDummyName && !feature(); }

bool Category::is_punctuation() const {
  return is_atomic() && std::find(kPunctuation.begin(), kPunctuation.end(), name()) != kPunctuation.end();
}

bool Category::is_conj() const { return is_atomic() && name() == "conj"; }

bool Category::has_feature_variable() const {
  if (!is_atomic()) return false;
  if (feature()) return *feature() == kVariableFeature;
  return name() == "S";
}

bool Category::is_modifier() const { return is_functor() && same_shape(result(), argument()); }

Category Category::without_features() const {
  if (is_atomic()) return feature() ? atom(name()) : *this;
  return functor(result().without_features(), slash(), argument().without_features());
}

bool same_shape(const Category& a, const Category& b) {
  if (a.is_functor() != b.is_functor()) return false;
  if (a.is_atomic()) return a.name() == b.name();
  return a.slash() == b.slash() && same_shape(a.result(), b.result()) &&
         same_shape(a.argument(), b.argument());
}

Category parse_category(std::string_view text) { return CategoryParser(text).parse(); }

std::string print_category(const Category& c) { return c.str(); }

Category FeatureSubstitution::apply(Side side, const Category& c) const {
  auto it = bindings.find(side);
  if (it == bindings.end()) return c;
  const std::string& feature = it->second;
  std::function<Category(const Category&)> fill = [&](const Category& x) -> Category {
    if (x.is_atomic()) return x.has_feature_variable() ? Category::atom(x.name(), feature) : x;
    return Category::functor(fill(x.result()), x.slash(), fill(x.argument()));
  };
  return fill(c);
}

std::optional<FeatureSubstitution> unify_features(const Category& a, const Category& b) {
  UnifyState st;
  if (!unify_into(a, b, st)) return std::nullopt;
  if (st.linked) {
    if (st.left && st.right && *st.left != *st.right) return std::nullopt;
    if (st.left && !st.right) st.right = st.left;
    if (st.right && !st.left) st.left = st.right;
  }
  FeatureSubstitution sub;
  if (st.left) sub.bindings[Side::Left] = *st.left;
  if (st.right) sub.bindings[Side::Right] = *st.right;
  return sub;
}

bool matches(const Category& a, const Category& b) { return unify_features(a, b).has_value(); }

}  // namespace d2cc
