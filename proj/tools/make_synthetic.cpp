// Generates a small aligned treebank: CoNLL-U dependency trees and AUTO CCG
// derivations of the same template sentences.
//
//   make_synthetic OUT_PREFIX [COUNT] [SEED]

#include <cmath>
#include <iostream>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "d2cc/ccg_tree.hpp"
#include "d2cc/decoder.hpp"
#include "d2cc/dep_tree.hpp"
#include "d2cc/pipeline.hpp"

using namespace d2cc;

namespace {

struct Phrase {
  CCGTree tree;
  int head;
};

class Generator {
 public:
  explicit Generator(std::uint64_t seed) : rng_(seed), grammar_(Grammar::default_grammar()) {}

  // One sentence; returns false when it came out too long.
  bool sentence(DepTree& dep, CCGTree& ccg, int max_len) {
    dep = DepTree{};
    dep_ = &dep;
    Phrase subj = np(2);
    Phrase vp = pick(4) == 0 ? coordinated_vp() : verb_phrase(true);
    arc(subj.head, vp.head, "nsubj");
    // Subjects of both conjuncts are the same token.
    Phrase s = combine(subj, vp, RuleKind::BackwardApply, vp.head);
    const int dot = token(".", "PUNCT");
    arc(dot, s.head, "punct");
    arc(s.head, 0, "root");
    Phrase full = combine(s, Phrase{leaf(dot, "."), dot}, RuleKind::RemovePunctRight, s.head);
    ccg = full.tree;
    return dep.size() <= max_len;
  }

  const Grammar& grammar() const { return grammar_; }

 private:
  int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }
  const std::string& choose(const std::vector<std::string>& v) { return v[static_cast<std::size_t>(pick(static_cast<int>(v.size())))]; }

  int token(const std::string& word, const std::string& pos) {
    dep_->words.push_back(word);
    dep_->pos.push_back(pos);
    dep_->heads.push_back(-1);
    dep_->labels.push_back("_");
    return dep_->size();
  }
  void arc(int dependent, int head, const std::string& label) {
    dep_->heads[static_cast<std::size_t>(dependent - 1)] = head;
    dep_->labels[static_cast<std::size_t>(dependent - 1)] = label;
  }
  CCGTree leaf(int index, const std::string& category) {
    return CCGTree::terminal(index, dep_->words[static_cast<std::size_t>(index - 1)], parse_category(category),
                             dep_->pos[static_cast<std::size_t>(index - 1)]);
  }
  Phrase word(const std::string& w, const std::string& pos, const std::string& category) {
    const int i = token(w, pos);
    return {leaf(i, category), i};
  }

  Phrase combine(const Phrase& l, const Phrase& r, RuleKind rule, int head) {
    for (const auto& d : grammar_.apply_binary(l.tree.category(), r.tree.category())) {
      if (d.rule == rule) return {CCGTree::binary(l.tree, r.tree, d.category, rule), head};
    }
    throw std::logic_error("template does not combine: " + l.tree.category().str() + " " + r.tree.category().str());
  }
  Phrase to_np(const Phrase& p) { return {CCGTree::unary(p.tree, parse_category("NP"), RuleKind::UnaryTypeChange), p.head}; }

  // Noun phrase; `depth` limits nested modifiers.
  Phrase np(int depth) {
    const int kind = depth > 0 ? pick(6) : pick(3);
    if (kind == 0) return to_np(word(choose(kNames), "PROPN", "N"));
    Phrase det = word(choose(kDets), "DET", "NP/N");
    Phrase noun = nominal();
    arc(det.head, noun.head, "det");
    Phrase base = combine(det, noun, RuleKind::ForwardApply, noun.head);
    if (kind <= 2) return base;
    if (kind <= 4) {
      Phrase prep = word(choose(kPreps), "ADP", "(NP\\NP)/NP");
      Phrase obj = np(0);
      arc(prep.head, obj.head, "case");
      arc(obj.head, base.head, "nmod");
      Phrase pp = combine(prep, obj, RuleKind::ForwardApply, obj.head);
      return combine(base, pp, RuleKind::BackwardApply, base.head);
    }
    Phrase who = word("who", "PRON", "(NP\\NP)/(S[dcl]\\NP)");
    Phrase vp = verb_phrase(false);
    arc(who.head, vp.head, "nsubj");
    arc(vp.head, base.head, "acl:relcl");
    Phrase rel = combine(who, vp, RuleKind::ForwardApply, vp.head);
    return combine(base, rel, RuleKind::BackwardApply, base.head);
  }

  Phrase nominal() {
    if (pick(3) == 0) {
      Phrase adj = word(choose(kAdjs), "ADJ", "N/N");
      Phrase noun = word(choose(kNouns), "NOUN", "N");
      arc(adj.head, noun.head, "amod");
      return combine(adj, noun, RuleKind::ForwardApply, noun.head);
    }
    return word(choose(kNouns), "NOUN", "N");
  }

  Phrase verb_phrase(bool allow_complex) {
    const int kind = allow_complex ? pick(5) : pick(2);
    Phrase vp = [&] {
      if (kind == 0) return word(choose(kIntrans), "VERB", "S[dcl]\\NP");
      if (kind == 4) return control();
      Phrase v = word(choose(kTrans), "VERB", "(S[dcl]\\NP)/NP");
      Phrase obj = np(allow_complex ? 1 : 0);
      arc(obj.head, v.head, "obj");
      return combine(v, obj, RuleKind::ForwardApply, v.head);
    }();
    if (allow_complex && kind == 3) {
      Phrase adv = word(choose(kAdverbs), "ADV", "(S\\NP)\\(S\\NP)");
      arc(adv.head, vp.head, "advmod");
      vp = combine(vp, adv, RuleKind::BackwardApply, vp.head);
    }
    return vp;
  }

  Phrase control() {
    Phrase v = word(choose(kControl), "VERB", "(S[dcl]\\NP)/(S[to]\\NP)");
    Phrase to = word("to", "PART", "(S[to]\\NP)/(S[b]\\NP)");
    Phrase inner = [&] {
      if (pick(2) == 0) return word(choose(kBaseIntrans), "VERB", "S[b]\\NP");
      Phrase b = word(choose(kBaseTrans), "VERB", "(S[b]\\NP)/NP");
      Phrase obj = np(0);
      arc(obj.head, b.head, "obj");
      return combine(b, obj, RuleKind::ForwardApply, b.head);
    }();
    arc(to.head, inner.head, "mark");
    arc(inner.head, v.head, "xcomp");
    Phrase inf = combine(to, inner, RuleKind::ForwardApply, inner.head);
    return combine(v, inf, RuleKind::ForwardApply, v.head);
  }

  Phrase coordinated_vp() {
    Phrase first = word(choose(kIntrans), "VERB", "S[dcl]\\NP");
    Phrase cc = word("and", "CCONJ", "conj");
    Phrase second = word(choose(kIntrans), "VERB", "S[dcl]\\NP");
    arc(cc.head, second.head, "cc");
    arc(second.head, first.head, "conj");
    Phrase right = combine(cc, second, RuleKind::Conjunction, second.head);
    return combine(first, right, RuleKind::BackwardApply, first.head);
  }

  inline static const std::vector<std::string> kNames{"Kim", "Lee", "Sam", "Alex"};
  inline static const std::vector<std::string> kDets{"the", "a"};
  inline static const std::vector<std::string> kNouns{"dog", "cat", "bird", "teacher", "child", "farmer"};
  inline static const std::vector<std::string> kAdjs{"big", "old", "red"};
  inline static const std::vector<std::string> kPreps{"with", "near"};
  inline static const std::vector<std::string> kIntrans{"sleeps", "runs", "laughs"};
  inline static const std::vector<std::string> kTrans{"sees", "likes", "chases"};
  inline static const std::vector<std::string> kAdverbs{"quickly", "often"};
  inline static const std::vector<std::string> kControl{"wants", "tries"};
  inline static const std::vector<std::string> kBaseIntrans{"sleep", "run"};
  inline static const std::vector<std::string> kBaseTrans{"see", "find"};

  std::mt19937_64 rng_;
  Grammar grammar_;
  DepTree* dep_ = nullptr;
};

// Re-derives the tree from its own supertags and Head First parents so that
// the stored derivation is the one the decoder prefers among equivalents.
CCGTree canonical(const CCGTree& tree, const Grammar& grammar, const DepTree& dep) {
  const auto tags = tree.supertags();
  const auto parents = extract_headfirst(tree).parents;
  ScoreMatrices m;
  m.tokens = tree.words();
  for (const auto& c : tags) {
    if (m.category_index(c) < 0) m.categories.push_back(c);
  }
  const int n = static_cast<int>(tags.size());
  const double ninf = -std::numeric_limits<double>::infinity();
  m.tag_logp = Eigen::MatrixXd::Constant(n, static_cast<Eigen::Index>(m.categories.size()), ninf);
  m.dep_logp = Eigen::MatrixXd::Constant(n, n + 1, ninf);
  for (int i = 0; i < n; ++i) {
    m.tag_logp(i, m.category_index(tags[static_cast<std::size_t>(i)])) = 0.0;
    m.dep_logp(i, parents[static_cast<std::size_t>(i)]) = 0.0;
  }
  CCGTree out = astar_parse(m, grammar, {}, {}, &dep.pos).tree;
  if (out.supertags() != tags || extract_headfirst(out).parents != parents) {
    throw std::logic_error("canonical derivation changed the supertags or dependencies");
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: make_synthetic OUT_PREFIX [COUNT] [SEED]\n";
    return 2;
  }
  const std::string prefix = argv[1];
  const int count = argc > 2 ? std::stoi(argv[2]) : 64;
  const std::uint64_t seed = argc > 3 ? std::stoull(argv[3]) : 13;
  constexpr int kMaxTokens = 8;

  Generator gen(seed);
  std::vector<DepTree> deps;
  std::vector<CCGTree> trees;
  std::set<std::vector<std::string>> seen;
  int attempts = 0;
  while (static_cast<int>(deps.size()) < count) {
    if (++attempts > 100000) {
      std::cerr << "could not generate " << count << " distinct sentences\n";
      return 1;
    }
    DepTree dep;
    CCGTree ccg = CCGTree::terminal(1, "_", Category::dummy());
    if (!gen.sentence(dep, ccg, kMaxTokens)) continue;
    if (!seen.insert(dep.words).second) continue;
    dep.check();
    if (!validate_tree(ccg, gen.grammar()).empty()) {
      std::cerr << "template produced an invalid tree: " << ccg.to_string() << "\n";
      return 1;
    }
    trees.push_back(canonical(ccg, gen.grammar(), dep));
    deps.push_back(std::move(dep));
  }
  write_file(prefix + ".conllu", write_conllu(deps));
  write_file(prefix + ".auto", write_auto(trees));
  std::cout << "wrote " << deps.size() << " sentences to " << prefix << ".{conllu,auto}\n";
  return 0;
}
