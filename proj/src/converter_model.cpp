#include "d2cc/converter_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <spdlog/spdlog.h>

#include "d2cc/errors.hpp"

namespace d2cc {

using nn::Expr;
using nn::Graph;
using nn::Matrix;
using nn::Parameter;
using nn::vcat;
using nn::hcat;
using nn::sum;

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<std::vector<int>> children_of(const std::vector<int>& heads) {
  std::vector<std::vector<int>> kids(heads.size() + 1);
  for (std::size_t i = 0; i < heads.size(); ++i) kids[heads[i]].push_back(static_cast<int>(i) + 1);
  return kids;
}

// Tokens in top-down order (parents before children), ties by index.
std::vector<int> top_down_order(const std::vector<int>& heads) {
  auto kids = children_of(heads);
  std::vector<int> order;
  std::vector<int> frontier = kids[0];
  while (!frontier.empty()) {
    std::vector<int> next;
    for (int t : frontier) {
      order.push_back(t);
      next.insert(next.end(), kids[t].begin(), kids[t].end());
    }
    std::sort(next.begin(), next.end());
    frontier = std::move(next);
  }
  return order;
}

}  // namespace

// ---------------------------------------------------------------- Vocabulary

Vocabulary::Vocabulary() { add(std::string(kUnknown)); }

Vocabulary::Vocabulary(const std::vector<std::string>& symbols) {
  if (symbols.empty() || symbols.front() != kUnknown) add(std::string(kUnknown));
  for (const auto& s : symbols) add(s);
}

int Vocabulary::add(const std::string& symbol) {
  auto [it, inserted] = ids_.emplace(symbol, static_cast<int>(symbols_.size()));
  if (inserted) symbols_.push_back(symbol);
  return it->second;
}

int Vocabulary::index(const std::string& symbol) const {
  auto it = ids_.find(symbol);
  return it == ids_.end() ? 0 : it->second;
}

ExternalEmbeddings ExternalEmbeddings::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embedding file " + path.string());
  ExternalEmbeddings emb;
  std::vector<std::vector<double>> rows;
  std::string line;
  int dim = -1;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string word;
    if (!(fields >> word)) continue;
    std::vector<double> v;
    double x;
    while (fields >> x) v.push_back(x);
    if (dim < 0) dim = static_cast<int>(v.size());
    if (static_cast<int>(v.size()) != dim || dim == 0) {
      throw DataError("embedding file " + path.string() + ": inconsistent dimension for '" + word + "'");
    }
    if (emb.words.contains(word)) continue;
    emb.words.add(word);
    rows.push_back(std::move(v));
  }
  if (dim < 0) throw DataError("embedding file " + path.string() + " is empty");
  emb.vectors = Eigen::MatrixXd::Zero(dim, emb.words.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    emb.vectors.col(static_cast<Eigen::Index>(k) + 1) = Eigen::Map<Eigen::VectorXd>(rows[k].data(), dim);
  }
  return emb;
}

// ------------------------------------------------------------------- Model

ConverterModel::ConverterModel(ModelConfig config, Vocabulary words, Vocabulary pos, Vocabulary labels,
                               std::vector<Category> categories, std::optional<ExternalEmbeddings> external)
    : config_(std::move(config)),
      words_(std::move(words)),
      pos_(std::move(pos)),
      labels_(std::move(labels)),
      categories_(std::move(categories)),
      external_(std::move(external)) {
  if (categories_.size() < 2) throw DataError("category inventory needs at least two categories");
  init_params();
}

ConverterModel ConverterModel::from_data(const ModelConfig& config,
                                         const std::vector<std::pair<DepTree, CCGTree>>& data) {
  Vocabulary words, pos, labels;
  std::vector<Category> cats;
  for (const auto& [dep, ccg] : data) {
    for (int i = 0; i < dep.size(); ++i) {
      words.add(dep.words[i]);
      pos.add(dep.pos[i]);
      labels.add(dep.labels[i]);
    }
    for (const auto& c : ccg.supertags()) {
      if (std::find(cats.begin(), cats.end(), c) == cats.end()) cats.push_back(c);
    }
  }
  std::sort(cats.begin(), cats.end());
  std::optional<ExternalEmbeddings> ext;
  if (!config.external_embeddings.empty()) ext = ExternalEmbeddings::load(config.external_embeddings);
  return ConverterModel(config, std::move(words), std::move(pos), std::move(labels), std::move(cats),
                        std::move(ext));
}

void ConverterModel::init_params() {
  const ModelConfig& c = config_;
  const int C = static_cast<int>(categories_.size());
  const int ext_dim = external_ ? external_->dim() : 0;
  const int T = c.tree_hidden;
  const int M = c.mlp_dim;

  params_.add("word_emb", c.word_dim, words_.size() + c.word_buckets);
  params_.add("pos_emb", c.pos_dim, pos_.size());
  params_.add("label_emb", c.label_dim, labels_.size());
  int in = c.pos_dim + c.word_dim + ext_dim;
  for (int l = 0; l < c.seq_layers; ++l) {
    for (const char* dir : {"f", "b"}) {
      std::string p = "seq" + std::to_string(l) + "_" + dir;
      params_.add(p + "_W", 4 * c.seq_hidden, in + c.seq_hidden);
      params_.add(p + "_b", 4 * c.seq_hidden, 1);
    }
    in = 2 * c.seq_hidden;
  }
  const int tree_in = in + c.label_dim;
  params_.add("up_Wiou", 3 * T, tree_in);
  params_.add("up_Uiou", 3 * T, T);
  params_.add("up_biou", 3 * T, 1);
  params_.add("up_Wf", T, tree_in);
  params_.add("up_Uf", T, T);
  params_.add("up_bf", T, 1);
  params_.add("down_W", 4 * T, tree_in + T);
  params_.add("down_b", 4 * T, 1);
  params_.add("root_h", 2 * T, 1);
  for (const char* name : {"dep_child", "dep_head", "tag_child", "tag_head"}) {
    params_.add(std::string(name) + "_W", M, 2 * T);
    params_.add(std::string(name) + "_b", M, 1);
  }
  params_.add("biaffine_W", M, M);
  params_.add("biaffine_w", M, 1);
  params_.add("bilinear_W", M, M * C);
  params_.add("bilinear_V", C, M);
  params_.add("bilinear_U", C, M);
  params_.add("bilinear_b", C, 1);

  std::mt19937_64 rng(c.seed);
  for (auto& p : params_.all()) {
    const bool bias = p->value.cols() == 1 && p->name != "root_h";
    if (bias) {
      p->value.setZero();
      continue;
    }
    double fan = static_cast<double>(p->value.rows() + p->value.cols());
    if (p->name == "bilinear_W") fan = 2.0 * M;
    const double scale = std::sqrt(6.0 / fan);
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (Eigen::Index k = 0; k < p->value.size(); ++k) p->value.data()[k] = dist(rng);
  }
  // Forget gates start open.
  for (auto& p : params_.all()) {
    if (p->name.starts_with("seq") && p->name.ends_with("_b")) {
      p->value.middleRows(c.seq_hidden, c.seq_hidden).setOnes();
    }
  }
  params_.get("up_bf").value.setOnes();
  params_.get("down_b").value.middleRows(T, T).setOnes();
}

int ConverterModel::category_index(const Category& c) const {
  auto it = std::lower_bound(categories_.begin(), categories_.end(), c);
  if (it != categories_.end() && *it == c) return static_cast<int>(it - categories_.begin());
  // The inventory is sorted when built from data, but not necessarily when loaded.
  for (std::size_t i = 0; i < categories_.size(); ++i) {
    if (categories_[i] == c) return static_cast<int>(i);
  }
  return -1;
}

AlignedSentence ConverterModel::align(const DepTree& input, const CCGTree& gold) const {
  if (gold.end() != input.size()) {
    throw DataError("token count mismatch: dependency tree has " + std::to_string(input.size()) +
                    " tokens, CCG tree has " + std::to_string(gold.end()));
  }
  AlignedSentence s{input, {}, extract_headfirst(gold).parents};
  for (const auto& c : gold.supertags()) {
    int idx = category_index(c);
    if (idx < 0) throw VocabularyError("category " + c.str() + " is not in the model inventory");
    s.gold_tags.push_back(idx);
  }
  return s;
}

int ConverterModel::word_index(const std::string& word) const {
  int idx = words_.index(word);
  if (idx != 0 || config_.word_buckets == 0) return idx;
  return words_.size() + static_cast<int>(fnv1a(word) % static_cast<std::uint64_t>(config_.word_buckets));
}

Expr ConverterModel::lstm_step(Graph& g, const std::string& prefix, Expr x, Expr& c, Expr h, int hidden) {
  Expr z = matmul(g.param(params_.get(prefix + "_W")), vcat({x, h})) + g.param(params_.get(prefix + "_b"));
  Expr in_gate = sigmoid(rows(z, 0, hidden));
  Expr forget = sigmoid(rows(z, hidden, hidden));
  Expr out_gate = sigmoid(rows(z, 2 * hidden, hidden));
  Expr cand = tanh(rows(z, 3 * hidden, hidden));
  c = cmult(forget, c) + cmult(in_gate, cand);
  return cmult(out_gate, tanh(c));
}

Expr ConverterModel::mlp(Graph& g, const std::string& name, Expr x) {
  return elu(matmul(g.param(params_.get(name + "_W")), x) + g.param(params_.get(name + "_b")));
}

std::vector<Expr> ConverterModel::encode_sequence(Graph& g, const DepTree& tree) {
  const int n = tree.size();
  Parameter& wemb = params_.get("word_emb");
  Parameter& pemb = params_.get("pos_emb");
  std::vector<Expr> xs;
  for (int i = 0; i < n; ++i) {
    Expr p = g.lookup(pemb, pos_.index(tree.pos[i]));
    Expr w = g.lookup(wemb, word_index(tree.words[i]));
    if (external_) {
      xs.push_back(vcat({p, w, g.input(external_->vectors.col(external_->words.index(tree.words[i])))}));
    } else {
      xs.push_back(vcat({p, w}));
    }
  }
  const int H = config_.seq_hidden;
  for (int l = 0; l < config_.seq_layers; ++l) {
    const std::string base = "seq" + std::to_string(l);
    std::vector<Expr> fwd(n), bwd(n);
    Expr h = g.zeros(H), c = g.zeros(H);
    for (int i = 0; i < n; ++i) fwd[i] = h = lstm_step(g, base + "_f", xs[i], c, h, H);
    h = g.zeros(H);
    c = g.zeros(H);
    for (int i = n - 1; i >= 0; --i) bwd[i] = h = lstm_step(g, base + "_b", xs[i], c, h, H);
    for (int i = 0; i < n; ++i) xs[i] = vcat({fwd[i], bwd[i]});
  }
  return xs;
}

ConverterModel::Encoding ConverterModel::encode_tree(Graph& g, const std::vector<Expr>& inputs,
                                                     const std::vector<int>& heads) {
  const int n = static_cast<int>(inputs.size());
  const int T = config_.tree_hidden;
  auto kids = children_of(heads);
  auto order = top_down_order(heads);

  Encoding enc;
  enc.up.resize(n);
  enc.down.resize(n);
  std::vector<Expr> up_c(n), down_c(n);

  Expr Wiou = g.param(params_.get("up_Wiou"));
  Expr Uiou = g.param(params_.get("up_Uiou"));
  Expr biou = g.param(params_.get("up_biou"));
  Expr Wf = g.param(params_.get("up_Wf"));
  Expr Uf = g.param(params_.get("up_Uf"));
  Expr bf = g.param(params_.get("up_bf"));

  // Child-sum cell, children before parents.
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int i = *it;
    const Expr x = inputs[i - 1];
    std::vector<Expr> child_h;
    for (int k : kids[i]) child_h.push_back(enc.up[k - 1]);
    Expr h_sum = child_h.empty() ? g.zeros(T) : sum(child_h);
    Expr iou = matmul(Wiou, x) + matmul(Uiou, h_sum) + biou;
    Expr in_gate = sigmoid(rows(iou, 0, T));
    Expr out_gate = sigmoid(rows(iou, T, T));
    Expr cand = tanh(rows(iou, 2 * T, T));
    Expr c = cmult(in_gate, cand);
    if (!kids[i].empty()) {
      Expr wx = matmul(Wf, x) + bf;
      for (int k : kids[i]) c = c + cmult(sigmoid(wx + matmul(Uf, enc.up[k - 1])), up_c[k - 1]);
    }
    up_c[i - 1] = c;
    enc.up[i - 1] = cmult(out_gate, tanh(c));
  }

  // Single-parent cell, parents before children.
  for (int i : order) {
    const int parent = heads[i - 1];
    Expr h = parent == 0 ? g.zeros(T) : enc.down[parent - 1];
    Expr c = parent == 0 ? g.zeros(T) : down_c[parent - 1];
    enc.down[i - 1] = lstm_step(g, "down", inputs[i - 1], c, h, T);
    down_c[i - 1] = c;
  }

  for (int i = 0; i < n; ++i) enc.h.push_back(vcat({enc.up[i], enc.down[i]}));
  enc.root = g.param(params_.get("root_h"));
  return enc;
}

ConverterModel::Encoding ConverterModel::encode(Graph& g, const DepTree& tree) {
  std::vector<Expr> seq = encode_sequence(g, tree);
  Parameter& lemb = params_.get("label_emb");
  std::vector<Expr> inputs;
  for (int i = 0; i < tree.size(); ++i) inputs.push_back(vcat({seq[i], g.lookup(lemb, labels_.index(tree.labels[i]))}));
  return encode_tree(g, inputs, tree.heads);
}

std::vector<Expr> ConverterModel::score_dep(Graph& g, const Encoding& enc) {
  const int n = static_cast<int>(enc.h.size());
  std::vector<Expr> heads{mlp(g, "dep_head", enc.root)};
  for (int j = 0; j < n; ++j) heads.push_back(mlp(g, "dep_head", enc.h[j]));
  Expr head_matrix = hcat(heads);
  Expr W = g.param(params_.get("biaffine_W"));
  Expr w = g.param(params_.get("biaffine_w"));

  std::vector<Expr> out;
  for (int i = 1; i <= n; ++i) {
    Expr child = mlp(g, "dep_child", enc.h[i - 1]);
    Expr scores = matmul_tn(head_matrix, matmul_tn(W, child) + w);
    out.push_back(log_softmax(scores, i));
  }
  return out;
}

std::vector<Expr> ConverterModel::score_tag(Graph& g, const Encoding& enc, const std::vector<int>& head_hat) {
  const int n = static_cast<int>(enc.h.size());
  const int M = config_.mlp_dim;
  const int C = static_cast<int>(categories_.size());
  Expr Wc = g.param(params_.get("bilinear_W"));
  Expr V = g.param(params_.get("bilinear_V"));
  Expr U = g.param(params_.get("bilinear_U"));
  Expr b = g.param(params_.get("bilinear_b"));

  std::vector<std::optional<Expr>> head_q(n + 1);
  std::vector<Expr> out;
  for (int i = 1; i <= n; ++i) {
    const int d = head_hat[i - 1];
    if (!head_q[d]) head_q[d] = mlp(g, "tag_head", d == 0 ? enc.root : enc.h[d - 1]);
    Expr qh = *head_q[d];
    Expr qi = mlp(g, "tag_child", enc.h[i - 1]);
    Expr bilinear = matmul_tn(reshape(matmul_tn(Wc, qi), M, C), qh);
    out.push_back(log_softmax(bilinear + matmul(V, qi) + matmul(U, qh) + b));
  }
  return out;
}

std::vector<int> argmax_heads(const Graph& g, const std::vector<Expr>& dep_rows) {
  std::vector<int> out;
  for (Expr row : dep_rows) {
    const Matrix& v = g.value(row);
    int best = 0;
    for (Eigen::Index j = 1; j < v.rows(); ++j) {
      if (v(j, 0) > v(best, 0)) best = static_cast<int>(j);
    }
    out.push_back(best);
  }
  return out;
}

ScoreMatrices ConverterModel::predict(const DepTree& tree) const {
  // Graph nodes only read parameter values; nothing is written without backward().
  auto& self = const_cast<ConverterModel&>(*this);
  Graph g;
  Encoding enc = self.encode(g, tree);
  auto dep = self.score_dep(g, enc);
  auto tag = self.score_tag(g, enc, argmax_heads(g, dep));

  const int n = tree.size();
  ScoreMatrices m;
  m.tokens = tree.words;
  m.categories = categories_;
  m.tag_logp.resize(n, static_cast<Eigen::Index>(categories_.size()));
  m.dep_logp.resize(n, n + 1);
  for (int i = 0; i < n; ++i) {
    m.tag_logp.row(i) = g.value(tag[i]).col(0).transpose();
    m.dep_logp.row(i) = g.value(dep[i]).col(0).transpose();
  }
  return m;
}

// -------------------------------------------------------------- Checkpoint

namespace {

constexpr char kMagic[4] = {'D', '2', 'C', 'C'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }
void put_str(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
void put_matrix(std::ostream& out, const Matrix& m) {
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
}
void put_strings(std::ostream& out, const std::vector<std::string>& v) {
  put_u32(out, static_cast<std::uint32_t>(v.size()));
  for (const auto& s : v) put_str(out, s);
}

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw DataError("truncated checkpoint");
  return v;
}
std::string get_str(std::istream& in) {
  std::string s(get_u32(in), '\0');
  if (!in.read(s.data(), static_cast<std::streamsize>(s.size()))) throw DataError("truncated checkpoint");
  return s;
}
Matrix get_matrix(std::istream& in) {
  const auto rows = get_u32(in);
  const auto cols = get_u32(in);
  Matrix m(rows, cols);
  if (!in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)))) {
    throw DataError("truncated checkpoint");
  }
  return m;
}
std::vector<std::string> get_strings(std::istream& in) {
  std::vector<std::string> v(get_u32(in));
  for (auto& s : v) s = get_str(in);
  return v;
}

std::string config_text(const ModelConfig& c) {
  std::ostringstream out;
  out << "word_dim=" << c.word_dim << "\npos_dim=" << c.pos_dim << "\nlabel_dim=" << c.label_dim
      << "\nseq_hidden=" << c.seq_hidden << "\nseq_layers=" << c.seq_layers << "\ntree_hidden=" << c.tree_hidden
      << "\nmlp_dim=" << c.mlp_dim << "\nword_buckets=" << c.word_buckets << "\nseed=" << c.seed << "\n";
  return out.str();
}

}  // namespace

void ConverterModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  put_u32(out, kFormatVersion);
  put_str(out, config_text(config_));
  put_strings(out, words_.symbols());
  put_strings(out, pos_.symbols());
  put_strings(out, labels_.symbols());
  std::vector<std::string> cats;
  for (const auto& c : categories_) cats.push_back(c.str());
  put_strings(out, cats);
  put_u32(out, external_ ? 1 : 0);
  if (external_) {
    put_strings(out, external_->words.symbols());
    put_matrix(out, external_->vectors);
  }
  put_u32(out, static_cast<std::uint32_t>(params_.all().size()));
  for (const auto& p : params_.all()) {
    put_str(out, p->name);
    put_matrix(out, p->value);
  }
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

ConverterModel ConverterModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kMagic)) {
    throw DataError(path.string() + " is not a converter checkpoint");
  }
  if (auto v = get_u32(in); v != kFormatVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(v));
  }
  ModelConfig config;
  TrainConfig unused;
  parse_config(get_str(in), config, unused);
  Vocabulary words(get_strings(in));
  Vocabulary pos(get_strings(in));
  Vocabulary labels(get_strings(in));
  std::vector<Category> cats;
  for (const auto& s : get_strings(in)) cats.push_back(parse_category(s));
  std::optional<ExternalEmbeddings> ext;
  if (get_u32(in) == 1) {
    ext.emplace();
    ext->words = Vocabulary(get_strings(in));
    ext->vectors = get_matrix(in);
  }
  ConverterModel model(config, std::move(words), std::move(pos), std::move(labels), std::move(cats), std::move(ext));
  const auto count = get_u32(in);
  for (std::uint32_t k = 0; k < count; ++k) {
    std::string name = get_str(in);
    Matrix value = get_matrix(in);
    auto& p = model.params().get(name);
    if (p.value.rows() != value.rows() || p.value.cols() != value.cols()) {
      throw DataError("checkpoint tensor " + name + " has unexpected shape");
    }
    p.value = std::move(value);
  }
  return model;
}

// ---------------------------------------------------------------- Training

LossResult nll_loss(ConverterModel& model, const AlignedSentence& sample, const LossOptions& options) {
  const int n = sample.input.size();
  const int num_categories = static_cast<int>(model.categories().size());
  Graph g;
  g.set_fault(options.fault);
  auto enc = model.encode(g, sample.input);
  auto dep = model.score_dep(g, enc);
  auto predicted_heads = argmax_heads(g, dep);
  auto tag = model.score_tag(g, enc, options.head_hat ? *options.head_hat : predicted_heads);

  LossResult r;
  r.tokens = n;
  std::vector<Expr> terms;
  for (int i = 0; i < n; ++i) {
    const int gold_tag = sample.gold_tags[i];
    if (gold_tag < 0 || gold_tag >= num_categories) throw VocabularyError("gold category index out of range");
    terms.push_back(pick(tag[i], gold_tag));
    terms.push_back(pick(dep[i], sample.gold_heads[i]));

    Eigen::Index best_tag = 0;
    g.value(tag[i]).col(0).maxCoeff(&best_tag);
    if (best_tag == gold_tag) ++r.tag_correct;
    if (predicted_heads[i] == sample.gold_heads[i]) ++r.head_correct;
  }
  Expr loss = -sum(terms);
  r.loss = g.scalar(loss);
  r.kinks = g.kink_signature();
  if (options.accumulate_gradients) g.backward(loss);
  return r;
}

nlohmann::json EpochMetrics::to_json() const {
  nlohmann::json j;
  j["epoch"] = epoch;
  j["loss"] = loss;
  j["tag_accuracy"] = tag_accuracy;
  j["head_accuracy"] = head_accuracy;
  j["sentences"] = sentences;
  j["per_source"] = per_source;
  return j;
}

namespace {

void adam_step(nn::ParameterSet& params, const TrainConfig& cfg, int step) {
  double scale = 1.0;
  if (cfg.clip_norm > 0) {
    double sq = 0.0;
    for (const auto& p : params.all()) sq += p->grad.squaredNorm();
    const double norm = std::sqrt(sq);
    if (norm > cfg.clip_norm) scale = cfg.clip_norm / norm;
  }
  const double bias1 = 1.0 - std::pow(cfg.beta1, step);
  const double bias2 = 1.0 - std::pow(cfg.beta2, step);
  for (auto& p : params.all()) {
    Matrix g = p->grad * scale;
    p->adam_m = cfg.beta1 * p->adam_m + (1.0 - cfg.beta1) * g;
    p->adam_v = cfg.beta2 * p->adam_v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    p->value.array() -=
        cfg.learning_rate * (p->adam_m.array() / bias1) / ((p->adam_v.array() / bias2).sqrt() + cfg.adam_eps);
  }
}

}  // namespace

std::vector<EpochMetrics> train(ConverterModel& model, const std::vector<TrainingSource>& sources,
                                const TrainConfig& config, const std::function<void(const EpochMetrics&)>& on_epoch) {
  std::size_t total = 0;
  for (const auto& s : sources) total += s.sentences.size();
  if (total == 0) throw DataError("training data is empty");
  if (config.batch_size < 1) throw DataError("batch_size must be positive");

  std::mt19937_64 rng(config.seed);
  std::vector<EpochMetrics> history;
  int step = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    // (source, sentence) pairs drawn for this epoch.
    std::vector<std::pair<std::size_t, std::size_t>> draws;
    for (std::size_t s = 0; s < sources.size(); ++s) {
      const auto& src = sources[s];
      const std::size_t n = src.sentences.size();
      const int whole = static_cast<int>(std::floor(src.weight));
      for (int k = 0; k < whole; ++k) {
        for (std::size_t i = 0; i < n; ++i) draws.emplace_back(s, i);
      }
      const auto extra = static_cast<std::size_t>(std::llround((src.weight - whole) * static_cast<double>(n)));
      if (extra > 0) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t k = 0; k < extra; ++k) draws.emplace_back(s, idx[k]);
      }
    }
    std::shuffle(draws.begin(), draws.end(), rng);

    EpochMetrics m;
    m.epoch = epoch;
    int tokens = 0, tag_ok = 0, head_ok = 0;
    for (std::size_t start = 0; start < draws.size(); start += static_cast<std::size_t>(config.batch_size)) {
      model.params().zero_grad();
      const std::size_t stop = std::min(draws.size(), start + static_cast<std::size_t>(config.batch_size));
      for (std::size_t k = start; k < stop; ++k) {
        const auto& [s, i] = draws[k];
        LossResult r = nll_loss(model, sources[s].sentences[i]);
        if (!std::isfinite(r.loss)) {
          throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", source '" + sources[s].name +
                              "', sentence " + std::to_string(i + 1));
        }
        m.loss += r.loss;
        tokens += r.tokens;
        tag_ok += r.tag_correct;
        head_ok += r.head_correct;
        ++m.per_source[sources[s].name];
      }
      adam_step(model.params(), config, ++step);
    }
    m.sentences = static_cast<int>(draws.size());
    m.tag_accuracy = tokens ? static_cast<double>(tag_ok) / tokens : 0.0;
    m.head_accuracy = tokens ? static_cast<double>(head_ok) / tokens : 0.0;
    spdlog::debug("epoch {} loss {:.4f} tag {:.4f} head {:.4f}", epoch, m.loss, m.tag_accuracy, m.head_accuracy);
    history.push_back(m);
    if (on_epoch) on_epoch(m);
    if (m.tag_accuracy >= config.stop_at_accuracy && m.head_accuracy >= config.stop_at_accuracy) break;
  }
  return history;
}

Accuracy evaluate_accuracy(const ConverterModel& model, const std::vector<AlignedSentence>& data) {
  int tokens = 0, tag_ok = 0, head_ok = 0;
  for (const auto& s : data) {
    ScoreMatrices m = model.predict(s.input);
    for (int i = 0; i < m.size(); ++i) {
      Eigen::Index t = 0, d = 0;
      m.tag_logp.row(i).maxCoeff(&t);
      m.dep_logp.row(i).maxCoeff(&d);
      tag_ok += t == s.gold_tags[i];
      head_ok += d == s.gold_heads[i];
      ++tokens;
    }
  }
  if (tokens == 0) return {};
  return {static_cast<double>(tag_ok) / tokens, static_cast<double>(head_ok) / tokens};
}

void parse_config(std::string_view text, ModelConfig& model, TrainConfig& train) {
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto eq = line.find('=');
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t\r"));
      s.erase(s.find_last_not_of(" \t\r") + 1);
      return s;
    };
    if (trim(line).empty()) continue;
    if (eq == std::string::npos) throw DataError("config line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "word_dim") model.word_dim = std::stoi(value);
      else if (key == "pos_dim") model.pos_dim = std::stoi(value);
      else if (key == "label_dim") model.label_dim = std::stoi(value);
      else if (key == "seq_hidden") model.seq_hidden = std::stoi(value);
      else if (key == "seq_layers") model.seq_layers = std::stoi(value);
      else if (key == "tree_hidden") model.tree_hidden = std::stoi(value);
      else if (key == "mlp_dim") model.mlp_dim = std::stoi(value);
      else if (key == "word_buckets") model.word_buckets = std::stoi(value);
      else if (key == "external_embeddings") model.external_embeddings = value;
      else if (key == "seed") model.seed = train.seed = std::stoull(value);
      else if (key == "learning_rate") train.learning_rate = std::stod(value);
      else if (key == "beta1") train.beta1 = std::stod(value);
      else if (key == "beta2") train.beta2 = std::stod(value);
      else if (key == "epochs") train.epochs = std::stoi(value);
      else if (key == "batch_size") train.batch_size = std::stoi(value);
      else if (key == "clip_norm") train.clip_norm = std::stod(value);
      else if (key == "stop_at_accuracy") train.stop_at_accuracy = std::stod(value);
      else throw DataError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw DataError("config line " + std::to_string(lineno) + ": bad value for '" + key + "'");
    } catch (const std::out_of_range&) {
      throw DataError("config line " + std::to_string(lineno) + ": value out of range for '" + key + "'");
    }
  }
}

// ------------------------------------------------------------- Grad check

GradCheckResult grad_check(ConverterModel& model, const AlignedSentence& sample, double eps, nn::Fault fault,
                           double denominator_floor) {
  // Freeze the argmax heads so that the loss is a smooth function of the parameters.
  std::vector<int> head_hat;
  {
    Graph g;
    auto enc = model.encode(g, sample.input);
    head_hat = argmax_heads(g, model.score_dep(g, enc));
  }
  LossOptions analytic{true, &head_hat, fault};
  LossOptions probe{false, &head_hat, nn::Fault::None};

  model.params().zero_grad();
  const std::uint64_t kinks = nll_loss(model, sample, analytic).kinks;

  GradCheckResult result;
  for (auto& p : model.params().all()) {
    for (Eigen::Index k = 0; k < p->value.size(); ++k) {
      double& v = p->value.data()[k];
      const double saved = v;
      v = saved + eps;
      const LossResult plus = nll_loss(model, sample, probe);
      v = saved - eps;
      const LossResult minus = nll_loss(model, sample, probe);
      v = saved;
      if (plus.kinks != kinks || minus.kinks != kinks) {
        ++result.skipped;
        continue;
      }
      const double numeric = (plus.loss - minus.loss) / (2.0 * eps);
      const double exact = p->grad.data()[k];
      const double scale = std::max({std::abs(numeric), std::abs(exact), denominator_floor});
      const double rel = std::abs(numeric - exact) / scale;
      ++result.checked;
      if (rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_parameter = p->name + "[" + std::to_string(k) + "]";
      }
    }
  }
  return result;
}

}  // namespace d2cc
