#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "d2cc/ccg_tree.hpp"
#include "d2cc/dep_tree.hpp"
#include "d2cc/nn/graph.hpp"
#include "d2cc/scores.hpp"

namespace d2cc {

/// Dimensions of the converter network. Sequential and tree encoders are
/// bidirectional; their outputs are twice the per-direction sizes.
struct ModelConfig {
  int word_dim = 64;
  int pos_dim = 50;
  int label_dim = 50;
  int seq_hidden = 150;
  int seq_layers = 2;
  int tree_hidden = 150;
  int mlp_dim = 100;
  int word_buckets = 16;
  std::uint64_t seed = 1;
  /// Optional read-only "word v1 v2 ..." vector file concatenated to the word embedding.
  std::string external_embeddings;
};

/// Symbol table with index 0 reserved for unknown symbols.
class Vocabulary {
 public:
  static constexpr std::string_view kUnknown = "<unk>";

  Vocabulary();
  explicit Vocabulary(const std::vector<std::string>& symbols);

  int add(const std::string& symbol);
  /// 0 when unknown.
  int index(const std::string& symbol) const;
  bool contains(const std::string& symbol) const { return ids_.contains(symbol); }
  const std::vector<std::string>& symbols() const { return symbols_; }
  int size() const { return static_cast<int>(symbols_.size()); }

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, int> ids_;
};

struct ExternalEmbeddings {
  Vocabulary words;
  Eigen::MatrixXd vectors;  // dim x words.size(); column 0 (unknown) is zero

  int dim() const { return static_cast<int>(vectors.rows()); }
  static ExternalEmbeddings load(const std::filesystem::path& path);
};

/// A dependency tree with the gold supertag indices and Head First parents of
/// its aligned CCG tree.
struct AlignedSentence {
  DepTree input;
  std::vector<int> gold_tags;
  std::vector<int> gold_heads;
};

/// Trainable dependency-to-CCG scorer: embeddings, a stacked sequential
/// BiLSTM, a bidirectional tree LSTM over the input dependency tree, a
/// biaffine head scorer and a bilinear supertag scorer.
class ConverterModel {
 public:
  ConverterModel(ModelConfig config, Vocabulary words, Vocabulary pos, Vocabulary labels,
                 std::vector<Category> categories, std::optional<ExternalEmbeddings> external = std::nullopt);

  /// Builds vocabularies and the category inventory from aligned data.
  static ConverterModel from_data(const ModelConfig& config,
                                  const std::vector<std::pair<DepTree, CCGTree>>& data);

  const ModelConfig& config() const { return config_; }
  const std::vector<Category>& categories() const { return categories_; }
  const Vocabulary& words() const { return words_; }
  const Vocabulary& pos_tags() const { return pos_; }
  const Vocabulary& labels() const { return labels_; }
  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }

  int category_index(const Category& c) const;
  /// Gold tags and Head First parents; throws VocabularyError for unseen categories.
  AlignedSentence align(const DepTree& input, const CCGTree& gold) const;

  int word_index(const std::string& word) const;
  int tree_output_dim() const { return 2 * config_.tree_hidden; }

  struct Encoding {
    std::vector<nn::Expr> up;    // bottom-up tree states
    std::vector<nn::Expr> down;  // top-down tree states
    std::vector<nn::Expr> h;     // up ⊕ down
    nn::Expr root;               // learned h_0
  };

  /// Sequential encoder over POS ⊕ word embeddings.
  std::vector<nn::Expr> encode_sequence(nn::Graph& g, const DepTree& tree);
  /// Tree encoder over arbitrary per-token inputs. heads[i-1] is token i's parent.
  Encoding encode_tree(nn::Graph& g, const std::vector<nn::Expr>& inputs, const std::vector<int>& heads);
  Encoding encode(nn::Graph& g, const DepTree& tree);

  /// Row i-1 is log p_dep(d_i = j), j = 0..N; the self column is -inf.
  std::vector<nn::Expr> score_dep(nn::Graph& g, const Encoding& enc);
  /// Row i-1 is log p_tag(c_i = c) given head_hat[i-1] as the head of token i.
  std::vector<nn::Expr> score_tag(nn::Graph& g, const Encoding& enc, const std::vector<int>& head_hat);

  /// Inference; never modifies parameters, safe to call concurrently.
  ScoreMatrices predict(const DepTree& tree) const;

  void save(const std::filesystem::path& path) const;
  static ConverterModel load(const std::filesystem::path& path);

 private:
  void init_params();
  nn::Expr lstm_step(nn::Graph& g, const std::string& prefix, nn::Expr x, nn::Expr& c, nn::Expr h, int hidden);
  nn::Expr mlp(nn::Graph& g, const std::string& name, nn::Expr x);

  ModelConfig config_;
  Vocabulary words_, pos_, labels_;
  std::vector<Category> categories_;
  std::optional<ExternalEmbeddings> external_;
  nn::ParameterSet params_;
};

/// Most probable head per row; ties go to the lowest index.
std::vector<int> argmax_heads(const nn::Graph& g, const std::vector<nn::Expr>& dep_rows);

struct LossResult {
  double loss = 0.0;
  int tokens = 0;
  int tag_correct = 0;
  int head_correct = 0;
  std::uint64_t kinks = 0;  // Graph::kink_signature of the forward pass
};

struct LossOptions {
  bool accumulate_gradients = true;
  /// Overrides the argmax heads fed to the tag scorer.
  const std::vector<int>* head_hat = nullptr;
  nn::Fault fault = nn::Fault::None;
};

/// -Σ log p_tag(c_i) - Σ log p_dep(d_i); gradients are added to the parameters.
LossResult nll_loss(ConverterModel& model, const AlignedSentence& sample, const LossOptions& options = {});

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.9;
  double adam_eps = 1e-8;
  int epochs = 10;
  int batch_size = 8;
  std::uint64_t seed = 1;
  double clip_norm = 0.0;  // 0 disables
  /// Stop once an epoch reaches this tag and head accuracy; > 1 disables.
  double stop_at_accuracy = 2.0;
};

/// Parses "key = value" lines into both configs; unknown keys are errors.
void parse_config(std::string_view text, ModelConfig& model, TrainConfig& train);

struct TrainingSource {
  std::string name;
  std::vector<AlignedSentence> sentences;
  /// Integer part: full passes per epoch; fractional part: share of one more pass.
  double weight = 1.0;
};

struct EpochMetrics {
  int epoch = 0;
  double loss = 0.0;
  double tag_accuracy = 0.0;
  double head_accuracy = 0.0;
  int sentences = 0;
  std::map<std::string, int> per_source;

  nlohmann::json to_json() const;
};

/// Minibatch Adam. Deterministic for a fixed seed.
std::vector<EpochMetrics> train(ConverterModel& model, const std::vector<TrainingSource>& sources,
                                const TrainConfig& config,
                                const std::function<void(const EpochMetrics&)>& on_epoch = {});

struct Accuracy {
  double tag = 0.0;
  double head = 0.0;
};
Accuracy evaluate_accuracy(const ConverterModel& model, const std::vector<AlignedSentence>& data);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t checked = 0;
  /// Entries whose +eps and -eps probes straddle an ELU kink; central
  /// differences are only first-order accurate there, so they are not compared.
  std::size_t skipped = 0;
};

/// Compares analytic gradients to central differences over every parameter
/// entry. Relative error is |a - n| / max(|a|, |n|, denominator_floor), so two
/// zero gradients give 0. The floor sits above the central-difference
/// roundoff (about 1e-16 * loss / eps).
GradCheckResult grad_check(ConverterModel& model, const AlignedSentence& sample, double eps = 1e-4,
                           nn::Fault fault = nn::Fault::None, double denominator_floor = 1e-6);

}  // namespace d2cc
