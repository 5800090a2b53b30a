#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "d2cc/ccg_tree.hpp"
#include "d2cc/converter_model.hpp"
#include "d2cc/decoder.hpp"
#include "d2cc/dep_tree.hpp"
#include "d2cc/grammar.hpp"
#include "d2cc/pas.hpp"

namespace d2cc {

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);

/// Where the grammar comes from. Explicit files override the directory.
struct GrammarOptions {
  std::filesystem::path dir;  // containing unary.txt and roots.txt
  std::filesystem::path unary_table;
  std::filesystem::path roots;
  bool x_absorption = false;
};

Grammar load_grammar(const GrammarOptions& options);

/// Reads a CoNLL-U file and an AUTO file that must agree sentence by sentence.
std::vector<std::pair<DepTree, CCGTree>> read_aligned(const std::filesystem::path& conllu,
                                                      const std::filesystem::path& autofile);

/// "PREFIX:WEIGHT" naming PREFIX.conllu and PREFIX.auto.
struct MixSpec {
  std::filesystem::path prefix;
  double weight = 1.0;
};
MixSpec parse_mix(const std::string& text);

/// Constraint file: {"1": [{"category": "NP", "start": 1, "end": 2}, ...], ...}
/// keyed by 1-based sentence ordinal.
std::map<int, std::vector<Constraint>> read_constraints(const std::filesystem::path& path);

struct TrainArgs {
  std::filesystem::path conllu;
  std::filesystem::path autofile;
  std::vector<MixSpec> mixes;
  std::filesystem::path config;  // optional key=value file
  std::filesystem::path model_out;
  std::filesystem::path metrics_out;  // optional; one JSON line per epoch
  std::optional<std::uint64_t> seed;
};

struct TrainReport {
  std::vector<EpochMetrics> history;
  Accuracy final_accuracy;  // on the primary training set, after training
};

TrainReport cmd_train(const TrainArgs& args);

struct ConvertArgs {
  std::filesystem::path model;
  std::filesystem::path conllu;
  std::filesystem::path output;  // AUTO
  std::filesystem::path constraints;
  GrammarOptions grammar;
  DecodeOptions decode;
  bool strip_x = false;
  int threads = 1;
};

struct SentenceResult {
  std::optional<CCGTree> tree;
  std::string failure;
};

struct ConvertReport {
  std::vector<SentenceResult> sentences;
  int converted() const;
  std::string summary() const;  // "converted K/N"
};

/// Converts a dependency corpus; per-sentence failures are reported, not thrown.
ConvertReport convert_corpus(const ConverterModel& model, const Grammar& grammar, const std::vector<DepTree>& corpus,
                             const std::map<int, std::vector<Constraint>>& constraints, const DecodeOptions& decode,
                             bool strip_x, int threads);
ConvertReport cmd_convert(const ConvertArgs& args);

/// AUTO text with "ID=k" lines carrying the sentence ordinal of each success.
std::string write_report_auto(const ConvertReport& report);
std::string write_failures(const ConvertReport& report);

struct DecodeArgs {
  std::filesystem::path matrices;  // one JSON object or an array of them
  std::filesystem::path output;
  std::filesystem::path constraints;
  GrammarOptions grammar;
  DecodeOptions decode;
  int threads = 1;
};
ConvertReport cmd_decode(const DecodeArgs& args);

Metrics cmd_eval(const std::filesystem::path& predicted, const std::filesystem::path& gold,
                 const std::filesystem::path& table);
/// Headline and per-category tables.
std::string format_metrics(const Metrics& m);
nlohmann::json metrics_to_json(const Metrics& m);

/// One line per violation, prefixed with the 1-based tree ordinal.
std::vector<std::string> cmd_validate(const std::filesystem::path& autofile, const GrammarOptions& grammar);

std::string cmd_extract_deps(const std::filesystem::path& autofile, const std::filesystem::path& table);

/// Coindexation table from a path, or the built-in one when empty.
CoindexTable load_coindex_table(const std::filesystem::path& path);

/// Runs `fn(i)` for i in [0, n) on `threads` workers.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace d2cc
