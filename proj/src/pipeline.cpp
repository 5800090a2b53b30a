#include "d2cc/pipeline.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "d2cc/errors.hpp"

namespace d2cc {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

Grammar load_grammar(const GrammarOptions& options) {
  Grammar base = Grammar::default_grammar();
  auto unary = base.unary_rules();
  auto roots = base.roots();
  if (!options.dir.empty()) {
    if (std::filesystem::exists(options.dir / "unary.txt")) unary = Grammar::load_unary_table(options.dir / "unary.txt");
    if (std::filesystem::exists(options.dir / "roots.txt")) roots = Grammar::load_root_set(options.dir / "roots.txt");
  }
  if (!options.unary_table.empty()) unary = Grammar::load_unary_table(options.unary_table);
  if (!options.roots.empty()) roots = Grammar::load_root_set(options.roots);
  Grammar g(std::move(unary), std::move(roots));
  g.set_x_absorption(options.x_absorption);
  return g;
}

std::vector<std::pair<DepTree, CCGTree>> read_aligned(const std::filesystem::path& conllu,
                                                      const std::filesystem::path& autofile) {
  auto deps = read_conllu(read_file(conllu));
  auto trees = read_auto(read_file(autofile));
  if (deps.size() != trees.size()) {
    throw DataError("sentence count mismatch: " + conllu.string() + " has " + std::to_string(deps.size()) + ", " +
                    autofile.string() + " has " + std::to_string(trees.size()));
  }
  std::vector<std::pair<DepTree, CCGTree>> out;
  for (std::size_t i = 0; i < deps.size(); ++i) {
    if (deps[i].words != trees[i].words()) {
      throw DataError("sentence " + std::to_string(i + 1) + ": tokens differ between " + conllu.string() + " and " +
                      autofile.string());
    }
    out.emplace_back(std::move(deps[i]), std::move(trees[i]));
  }
  return out;
}

MixSpec parse_mix(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0) throw DataError("--mix expects PREFIX:WEIGHT, got '" + text + "'");
  MixSpec m;
  m.prefix = text.substr(0, colon);
  try {
    std::size_t used = 0;
    m.weight = std::stod(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw DataError("--mix weight in '" + text + "' is not a number");
  }
  if (!(m.weight > 0)) throw DataError("--mix weight must be positive");
  return m;
}

std::map<int, std::vector<Constraint>> read_constraints(const std::filesystem::path& path) {
  std::map<int, std::vector<Constraint>> out;
  if (path.empty()) return out;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("constraint file " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw DataError("constraint file must map sentence ordinals to arrays");
  for (const auto& [key, value] : j.items()) {
    int ordinal = 0;
    try {
      std::size_t used = 0;
      ordinal = std::stoi(key, &used);
      if (used != key.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw DataError("constraint file key '" + key + "' is not a sentence number");
    }
    if (ordinal < 1) throw DataError("constraint file key '" + key + "' is not a sentence number");
    out[ordinal] = constraints_from_json(value);
  }
  return out;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < std::min(threads, n); ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

// ----------------------------------------------------------------- Train

TrainReport cmd_train(const TrainArgs& args) {
  ModelConfig model_cfg;
  TrainConfig train_cfg;
  if (!args.config.empty()) parse_config(read_file(args.config), model_cfg, train_cfg);
  if (args.seed) model_cfg.seed = train_cfg.seed = *args.seed;

  struct Raw {
    std::string name;
    std::vector<std::pair<DepTree, CCGTree>> data;
    double weight;
  };
  std::vector<Raw> raw;
  raw.push_back({args.conllu.stem().string(), read_aligned(args.conllu, args.autofile), 1.0});
  for (const auto& m : args.mixes) {
    auto prefix = m.prefix.string();
    raw.push_back({m.prefix.filename().string(), read_aligned(prefix + ".conllu", prefix + ".auto"), m.weight});
  }

  std::vector<std::pair<DepTree, CCGTree>> all;
  for (const auto& r : raw) all.insert(all.end(), r.data.begin(), r.data.end());
  for (std::size_t i = 0; i < all.size(); ++i) {
    try {
      all[i].first.check();
    } catch (const DataError& e) {
      throw DataError("training sentence " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  ConverterModel model = ConverterModel::from_data(model_cfg, all);

  std::vector<TrainingSource> sources;
  for (std::size_t s = 0; s < raw.size(); ++s) {
    TrainingSource src{raw[s].name, {}, raw[s].weight};
    if (s > 0 && raw[s].name == raw[0].name) src.name += "#" + std::to_string(s);
    for (const auto& [dep, ccg] : raw[s].data) src.sentences.push_back(model.align(dep, ccg));
    sources.push_back(std::move(src));
  }

  std::ofstream metrics;
  if (!args.metrics_out.empty()) {
    metrics.open(args.metrics_out);
    if (!metrics) throw Error("cannot write " + args.metrics_out.string());
  }
  TrainReport report;
  report.history = train(model, sources, train_cfg, [&](const EpochMetrics& m) {
    spdlog::info("epoch {}: loss {:.4f}, tag acc {:.4f}, head acc {:.4f}", m.epoch, m.loss, m.tag_accuracy,
                 m.head_accuracy);
    if (metrics) metrics << m.to_json().dump() << '\n' << std::flush;
  });
  report.final_accuracy = evaluate_accuracy(model, sources.front().sentences);
  spdlog::info("final training accuracy: tag {:.4f}, head {:.4f}", report.final_accuracy.tag,
               report.final_accuracy.head);
  model.save(args.model_out);
  return report;
}

// --------------------------------------------------------------- Convert

int ConvertReport::converted() const {
  int k = 0;
  for (const auto& s : sentences) k += s.tree.has_value();
  return k;
}

std::string ConvertReport::summary() const {
  return "converted " + std::to_string(converted()) + "/" + std::to_string(sentences.size());
}

namespace {

std::string describe_failure(const std::exception& e) {
  if (const auto* np = dynamic_cast<const NoParseError*>(&e)) {
    switch (np->cause()) {
      case NoParseError::Cause::Grammar:
        return "no valid parse (grammar)";
      case NoParseError::Cause::Constraints:
        return "no valid parse (constraints)";
      case NoParseError::Cause::Unknown:
        return "no valid parse";
    }
  }
  return e.what();
}

std::vector<Constraint> constraints_for(const std::map<int, std::vector<Constraint>>& all, int ordinal) {
  auto it = all.find(ordinal);
  return it == all.end() ? std::vector<Constraint>{} : it->second;
}

void check_constraint_keys(const std::map<int, std::vector<Constraint>>& constraints, std::size_t n) {
  if (!constraints.empty() && constraints.rbegin()->first > static_cast<int>(n)) {
    throw DataError("constraint file refers to sentence " + std::to_string(constraints.rbegin()->first) +
                    " but the corpus has " + std::to_string(n));
  }
}

}  // namespace

ConvertReport convert_corpus(const ConverterModel& model, const Grammar& grammar, const std::vector<DepTree>& corpus,
                             const std::map<int, std::vector<Constraint>>& constraints, const DecodeOptions& decode,
                             bool strip_x, int threads) {
  check_constraint_keys(constraints, corpus.size());
  ConvertReport report;
  report.sentences.resize(corpus.size());
  parallel_for(static_cast<int>(corpus.size()), threads, [&](int i) {
    SentenceResult& out = report.sentences[static_cast<std::size_t>(i)];
    try {
      corpus[static_cast<std::size_t>(i)].check();
      auto result = convert(model, grammar, corpus[static_cast<std::size_t>(i)], constraints_for(constraints, i + 1),
                            decode);
      if (strip_x) {
        auto stripped = strip_dummy(result.tree);
        if (!stripped) throw DataError("every token is marked X");
        out.tree = std::move(stripped);
      } else {
        out.tree = std::move(result.tree);
      }
    } catch (const std::exception& e) {
      out.failure = describe_failure(e);
    }
  });
  return report;
}

std::string write_report_auto(const ConvertReport& report) {
  std::string out;
  for (std::size_t i = 0; i < report.sentences.size(); ++i) {
    if (!report.sentences[i].tree) continue;
    out += "ID=" + std::to_string(i + 1) + "\n" + write_auto_tree(*report.sentences[i].tree) + "\n";
  }
  return out;
}

std::string write_failures(const ConvertReport& report) {
  std::string out;
  for (std::size_t i = 0; i < report.sentences.size(); ++i) {
    if (!report.sentences[i].tree) out += "sentence " + std::to_string(i + 1) + ": " + report.sentences[i].failure + "\n";
  }
  return out;
}

ConvertReport cmd_convert(const ConvertArgs& args) {
  ConverterModel model = ConverterModel::load(args.model);
  Grammar grammar = load_grammar(args.grammar);
  auto corpus = read_conllu(read_file(args.conllu));
  auto constraints = read_constraints(args.constraints);
  ConvertReport report = convert_corpus(model, grammar, corpus, constraints, args.decode, args.strip_x, args.threads);
  write_file(args.output, write_report_auto(report));
  return report;
}

ConvertReport cmd_decode(const DecodeArgs& args) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(args.matrices));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("score matrix file " + args.matrices.string() + ": " + e.what());
  }
  std::vector<ScoreMatrices> all;
  if (j.is_array()) {
    for (const auto& item : j) all.push_back(score_matrices_from_json(item));
  } else {
    all.push_back(score_matrices_from_json(j));
  }
  // Malformed input is a data error for the whole file.
  for (std::size_t i = 0; i < all.size(); ++i) {
    try {
      all[i].check();
    } catch (const DataError& e) {
      throw DataError("matrices " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  Grammar grammar = load_grammar(args.grammar);
  auto constraints = read_constraints(args.constraints);
  check_constraint_keys(constraints, all.size());

  ConvertReport report;
  report.sentences.resize(all.size());
  parallel_for(static_cast<int>(all.size()), args.threads, [&](int i) {
    auto& out = report.sentences[static_cast<std::size_t>(i)];
    try {
      out.tree = astar_parse(all[static_cast<std::size_t>(i)], grammar, constraints_for(constraints, i + 1),
                             args.decode)
                     .tree;
    } catch (const std::exception& e) {
      out.failure = describe_failure(e);
    }
  });
  write_file(args.output, write_report_auto(report));
  return report;
}

// ------------------------------------------------------------------ Eval

CoindexTable load_coindex_table(const std::filesystem::path& path) {
  return path.empty() ? CoindexTable::default_table() : CoindexTable::load(path);
}

Metrics cmd_eval(const std::filesystem::path& predicted, const std::filesystem::path& gold,
                 const std::filesystem::path& table) {
  return evaluate(read_auto(read_file(predicted)), read_auto(read_file(gold)), load_coindex_table(table));
}

std::string format_metrics(const Metrics& m) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-12s %8s %8s %8s\n", "", "P", "R", "F1");
  out += line;
  std::snprintf(line, sizeof line, "%-12s %8.2f %8.2f %8.2f\n", "unlabeled", m.unlabeled.precision,
                m.unlabeled.recall, m.unlabeled.f1);
  out += line;
  std::snprintf(line, sizeof line, "%-12s %8.2f %8.2f %8.2f\n", "labeled", m.labeled.precision, m.labeled.recall,
                m.labeled.f1);
  out += line;
  out += "\n";
  std::snprintf(line, sizeof line, "%-32s %6s %6s %8s %8s %8s\n", "category", "pred", "gold", "P", "R", "F1");
  out += line;
  for (const auto& [cat, s] : m.per_category) {
    PRF r = prf(s.correct, s.predicted, s.gold);
    std::snprintf(line, sizeof line, "%-32s %6zu %6zu %8.2f %8.2f %8.2f\n", cat.c_str(), s.predicted, s.gold,
                  r.precision, r.recall, r.f1);
    out += line;
  }
  return out;
}

nlohmann::json metrics_to_json(const Metrics& m) {
  auto prf_json = [](const PRF& r) { return nlohmann::json{{"precision", r.precision}, {"recall", r.recall}, {"f1", r.f1}}; };
  nlohmann::json j;
  j["unlabeled"] = prf_json(m.unlabeled);
  j["labeled"] = prf_json(m.labeled);
  j["predicted"] = m.predicted;
  j["gold"] = m.gold;
  auto cats = nlohmann::json::object();
  for (const auto& [cat, s] : m.per_category) {
    auto r = prf_json(prf(s.correct, s.predicted, s.gold));
    r["predicted"] = s.predicted;
    r["gold"] = s.gold;
    r["correct"] = s.correct;
    cats[cat] = r;
  }
  j["per_category"] = cats;
  return j;
}

std::vector<std::string> cmd_validate(const std::filesystem::path& autofile, const GrammarOptions& grammar) {
  Grammar g = load_grammar(grammar);
  auto trees = read_auto(read_file(autofile));
  std::vector<std::string> out;
  for (std::size_t i = 0; i < trees.size(); ++i) {
    for (const auto& v : validate_tree(trees[i], g)) {
      out.push_back("tree " + std::to_string(i + 1) + " [" + std::to_string(v.start) + "," + std::to_string(v.end) +
                    "]: " + v.message);
    }
  }
  return out;
}

std::string cmd_extract_deps(const std::filesystem::path& autofile, const std::filesystem::path& table) {
  CoindexTable t = load_coindex_table(table);
  std::vector<std::vector<PASDep>> all;
  for (const auto& tree : read_auto(read_file(autofile))) all.push_back(extract_deps(tree, t));
  return write_dep_dump(all);
}

}  // namespace d2cc
