#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "d2cc/dep_tree.hpp"
#include "d2cc/pipeline.hpp"
#include "d2cc/scores.hpp"

using namespace d2cc;
namespace fs = std::filesystem;

namespace {

const fs::path kWork = D2CC_WORK_DIR;
const std::string kData = D2CC_DATA_DIR;

fs::path work(const std::string& name) {
  fs::create_directories(kWork);
  return kWork / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(const std::string& args) {
  const fs::path out = work("stdout.txt"), err = work("stderr.txt");
  const std::string cmd = std::string("\"") + D2CC_CLI + "\" " + args + " >\"" + out.string() + "\" 2>\"" +
                          err.string() + "\"";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

const char* kTinyConfig =
    "word_dim = 8\npos_dim = 4\nlabel_dim = 4\nseq_hidden = 8\nseq_layers = 1\n"
    "tree_hidden = 8\nmlp_dim = 8\nepochs = 2\nbatch_size = 16\n";

fs::path tiny_config() {
  fs::path p = work("tiny.cfg");
  spit(p, kTinyConfig);
  return p;
}

// A small model shared by the convert tests.
fs::path tiny_model() {
  static const fs::path model = [] {
    fs::path m = work("tiny.model");
    Run r = cli("train --conllu " + q(kData + "/synthetic/train.conllu") + " --auto " +
                q(kData + "/synthetic/train.auto") + " --config " + q(tiny_config()) + " --model " + q(m));
    REQUIRE(r.code == 0);
    return m;
  }();
  return model;
}

// The first n sentences of the synthetic corpus.
fs::path head_corpus(int n) {
  auto corpus = read_conllu(slurp(kData + "/synthetic/train.conllu"));
  corpus.resize(static_cast<std::size_t>(n));
  fs::path p = work("head" + std::to_string(n) + ".conllu");
  spit(p, write_conllu(corpus));
  return p;
}

int count_trees(const std::string& auto_text) {
  int n = 0;
  for (std::size_t p = 0; (p = auto_text.find("ID=", p)) != std::string::npos; ++p) ++n;
  return n;
}

}  // namespace

TEST_CASE("train rejects misaligned files with exit code 2") {
  std::string autotext = slurp(kData + "/synthetic/train.auto");
  auto trees = read_auto(autotext);
  trees.pop_back();
  fs::path short_auto = work("short.auto");
  spit(short_auto, write_auto(trees));
  Run r = cli("train --conllu " + q(kData + "/synthetic/train.conllu") + " --auto " + q(short_auto) +
              " --config " + q(tiny_config()) + " --model " + q(work("never.model")));
  CHECK(r.code == 2);
  CHECK(r.err.find("64") != std::string::npos);
  CHECK_FALSE(fs::exists(work("never.model")));
}

TEST_CASE("train is deterministic for a fixed seed") {
  auto train = [&](const std::string& tag) {
    Run r = cli("train --conllu " + q(kData + "/synthetic/train.conllu") + " --auto " +
                q(kData + "/synthetic/train.auto") + " --config " + q(tiny_config()) + " --seed 7 --model " +
                q(work(tag + ".model")) + " --metrics " + q(work(tag + ".jsonl")));
    REQUIRE(r.code == 0);
  };
  train("seed7a");
  train("seed7b");
  const std::string log = slurp(work("seed7a.jsonl"));
  CHECK(log == slurp(work("seed7b.jsonl")));
  CHECK(slurp(work("seed7a.model")) == slurp(work("seed7b.model")));
  CHECK(std::count(log.begin(), log.end(), '\n') == 2);
  CHECK(nlohmann::json::parse(log.substr(0, log.find('\n'))).contains("loss"));
}

TEST_CASE("convert reports counts and keeps going past failures") {
  const fs::path model = tiny_model();

  fs::path empty = work("empty.conllu");
  spit(empty, "");
  Run r = cli("convert --model " + q(model) + " --input " + q(empty) + " --output " + q(work("empty.auto")));
  CHECK(r.code == 0);
  CHECK((r.out + r.err).find("converted 0/0") != std::string::npos);

  // Sentence 3 gets two crossing spans, which no tree can satisfy.
  fs::path input = head_corpus(10);
  fs::path cons = work("crossing.json");
  spit(cons,
       R"({"3": [{"category": null, "start": 1, "end": 2}, {"category": null, "start": 2, "end": 3}]})");
  r = cli("convert --model " + q(model) + " --input " + q(input) + " --output " + q(work("ten.auto")) +
          " --constraints " + q(cons) + " --failures " + q(work("ten.failures")));
  CHECK(r.code == 0);
  CHECK((r.out + r.err).find("converted 9/10") != std::string::npos);
  const std::string out = slurp(work("ten.auto"));
  CHECK(count_trees(out) == 9);
  CHECK(out.find("ID=3\n") == std::string::npos);
  const std::string failures = slurp(work("ten.failures"));
  CHECK(failures.find("3") != std::string::npos);
  CHECK(failures.find("onstraint") != std::string::npos);

  Run v = cli("validate --auto " + q(work("ten.auto")));
  CHECK(v.code == 0);
}

TEST_CASE("convert output does not depend on the thread count") {
  const fs::path model = tiny_model();
  fs::path input = kData + "/synthetic/train.conllu";
  REQUIRE(cli("convert --model " + q(model) + " --input " + q(input) + " --output " + q(work("t1.auto"))).code == 0);
  REQUIRE(cli("convert --model " + q(model) + " --input " + q(input) + " --output " + q(work("t3.auto")) +
              " --threads 3")
              .code == 0);
  CHECK(slurp(work("t1.auto")) == slurp(work("t3.auto")));
  CHECK(count_trees(slurp(work("t1.auto"))) > 0);
}

TEST_CASE("decode works without a model") {
  ScoreMatrices m;
  m.tokens = {"the", "dog"};
  m.categories = {parse_category("NP/N"), parse_category("N")};
  m.tag_logp.resize(2, 2);
  m.tag_logp << std::log(0.9), std::log(0.1), std::log(0.2), std::log(0.8);
  m.dep_logp.resize(2, 3);
  m.dep_logp << std::log(0.8), std::log(0.1), std::log(0.1), std::log(0.3), std::log(0.6), std::log(0.1);
  fs::path in = work("two.json");
  spit(in, score_matrices_to_json(m).dump());
  Run r = cli("decode --matrices " + q(in) + " --output " + q(work("two.auto")));
  CHECK(r.code == 0);
  auto trees = read_auto(slurp(work("two.auto")));
  REQUIRE(trees.size() == 1);
  CHECK(trees[0].category() == parse_category("NP"));
  CHECK(trees[0].words() == std::vector<std::string>{"the", "dog"});

  // A row that is not a distribution is a data error.
  auto j = score_matrices_to_json(m);
  j["tag_logp"][0][0] = 0.0;
  j["tag_logp"][0][1] = 0.0;
  spit(in, j.dump());
  CHECK(cli("decode --matrices " + q(in) + " --output " + q(work("bad.auto"))).code == 2);
}

TEST_CASE("evaluate, validate and extract on the fixtures") {
  const std::string relcl = kData + "/fixtures/relative_clause.auto";
  Run r = cli("eval --pred " + q(relcl) + " --gold " + q(relcl) + " --json " + q(work("eval.json")));
  CHECK(r.code == 0);
  CHECK(r.out.find("100.00") != std::string::npos);
  auto j = nlohmann::json::parse(slurp(work("eval.json")));
  CHECK(j.dump().find("100") != std::string::npos);

  Run deps = cli("extract-deps --auto " + q(relcl));
  CHECK(deps.code == 0);
  CHECK(deps.out.find("6 2 1 (S[b]\\NP)/NP") != std::string::npos);
  CHECK(deps.out.find("6 1 3 (S[b]\\NP)/NP") != std::string::npos);

  const std::string math = kData + "/fixtures/math_derivation.auto";
  CHECK(cli("validate --auto " + q(math) + " --roots " + q(kData + "/fixtures/math_roots.txt")).code == 0);
  Run bad = cli("validate --auto " + q(math));
  CHECK(bad.code == 2);
  CHECK(bad.out.find("root") != std::string::npos);

  Run mismatch = cli("eval --pred " + q(relcl) + " --gold " + q(math));
  CHECK(mismatch.code == 2);
}

TEST_CASE("grad-check exit codes") {
  const std::string args = "grad-check --conllu " + q(kData + "/synthetic/train.conllu") + " --auto " +
                           q(kData + "/synthetic/train.auto") + " --config " + q(tiny_config());
  CHECK(cli(args).code == 0);
  CHECK(cli(args + " --corrupt").code == 1);
}

TEST_CASE("missing inputs and bad flags") {
  CHECK(cli("validate --auto " + q(work("does-not-exist.auto"))).code != 0);
  CHECK(cli("frobnicate").code != 0);
}
