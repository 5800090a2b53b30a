// Command-line front end: train, convert, decode, eval, validate,
// extract-deps and grad-check.

#include <cmath>
#include <cstdlib>
#include <iostream>
#include <limits>
#include <random>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "d2cc/errors.hpp"
#include "d2cc/pipeline.hpp"

using namespace d2cc;

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("d2cc");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* level = std::getenv("D2CC_LOG")) spdlog::set_level(spdlog::level::from_str(level));
}

void add_grammar_options(CLI::App* cmd, GrammarOptions& g) {
  cmd->add_option("--grammar", g.dir, "Directory with unary.txt and roots.txt");
  cmd->add_option("--unary-table", g.unary_table, "Unary rule table (FROM -> TO per line)");
  cmd->add_option("--roots", g.roots, "Root category list");
  cmd->add_flag("--x-absorb", g.x_absorption, "Let the dummy category X attach to any neighbour");
}

void add_decode_options(CLI::App* cmd, std::string& beam, std::size_t& budget, int& threads) {
  cmd->add_option("--beam", beam, "Supertag pruning threshold in log space, or 'off'")->default_str("ln(1e-4)");
  cmd->add_option("--budget", budget, "Maximum agenda pops per sentence")->capture_default_str();
  cmd->add_option("--threads", threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
}

DecodeOptions decode_options(const std::string& beam, std::size_t budget) {
  DecodeOptions d;
  d.budget = budget;
  if (beam == "off") {
    d.beam = -std::numeric_limits<double>::infinity();
  } else if (!beam.empty()) {
    try {
      d.beam = std::stod(beam);
    } catch (const std::exception&) {
      throw DataError("--beam expects a number or 'off'");
    }
  }
  return d;
}

void report_batch(const ConvertReport& report, const std::string& failures_path) {
  const std::string failures = write_failures(report);
  if (!failures_path.empty()) {
    write_file(failures_path, failures);
  } else if (!failures.empty()) {
    std::cerr << failures;
  }
  std::cout << report.summary() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Dependency-to-CCG treebank converter"};
  app.require_subcommand(1);

  // train
  TrainArgs train_args;
  std::vector<std::string> mixes;
  std::uint64_t seed = 0;
  auto* train_cmd = app.add_subcommand("train", "Train a converter on aligned CoNLL-U and AUTO files");
  train_cmd->add_option("--conllu", train_args.conllu, "Dependency trees")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--auto", train_args.autofile, "Aligned CCG trees")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--config", train_args.config, "key=value model and training settings")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--model", train_args.model_out, "Checkpoint to write")->required();
  train_cmd->add_option("--metrics", train_args.metrics_out, "Per-epoch JSON lines");
  train_cmd->add_option("--mix", mixes, "Extra source PREFIX:WEIGHT reading PREFIX.conllu and PREFIX.auto");
  auto* seed_opt = train_cmd->add_option("--seed", seed, "Random seed (overrides the config)");

  // convert
  ConvertArgs convert_args;
  std::string convert_beam, convert_failures;
  auto* convert_cmd = app.add_subcommand("convert", "Convert a CoNLL-U corpus to AUTO trees");
  convert_cmd->add_option("--model", convert_args.model, "Checkpoint")->required()->check(CLI::ExistingFile);
  convert_cmd->add_option("--input", convert_args.conllu, "CoNLL-U corpus")->required()->check(CLI::ExistingFile);
  convert_cmd->add_option("--output", convert_args.output, "AUTO output")->required();
  convert_cmd->add_option("--constraints", convert_args.constraints, "Constraint JSON")->check(CLI::ExistingFile);
  convert_cmd->add_option("--failures", convert_failures, "Write the failure report here instead of stderr");
  convert_cmd->add_flag("--strip-x", convert_args.strip_x, "Drop X-tagged tokens from the output trees");
  add_grammar_options(convert_cmd, convert_args.grammar);
  add_decode_options(convert_cmd, convert_beam, convert_args.decode.budget, convert_args.threads);

  // decode
  DecodeArgs decode_args;
  std::string decode_beam, decode_failures;
  auto* decode_cmd = app.add_subcommand("decode", "Decode score-matrix JSON without a model");
  decode_cmd->add_option("--matrices", decode_args.matrices, "Score matrices")->required()->check(CLI::ExistingFile);
  decode_cmd->add_option("--output", decode_args.output, "AUTO output")->required();
  decode_cmd->add_option("--constraints", decode_args.constraints, "Constraint JSON")->check(CLI::ExistingFile);
  decode_cmd->add_option("--failures", decode_failures, "Write the failure report here instead of stderr");
  add_grammar_options(decode_cmd, decode_args.grammar);
  add_decode_options(decode_cmd, decode_beam, decode_args.decode.budget, decode_args.threads);

  // eval
  std::string eval_pred, eval_gold, eval_table, eval_json;
  auto* eval_cmd = app.add_subcommand("eval", "Score predicate-argument dependencies against gold trees");
  eval_cmd->add_option("--pred", eval_pred, "Predicted AUTO")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--gold", eval_gold, "Gold AUTO")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--table", eval_table, "Coindexation table")->check(CLI::ExistingFile);
  eval_cmd->add_option("--json", eval_json, "Also write the metrics as JSON");

  // validate
  std::string validate_auto;
  GrammarOptions validate_grammar;
  auto* validate_cmd = app.add_subcommand("validate", "Check that every node of every tree is licensed");
  validate_cmd->add_option("--auto", validate_auto, "AUTO file")->required()->check(CLI::ExistingFile);
  add_grammar_options(validate_cmd, validate_grammar);

  // extract-deps
  std::string deps_auto, deps_table, deps_output;
  auto* deps_cmd = app.add_subcommand("extract-deps", "Dump predicate-argument dependencies");
  deps_cmd->add_option("--auto", deps_auto, "AUTO file")->required()->check(CLI::ExistingFile);
  deps_cmd->add_option("--table", deps_table, "Coindexation table")->check(CLI::ExistingFile);
  deps_cmd->add_option("--output", deps_output, "Output file (default stdout)");

  // grad-check
  std::string gc_conllu, gc_auto, gc_config;
  int gc_samples = 1;
  bool gc_fault = false;
  double gc_eps = 1e-4;
  auto* gc_cmd = app.add_subcommand("grad-check", "Compare analytic and numeric gradients");
  gc_cmd->add_option("--conllu", gc_conllu, "Dependency trees")->required()->check(CLI::ExistingFile);
  gc_cmd->add_option("--auto", gc_auto, "Aligned CCG trees")->required()->check(CLI::ExistingFile);
  gc_cmd->add_option("--config", gc_config, "key=value model settings (keep dimensions small)")
      ->check(CLI::ExistingFile);
  gc_cmd->add_option("--samples", gc_samples, "Sentences to check")->capture_default_str();
  gc_cmd->add_option("--eps", gc_eps, "Finite-difference step")->capture_default_str();
  gc_cmd->add_flag("--corrupt", gc_fault, "Deliberately break the ELU derivative");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train_cmd) {
      if (*seed_opt) train_args.seed = seed;
      for (const auto& m : mixes) train_args.mixes.push_back(parse_mix(m));
      TrainReport r = cmd_train(train_args);
      std::cout << "tag accuracy " << r.final_accuracy.tag << ", head accuracy " << r.final_accuracy.head << "\n";
    } else if (*convert_cmd) {
      convert_args.decode = decode_options(convert_beam, convert_args.decode.budget);
      report_batch(cmd_convert(convert_args), convert_failures);
    } else if (*decode_cmd) {
      decode_args.decode = decode_options(decode_beam, decode_args.decode.budget);
      report_batch(cmd_decode(decode_args), decode_failures);
    } else if (*eval_cmd) {
      Metrics m = cmd_eval(eval_pred, eval_gold, eval_table);
      std::cout << format_metrics(m);
      if (!eval_json.empty()) write_file(eval_json, metrics_to_json(m).dump(2) + "\n");
    } else if (*validate_cmd) {
      auto violations = cmd_validate(validate_auto, validate_grammar);
      for (const auto& v : violations) std::cout << v << "\n";
      if (!violations.empty()) return 2;
      std::cout << "ok\n";
    } else if (*deps_cmd) {
      std::string dump = cmd_extract_deps(deps_auto, deps_table);
      if (deps_output.empty()) {
        std::cout << dump;
      } else {
        write_file(deps_output, dump);
      }
    } else if (*gc_cmd) {
      ModelConfig mc;
      TrainConfig tc;
      if (!gc_config.empty()) parse_config(read_file(gc_config), mc, tc);
      auto data = read_aligned(gc_conllu, gc_auto);
      ConverterModel model = ConverterModel::from_data(mc, data);
      double worst = 0.0;
      for (int i = 0; i < gc_samples && i < static_cast<int>(data.size()); ++i) {
        auto sample = model.align(data[static_cast<std::size_t>(i)].first, data[static_cast<std::size_t>(i)].second);
        auto r = grad_check(model, sample, gc_eps, gc_fault ? nn::Fault::EluDerivative : nn::Fault::None);
        std::cout << "sentence " << i + 1 << ": max relative error " << r.max_relative_error << " at "
                  << r.worst_parameter << " (" << r.checked << " entries, " << r.skipped
                  << " skipped at ELU kinks)\n";
        worst = std::max(worst, r.max_relative_error);
      }
      if (worst >= 1e-4) return 1;
    }
  } catch (const DataError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
