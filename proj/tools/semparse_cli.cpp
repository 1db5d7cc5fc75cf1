// semparse: embed / train / parse / eval / tune-rank.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "semparse/errors.hpp"
#include "semparse/pipeline.hpp"

namespace {

using namespace semparse;

struct Options {
  std::string corpus;
  std::string lang = "en";
  std::string mode = "ht-d";
  std::optional<std::size_t> rank;
  std::vector<std::size_t> ranks{10, 20, 30};
  std::string nn_window = "off";
  std::size_t iterations = 150;
  double l2 = 0.01;
  double learning_rate = 0.1;
  std::size_t warmup = 50;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::string cooc_mode = "freq";
  std::string grammar = "observed";
  std::size_t max_nodes = 0;
  std::string out = "out";
  std::size_t train_size = kStandardTrainSize;
  std::size_t test_size = kStandardTestSize;
  std::string embeddings;
  bool dev_select = false;
  std::string model;
  std::string predictions;
  std::string sentence;
};

void add_common(CLI::App* cmd, Options& o, bool needs_corpus) {
  auto* corpus = cmd->add_option("--corpus", o.corpus, "corpus file");
  if (needs_corpus) corpus->required()->check(CLI::ExistingFile);
  cmd->add_option("--lang", o.lang, "target language")->capture_default_str();
  cmd->add_option("--mode", o.mode, "ht-d, ht-d+o, ht-d+nn or ht-d+nn+o")
      ->check(CLI::IsMember({"ht-d", "ht-d+o", "ht-d+nn", "ht-d+nn+o"}))
      ->capture_default_str();
  cmd->add_option("--rank", o.rank, "embedding rank d (tuned when omitted)")->check(CLI::PositiveNumber);
  cmd->add_option("--ranks", o.ranks, "candidate ranks for tuning")->capture_default_str();
  cmd->add_option("--nn-window", o.nn_window, "neural window J: off, 0, 1 or 2")
      ->check(CLI::IsMember({"off", "0", "1", "2"}))
      ->capture_default_str();
  cmd->add_option("--iterations", o.iterations, "maximum optimization iterations")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--l2", o.l2, "L2 regularization strength")->check(CLI::NonNegativeNumber)->capture_default_str();
  cmd->add_option("--learning-rate", o.learning_rate, "base adaptive step")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--warmup", o.warmup, "iterations with word-context features frozen")->capture_default_str();
  cmd->add_option("--seed", o.seed, "seed for every random choice")->capture_default_str();
  cmd->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--cooc-mode", o.cooc_mode, "co-occurrence counts: freq or binary")
      ->check(CLI::IsMember({"freq", "binary"}))
      ->capture_default_str();
  cmd->add_option("--grammar", o.grammar, "unit compatibility: observed or typed")
      ->check(CLI::IsMember({"observed", "typed"}))
      ->capture_default_str();
  cmd->add_option("--max-nodes", o.max_nodes, "largest decoded tree (0: 2n-1)")->capture_default_str();
  cmd->add_option("--out", o.out, "output root")->capture_default_str();
  cmd->add_option("--train-size", o.train_size, "training instances in the standard split")->capture_default_str();
  cmd->add_option("--test-size", o.test_size, "test instances in the standard split")->capture_default_str();
  cmd->add_option("--embeddings", o.embeddings, "precomputed embedding table (.tsv or binary)")
      ->check(CLI::ExistingFile);
  cmd->add_flag("--dev-select", o.dev_select, "hold out 20% of training and keep the best-dev iteration");
}

ExperimentSpec to_spec(const Options& o) {
  ExperimentSpec s;
  s.corpus = o.corpus;
  s.language = o.lang;
  s.mode = parse_mode(o.mode);
  s.rank = o.rank;
  s.rank_candidates = o.ranks;
  s.cooc_mode = o.cooc_mode == "binary" ? CoocMode::kBinary : CoocMode::kFrequency;
  s.out_dir = o.out;
  s.train_size = o.train_size;
  s.test_size = o.test_size;
  s.dev_select = o.dev_select;
  if (!o.embeddings.empty()) s.embeddings = o.embeddings;
  s.train.max_iterations = o.iterations;
  s.train.l2_lambda = o.l2;
  s.train.learning_rate = o.learning_rate;
  s.train.warmup_iterations = o.warmup;
  s.train.seed = o.seed;
  s.train.threads = o.threads;
  s.train.grammar = o.grammar == "typed" ? GrammarMode::kTyped : GrammarMode::kObserved;
  s.train.decode.max_nodes = o.max_nodes;
  if (o.nn_window != "off") s.train.nn_window = std::stoi(o.nn_window);
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multilingual semantic parser with latent hybrid trees"};
  app.require_subcommand(1);
  Options o;

  auto* embed = app.add_subcommand("embed", "build unit embeddings from the auxiliary languages");
  add_common(embed, o, true);
  auto* train = app.add_subcommand("train", "train a model on the standard split");
  add_common(train, o, true);
  auto* eval = app.add_subcommand("eval", "decode the test split and score exact matches");
  add_common(eval, o, true);
  eval->add_option("--model", o.model, "model file")->required()->check(CLI::ExistingFile);
  eval->add_option("--predictions", o.predictions, "predictions TSV (default: next to the model)");
  auto* parse = app.add_subcommand("parse", "print the logical form of one sentence");
  add_common(parse, o, false);
  parse->add_option("--model", o.model, "model file")->required()->check(CLI::ExistingFile);
  parse->add_option("sentence", o.sentence, "sentence to parse")->required();
  auto* tune = app.add_subcommand("tune-rank", "pick the embedding rank on a held-out dev split");
  add_common(tune, o, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const ExperimentSpec spec = to_spec(o);
    if (*embed) {
      const auto r = cmd_embed(spec);
      std::cout << "embedded " << r.embeddings.units.size() << " units at rank " << r.embeddings.rank() << "\n"
                << r.tsv.string() << '\n'
                << r.binary.string() << '\n';
    } else if (*train) {
      cmd_train(spec, std::cout);
    } else if (*eval) {
      cmd_eval(o.model, spec, o.predictions.empty() ? std::nullopt : std::optional<std::filesystem::path>(o.predictions),
               std::cout);
    } else if (*parse) {
      const auto m = cmd_parse(o.model, o.sentence, spec.train.decode);
      std::cout << (m ? serialize_mrl(*m) : "(no parse)") << '\n';
    } else if (*tune) {
      cmd_tune_rank(spec, std::cout);
    }
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
