#include "semparse/pipeline.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>

#include <json.hpp>

#include "semparse/errors.hpp"

namespace semparse {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kDefaultRank = 30;

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir.string() + ": " + ec.message());
}

Corpus load_checked(const ExperimentSpec& spec) {
  Corpus c = load_corpus(spec.corpus);
  if (!c.languages.count(spec.language)) throw DataError("language '" + spec.language + "' not in corpus");
  return c;
}

void require_auxiliary(const Corpus& c, const std::string& language) {
  for (const auto& l : c.languages)
    if (l != language && c.count(l) > 0) return;
  throw DataError("mode needs at least one auxiliary language besides '" + language + "'");
}

UnitEmbeddings embed_at(const Corpus& c, const std::string& language, std::size_t rank, CoocMode mode) {
  const Corpus aux = auxiliary_corpus(c, language);
  if (aux.instances.empty()) throw DataError("no auxiliary data for target '" + language + "'");
  const CoocMatrix cooc = build_cooc(aux, mode);
  return truncate_embed(svd(cooc.counts), cooc.units, rank);
}

const char* cooc_name(CoocMode m) { return m == CoocMode::kBinary ? "binary" : "freq"; }

nlohmann::ordered_json config_json(const ExperimentSpec& spec) {
  nlohmann::ordered_json j;
  j["corpus"] = spec.corpus.string();
  j["language"] = spec.language;
  j["mode"] = mode_name(spec.mode);
  j["train_size"] = spec.train_size;
  j["test_size"] = spec.test_size;
  j["iterations"] = spec.train.max_iterations;
  j["l2"] = spec.train.l2_lambda;
  j["learning_rate"] = spec.train.learning_rate;
  j["step_growth"] = spec.train.step_growth;
  j["warmup_iterations"] = spec.train.warmup_iterations;
  j["tolerance"] = spec.train.tolerance;
  j["seed"] = spec.train.seed;
  j["grammar"] = spec.train.grammar == GrammarMode::kTyped ? "typed" : "observed";
  j["max_nodes"] = spec.train.decode.max_nodes;
  j["cooc_mode"] = cooc_name(spec.cooc_mode);
  j["dev_select"] = spec.dev_select;
  if (spec.train.nn_window) {
    j["nn_window"] = *spec.train.nn_window;
    j["nn_word_dim"] = spec.train.nn_shape.word_dim;
    j["nn_hidden"] = spec.train.nn_shape.hidden;
  } else {
    j["nn_window"] = "off";
  }
  if (spec.embeddings) j["embeddings"] = spec.embeddings->string();
  return j;
}

}  // namespace

std::string mode_name(Mode mode) {
  switch (mode) {
    case Mode::kHtD: return "ht-d";
    case Mode::kHtDO: return "ht-d+o";
    case Mode::kHtDNN: return "ht-d+nn";
    case Mode::kHtDNNO: return "ht-d+nn+o";
  }
  return "?";
}

Mode parse_mode(const std::string& name) {
  for (Mode m : {Mode::kHtD, Mode::kHtDO, Mode::kHtDNN, Mode::kHtDNNO})
    if (mode_name(m) == name) return m;
  throw DataError("unknown mode '" + name + "'");
}

bool uses_embeddings(Mode mode) { return mode == Mode::kHtDO || mode == Mode::kHtDNNO; }
bool uses_neural(Mode mode) { return mode == Mode::kHtDNN || mode == Mode::kHtDNNO; }

fs::path ExperimentSpec::experiment_dir() const { return out_dir / language / mode_name(mode); }

UnitEmbeddings load_embeddings_any(const fs::path& path) {
  return path.extension() == ".tsv" ? load_embeddings_tsv(path) : load_embeddings_binary(path);
}

EmbedResult cmd_embed(const ExperimentSpec& spec) {
  const Corpus c = load_checked(spec);
  require_auxiliary(c, spec.language);
  EmbedResult r;
  r.embeddings = embed_at(c, spec.language, spec.rank.value_or(kDefaultRank), spec.cooc_mode);
  const fs::path dir = spec.out_dir / spec.language / "embeddings";
  ensure_dir(dir);
  const std::string stem = "rank" + std::to_string(r.embeddings.rank()) + "-" + cooc_name(spec.cooc_mode);
  r.tsv = dir / (stem + ".tsv");
  r.binary = dir / (stem + ".bin");
  export_embeddings(r.embeddings, r.tsv);
  save_embeddings_binary(r.embeddings, r.binary);
  return r;
}

TrainOutcome cmd_train(const ExperimentSpec& spec, std::ostream& log) {
  const Corpus c = load_checked(spec);
  TrainConfig cfg = spec.train;
  if (uses_neural(spec.mode)) {
    if (!cfg.nn_window) cfg.nn_window = 2;
  } else {
    cfg.nn_window.reset();
  }
  cfg.validate();

  const SplitSpec split = standard_split(c, spec.language, spec.train_size, spec.test_size);
  TrainOutcome out;
  std::optional<UnitEmbeddings> emb;
  if (uses_embeddings(spec.mode)) {
    require_auxiliary(c, spec.language);
    if (spec.embeddings) {
      emb = load_embeddings_any(*spec.embeddings);
    } else {
      std::size_t rank = 0;
      if (spec.rank) {
        rank = *spec.rank;
      } else {
        out.tuning = tune_rank(c, spec.language, spec.rank_candidates, cfg, spec.cooc_mode, spec.train_size,
                               spec.test_size);
        for (const auto& s : out.tuning->scores)
          log << "rank " << s.rank << "\tdev-F1 " << std::fixed << std::setprecision(4) << s.dev_f1 << '\n';
        rank = out.tuning->best_rank;
        log << "selected rank " << rank << '\n';
      }
      emb = embed_at(c, spec.language, rank, spec.cooc_mode);
    }
  }

  std::vector<Instance> train_set, dev_set;
  if (spec.dev_select) {
    const SplitSpec d = dev_split(split, cfg.seed);
    train_set = select(c, spec.language, d.train_ids);
    dev_set = select(c, spec.language, d.dev_ids);
  } else {
    train_set = select(c, spec.language, split.train_ids);
  }
  out.report = train(train_set, build_model(train_set, cfg, emb ? &*emb : nullptr), cfg,
                     spec.dev_select ? &dev_set : nullptr);
  if (out.report.skipped)
    log << "skipped " << out.report.skipped << " training instances with no hybrid tree\n";

  const fs::path dir = spec.experiment_dir();
  ensure_dir(dir);
  out.model_path = dir / "model.txt";
  save_model(out.report.params, out.model_path);
  {
    std::ofstream tl(dir / "train_log.tsv");
    if (!tl) throw DataError("cannot write training log in " + dir.string());
    tl << "iteration\tobjective\tgrad_norm\tdev_f1\n" << std::setprecision(17);
    for (const auto& r : out.report.trace) {
      tl << r.iteration << '\t' << r.objective << '\t' << r.grad_norm << '\t';
      if (r.dev_f1) tl << *r.dev_f1; else tl << '-';
      tl << '\n';
    }
  }
  auto snapshot = config_json(spec);
  if (cfg.nn_window) snapshot["nn_window"] = *cfg.nn_window;
  if (emb) snapshot["rank"] = emb->rank();
  if (out.tuning) {
    nlohmann::ordered_json scores = nlohmann::ordered_json::array();
    for (const auto& s : out.tuning->scores) scores.push_back({{"rank", s.rank}, {"dev_f1", s.dev_f1}});
    snapshot["rank_tuning"] = scores;
  }
  snapshot["iterations_run"] = out.report.trace.size();
  snapshot["selected_iteration"] = out.report.selected_iteration;
  snapshot["skipped_instances"] = out.report.skipped;
  std::ofstream(dir / "config.json") << snapshot.dump(2) << '\n';
  if (emb) export_embeddings(*emb, dir / "embeddings.tsv");

  log << "trained " << mode_name(spec.mode) << " on " << train_set.size() << " instances, "
      << out.report.trace.size() << " iterations";
  if (!out.report.trace.empty())
    log << ", objective " << std::setprecision(6) << out.report.trace.back().objective;
  log << "\nmodel written to " << out.model_path.string() << '\n';
  return out;
}

EvalOutcome cmd_eval(const fs::path& model, const ExperimentSpec& spec, const std::optional<fs::path>& predictions,
                     std::ostream& log) {
  const ModelParams params = load_model(model);
  const Corpus c = load_checked(spec);
  const SplitSpec split = standard_split(c, spec.language, spec.train_size, spec.test_size);
  const auto test = select(c, spec.language, split.test_ids);
  const auto preds = predict(params, test, spec.train.decode, spec.train.threads);
  std::vector<MeaningTree> golds;
  for (const auto& inst : test) golds.push_back(inst.tree);
  EvalOutcome out;
  out.result = evaluate(preds, golds);
  out.predictions_path = predictions ? *predictions : model.parent_path() / "predictions.tsv";
  if (out.predictions_path.has_parent_path()) ensure_dir(out.predictions_path.parent_path());
  write_predictions(out.predictions_path, test, preds);
  const auto& r = out.result;
  log << std::fixed << std::setprecision(2) << "total " << r.total << "  parsed " << r.parsed << "  correct "
      << r.correct << "\naccuracy " << 100 * r.accuracy << "  precision " << 100 * r.precision << "  recall "
      << 100 * r.recall << "  F1 " << 100 * r.f1 << '\n'
      << "predictions written to " << out.predictions_path.string() << '\n';
  return out;
}

std::optional<MeaningTree> cmd_parse(const fs::path& model, const std::string& sentence,
                                     const DecodeOptions& options) {
  const ModelParams params = load_model(model);
  const auto tokens = tokenize(sentence);
  if (tokens.empty()) throw DataError("empty sentence");
  return decode(tokens, params, options);
}

RankTuning cmd_tune_rank(const ExperimentSpec& spec, std::ostream& log) {
  const Corpus c = load_checked(spec);
  require_auxiliary(c, spec.language);
  TrainConfig cfg = spec.train;
  if (!uses_neural(spec.mode)) cfg.nn_window.reset();
  else if (!cfg.nn_window) cfg.nn_window = 2;
  const RankTuning t =
      tune_rank(c, spec.language, spec.rank_candidates, cfg, spec.cooc_mode, spec.train_size, spec.test_size);
  log << "rank\tdev_f1\n";
  for (const auto& s : t.scores) log << s.rank << '\t' << std::fixed << std::setprecision(4) << s.dev_f1 << '\n';
  log << "selected\t" << t.best_rank << '\n';
  return t;
}

}  // namespace semparse
