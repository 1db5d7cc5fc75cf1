#ifndef SEMPARSE_PIPELINE_HPP
#define SEMPARSE_PIPELINE_HPP

// Experiment commands behind the command-line tool. Every command writes
// into out/{lang}/{mode}/ (or out/{lang}/embeddings/ for embed) and is a
// pure function of its experiment settings and seed.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "semparse/embeddings.hpp"
#include "semparse/evaluator.hpp"
#include "semparse/trainer.hpp"

namespace semparse {

enum class Mode { kHtD, kHtDO, kHtDNN, kHtDNNO };

std::string mode_name(Mode mode);
Mode parse_mode(const std::string& name);  // throws DataError
bool uses_embeddings(Mode mode);
bool uses_neural(Mode mode);

struct ExperimentSpec {
  std::filesystem::path corpus;
  std::string language = "en";
  Mode mode = Mode::kHtD;
  TrainConfig train;
  std::filesystem::path out_dir = "out";
  std::optional<std::size_t> rank;            // tuned over rank_candidates when empty
  std::vector<std::size_t> rank_candidates{10, 20, 30};
  CoocMode cooc_mode = CoocMode::kFrequency;
  std::optional<std::filesystem::path> embeddings;  // precomputed table (.tsv or binary)
  bool dev_select = false;  // hold out 20% and keep the best-dev iteration
  std::size_t train_size = kStandardTrainSize;
  std::size_t test_size = kStandardTestSize;

  std::filesystem::path experiment_dir() const;
};

struct EmbedResult {
  UnitEmbeddings embeddings;
  std::filesystem::path tsv, binary;
};

struct TrainOutcome {
  TrainReport report;
  std::optional<RankTuning> tuning;
  std::filesystem::path model_path;
};

struct EvalOutcome {
  EvalResult result;
  std::filesystem::path predictions_path;
};

// Auxiliary corpus -> co-occurrence -> SVD -> rank-d table, written as TSV
// and binary. Rank defaults to 30.
EmbedResult cmd_embed(const ExperimentSpec& spec);
TrainOutcome cmd_train(const ExperimentSpec& spec, std::ostream& log);
// Decodes the test portion with the stored model; predictions default to
// the model's directory.
EvalOutcome cmd_eval(const std::filesystem::path& model, const ExperimentSpec& spec,
                     const std::optional<std::filesystem::path>& predictions, std::ostream& log);
std::optional<MeaningTree> cmd_parse(const std::filesystem::path& model, const std::string& sentence,
                                     const DecodeOptions& options);
RankTuning cmd_tune_rank(const ExperimentSpec& spec, std::ostream& log);

UnitEmbeddings load_embeddings_any(const std::filesystem::path& path);

}  // namespace semparse

#endif
