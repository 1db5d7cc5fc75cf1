#ifndef SEMPARSE_TRAINER_HPP
#define SEMPARSE_TRAINER_HPP

// Conditional log-likelihood training of the latent hybrid-tree model:
//
//   L = sum_i [ log Z(n_i, m_i) - log Z(n_i) ] - l2 |Lambda|^2 - l2 |Theta|^2
//
// optimized by full-batch adaptive gradient ascent.

#include <cstdint>
#include <optional>
#include <vector>

#include "semparse/chart.hpp"
#include "semparse/corpus.hpp"
#include "semparse/embeddings.hpp"
#include "semparse/model.hpp"
#include "semparse/neural.hpp"

namespace semparse {

struct TrainConfig {
  std::size_t max_iterations = 150;
  double l2_lambda = 0.01;
  double learning_rate = 0.1;  // base AdaGrad step
  // Step multiplier after an accepted step (bold driver); rejected steps
  // halve it. 1 keeps plain AdaGrad with backtracking.
  double step_growth = 1.5;
  double max_step_scale = 1000.0;
  double tolerance = 1e-6;     // relative objective change that stops training
  std::uint64_t seed = 1;
  std::optional<int> nn_window;  // neural scorer off when empty
  NeuralShape nn_shape;
  GrammarMode grammar = GrammarMode::kObserved;
  std::size_t threads = 1;
  double init_scale = 0.0;  // Lambda starts uniform(-s, s); zero by default
  // Iterations during which the word-context features stay frozen, so early
  // alignments are driven by the words themselves.
  std::size_t warmup_iterations = 50;
  DecodeOptions decode;

  void validate() const;  // throws DataError
};

struct IterationRecord {
  std::size_t iteration = 0;
  double objective = 0.0;
  double grad_norm = 0.0;
  std::optional<double> dev_f1;
};

struct TrainReport {
  std::vector<IterationRecord> trace;  // one entry per accepted step
  ModelParams params;                  // selected model
  std::size_t selected_iteration = 0;  // 0 is the initial point
  std::size_t skipped = 0;             // instances with no hybrid tree
  double seconds = 0.0;
};

// Grammar, vocabulary and feature index from the training data; optional
// unit embeddings and neural scorer per config.
ModelParams build_model(const std::vector<Instance>& train, const TrainConfig& config,
                        const UnitEmbeddings* embeddings = nullptr);

struct ObjectiveValue {
  double objective = 0.0;
  std::vector<double> grad_lambda;  // aligned with params.weights
  std::vector<double> grad_theta;   // aligned with params.neural->values(); empty without neural part
  std::size_t skipped = 0;
};

double objective(const std::vector<Instance>& data, const ModelParams& params, double l2_lambda,
                 std::size_t threads = 1);
ObjectiveValue objective_and_gradient(const std::vector<Instance>& data, const ModelParams& params,
                                      double l2_lambda, std::size_t threads = 1);

// `params` must come from build_model. With a dev set the returned model is
// the iteration with the best dev F1 (earliest on ties), else the last one.
// Throws NumericError when the objective stops being finite.
TrainReport train(const std::vector<Instance>& data, ModelParams params, const TrainConfig& config,
                  const std::vector<Instance>* dev = nullptr);

struct RankScore {
  std::size_t rank = 0;
  double dev_f1 = 0.0;
};

struct RankTuning {
  std::size_t best_rank = 0;
  std::vector<RankScore> scores;  // candidates that fit the co-occurrence matrix
};

// 80/20 split of the standard training portion; embeddings from the
// auxiliary languages at each candidate rank; best dev F1, ties to the
// smaller rank. Candidates above the matrix rank bound are skipped.
RankTuning tune_rank(const Corpus& corpus, const std::string& language, const std::vector<std::size_t>& candidates,
                     const TrainConfig& config, CoocMode cooc_mode = CoocMode::kFrequency,
                     std::size_t train_size = kStandardTrainSize, std::size_t test_size = kStandardTestSize);

}  // namespace semparse

#endif
