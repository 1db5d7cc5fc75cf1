#ifndef SEMPARSE_EVALUATOR_HPP
#define SEMPARSE_EVALUATOR_HPP

// Exact-match scoring of predicted meaning trees.

#include <filesystem>
#include <optional>
#include <vector>

#include "semparse/chart.hpp"
#include "semparse/corpus.hpp"
#include "semparse/logic.hpp"
#include "semparse/model.hpp"

namespace semparse {

struct EvalResult {
  std::size_t total = 0;
  std::size_t parsed = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;   // correct / total
  double precision = 0.0;  // correct / parsed
  double recall = 0.0;     // correct / total
  double f1 = 0.0;
};

// A missing prediction is a no-parse. Throws DataError on length mismatch.
EvalResult evaluate(const std::vector<std::optional<MeaningTree>>& predictions,
                    const std::vector<MeaningTree>& golds);

std::vector<std::optional<MeaningTree>> predict(const ModelParams& params, const std::vector<Instance>& data,
                                                const DecodeOptions& options = {}, std::size_t threads = 1);

// id, gold, prediction ("-" for no-parse), verdict (correct / wrong / no-parse).
void write_predictions(const std::filesystem::path& path, const std::vector<Instance>& data,
                       const std::vector<std::optional<MeaningTree>>& predictions);

}  // namespace semparse

#endif
