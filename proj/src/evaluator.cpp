#include "semparse/evaluator.hpp"

#include <fstream>

#include "semparse/errors.hpp"
#include "semparse/parallel.hpp"

namespace semparse {

EvalResult evaluate(const std::vector<std::optional<MeaningTree>>& predictions,
                    const std::vector<MeaningTree>& golds) {
  if (predictions.size() != golds.size())
    throw DataError("prediction count " + std::to_string(predictions.size()) + " differs from gold count " +
                    std::to_string(golds.size()));
  EvalResult r;
  r.total = golds.size();
  for (std::size_t i = 0; i < golds.size(); ++i) {
    if (!predictions[i]) continue;
    ++r.parsed;
    if (trees_equal(*predictions[i], golds[i])) ++r.correct;
  }
  if (r.total) r.accuracy = r.recall = static_cast<double>(r.correct) / static_cast<double>(r.total);
  if (r.parsed) r.precision = static_cast<double>(r.correct) / static_cast<double>(r.parsed);
  if (r.precision + r.recall > 0) r.f1 = 2 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

std::vector<std::optional<MeaningTree>> predict(const ModelParams& params, const std::vector<Instance>& data,
                                                const DecodeOptions& options, std::size_t threads) {
  std::vector<std::optional<MeaningTree>> out(data.size());
  parallel_for(data.size(), threads, [&](std::size_t i) { out[i] = decode(data[i].tokens, params, options); });
  return out;
}

void write_predictions(const std::filesystem::path& path, const std::vector<Instance>& data,
                       const std::vector<std::optional<MeaningTree>>& predictions) {
  if (data.size() != predictions.size()) throw DataError("prediction count does not match instance count");
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "id\tgold\tprediction\tverdict\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& p = predictions[i];
    const char* verdict = !p ? "no-parse" : trees_equal(*p, data[i].tree) ? "correct" : "wrong";
    out << data[i].id << '\t' << serialize_mrl(data[i].tree) << '\t' << (p ? serialize_mrl(*p) : "-") << '\t'
        << verdict << '\n';
  }
}

}  // namespace semparse
