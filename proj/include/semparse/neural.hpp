#ifndef SEMPARSE_NEURAL_HPP
#define SEMPARSE_NEURAL_HPP

// Window-based neural scoring of word/unit associations:
//
//   g(t, u) = out_u . tanh(W [e(w_{t-J}); ...; e(w_{t+J})] + b) + c_u
//
// Positions outside the sentence read the shared padding vector. All
// parameters live in one flat vector so optimizers and finite-difference
// checks can treat them uniformly.

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "semparse/logic.hpp"
#include "semparse/matrix.hpp"

namespace semparse {

struct NeuralShape {
  int window = 0;             // J in {0, 1, 2}
  std::size_t word_dim = 50;  // k
  std::size_t hidden = 100;   // H
};

class NeuralParams {
 public:
  static constexpr std::size_t kPadRow = 0;
  static constexpr std::size_t kUnknownRow = 1;

  NeuralParams() = default;
  NeuralParams(const std::vector<std::string>& vocabulary, std::vector<SemanticUnit> units,
               NeuralShape shape);

  // uniform(-scale, scale) from a fixed seed.
  void init_uniform(std::uint64_t seed, double scale = 0.1);

  const NeuralShape& shape() const { return shape_; }
  std::size_t input_dim() const { return (2 * static_cast<std::size_t>(shape_.window) + 1) * shape_.word_dim; }
  std::size_t vocab_rows() const { return words_.size() + 2; }
  const std::vector<std::string>& vocabulary() const { return words_; }
  const std::vector<SemanticUnit>& units() const { return units_; }

  // -1 when the unit has no output row.
  int unit_row(const SemanticUnit& unit) const;
  std::vector<std::size_t> word_rows(const std::vector<std::string>& tokens) const;

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  // Offsets of the parameter blocks inside values().
  std::size_t word_offset() const { return 0; }
  std::size_t hidden_offset() const { return vocab_rows() * shape_.word_dim; }
  std::size_t hidden_bias_offset() const { return hidden_offset() + shape_.hidden * input_dim(); }
  std::size_t output_offset() const { return hidden_bias_offset() + shape_.hidden; }
  std::size_t output_bias_offset() const { return output_offset() + units_.size() * shape_.hidden; }

 private:
  NeuralShape shape_;
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> word_index_;
  std::vector<SemanticUnit> units_;
  std::unordered_map<SemanticUnit, std::size_t, SemanticUnitHash> unit_index_;
  std::vector<double> values_;
};

// Throws DataError for a unit without an output row.
double assoc_score(const std::vector<std::string>& tokens, std::size_t position, const SemanticUnit& unit,
                   const NeuralParams& params);

// Scores for every (position, unit row): |tokens| x |units|.
Matrix assoc_scores(const std::vector<std::string>& tokens, const NeuralParams& params);

// d/dTheta of sum_{t,u} weight(t,u) * g(t,u). `weights` is |tokens| x |units|;
// entries may be signed (the trainer passes constrained minus full
// expectations). Result has the layout of values().
std::vector<double> grad_theta(const std::vector<std::string>& tokens, const Matrix& weights,
                               const NeuralParams& params);

}  // namespace semparse

#endif
