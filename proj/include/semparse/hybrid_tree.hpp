#ifndef SEMPARSE_HYBRID_TREE_HPP
#define SEMPARSE_HYBRID_TREE_HPP

// Explicit hybrid trees: a meaning tree whose nodes are interleaved with the
// words of the sentence. Used for whole-structure feature extraction and
// scoring; the chart never materializes these except for the Viterbi result.

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "semparse/logic.hpp"
#include "semparse/model.hpp"

namespace semparse {

struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive

  bool operator==(const TokenSpan&) const = default;
};

struct HybridTree {
  SemanticUnit unit;
  HybridPattern pattern;
  std::vector<TokenSpan> word_spans;  // one per W slot, in slot order
  std::vector<HybridTree> children;   // child index order (X, then Y)
};

// Interval tiled by the tree; throws DataError when slots do not tile a
// contiguous interval exactly once or the pattern does not fit the unit.
TokenSpan coverage(const HybridTree& tree);

MeaningTree project(const HybridTree& tree);

// (token position, unit) for every word, ordered by position.
std::vector<std::pair<std::size_t, SemanticUnit>> associations(const HybridTree& tree);

// Throws DataError unless the tree covers [0, tokens.size()) exactly.
FeatureVector extract_features(const std::vector<std::string>& tokens, const HybridTree& tree,
                               const ModelParams& params);

// Lambda . Phi(n, m, h), plus the neural score when present. Throws
// DataError when h does not project to m or does not cover the sentence.
double score(const std::vector<std::string>& tokens, const MeaningTree& m, const HybridTree& h,
             const ModelParams& params);

// Sum of the neural association scores along h.
double tree_score(const std::vector<std::string>& tokens, const HybridTree& h, const NeuralParams& params);

double dot(const FeatureVector& phi, const ModelParams& params);

}  // namespace semparse

#endif
