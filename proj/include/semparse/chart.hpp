#ifndef SEMPARSE_CHART_HPP
#define SEMPARSE_CHART_HPP

// Chart inference over hybrid trees.
//
// Every feature factors into
//   - association scores a(t, u) for word t attached to unit u (emission,
//     context words, embedding features, neural score),
//   - pattern scores per node and transition scores per parent/child edge,
// so sums and maxima over all hybrid trees decompose over items
//   I[s](i,j)    node symbol s spans [i,j)
//   P[s][v](i,j) the first slots of a pattern (trie prefix v) tile [i,j)
//   C[s][k](i,j) child slot k of s filled by any allowed child over [i,j)
// For the constrained chart the symbols are the nodes of one meaning tree;
// for the full chart they are the grammar units, and child slots range over
// every compatible unit. All quantities are kept in log space.

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semparse/hybrid_tree.hpp"
#include "semparse/logic.hpp"
#include "semparse/matrix.hpp"
#include "semparse/model.hpp"

namespace semparse {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Local score tables of one sentence under fixed parameters.
struct SentenceScores {
  std::vector<std::string> tokens;
  std::vector<int> word_ids;
  Matrix assoc;       // n x |units|
  Matrix assoc_cum;   // (n+1) x |units|, prefix sums over positions
};

SentenceScores score_sentence(const std::vector<std::string>& tokens, const ModelParams& params);

struct TransPosterior {
  int parent = 0;
  int child = 0;
  int slot = 0;
  double value = 0.0;
};

// Expected counts of the factored parts under P(h | n, m) or P(m, h | n).
struct Posteriors {
  double log_z = kNegInf;
  Matrix assoc;                  // n x |units|
  std::vector<double> patterns;  // |units| x |pattern_inventory()|
  std::vector<TransPosterior> trans;
};

double log_partition_constrained(const std::vector<std::string>& tokens, const MeaningTree& m,
                                 const ModelParams& params);
double log_partition_full(const std::vector<std::string>& tokens, const ModelParams& params);

// log_z is -inf (and every count zero) when the structure set is empty.
// Every unit of m must be in the model grammar.
Posteriors constrained_posteriors(const SentenceScores& scores, const MeaningTree& m, const ModelParams& params);
Posteriors full_posteriors(const SentenceScores& scores, const ModelParams& params);

FeatureVector to_feature_vector(const Posteriors& post, const SentenceScores& scores, const ModelParams& params);

// dense[f] += scale * E[phi_f] for every registered feature f.
void accumulate_features(const Posteriors& post, const SentenceScores& scores, const ModelParams& params,
                         double scale, std::span<double> dense);

struct Expectations {
  double log_z_constrained = kNegInf;
  double log_z_full = kNegInf;
  FeatureVector constrained;  // E_{P(h|n,m)}[Phi]
  FeatureVector full;         // E_{P(m',h'|n)}[Phi]
  Matrix assoc_constrained;   // expected association counts, for neural gradients
  Matrix assoc_full;
};

// Throws DataError when H(n, m) is empty.
Expectations expected_features(const std::vector<std::string>& tokens, const MeaningTree& m,
                               const ModelParams& params);

// Relative tolerance under which two derivation scores count as tied.
bool scores_tie(double a, double b);

struct DecodeOptions {
  // Largest meaning tree accepted; 0 means 2|n| - 1, which every hybrid tree
  // satisfies.
  std::size_t max_nodes = 0;
};

struct Derivation {
  HybridTree tree;
  double score = kNegInf;
};

// Highest-scoring (m, h) over the grammar; ties go to the lexicographically
// smallest serialization of m. Empty when no derivation exists.
std::optional<Derivation> viterbi(const SentenceScores& scores, const ModelParams& params,
                                  const DecodeOptions& options = {});
std::optional<MeaningTree> decode(const std::vector<std::string>& tokens, const ModelParams& params,
                                  const DecodeOptions& options = {});

}  // namespace semparse

#endif
