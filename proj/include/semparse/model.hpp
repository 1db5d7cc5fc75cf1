#ifndef SEMPARSE_MODEL_HPP
#define SEMPARSE_MODEL_HPP

// Hybrid-tree model parameters: pattern inventory, feature keys, the
// compatibility grammar over semantic units, and the weight vector.

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "semparse/embeddings.hpp"
#include "semparse/logic.hpp"
#include "semparse/neural.hpp"

namespace semparse {

// ---------------------------------------------------------------------------
// Patterns

// W: one or more words attached to the node itself; X / Y: first / second
// child subtree.
enum class Slot : std::uint8_t { kW, kX, kY };

struct HybridPattern {
  std::vector<Slot> slots;

  std::size_t arity() const;
  std::string to_string() const;  // e.g. "WXW"
  auto operator<=>(const HybridPattern&) const = default;
};

// arity 0: W. arity 1: WX, XW, WXW. arity 2: both child orders with any
// subset of the three gaps holding a W (16 patterns).
std::vector<HybridPattern> enumerate_patterns(std::size_t arity);

// Every pattern of arity 0..2 in enumeration order; the position is the
// pattern id used by feature keys.
const std::vector<HybridPattern>& pattern_inventory();
int pattern_id(const HybridPattern& pattern);

// ---------------------------------------------------------------------------
// Features

enum class FeatureKind : std::uint8_t {
  kEmit,      // (unit, word)
  kEmitPrev,  // (unit, previous word or <s>)
  kEmitNext,  // (unit, next word or </s>)
  kPattern,   // (unit, pattern id)
  kTrans,     // (parent unit, child unit, child slot)
  kEmbWord,   // (word, dimension), real valued
  kEmbBias,   // (dimension), real valued
};

struct FeatureKey {
  FeatureKind kind = FeatureKind::kEmit;
  int a = 0;
  int b = 0;
  int c = 0;

  auto operator<=>(const FeatureKey&) const = default;
};

struct FeatureKeyHash {
  std::size_t operator()(const FeatureKey& k) const noexcept;
};

using FeatureVector = std::map<FeatureKey, double>;

class FeatureIndex {
 public:
  int find(const FeatureKey& key) const;
  int add(const FeatureKey& key);
  std::size_t size() const { return keys_.size(); }
  const FeatureKey& key(std::size_t id) const { return keys_[id]; }

 private:
  std::vector<FeatureKey> keys_;
  std::unordered_map<FeatureKey, int, FeatureKeyHash> ids_;
};

// Word ids 0 and 1 are the sentence boundary markers; unknown words map to
// kUnknownWord.
class Vocabulary {
 public:
  static constexpr int kBegin = 0;
  static constexpr int kEnd = 1;
  static constexpr int kUnknownWord = -1;

  Vocabulary();
  int find(const std::string& word) const;
  int add(const std::string& word);
  std::size_t size() const { return words_.size(); }
  const std::string& word(std::size_t id) const { return words_[id]; }
  std::vector<int> encode(const std::vector<std::string>& tokens) const;

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> ids_;
};

// ---------------------------------------------------------------------------
// Grammar

enum class GrammarMode {
  kObserved,  // parent/child pairs seen in training trees
  kTyped,     // any type-compatible pair over the training inventory
};

struct Grammar {
  std::vector<SemanticUnit> units;
  std::unordered_map<SemanticUnit, int, SemanticUnitHash> index;
  // children[u][slot]: allowed child unit ids, ascending
  std::vector<std::array<std::vector<int>, 2>> children;
  std::vector<int> roots;  // ascending

  int find(const SemanticUnit& unit) const;
  int add_unit(const SemanticUnit& unit);
  void allow_child(int parent, int slot, int child);
  void allow_root(int unit);
  bool allows_child(int parent, int slot, int child) const;
  bool allows_root(int unit) const;
  // Whether every unit, edge and the root of `tree` are in the grammar.
  bool derives(const MeaningTree& tree) const;

  static Grammar from_trees(const std::vector<MeaningTree>& trees, GrammarMode mode);
};

// ---------------------------------------------------------------------------
// Parameters

struct ModelParams {
  Grammar grammar;
  Vocabulary words;
  FeatureIndex features;
  std::vector<double> weights;  // aligned with features

  std::optional<UnitEmbeddings> embeddings;
  Matrix unit_vectors;  // grammar units x rank; zero rows for unseen units
  std::optional<NeuralParams> neural;

  double weight(const FeatureKey& key) const;
  std::size_t embedding_rank() const { return unit_vectors.cols(); }
  void set_embeddings(UnitEmbeddings emb);
};

// Features an association (word position, unit) emits, with their values.
// Shared by whole-tree extraction and the factored chart scores.
template <typename Fn>
void for_each_assoc_feature(const std::vector<int>& word_ids, std::size_t t, int unit, const ModelParams& params,
                            Fn&& fn) {
  const int w = word_ids[t];
  const int prev = t == 0 ? Vocabulary::kBegin : word_ids[t - 1];
  const int next = t + 1 == word_ids.size() ? Vocabulary::kEnd : word_ids[t + 1];
  fn(FeatureKey{FeatureKind::kEmit, unit, w, 0}, 1.0);
  fn(FeatureKey{FeatureKind::kEmitPrev, unit, prev, 0}, 1.0);
  fn(FeatureKey{FeatureKind::kEmitNext, unit, next, 0}, 1.0);
  const std::size_t d = params.embedding_rank();
  for (std::size_t j = 0; j < d; ++j) {
    const double e = params.unit_vectors(static_cast<std::size_t>(unit), j);
    fn(FeatureKey{FeatureKind::kEmbWord, w, static_cast<int>(j), 0}, e);
    fn(FeatureKey{FeatureKind::kEmbBias, static_cast<int>(j), 0, 0}, e);
  }
}

// Registers every feature that can fire on `sentences` under the grammar
// (all unit/word associations, all unit patterns, all grammar edges).
void register_features(ModelParams& params, const std::vector<std::vector<std::string>>& sentences);

std::string feature_to_string(const FeatureKey& key, const ModelParams& params);

// Versioned text dump; see README for the layout.
void save_model(const ModelParams& params, std::ostream& out);
void save_model(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_model(std::istream& in);
ModelParams load_model(const std::filesystem::path& path);

inline constexpr const char* kModelFormatVersion = "semparse-model 1";

}  // namespace semparse

#endif
