#include "semparse/hybrid_tree.hpp"

#include <algorithm>

#include "semparse/errors.hpp"

namespace semparse {

namespace {

TokenSpan tile(const HybridTree& h) {
  if (h.pattern.arity() != h.unit.arity() || h.children.size() != h.unit.arity())
    throw DataError("pattern " + h.pattern.to_string() + " does not fit " + unit_to_string(h.unit));
  const auto ws = static_cast<std::size_t>(std::count(h.pattern.slots.begin(), h.pattern.slots.end(), Slot::kW));
  if (ws != h.word_spans.size()) throw DataError("word span count does not match pattern");
  std::size_t w = 0;
  bool first = true;
  TokenSpan cover;
  for (Slot s : h.pattern.slots) {
    TokenSpan part;
    if (s == Slot::kW) {
      part = h.word_spans[w++];
      if (part.end <= part.begin) throw DataError("empty word span");
    } else {
      part = tile(h.children[s == Slot::kX ? 0 : 1]);
    }
    if (first) {
      cover = part;
      first = false;
    } else {
      if (part.begin != cover.end) throw DataError("hybrid tree slots are not contiguous");
      cover.end = part.end;
    }
  }
  return cover;
}

void collect_assoc(const HybridTree& h, std::vector<std::pair<std::size_t, SemanticUnit>>& out) {
  for (const auto& span : h.word_spans)
    for (std::size_t t = span.begin; t < span.end; ++t) out.emplace_back(t, h.unit);
  for (const auto& c : h.children) collect_assoc(c, out);
}

int unit_id(const ModelParams& params, const SemanticUnit& u) {
  const int id = params.grammar.find(u);
  if (id < 0) throw DataError("unit not in model inventory: " + unit_to_string(u));
  return id;
}

void node_features(const HybridTree& h, const ModelParams& params, FeatureVector& phi) {
  const int u = unit_id(params, h.unit);
  phi[FeatureKey{FeatureKind::kPattern, u, pattern_id(h.pattern), 0}] += 1.0;
  for (std::size_t k = 0; k < h.children.size(); ++k) {
    const int c = unit_id(params, h.children[k].unit);
    phi[FeatureKey{FeatureKind::kTrans, u, c, static_cast<int>(k)}] += 1.0;
    node_features(h.children[k], params, phi);
  }
}

}  // namespace

TokenSpan coverage(const HybridTree& tree) { return tile(tree); }

MeaningTree project(const HybridTree& tree) {
  MeaningTree m{tree.unit, {}};
  for (const auto& c : tree.children) m.children.push_back(project(c));
  return m;
}

std::vector<std::pair<std::size_t, SemanticUnit>> associations(const HybridTree& tree) {
  std::vector<std::pair<std::size_t, SemanticUnit>> out;
  collect_assoc(tree, out);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

FeatureVector extract_features(const std::vector<std::string>& tokens, const HybridTree& tree,
                               const ModelParams& params) {
  const TokenSpan cover = coverage(tree);
  if (cover.begin != 0 || cover.end != tokens.size())
    throw DataError("hybrid tree does not cover the sentence");
  FeatureVector phi;
  const auto ids = params.words.encode(tokens);
  for (const auto& [t, unit] : associations(tree)) {
    for_each_assoc_feature(ids, t, unit_id(params, unit), params,
                           [&](const FeatureKey& k, double v) { phi[k] += v; });
  }
  node_features(tree, params, phi);
  return phi;
}

double dot(const FeatureVector& phi, const ModelParams& params) {
  double s = 0.0;
  for (const auto& [k, v] : phi) s += v * params.weight(k);
  return s;
}

double tree_score(const std::vector<std::string>& tokens, const HybridTree& h, const NeuralParams& params) {
  const TokenSpan cover = coverage(h);
  if (cover.begin != 0 || cover.end != tokens.size())
    throw DataError("hybrid tree does not cover the sentence");
  double s = 0.0;
  for (const auto& [t, unit] : associations(h)) s += assoc_score(tokens, t, unit, params);
  return s;
}

double score(const std::vector<std::string>& tokens, const MeaningTree& m, const HybridTree& h,
             const ModelParams& params) {
  if (!(project(h) == m)) throw DataError("hybrid tree does not project to the meaning tree");
  double s = dot(extract_features(tokens, h, params), params);
  if (params.neural) s += tree_score(tokens, h, *params.neural);
  return s;
}

}  // namespace semparse
