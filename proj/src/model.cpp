#include "semparse/model.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include "semparse/errors.hpp"

namespace semparse {

// ---------------------------------------------------------------------------
// Patterns

std::size_t HybridPattern::arity() const {
  return static_cast<std::size_t>(std::count_if(slots.begin(), slots.end(), [](Slot s) { return s != Slot::kW; }));
}

std::string HybridPattern::to_string() const {
  std::string s;
  for (Slot slot : slots) s += slot == Slot::kW ? 'W' : slot == Slot::kX ? 'X' : 'Y';
  return s;
}

std::vector<HybridPattern> enumerate_patterns(std::size_t arity) {
  using enum Slot;
  switch (arity) {
    case 0:
      return {{{kW}}};
    case 1:
      return {{{kW, kX}}, {{kX, kW}}, {{kW, kX, kW}}};
    case 2: {
      std::vector<HybridPattern> out;
      for (auto [first, second] : {std::pair{kX, kY}, std::pair{kY, kX}}) {
        for (int gaps = 0; gaps < 8; ++gaps) {
          HybridPattern p;
          if (gaps & 1) p.slots.push_back(kW);
          p.slots.push_back(first);
          if (gaps & 2) p.slots.push_back(kW);
          p.slots.push_back(second);
          if (gaps & 4) p.slots.push_back(kW);
          out.push_back(std::move(p));
        }
      }
      return out;
    }
    default:
      throw DataError("no patterns for arity " + std::to_string(arity));
  }
}

const std::vector<HybridPattern>& pattern_inventory() {
  static const std::vector<HybridPattern> all = [] {
    std::vector<HybridPattern> v;
    for (std::size_t a = 0; a <= 2; ++a)
      for (auto& p : enumerate_patterns(a)) v.push_back(std::move(p));
    return v;
  }();
  return all;
}

int pattern_id(const HybridPattern& pattern) {
  const auto& all = pattern_inventory();
  auto it = std::find(all.begin(), all.end(), pattern);
  if (it == all.end()) throw DataError("unknown pattern " + pattern.to_string());
  return static_cast<int>(it - all.begin());
}

// ---------------------------------------------------------------------------
// Features

std::size_t FeatureKeyHash::operator()(const FeatureKey& k) const noexcept {
  std::uint64_t h = static_cast<std::uint64_t>(k.kind);
  h = h * 1000003ULL ^ static_cast<std::uint32_t>(k.a);
  h = h * 1000003ULL ^ static_cast<std::uint32_t>(k.b);
  h = h * 1000003ULL ^ static_cast<std::uint32_t>(k.c);
  return static_cast<std::size_t>(h ^ (h >> 29));
}

int FeatureIndex::find(const FeatureKey& key) const {
  auto it = ids_.find(key);
  return it == ids_.end() ? -1 : it->second;
}

int FeatureIndex::add(const FeatureKey& key) {
  auto [it, fresh] = ids_.emplace(key, static_cast<int>(keys_.size()));
  if (fresh) keys_.push_back(key);
  return it->second;
}

Vocabulary::Vocabulary() {
  add("<s>");
  add("</s>");
}

int Vocabulary::find(const std::string& word) const {
  auto it = ids_.find(word);
  return it == ids_.end() ? kUnknownWord : it->second;
}

int Vocabulary::add(const std::string& word) {
  auto [it, fresh] = ids_.emplace(word, static_cast<int>(words_.size()));
  if (fresh) words_.push_back(word);
  return it->second;
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(find(t));
  return ids;
}

// ---------------------------------------------------------------------------
// Grammar

int Grammar::find(const SemanticUnit& unit) const {
  auto it = index.find(unit);
  return it == index.end() ? -1 : it->second;
}

int Grammar::add_unit(const SemanticUnit& unit) {
  auto [it, fresh] = index.emplace(unit, static_cast<int>(units.size()));
  if (fresh) {
    units.push_back(unit);
    children.emplace_back();
  }
  return it->second;
}

void Grammar::allow_child(int parent, int slot, int child) {
  auto& v = children[static_cast<std::size_t>(parent)][static_cast<std::size_t>(slot)];
  auto it = std::lower_bound(v.begin(), v.end(), child);
  if (it == v.end() || *it != child) v.insert(it, child);
}

void Grammar::allow_root(int unit) {
  auto it = std::lower_bound(roots.begin(), roots.end(), unit);
  if (it == roots.end() || *it != unit) roots.insert(it, unit);
}

bool Grammar::allows_child(int parent, int slot, int child) const {
  const auto& v = children[static_cast<std::size_t>(parent)][static_cast<std::size_t>(slot)];
  return std::binary_search(v.begin(), v.end(), child);
}

bool Grammar::allows_root(int unit) const { return std::binary_search(roots.begin(), roots.end(), unit); }

namespace {

bool derives_below(const Grammar& g, const MeaningTree& t, int id) {
  for (std::size_t k = 0; k < t.children.size(); ++k) {
    const int c = g.find(t.children[k].unit);
    if (c < 0 || !g.allows_child(id, static_cast<int>(k), c) || !derives_below(g, t.children[k], c)) return false;
  }
  return true;
}

void observe(Grammar& g, const MeaningTree& t, int id) {
  for (std::size_t k = 0; k < t.children.size(); ++k) {
    const int c = g.add_unit(t.children[k].unit);
    g.allow_child(id, static_cast<int>(k), c);
    observe(g, t.children[k], c);
  }
}

}  // namespace

bool Grammar::derives(const MeaningTree& tree) const {
  const int r = find(tree.unit);
  return r >= 0 && allows_root(r) && derives_below(*this, tree, r);
}

Grammar Grammar::from_trees(const std::vector<MeaningTree>& trees, GrammarMode mode) {
  Grammar g;
  for (const auto& t : trees) {
    const int r = g.add_unit(t.unit);
    g.allow_root(r);
    observe(g, t, r);
  }
  if (mode == GrammarMode::kTyped) {
    std::set<SemanticType> root_types;
    for (int r : g.roots) root_types.insert(g.units[static_cast<std::size_t>(r)].return_type);
    for (std::size_t p = 0; p < g.units.size(); ++p) {
      const auto& pu = g.units[p];
      for (std::size_t c = 0; c < g.units.size(); ++c) {
        for (std::size_t k = 0; k < pu.arity(); ++k)
          if (g.units[c].return_type == pu.arg_types[k])
            g.allow_child(static_cast<int>(p), static_cast<int>(k), static_cast<int>(c));
      }
      if (root_types.count(pu.return_type)) g.allow_root(static_cast<int>(p));
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Parameters

double ModelParams::weight(const FeatureKey& key) const {
  const int id = features.find(key);
  return id < 0 ? 0.0 : weights[static_cast<std::size_t>(id)];
}

void ModelParams::set_embeddings(UnitEmbeddings emb) {
  unit_vectors = Matrix(grammar.units.size(), emb.rank());
  for (std::size_t u = 0; u < grammar.units.size(); ++u) {
    const auto v = lookup(emb, grammar.units[u]);
    std::copy(v.begin(), v.end(), unit_vectors.row(u).begin());
  }
  embeddings = std::move(emb);
}

void register_features(ModelParams& params, const std::vector<std::vector<std::string>>& sentences) {
  for (const auto& s : sentences)
    for (const auto& w : s) params.words.add(w);
  const int U = static_cast<int>(params.grammar.units.size());
  for (int u = 0; u < U; ++u) {
    const auto arity = params.grammar.units[static_cast<std::size_t>(u)].arity();
    for (const auto& p : enumerate_patterns(arity))
      params.features.add(FeatureKey{FeatureKind::kPattern, u, pattern_id(p), 0});
    for (int k = 0; k < 2; ++k)
      for (int c : params.grammar.children[static_cast<std::size_t>(u)][static_cast<std::size_t>(k)])
        params.features.add(FeatureKey{FeatureKind::kTrans, u, c, k});
  }
  for (const auto& s : sentences) {
    const auto ids = params.words.encode(s);
    for (std::size_t t = 0; t < ids.size(); ++t)
      for (int u = 0; u < U; ++u)
        for_each_assoc_feature(ids, t, u, params, [&](const FeatureKey& k, double) { params.features.add(k); });
  }
  params.weights.resize(params.features.size(), 0.0);
}

namespace {

const char* kind_name(FeatureKind k) {
  switch (k) {
    case FeatureKind::kEmit: return "EMIT";
    case FeatureKind::kEmitPrev: return "EMIT-PREV";
    case FeatureKind::kEmitNext: return "EMIT-NEXT";
    case FeatureKind::kPattern: return "PATTERN";
    case FeatureKind::kTrans: return "TRANS";
    case FeatureKind::kEmbWord: return "EMBWORD";
    case FeatureKind::kEmbBias: return "EMBBIAS";
  }
  return "?";
}

FeatureKind kind_from_name(const std::string& s) {
  for (auto k : {FeatureKind::kEmit, FeatureKind::kEmitPrev, FeatureKind::kEmitNext, FeatureKind::kPattern,
                 FeatureKind::kTrans, FeatureKind::kEmbWord, FeatureKind::kEmbBias})
    if (s == kind_name(k)) return k;
  throw DataError("unknown feature kind '" + s + "'");
}

std::string expect_line(std::istream& in, const char* what) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(std::string("model file truncated before ") + what);
  return line;
}

std::size_t expect_count(std::istream& in, const std::string& keyword) {
  std::istringstream ss(expect_line(in, keyword.c_str()));
  std::string kw;
  std::size_t n = 0;
  if (!(ss >> kw >> n) || kw != keyword) throw DataError("model file: expected '" + keyword + " <count>'");
  return n;
}

}  // namespace

std::string feature_to_string(const FeatureKey& key, const ModelParams& params) {
  auto unit = [&](int u) {
    return u >= 0 && static_cast<std::size_t>(u) < params.grammar.units.size()
               ? unit_to_string(params.grammar.units[static_cast<std::size_t>(u)])
               : std::string("?");
  };
  auto word = [&](int w) {
    return w >= 0 && static_cast<std::size_t>(w) < params.words.size() ? params.words.word(static_cast<std::size_t>(w))
                                                                       : std::string("<unk>");
  };
  std::string out = std::string(kind_name(key.kind)) + "(";
  switch (key.kind) {
    case FeatureKind::kEmit:
    case FeatureKind::kEmitPrev:
    case FeatureKind::kEmitNext:
      return out + unit(key.a) + ", " + word(key.b) + ")";
    case FeatureKind::kPattern:
      return out + unit(key.a) + ", " + pattern_inventory()[static_cast<std::size_t>(key.b)].to_string() + ")";
    case FeatureKind::kTrans:
      return out + unit(key.a) + ", " + unit(key.b) + ", " + (key.c == 0 ? "X" : "Y") + ")";
    case FeatureKind::kEmbWord:
      return out + word(key.a) + ", " + std::to_string(key.b) + ")";
    case FeatureKind::kEmbBias:
      return out + std::to_string(key.a) + ")";
  }
  return out + ")";
}

void save_model(const ModelParams& params, std::ostream& out) {
  out << kModelFormatVersion << '\n' << std::setprecision(std::numeric_limits<double>::max_digits10);
  const auto& g = params.grammar;
  out << "units " << g.units.size() << '\n';
  for (const auto& u : g.units) out << unit_to_string(u) << '\n';
  out << "roots " << g.roots.size() << '\n';
  for (int r : g.roots) out << r << '\n';
  std::size_t edges = 0;
  for (const auto& c : g.children) edges += c[0].size() + c[1].size();
  out << "edges " << edges << '\n';
  for (std::size_t p = 0; p < g.children.size(); ++p)
    for (int k = 0; k < 2; ++k)
      for (int c : g.children[p][static_cast<std::size_t>(k)]) out << p << ' ' << k << ' ' << c << '\n';
  out << "words " << params.words.size() - 2 << '\n';
  for (std::size_t w = 2; w < params.words.size(); ++w) out << params.words.word(w) << '\n';
  out << "features " << params.features.size() << '\n';
  for (std::size_t i = 0; i < params.features.size(); ++i) {
    const auto& k = params.features.key(i);
    out << kind_name(k.kind) << ' ' << k.a << ' ' << k.b << ' ' << k.c << ' ' << params.weights[i] << '\n';
  }
  if (params.embeddings) {
    const auto& e = *params.embeddings;
    out << "embeddings " << e.units.size() << ' ' << e.rank() << '\n';
    for (std::size_t i = 0; i < e.units.size(); ++i) {
      out << unit_to_string(e.units[i]);
      for (double v : e.vectors.row(i)) out << '\t' << v;
      out << '\n';
    }
  } else {
    out << "embeddings none\n";
  }
  if (params.neural) {
    const auto& n = *params.neural;
    out << "neural " << n.shape().window << ' ' << n.shape().word_dim << ' ' << n.shape().hidden << '\n';
    out << "vocabulary " << n.vocabulary().size() << '\n';
    for (const auto& w : n.vocabulary()) out << w << '\n';
    out << "outputs " << n.units().size() << '\n';
    for (const auto& u : n.units()) out << unit_to_string(u) << '\n';
    out << "values " << n.values().size() << '\n';
    for (double v : n.values()) out << v << '\n';
  } else {
    out << "neural none\n";
  }
  out << "end\n";
}

void save_model(const ModelParams& params, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write model " + path.string());
  save_model(params, out);
  if (!out) throw DataError("write failed: " + path.string());
}

ModelParams load_model(std::istream& in) {
  ModelParams p;
  if (expect_line(in, "header") != kModelFormatVersion)
    throw DataError("model version mismatch: expected '" + std::string(kModelFormatVersion) + "'");
  const std::size_t U = expect_count(in, "units");
  for (std::size_t i = 0; i < U; ++i) p.grammar.add_unit(parse_unit(expect_line(in, "unit")));
  const std::size_t R = expect_count(in, "roots");
  for (std::size_t i = 0; i < R; ++i) p.grammar.allow_root(std::stoi(expect_line(in, "root")));
  const std::size_t E = expect_count(in, "edges");
  for (std::size_t i = 0; i < E; ++i) {
    std::istringstream ss(expect_line(in, "edge"));
    int a, k, c;
    if (!(ss >> a >> k >> c) || a < 0 || c < 0 || static_cast<std::size_t>(a) >= U ||
        static_cast<std::size_t>(c) >= U || k < 0 || k > 1)
      throw DataError("model file: bad edge");
    p.grammar.allow_child(a, k, c);
  }
  const std::size_t W = expect_count(in, "words");
  for (std::size_t i = 0; i < W; ++i) p.words.add(expect_line(in, "word"));
  const std::size_t F = expect_count(in, "features");
  p.weights.reserve(F);
  for (std::size_t i = 0; i < F; ++i) {
    std::istringstream ss(expect_line(in, "feature"));
    std::string kind;
    FeatureKey k;
    double w;
    if (!(ss >> kind >> k.a >> k.b >> k.c >> w)) throw DataError("model file: bad feature line");
    k.kind = kind_from_name(kind);
    p.features.add(k);
    p.weights.push_back(w);
  }
  {
    std::istringstream ss(expect_line(in, "embeddings"));
    std::string kw, rows;
    ss >> kw >> rows;
    if (kw != "embeddings") throw DataError("model file: expected embeddings section");
    if (rows != "none") {
      std::size_t n = std::stoul(rows), d = 0;
      ss >> d;
      std::vector<SemanticUnit> units;
      Matrix vecs(n, d);
      for (std::size_t i = 0; i < n; ++i) {
        std::istringstream ls(expect_line(in, "embedding row"));
        std::string field;
        std::getline(ls, field, '\t');
        units.push_back(parse_unit(field));
        for (std::size_t j = 0; j < d; ++j) {
          if (!std::getline(ls, field, '\t')) throw DataError("model file: short embedding row");
          vecs(i, j) = std::stod(field);
        }
      }
      p.set_embeddings(make_embeddings(std::move(units), std::move(vecs)));
    }
  }
  {
    std::istringstream ss(expect_line(in, "neural"));
    std::string kw, window;
    ss >> kw >> window;
    if (kw != "neural") throw DataError("model file: expected neural section");
    if (window != "none") {
      NeuralShape shape;
      shape.window = std::stoi(window);
      ss >> shape.word_dim >> shape.hidden;
      const std::size_t V = expect_count(in, "vocabulary");
      std::vector<std::string> vocab;
      for (std::size_t i = 0; i < V; ++i) vocab.push_back(expect_line(in, "vocabulary word"));
      const std::size_t O = expect_count(in, "outputs");
      std::vector<SemanticUnit> units;
      for (std::size_t i = 0; i < O; ++i) units.push_back(parse_unit(expect_line(in, "output unit")));
      NeuralParams n(vocab, std::move(units), shape);
      const std::size_t N = expect_count(in, "values");
      if (N != n.values().size()) throw DataError("model file: neural parameter count mismatch");
      for (std::size_t i = 0; i < N; ++i) n.values()[i] = std::stod(expect_line(in, "neural value"));
      p.neural = std::move(n);
    }
  }
  if (expect_line(in, "end") != "end") throw DataError("model file: missing end marker");
  return p;
}

ModelParams load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model " + path.string());
  return load_model(in);
}

}  // namespace semparse
