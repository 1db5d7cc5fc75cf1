#include "semparse/chart.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "semparse/errors.hpp"

namespace semparse {

namespace {

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

// Prefix trie over the slot sequences of one arity. Node 0 is the empty
// prefix; a node whose sequence is a whole pattern carries its id.
struct TrieNode {
  int parent = -1;
  Slot slot = Slot::kW;
  int depth = 0;
  int pattern = -1;
};

struct PatternTrie {
  std::vector<TrieNode> nodes;
  std::array<int, 3> single{-1, -1, -1};  // depth-1 node per slot
  std::vector<int> complete;              // nodes carrying a pattern
};

const PatternTrie& pattern_trie(std::size_t arity) {
  static const std::array<PatternTrie, 3> tries = [] {
    std::array<PatternTrie, 3> out;
    for (std::size_t a = 0; a < 3; ++a) {
      PatternTrie& t = out[a];
      t.nodes.push_back(TrieNode{});
      for (const auto& p : enumerate_patterns(a)) {
        int cur = 0;
        for (Slot s : p.slots) {
          int next = -1;
          for (std::size_t v = 1; v < t.nodes.size(); ++v)
            if (t.nodes[v].parent == cur && t.nodes[v].slot == s) next = static_cast<int>(v);
          if (next < 0) {
            next = static_cast<int>(t.nodes.size());
            t.nodes.push_back(TrieNode{cur, s, t.nodes[static_cast<std::size_t>(cur)].depth + 1, -1});
            if (cur == 0) t.single[static_cast<std::size_t>(s)] = next;
          }
          cur = next;
        }
        t.nodes[static_cast<std::size_t>(cur)].pattern = pattern_id(p);
        t.complete.push_back(cur);
      }
    }
    return out;
  }();
  return tries[arity];
}

int slot_child(Slot s) { return s == Slot::kX ? 0 : 1; }

struct Alt {
  int child = 0;
  double trans = 0.0;
};

struct ChartSymbol {
  int unit = 0;
  std::size_t arity = 0;
  std::array<std::vector<Alt>, 2> alts;
  std::vector<double> pattern_score;  // per trie node; meaningful where complete
};

struct ChartGrammar {
  std::vector<ChartSymbol> symbols;
  std::vector<int> roots;
};

ChartSymbol make_symbol(int unit, const ModelParams& params) {
  ChartSymbol s;
  s.unit = unit;
  s.arity = params.grammar.units[static_cast<std::size_t>(unit)].arity();
  const auto& trie = pattern_trie(s.arity);
  s.pattern_score.assign(trie.nodes.size(), 0.0);
  for (int v : trie.complete)
    s.pattern_score[static_cast<std::size_t>(v)] =
        params.weight(FeatureKey{FeatureKind::kPattern, unit, trie.nodes[static_cast<std::size_t>(v)].pattern, 0});
  return s;
}

int add_tree_symbols(const MeaningTree& m, const ModelParams& params, ChartGrammar& g) {
  const int unit = params.grammar.find(m.unit);
  if (unit < 0) throw DataError("unit not in model inventory: " + unit_to_string(m.unit));
  const int self = static_cast<int>(g.symbols.size());
  g.symbols.push_back(make_symbol(unit, params));
  for (std::size_t k = 0; k < m.children.size(); ++k) {
    const int child = add_tree_symbols(m.children[k], params, g);
    const int child_unit = g.symbols[static_cast<std::size_t>(child)].unit;
    const double tr = params.weight(FeatureKey{FeatureKind::kTrans, unit, child_unit, static_cast<int>(k)});
    g.symbols[static_cast<std::size_t>(self)].alts[k].push_back(Alt{child, tr});
  }
  return self;
}

ChartGrammar constrained_grammar(const MeaningTree& m, const ModelParams& params) {
  ChartGrammar g;
  g.roots.push_back(add_tree_symbols(m, params, g));
  return g;
}

ChartGrammar full_grammar(const ModelParams& params) {
  ChartGrammar g;
  const auto& gr = params.grammar;
  for (std::size_t u = 0; u < gr.units.size(); ++u) {
    ChartSymbol s = make_symbol(static_cast<int>(u), params);
    for (std::size_t k = 0; k < s.arity; ++k)
      for (int c : gr.children[u][k])
        s.alts[k].push_back(
            Alt{c, params.weight(FeatureKey{FeatureKind::kTrans, static_cast<int>(u), c, static_cast<int>(k)})});
    g.symbols.push_back(std::move(s));
  }
  g.roots = gr.roots;
  return g;
}

// Shared chart geometry.
class ChartBase {
 protected:
  ChartBase(const SentenceScores& sc, const ChartGrammar& g)
      : sc_(sc), g_(g), n_(sc.tokens.size()), width_(n_ + 1), cells_(width_ * width_) {}

  std::size_t cell(std::size_t i, std::size_t j) const { return i * width_ + j; }
  double word_score(int unit, std::size_t i, std::size_t j) const {
    const auto u = static_cast<std::size_t>(unit);
    return sc_.assoc_cum(j, u) - sc_.assoc_cum(i, u);
  }
  const ChartSymbol& sym(std::size_t s) const { return g_.symbols[s]; }

  const SentenceScores& sc_;
  const ChartGrammar& g_;
  std::size_t n_, width_, cells_;
};

class InsideOutside : ChartBase {
 public:
  InsideOutside(const SentenceScores& sc, const ChartGrammar& g) : ChartBase(sc, g) {
    const std::size_t S = g.symbols.size();
    P_.resize(S);
    I_.assign(S, std::vector<double>(cells_, kNegInf));
    C_.resize(S);
    for (std::size_t s = 0; s < S; ++s) {
      P_[s].assign(pattern_trie(sym(s).arity).nodes.size() * cells_, kNegInf);
      for (std::size_t k = 0; k < sym(s).arity; ++k) C_[s][k].assign(cells_, kNegInf);
    }
  }

  double inside() {
    const std::size_t S = g_.symbols.size();
    for (std::size_t len = 1; len <= n_; ++len) {
      for (std::size_t i = 0; i + len <= n_; ++i) {
        const std::size_t j = i + len;
        for (std::size_t s = 0; s < S; ++s) {
          const auto& trie = pattern_trie(sym(s).arity);
          for (std::size_t v = 1; v < trie.nodes.size(); ++v) {
            const TrieNode& node = trie.nodes[v];
            if (node.depth == 1) {
              if (node.slot == Slot::kW) P(s, v, i, j) = word_score(sym(s).unit, i, j);
              continue;
            }
            double acc = kNegInf;
            for (std::size_t q = i + 1; q < j; ++q) {
              const double a = P(s, static_cast<std::size_t>(node.parent), i, q);
              if (a == kNegInf) continue;
              const double b = slot_score(s, node.slot, q, j);
              if (b == kNegInf) continue;
              acc = log_add(acc, a + b);
            }
            P(s, v, i, j) = acc;
          }
        }
        for (std::size_t s = 0; s < S; ++s) {
          double acc = kNegInf;
          for (int v : pattern_trie(sym(s).arity).complete) {
            const double a = P(s, static_cast<std::size_t>(v), i, j);
            if (a != kNegInf) acc = log_add(acc, a + sym(s).pattern_score[static_cast<std::size_t>(v)]);
          }
          I_[s][cell(i, j)] = acc;
        }
        for (std::size_t s = 0; s < S; ++s) {
          for (std::size_t k = 0; k < sym(s).arity; ++k) {
            double acc = kNegInf;
            for (const Alt& alt : sym(s).alts[k]) {
              const double a = I_[static_cast<std::size_t>(alt.child)][cell(i, j)];
              if (a != kNegInf) acc = log_add(acc, a + alt.trans);
            }
            C_[s][k][cell(i, j)] = acc;
            P(s, static_cast<std::size_t>(pattern_trie(sym(s).arity).single[k == 0 ? 1 : 2]), i, j) = acc;
          }
        }
      }
    }
    log_z_ = kNegInf;
    for (int r : g_.roots) log_z_ = log_add(log_z_, I_[static_cast<std::size_t>(r)][cell(0, n_)]);
    return log_z_;
  }

  // Requires inside() first.
  Posteriors outside(std::size_t num_units) {
    Posteriors post;
    post.log_z = log_z_;
    post.assoc = Matrix(n_, num_units);
    post.patterns.assign(num_units * pattern_inventory().size(), 0.0);
    if (log_z_ == kNegInf) return post;

    const std::size_t S = g_.symbols.size();
    std::vector<std::vector<double>> OP(S), OI(S, std::vector<double>(cells_, kNegInf));
    std::vector<std::array<std::vector<double>, 2>> OC(S);
    for (std::size_t s = 0; s < S; ++s) {
      OP[s].assign(P_[s].size(), kNegInf);
      for (std::size_t k = 0; k < sym(s).arity; ++k) OC[s][k].assign(cells_, kNegInf);
    }
    for (int r : g_.roots) {
      auto& o = OI[static_cast<std::size_t>(r)][cell(0, n_)];
      o = log_add(o, 0.0);
    }
    // word-span posteriors per unit, turned into per-token counts at the end
    Matrix span_post(num_units, cells_);
    std::vector<std::size_t> trans_slot;  // first TransPosterior index per (symbol, slot)
    const double Z = log_z_;

    for (std::size_t len = n_; len >= 1; --len) {
      for (std::size_t i = 0; i + len <= n_; ++i) {
        const std::size_t j = i + len;
        const std::size_t ij = cell(i, j);
        for (std::size_t s = 0; s < S; ++s) {
          const auto& trie = pattern_trie(sym(s).arity);
          for (std::size_t k = 0; k < sym(s).arity; ++k) {
            const auto single = static_cast<std::size_t>(trie.single[k == 0 ? 1 : 2]);
            OC[s][k][ij] = log_add(OC[s][k][ij], OP[s][single * cells_ + ij]);
          }
        }
        for (std::size_t s = 0; s < S; ++s) {
          for (std::size_t k = 0; k < sym(s).arity; ++k) {
            const double o = OC[s][k][ij];
            if (o == kNegInf) continue;
            for (const Alt& alt : sym(s).alts[k]) {
              const auto c = static_cast<std::size_t>(alt.child);
              const double in = I_[c][ij];
              if (in == kNegInf) continue;
              const double val = o + alt.trans;
              OI[c][ij] = log_add(OI[c][ij], val);
              post.trans.push_back(TransPosterior{sym(s).unit, sym(c).unit, static_cast<int>(k),
                                                  std::exp(val + in - Z)});
            }
          }
        }
        for (std::size_t s = 0; s < S; ++s) {
          const double o = OI[s][ij];
          if (o == kNegInf) continue;
          const auto& trie = pattern_trie(sym(s).arity);
          for (int vi : trie.complete) {
            const auto v = static_cast<std::size_t>(vi);
            const double in = P(s, v, i, j);
            if (in == kNegInf) continue;
            const double val = o + sym(s).pattern_score[v];
            OP[s][v * cells_ + ij] = log_add(OP[s][v * cells_ + ij], val);
            post.patterns[static_cast<std::size_t>(sym(s).unit) * pattern_inventory().size() +
                          static_cast<std::size_t>(trie.nodes[v].pattern)] += std::exp(val + in - Z);
          }
        }
        for (std::size_t s = 0; s < S; ++s) {
          const auto& trie = pattern_trie(sym(s).arity);
          const int unit = sym(s).unit;
          for (std::size_t v = 1; v < trie.nodes.size(); ++v) {
            const TrieNode& node = trie.nodes[v];
            if (node.depth == 1 && node.slot != Slot::kW) continue;
            const double o = OP[s][v * cells_ + ij];
            if (o == kNegInf) continue;
            if (node.depth == 1) {
              span_post(static_cast<std::size_t>(unit), ij) += std::exp(o + P(s, v, i, j) - Z);
              continue;
            }
            const auto parent = static_cast<std::size_t>(node.parent);
            for (std::size_t q = i + 1; q < j; ++q) {
              const double a = P(s, parent, i, q);
              if (a == kNegInf) continue;
              if (node.slot == Slot::kW) {
                const double w = word_score(unit, q, j);
                OP[s][parent * cells_ + cell(i, q)] = log_add(OP[s][parent * cells_ + cell(i, q)], o + w);
                span_post(static_cast<std::size_t>(unit), cell(q, j)) += std::exp(o + a + w - Z);
              } else {
                const auto k = static_cast<std::size_t>(slot_child(node.slot));
                const double c = C_[s][k][cell(q, j)];
                if (c == kNegInf) continue;
                OP[s][parent * cells_ + cell(i, q)] = log_add(OP[s][parent * cells_ + cell(i, q)], o + c);
                OC[s][k][cell(q, j)] = log_add(OC[s][k][cell(q, j)], o + a);
              }
            }
          }
        }
      }
    }

    std::vector<double> diff(n_ + 1);
    for (std::size_t u = 0; u < num_units; ++u) {
      std::fill(diff.begin(), diff.end(), 0.0);
      bool any = false;
      for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = i + 1; j <= n_; ++j) {
          const double p = span_post(u, cell(i, j));
          if (p == 0.0) continue;
          any = true;
          diff[i] += p;
          diff[j] -= p;
        }
      if (!any) continue;
      double run = 0.0;
      for (std::size_t t = 0; t < n_; ++t) {
        run += diff[t];
        post.assoc(t, u) = run;
      }
    }
    return post;
  }

 private:
  double& P(std::size_t s, std::size_t v, std::size_t i, std::size_t j) { return P_[s][v * cells_ + cell(i, j)]; }

  double slot_score(std::size_t s, Slot slot, std::size_t q, std::size_t j) const {
    if (slot == Slot::kW) return word_score(sym(s).unit, q, j);
    return C_[s][static_cast<std::size_t>(slot_child(slot))][cell(q, j)];
  }

  std::vector<std::vector<double>> P_;
  std::vector<std::vector<double>> I_;
  std::vector<std::array<std::vector<double>, 2>> C_;
  double log_z_ = kNegInf;
};

// ---------------------------------------------------------------------------
// Viterbi with serialization-based tie breaking.
//
// Each item keeps the canonical serialization of what it has built so far.
// Comparing partial serializations followed by ')' orders them the same way
// the complete serialization would order them in any context, because a
// complete term is never a proper prefix of another term except for an atom
// followed by '(' and '(' sorts before both ')' and ','.

struct PrefixCell {
  double score = kNegInf;
  int split = -1;
  std::string x, y;
};

struct NodeCell {
  double score = kNegInf;
  int node = -1;
  std::string term;
};

struct ChildCell {
  double score = kNegInf;
  int child = -1;
};

std::string key_of(const std::string& x, const std::string& y) { return x + ")" + y + ")"; }

std::string make_term(const SemanticUnit& u, const std::string& x, const std::string& y) {
  if (u.is_constant) return "'" + u.function + "'";
  switch (u.arity()) {
    case 0: return u.function;
    case 1: return u.function + "(" + x + ")";
    default: return u.function + "(" + x + ", " + y + ")";
  }
}

// True when a candidate with score `cand` should replace the incumbent.
template <typename KeyLess>
bool prefer(double cand, double best, KeyLess&& cand_key_less) {
  if (cand == kNegInf) return false;
  if (best == kNegInf) return true;
  if (scores_tie(cand, best)) return cand_key_less();
  return cand > best;
}

class ViterbiChart : ChartBase {
 public:
  ViterbiChart(const SentenceScores& sc, const ChartGrammar& g, const ModelParams& params)
      : ChartBase(sc, g), params_(params) {
    const std::size_t S = g.symbols.size();
    P_.resize(S);
    I_.assign(S, std::vector<NodeCell>(cells_));
    C_.resize(S);
    for (std::size_t s = 0; s < S; ++s) {
      P_[s].assign(pattern_trie(sym(s).arity).nodes.size() * cells_, PrefixCell{});
      for (std::size_t k = 0; k < sym(s).arity; ++k) C_[s][k].assign(cells_, ChildCell{});
    }
  }

  std::optional<Derivation> run() {
    const std::size_t S = g_.symbols.size();
    for (std::size_t len = 1; len <= n_; ++len) {
      for (std::size_t i = 0; i + len <= n_; ++i) {
        const std::size_t j = i + len;
        const std::size_t ij = cell(i, j);
        for (std::size_t s = 0; s < S; ++s) {
          const auto& trie = pattern_trie(sym(s).arity);
          for (std::size_t v = 1; v < trie.nodes.size(); ++v) {
            const TrieNode& node = trie.nodes[v];
            PrefixCell& out = P(s, v, i, j);
            if (node.depth == 1) {
              if (node.slot == Slot::kW) {
                out.score = word_score(sym(s).unit, i, j);
                out.split = static_cast<int>(i);
              }
              continue;
            }
            const auto parent = static_cast<std::size_t>(node.parent);
            for (std::size_t q = i + 1; q < j; ++q) {
              const PrefixCell& left = P(s, parent, i, q);
              if (left.score == kNegInf) continue;
              double b;
              const std::string* filled = nullptr;
              if (node.slot == Slot::kW) {
                b = word_score(sym(s).unit, q, j);
              } else {
                const ChildCell& cc = C_[s][static_cast<std::size_t>(slot_child(node.slot))][cell(q, j)];
                if (cc.score == kNegInf) continue;
                b = cc.score;
                filled = &I_[static_cast<std::size_t>(cc.child)][cell(q, j)].term;
              }
              const double cand = left.score + b;
              const std::string& cx = node.slot == Slot::kX ? *filled : left.x;
              const std::string& cy = node.slot == Slot::kY ? *filled : left.y;
              if (prefer(cand, out.score, [&] { return key_of(cx, cy) < key_of(out.x, out.y); })) {
                out.score = cand;
                out.split = static_cast<int>(q);
                std::string nx = cx, ny = cy;
                out.x = std::move(nx);
                out.y = std::move(ny);
              }
            }
          }
        }
        for (std::size_t s = 0; s < S; ++s) {
          NodeCell& out = I_[s][ij];
          const auto& unit = params_.grammar.units[static_cast<std::size_t>(sym(s).unit)];
          for (int vi : pattern_trie(sym(s).arity).complete) {
            const auto v = static_cast<std::size_t>(vi);
            const PrefixCell& pc = P(s, v, i, j);
            if (pc.score == kNegInf) continue;
            const double cand = pc.score + sym(s).pattern_score[v];
            std::string term = make_term(unit, pc.x, pc.y);
            if (prefer(cand, out.score, [&] { return term + ")" < out.term + ")"; })) {
              out.score = cand;
              out.node = vi;
              out.term = std::move(term);
            }
          }
        }
        for (std::size_t s = 0; s < S; ++s) {
          const auto& trie = pattern_trie(sym(s).arity);
          for (std::size_t k = 0; k < sym(s).arity; ++k) {
            ChildCell& out = C_[s][k][ij];
            for (const Alt& alt : sym(s).alts[k]) {
              const NodeCell& nc = I_[static_cast<std::size_t>(alt.child)][ij];
              if (nc.score == kNegInf) continue;
              const double cand = nc.score + alt.trans;
              if (prefer(cand, out.score, [&] {
                    return nc.term + ")" < I_[static_cast<std::size_t>(out.child)][ij].term + ")";
                  })) {
                out.score = cand;
                out.child = alt.child;
              }
            }
            PrefixCell& single = P(s, static_cast<std::size_t>(trie.single[k == 0 ? 1 : 2]), i, j);
            single.score = out.score;
            single.split = static_cast<int>(i);
            if (out.score != kNegInf)
              (k == 0 ? single.x : single.y) = I_[static_cast<std::size_t>(out.child)][ij].term;
          }
        }
      }
    }

    int best = -1;
    for (int r : g_.roots) {
      const NodeCell& nc = I_[static_cast<std::size_t>(r)][cell(0, n_)];
      if (nc.score == kNegInf) continue;
      const double incumbent = best < 0 ? kNegInf : I_[static_cast<std::size_t>(best)][cell(0, n_)].score;
      if (prefer(nc.score, incumbent,
                 [&] { return nc.term < I_[static_cast<std::size_t>(best)][cell(0, n_)].term; }))
        best = r;
    }
    if (best < 0) return std::nullopt;
    Derivation d;
    d.score = I_[static_cast<std::size_t>(best)][cell(0, n_)].score;
    d.tree = build(static_cast<std::size_t>(best), 0, n_);
    return d;
  }

 private:
  PrefixCell& P(std::size_t s, std::size_t v, std::size_t i, std::size_t j) {
    return P_[s][v * cells_ + cell(i, j)];
  }

  HybridTree build(std::size_t s, std::size_t i, std::size_t j) {
    const auto& trie = pattern_trie(sym(s).arity);
    const NodeCell& nc = I_[s][cell(i, j)];
    HybridTree h;
    h.unit = params_.grammar.units[static_cast<std::size_t>(sym(s).unit)];
    h.pattern = pattern_inventory()[static_cast<std::size_t>(trie.nodes[static_cast<std::size_t>(nc.node)].pattern)];
    h.children.resize(sym(s).arity);
    auto v = static_cast<std::size_t>(nc.node);
    std::size_t end = j;
    while (v != 0) {
      const TrieNode& node = trie.nodes[v];
      const auto q = static_cast<std::size_t>(P(s, v, i, end).split);
      if (node.slot == Slot::kW) {
        h.word_spans.push_back(TokenSpan{q, end});
      } else {
        const auto k = static_cast<std::size_t>(slot_child(node.slot));
        h.children[k] = build(static_cast<std::size_t>(C_[s][k][cell(q, end)].child), q, end);
      }
      v = static_cast<std::size_t>(node.parent);
      end = q;
    }
    std::reverse(h.word_spans.begin(), h.word_spans.end());
    return h;
  }

  const ModelParams& params_;
  std::vector<std::vector<PrefixCell>> P_;
  std::vector<std::vector<NodeCell>> I_;
  std::vector<std::array<std::vector<ChildCell>, 2>> C_;
};

}  // namespace

SentenceScores score_sentence(const std::vector<std::string>& tokens, const ModelParams& params) {
  SentenceScores sc;
  sc.tokens = tokens;
  sc.word_ids = params.words.encode(tokens);
  const std::size_t n = tokens.size(), U = params.grammar.units.size(), d = params.embedding_rank();
  sc.assoc = Matrix(n, U);

  std::vector<double> emb_weights(d);
  for (std::size_t t = 0; t < n; ++t) {
    const int w = sc.word_ids[t];
    const int prev = t == 0 ? Vocabulary::kBegin : sc.word_ids[t - 1];
    const int next = t + 1 == n ? Vocabulary::kEnd : sc.word_ids[t + 1];
    for (std::size_t j = 0; j < d; ++j) {
      const int jj = static_cast<int>(j);
      emb_weights[j] = params.weight(FeatureKey{FeatureKind::kEmbWord, w, jj, 0}) +
                       params.weight(FeatureKey{FeatureKind::kEmbBias, jj, 0, 0});
    }
    for (std::size_t u = 0; u < U; ++u) {
      const int ui = static_cast<int>(u);
      double s = params.weight(FeatureKey{FeatureKind::kEmit, ui, w, 0}) +
                 params.weight(FeatureKey{FeatureKind::kEmitPrev, ui, prev, 0}) +
                 params.weight(FeatureKey{FeatureKind::kEmitNext, ui, next, 0});
      for (std::size_t j = 0; j < d; ++j) s += params.unit_vectors(u, j) * emb_weights[j];
      sc.assoc(t, u) = s;
    }
  }
  if (params.neural) {
    const Matrix g = assoc_scores(tokens, *params.neural);
    for (std::size_t u = 0; u < U; ++u) {
      const int row = params.neural->unit_row(params.grammar.units[u]);
      if (row < 0) throw DataError("neural scorer has no output for unit " + unit_to_string(params.grammar.units[u]));
      for (std::size_t t = 0; t < n; ++t) sc.assoc(t, u) += g(t, static_cast<std::size_t>(row));
    }
  }
  sc.assoc_cum = Matrix(n + 1, U);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t u = 0; u < U; ++u) sc.assoc_cum(t + 1, u) = sc.assoc_cum(t, u) + sc.assoc(t, u);
  return sc;
}

Posteriors constrained_posteriors(const SentenceScores& scores, const MeaningTree& m, const ModelParams& params) {
  const ChartGrammar g = constrained_grammar(m, params);
  InsideOutside io(scores, g);
  io.inside();
  return io.outside(params.grammar.units.size());
}

Posteriors full_posteriors(const SentenceScores& scores, const ModelParams& params) {
  const ChartGrammar g = full_grammar(params);
  InsideOutside io(scores, g);
  io.inside();
  return io.outside(params.grammar.units.size());
}

double log_partition_constrained(const std::vector<std::string>& tokens, const MeaningTree& m,
                                 const ModelParams& params) {
  const SentenceScores sc = score_sentence(tokens, params);
  const ChartGrammar g = constrained_grammar(m, params);
  InsideOutside io(sc, g);
  return io.inside();
}

double log_partition_full(const std::vector<std::string>& tokens, const ModelParams& params) {
  const SentenceScores sc = score_sentence(tokens, params);
  const ChartGrammar g = full_grammar(params);
  InsideOutside io(sc, g);
  return io.inside();
}

namespace {

template <typename Sink>
void for_each_expected_feature(const Posteriors& post, const SentenceScores& sc, const ModelParams& params,
                               Sink&& sink) {
  const std::size_t n = sc.tokens.size(), U = params.grammar.units.size(), d = params.embedding_rank();
  std::vector<double> emb(d);
  for (std::size_t t = 0; t < n; ++t) {
    const int w = sc.word_ids[t];
    const int prev = t == 0 ? Vocabulary::kBegin : sc.word_ids[t - 1];
    const int next = t + 1 == n ? Vocabulary::kEnd : sc.word_ids[t + 1];
    std::fill(emb.begin(), emb.end(), 0.0);
    bool any = false;
    for (std::size_t u = 0; u < U; ++u) {
      const double p = post.assoc(t, u);
      if (p == 0.0) continue;
      any = true;
      const int ui = static_cast<int>(u);
      sink(FeatureKey{FeatureKind::kEmit, ui, w, 0}, p);
      sink(FeatureKey{FeatureKind::kEmitPrev, ui, prev, 0}, p);
      sink(FeatureKey{FeatureKind::kEmitNext, ui, next, 0}, p);
      for (std::size_t j = 0; j < d; ++j) emb[j] += p * params.unit_vectors(u, j);
    }
    if (!any) continue;
    for (std::size_t j = 0; j < d; ++j) {
      if (emb[j] == 0.0) continue;
      sink(FeatureKey{FeatureKind::kEmbWord, w, static_cast<int>(j), 0}, emb[j]);
      sink(FeatureKey{FeatureKind::kEmbBias, static_cast<int>(j), 0, 0}, emb[j]);
    }
  }
  const std::size_t NP = pattern_inventory().size();
  for (std::size_t u = 0; u < U; ++u)
    for (std::size_t p = 0; p < NP; ++p) {
      const double v = post.patterns[u * NP + p];
      if (v != 0.0) sink(FeatureKey{FeatureKind::kPattern, static_cast<int>(u), static_cast<int>(p), 0}, v);
    }
  for (const auto& tp : post.trans)
    if (tp.value != 0.0) sink(FeatureKey{FeatureKind::kTrans, tp.parent, tp.child, tp.slot}, tp.value);
}

}  // namespace

FeatureVector to_feature_vector(const Posteriors& post, const SentenceScores& scores, const ModelParams& params) {
  FeatureVector phi;
  for_each_expected_feature(post, scores, params, [&](const FeatureKey& k, double v) { phi[k] += v; });
  return phi;
}

void accumulate_features(const Posteriors& post, const SentenceScores& scores, const ModelParams& params,
                         double scale, std::span<double> dense) {
  for_each_expected_feature(post, scores, params, [&](const FeatureKey& k, double v) {
    const int id = params.features.find(k);
    if (id >= 0) dense[static_cast<std::size_t>(id)] += scale * v;
  });
}

Expectations expected_features(const std::vector<std::string>& tokens, const MeaningTree& m,
                               const ModelParams& params) {
  const SentenceScores sc = score_sentence(tokens, params);
  Posteriors con = constrained_posteriors(sc, m, params);
  if (con.log_z == kNegInf) throw DataError("no hybrid tree pairs the sentence with " + serialize_mrl(m));
  Posteriors full = full_posteriors(sc, params);
  Expectations e;
  e.log_z_constrained = con.log_z;
  e.log_z_full = full.log_z;
  e.constrained = to_feature_vector(con, sc, params);
  e.full = to_feature_vector(full, sc, params);
  e.assoc_constrained = std::move(con.assoc);
  e.assoc_full = std::move(full.assoc);
  return e;
}

bool scores_tie(double a, double b) {
  return std::abs(a - b) <= 1e-10 * std::max({1.0, std::abs(a), std::abs(b)});
}

std::optional<Derivation> viterbi(const SentenceScores& scores, const ModelParams& params,
                                  const DecodeOptions& options) {
  if (scores.tokens.empty()) return std::nullopt;
  const ChartGrammar g = full_grammar(params);
  ViterbiChart chart(scores, g, params);
  auto d = chart.run();
  if (!d) return d;
  const std::size_t limit = options.max_nodes ? options.max_nodes : 2 * scores.tokens.size() - 1;
  if (node_count(project(d->tree)) > limit) return std::nullopt;
  return d;
}

std::optional<MeaningTree> decode(const std::vector<std::string>& tokens, const ModelParams& params,
                                  const DecodeOptions& options) {
  auto d = viterbi(score_sentence(tokens, params), params, options);
  if (!d) return std::nullopt;
  return project(d->tree);
}

}  // namespace semparse
