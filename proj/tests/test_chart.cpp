#include <doctest.h>

#include "oracle.hpp"
#include "semparse/chart.hpp"

using namespace semparse;
using namespace semparse::testing;

namespace {

void check_against_enumeration(const MicroCase& mc) {
  const auto& p = mc.params;
  const std::size_t n = mc.tokens.size();
  const BruteResult con = brute_force(mc.tokens, enumerate_constrained(n, mc.tree, p), p);
  const BruteResult full = brute_force(mc.tokens, enumerate_full(n, p), p);

  CHECK(rel_diff(log_partition_constrained(mc.tokens, mc.tree, p), con.log_z) <= 1e-8);
  CHECK(rel_diff(log_partition_full(mc.tokens, p), full.log_z) <= 1e-8);

  const SentenceScores sc = score_sentence(mc.tokens, p);
  CHECK(max_rel_diff(to_feature_vector(constrained_posteriors(sc, mc.tree, p), sc, p), con.expected) <= 1e-8);
  CHECK(max_rel_diff(to_feature_vector(full_posteriors(sc, p), sc, p), full.expected) <= 1e-8);

  const auto d = viterbi(sc, p);
  REQUIRE(d.has_value() == full.best.has_value());
  if (d) {
    CHECK(serialize_mrl(project(d->tree)) == serialize_mrl(*full.best));
    CHECK(rel_diff(d->score, full.best_score) <= 1e-8);
    CHECK(rel_diff(score(mc.tokens, project(d->tree), d->tree, p), d->score) <= 1e-8);
  }
}

}  // namespace

TEST_CASE("chart matches exhaustive enumeration on indicator features") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    CAPTURE(seed);
    check_against_enumeration(micro_case(seed, false));
  }
}

TEST_CASE("chart matches exhaustive enumeration with embedding features") {
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    CAPTURE(seed);
    check_against_enumeration(micro_case(seed, true));
  }
}

TEST_CASE("chart matches exhaustive enumeration with a neural scorer") {
  for (std::uint64_t seed = 200; seed < 215; ++seed) {
    CAPTURE(seed);
    check_against_enumeration(micro_case(seed, true, static_cast<int>(seed % 3)));
  }
}

TEST_CASE("single word, single unit, zero weights") {
  ModelParams p;
  SemanticUnit u{SemanticType{"A"}, "x", {}, false};
  p.grammar.add_unit(u);
  p.grammar.allow_root(0);
  register_features(p, {{"hello"}});
  const MeaningTree m{u, {}};
  CHECK(log_partition_constrained({"hello"}, m, p) == doctest::Approx(0.0));
  CHECK(log_partition_full({"hello"}, p) == doctest::Approx(0.0));
  // two words: one hybrid tree (the node takes both words)
  CHECK(log_partition_full({"hello", "hello"}, p) == doctest::Approx(0.0));
}

TEST_CASE("unary chain counts") {
  // answer(river) over three words: patterns WX, XW, WXW with the leaf taking
  // the remaining words. WX: leaf spans 1 or 2 words -> 2; XW: 2; WXW: 1.
  ModelParams p;
  SemanticUnit leaf{SemanticType{"R"}, "river", {}, false};
  SemanticUnit top{SemanticType{"Q"}, "answer", {SemanticType{"R"}}, false};
  p.grammar.add_unit(top);
  p.grammar.add_unit(leaf);
  p.grammar.allow_root(0);
  p.grammar.allow_child(0, 0, 1);
  register_features(p, {{"a", "b", "c"}});
  const MeaningTree m{top, {MeaningTree{leaf, {}}}};
  CHECK(log_partition_constrained({"a", "b", "c"}, m, p) == doctest::Approx(std::log(5.0)));
  CHECK(log_partition_constrained({"a"}, m, p) == -std::numeric_limits<double>::infinity());
}
