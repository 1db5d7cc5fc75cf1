#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "oracle.hpp"
#include "semparse/corpus.hpp"
#include "semparse/embeddings.hpp"
#include "semparse/errors.hpp"
#include "semparse/evaluator.hpp"
#include "semparse/neural.hpp"
#include "semparse/trainer.hpp"

using namespace semparse;
using namespace semparse::testing;

namespace {

const char* kSmallCorpus = R"(lang en
lang de
%%
Q:answer(E)
E:state(E)
E:river(E)
E:loc(E)
E:traverse(E)
E:all
E:stateid(SN)
SN:'texas'
%%
id 1 en
nl: Which states have a river ?
mrl: answer(state(loc(river(all))))
id 1 de
nl: welche staaten haben einen fluss ?
mrl: answer(state(loc(river(all))))
id 2 en
nl: rivers in texas
mrl: answer(river(loc(stateid('texas'))))
id 3 en
nl: states
mrl: answer(state(all))
)";

Corpus small() {
  std::istringstream in(kSmallCorpus);
  return read_corpus(in);
}

MeaningTree tree_of(const std::string& mrl) { return parse_mrl(mrl, small().signatures); }

}  // namespace

// ---------------------------------------------------------------------------
// logic

TEST_CASE("logical forms serialize canonically") {
  const Corpus c = small();
  const MeaningTree t = parse_mrl("answer( STATE(loc(river( all ))) )", c.signatures);
  CHECK(serialize_mrl(t) == "answer(state(loc(river(all))))");
  CHECK(node_count(t) == 5);
  CHECK(serialize_mrl(parse_mrl("answer(river(loc(stateid( 'texas' ))))", c.signatures)) ==
        "answer(river(loc(stateid('texas'))))");
  CHECK(collect_units(t).front().function == "answer");
}

TEST_CASE("logical form errors are data errors") {
  const Corpus c = small();
  CHECK_THROWS_AS(parse_mrl("answer(state(all)", c.signatures), DataError);
  CHECK_THROWS_AS(parse_mrl("answer(lake(all))", c.signatures), DataError);
  CHECK_THROWS_AS(parse_mrl("answer(state(all, all))", c.signatures), DataError);
  CHECK_THROWS_AS(parse_mrl("answer(stateid(all))", c.signatures), DataError);  // type mismatch
}

TEST_CASE("unit strings round trip") {
  for (const char* s : {"E:exclude(E,E)", "E:all", "SN:'new york'", "Q:answer(E)"}) {
    CAPTURE(s);
    CHECK(unit_to_string(parse_unit(s)) == s);
  }
  CHECK(parse_unit("E:all()") == parse_unit("E:all"));
}

// ---------------------------------------------------------------------------
// corpus

TEST_CASE("corpus reader, splits and auxiliary view") {
  const Corpus c = small();
  CHECK(c.languages == std::set<std::string>{"de", "en"});
  CHECK(c.count("en") == 3);
  const auto inst = select(c, "en", {1});
  REQUIRE(inst.size() == 1);
  CHECK(inst[0].tokens == std::vector<std::string>{"which", "states", "have", "a", "river", "?"});

  const SplitSpec s = standard_split(c, "en", 2, 1);
  CHECK(s.train_ids == std::vector<std::int64_t>{1, 2});
  CHECK(s.test_ids == std::vector<std::int64_t>{3});

  const Corpus aux = auxiliary_corpus(c, "en");
  REQUIRE(aux.instances.size() == 1);
  CHECK(aux.instances[0].language == "de");
}

TEST_CASE("duplicate ids within a language are rejected") {
  std::string text = kSmallCorpus;
  text += "id 2 en\nnl: x\nmrl: answer(all)\n";
  std::istringstream in(text);
  CHECK_THROWS_AS(read_corpus(in), DataError);
}

TEST_CASE("corpus write and read round trip") {
  const Corpus c = small();
  std::ostringstream out;
  write_corpus(out, c);
  std::istringstream in(out.str());
  const Corpus back = read_corpus(in);
  REQUIRE(back.instances.size() == c.instances.size());
  for (std::size_t i = 0; i < c.instances.size(); ++i) {
    CHECK(back.instances[i].tokens == c.instances[i].tokens);
    CHECK(trees_equal(back.instances[i].tree, c.instances[i].tree));
  }
}

TEST_CASE("dev split moves a fifth of training, reproducibly") {
  SplitSpec s;
  for (std::int64_t i = 1; i <= 600; ++i) s.train_ids.push_back(i);
  const SplitSpec a = dev_split(s, 4), b = dev_split(s, 4), c = dev_split(s, 5);
  CHECK(a.train_ids.size() == 480);
  CHECK(a.dev_ids.size() == 120);
  CHECK(a.dev_ids == b.dev_ids);
  CHECK(a.dev_ids != c.dev_ids);
  std::set<std::int64_t> all(a.train_ids.begin(), a.train_ids.end());
  all.insert(a.dev_ids.begin(), a.dev_ids.end());
  CHECK(all.size() == 600);
}

// ---------------------------------------------------------------------------
// embeddings

TEST_CASE("co-occurrence counts match direct counting") {
  const Corpus c = small();
  const Corpus aux = auxiliary_corpus(c, "de");  // the three English instances
  for (CoocMode mode : {CoocMode::kFrequency, CoocMode::kBinary}) {
    const CoocMatrix m = build_cooc(aux, mode);
    for (std::size_t u = 0; u < m.units.size(); ++u)
      for (std::size_t w = 0; w < m.words.size(); ++w) {
        double expect = 0.0;
        for (const auto& inst : aux.instances) {
          double cu = 0.0, cw = 0.0;
          for (const auto& x : collect_units(inst.tree)) cu += x == m.units[u];
          for (const auto& x : inst.tokens) cw += x == m.words[w];
          if (cu > 0 && cw > 0) expect += mode == CoocMode::kBinary ? 1.0 : cu * cw;
        }
        CHECK(m.counts(u, w) == expect);
      }
  }
}

TEST_CASE("svd of a known matrix") {
  Matrix m(2, 2);
  m(0, 0) = 3;
  m(1, 0) = 4;
  m(1, 1) = 5;
  const SvdResult s = svd(m);
  // M^T M has eigenvalues 45 and 5
  CHECK(s.singular_values[0] == doctest::Approx(std::sqrt(45.0)).epsilon(1e-12));
  CHECK(s.singular_values[1] == doctest::Approx(std::sqrt(5.0)).epsilon(1e-12));
}

TEST_CASE("svd of rank-deficient and wide matrices") {
  std::mt19937_64 rng(3);
  for (auto [rows, cols] : {std::pair<std::size_t, std::size_t>{5, 3}, {3, 7}, {6, 6}}) {
    Matrix m(rows, cols);
    std::uniform_int_distribution<int> d(-3, 3);
    for (double& x : m.data()) x = d(rng);
    for (std::size_t j = 0; j < cols; ++j) m(1, j) = 2 * m(0, j);
    const SvdResult s = svd(m);
    const std::size_t r = std::min(rows, cols);
    REQUIRE(s.singular_values.size() == r);
    if (rows <= cols) CHECK(s.singular_values.back() <= 1e-10);  // duplicated row drops the rank
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) {
        double v = 0.0;
        for (std::size_t k = 0; k < r; ++k) v += s.u(i, k) * s.singular_values[k] * s.v(j, k);
        CHECK(v == doctest::Approx(m(i, j)).epsilon(1e-10));
      }
    const Matrix gu = multiply(s.u.transposed(), s.u);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < r; ++j) CHECK(gu(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-10));
  }
}

TEST_CASE("truncation bounds, unseen lookup and table round trips") {
  const Corpus c = small();
  const CoocMatrix m = build_cooc(auxiliary_corpus(c, "de"));
  const SvdResult s = svd(m.counts);
  CHECK_THROWS_AS(truncate_embed(s, m.units, 0), DataError);
  CHECK_THROWS_AS(truncate_embed(s, m.units, s.singular_values.size() + 1), DataError);
  const UnitEmbeddings e = truncate_embed(s, m.units, 2);
  CHECK(e.rank() == 2);
  CHECK(lookup(e, parse_unit("E:lake(E)")) == std::vector<double>{0.0, 0.0});
  CHECK(lookup(e, m.units[0])[0] == doctest::Approx(s.u(0, 0) * s.singular_values[0]));

  const auto dir = std::filesystem::temp_directory_path();
  const auto tsv = dir / "semparse-unit-emb.tsv", bin = dir / "semparse-unit-emb.bin";
  export_embeddings(e, tsv);
  save_embeddings_binary(e, bin);
  for (const UnitEmbeddings& back : {load_embeddings_tsv(tsv), load_embeddings_binary(bin)}) {
    REQUIRE(back.units == e.units);
    for (std::size_t i = 0; i < e.units.size(); ++i)
      for (std::size_t j = 0; j < 2; ++j) CHECK(back.vectors(i, j) == e.vectors(i, j));
  }
  std::filesystem::remove(tsv);
  std::filesystem::remove(bin);
}

// ---------------------------------------------------------------------------
// neural

TEST_CASE("neural gradient matches central differences") {
  const std::vector<std::string> vocab{"a", "b", "c"};
  const std::vector<SemanticUnit> units{parse_unit("E:state(E)"), parse_unit("E:all")};
  const std::vector<std::string> tokens{"a", "zz", "c", "b"};
  for (int window : {0, 1, 2}) {
    CAPTURE(window);
    NeuralParams p(vocab, units, NeuralShape{window, 3, 4});
    p.init_uniform(9, 0.5);
    Matrix w(tokens.size(), units.size());
    std::mt19937_64 rng(window);
    std::uniform_real_distribution<double> d(-1, 1);
    for (double& x : w.data()) x = d(rng);
    auto total = [&] {
      const Matrix g = assoc_scores(tokens, p);
      double s = 0.0;
      for (std::size_t t = 0; t < tokens.size(); ++t)
        for (std::size_t u = 0; u < units.size(); ++u) s += w(t, u) * g(t, u);
      return s;
    };
    const auto grad = grad_theta(tokens, w, p);
    REQUIRE(grad.size() == p.values().size());
    for (std::size_t i = 0; i < grad.size(); ++i) {
      const double saved = p.values()[i];
      p.values()[i] = saved + 1e-6;
      const double up = total();
      p.values()[i] = saved - 1e-6;
      const double down = total();
      p.values()[i] = saved;
      CHECK(std::abs(grad[i] - (up - down) / 2e-6) <= 1e-6 * std::max(1.0, std::abs(grad[i])));
    }
  }
}

TEST_CASE("window reads padding outside the sentence and unknown words share a row") {
  NeuralParams p({"a", "b"}, {parse_unit("E:all")}, NeuralShape{1, 2, 3});
  p.init_uniform(2);
  const std::vector<std::string> tokens{"a", "b"};
  const double before = assoc_score(tokens, 0, parse_unit("E:all"), p);
  p.values()[NeuralParams::kPadRow * 2] += 0.3;
  CHECK(assoc_score(tokens, 0, parse_unit("E:all"), p) != before);
  CHECK(p.word_rows({"a", "nope", "qq"})[1] == NeuralParams::kUnknownRow);
  CHECK(p.word_rows({"a", "nope", "qq"})[2] == NeuralParams::kUnknownRow);
  CHECK_THROWS_AS(assoc_score(tokens, 0, parse_unit("E:river(E)"), p), DataError);
}

// ---------------------------------------------------------------------------
// evaluator

TEST_CASE("two correct out of four with one no-parse") {
  const MeaningTree a = tree_of("answer(state(all))");
  const MeaningTree b = tree_of("answer(river(all))");
  const std::vector<MeaningTree> golds{a, b, a, b};
  const std::vector<std::optional<MeaningTree>> preds{a, b, b, std::nullopt};
  const EvalResult r = evaluate(preds, golds);
  CHECK(r.total == 4);
  CHECK(r.parsed == 3);
  CHECK(r.correct == 2);
  CHECK(r.accuracy == doctest::Approx(0.5));
  CHECK(r.precision == doctest::Approx(2.0 / 3.0));
  CHECK(r.recall == doctest::Approx(0.5));
  CHECK(100 * r.f1 == doctest::Approx(57.142857).epsilon(1e-6));
}

TEST_CASE("one differing unit makes a prediction wrong") {
  const MeaningTree gold = tree_of("answer(river(loc(stateid('texas'))))");
  const MeaningTree pred = tree_of("answer(river(traverse(stateid('texas'))))");
  const EvalResult r = evaluate({pred}, {gold});
  CHECK(r.correct == 0);
  CHECK(r.parsed == 1);
  CHECK(r.f1 == 0.0);
  CHECK_THROWS_AS(evaluate({pred, pred}, {gold}), DataError);
}

TEST_CASE("prediction file lists every instance with its verdict") {
  const Corpus c = small();
  const auto data = select(c, "en", {1, 2, 3});
  const std::vector<std::optional<MeaningTree>> preds{data[0].tree, data[0].tree, std::nullopt};
  const auto path = std::filesystem::temp_directory_path() / "semparse-unit-preds.tsv";
  write_predictions(path, data, preds);
  std::ifstream in(path);
  std::string header, l1, l2, l3;
  std::getline(in, header);
  std::getline(in, l1);
  std::getline(in, l2);
  std::getline(in, l3);
  CHECK(header == "id\tgold\tprediction\tverdict");
  CHECK(l1.ends_with("\tcorrect"));
  CHECK(l2.ends_with("\twrong"));
  CHECK(l3 == "3\tanswer(state(all))\t-\tno-parse");
  std::filesystem::remove(path);
}

// ---------------------------------------------------------------------------
// model persistence and objective shape

TEST_CASE("saved models reload bit for bit") {
  const Corpus c = load_corpus(std::string(SEMPARSE_DATA_DIR) + "/toy_deterministic.txt");
  const auto data = select(c, "en", standard_split(c, "en", 10, 0).train_ids);
  const CoocMatrix cooc = build_cooc(auxiliary_corpus(c, "en"));
  const UnitEmbeddings emb = truncate_embed(svd(cooc.counts), cooc.units, 3);
  TrainConfig cfg;
  cfg.nn_window = 1;
  cfg.nn_shape = NeuralShape{1, 4, 5};
  cfg.max_iterations = 5;
  const TrainReport rep = train(data, build_model(data, cfg, &emb), cfg);
  std::stringstream buf;
  save_model(rep.params, buf);
  const ModelParams back = load_model(buf);
  REQUIRE(back.weights.size() == rep.params.weights.size());
  for (std::size_t i = 0; i < back.weights.size(); ++i) CHECK(back.weights[i] == rep.params.weights[i]);
  REQUIRE(back.neural.has_value());
  CHECK(std::equal(back.neural->values().begin(), back.neural->values().end(), rep.params.neural->values().begin()));
  for (const auto& inst : data) {
    CHECK(log_partition_full(inst.tokens, back) == log_partition_full(inst.tokens, rep.params));
    const auto a = decode(inst.tokens, back), b = decode(inst.tokens, rep.params);
    CHECK(a.has_value() == b.has_value());
    if (a && b) CHECK(serialize_mrl(*a) == serialize_mrl(*b));
  }
}

TEST_CASE("objective is concave when every pair has a single hybrid tree") {
  // one word, one node: H(n, m) is a singleton, so log Z(n, m) is linear
  std::vector<Instance> data;
  const char* words[] = {"texas", "rivers", "states", "all"};
  const char* forms[] = {"E:all", "E:all", "SN:'texas'", "E:all"};
  for (int i = 0; i < 4; ++i)
    data.push_back(Instance{i + 1, "en", {words[i]}, MeaningTree{parse_unit(forms[i]), {}}});
  TrainConfig cfg;
  const ModelParams base = build_model(data, cfg);
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> d(-3, 3);
  for (int trial = 0; trial < 50; ++trial) {
    ModelParams a = base, b = base, mid = base;
    for (std::size_t i = 0; i < base.weights.size(); ++i) {
      a.weights[i] = d(rng);
      b.weights[i] = d(rng);
      mid.weights[i] = 0.5 * (a.weights[i] + b.weights[i]);
    }
    const double fa = objective(data, a, cfg.l2_lambda), fb = objective(data, b, cfg.l2_lambda);
    CHECK(objective(data, mid, cfg.l2_lambda) >= 0.5 * (fa + fb) - 1e-12);
  }
}
