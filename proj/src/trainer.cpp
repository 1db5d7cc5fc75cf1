#include "semparse/trainer.hpp"

#include <chrono>
#include <array>
#include <cmath>
#include <random>
#include <utility>

#include "semparse/errors.hpp"
#include "semparse/evaluator.hpp"
#include "semparse/parallel.hpp"

namespace semparse {

namespace {

// Instances are summed in a fixed number of contiguous chunks, and chunks
// are reduced in order, so results do not depend on the worker count.
constexpr std::size_t kChunks = 8;

std::pair<std::size_t, std::size_t> chunk_range(std::size_t chunk, std::size_t n) {
  return {chunk * n / kChunks, (chunk + 1) * n / kChunks};
}

double sum_squares(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

std::vector<double> gather(const ModelParams& p) {
  std::vector<double> x = p.weights;
  if (p.neural) x.insert(x.end(), p.neural->values().begin(), p.neural->values().end());
  return x;
}

void scatter(const std::vector<double>& x, ModelParams& p) {
  std::copy(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(p.weights.size()), p.weights.begin());
  if (p.neural) std::copy(x.begin() + static_cast<std::ptrdiff_t>(p.weights.size()), x.end(), p.neural->values().begin());
}

double dev_f1(const ModelParams& params, const std::vector<Instance>& dev, const TrainConfig& config) {
  std::vector<MeaningTree> golds;
  for (const auto& inst : dev) golds.push_back(inst.tree);
  return evaluate(predict(params, dev, config.decode, config.threads), golds).f1;
}

}  // namespace

void TrainConfig::validate() const {
  if (max_iterations < 1) throw DataError("max_iterations must be at least 1");
  if (!std::isfinite(l2_lambda) || l2_lambda < 0) throw DataError("l2_lambda must be finite and non-negative");
  if (!std::isfinite(learning_rate) || learning_rate <= 0) throw DataError("learning_rate must be positive");
  if (!std::isfinite(tolerance) || tolerance < 0) throw DataError("tolerance must be non-negative");
  if (!std::isfinite(init_scale) || init_scale < 0) throw DataError("init_scale must be non-negative");
  if (!std::isfinite(step_growth) || step_growth < 1) throw DataError("step_growth must be at least 1");
  if (!std::isfinite(max_step_scale) || max_step_scale < 1) throw DataError("max_step_scale must be at least 1");
  if (nn_window && (*nn_window < 0 || *nn_window > 2)) throw DataError("neural window must be 0, 1 or 2");
}

ModelParams build_model(const std::vector<Instance>& train, const TrainConfig& config,
                        const UnitEmbeddings* embeddings) {
  config.validate();
  if (train.empty()) throw DataError("no training instances");
  std::vector<MeaningTree> trees;
  std::vector<std::vector<std::string>> sentences;
  for (const auto& inst : train) {
    trees.push_back(inst.tree);
    sentences.push_back(inst.tokens);
  }
  ModelParams p;
  p.grammar = Grammar::from_trees(trees, config.grammar);
  if (embeddings) p.set_embeddings(*embeddings);
  register_features(p, sentences);
  if (config.init_scale > 0) {
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> dist(-config.init_scale, config.init_scale);
    for (double& w : p.weights) w = dist(rng);
  }
  if (config.nn_window) {
    std::vector<std::string> vocab;
    for (std::size_t id = 2; id < p.words.size(); ++id) vocab.push_back(p.words.word(id));
    NeuralShape shape = config.nn_shape;
    shape.window = *config.nn_window;
    p.neural = NeuralParams(vocab, p.grammar.units, shape);
    p.neural->init_uniform(config.seed + 1);
  }
  return p;
}

double objective(const std::vector<Instance>& data, const ModelParams& params, double l2_lambda,
                 std::size_t threads) {
  std::array<double, kChunks> part{};
  parallel_for(kChunks, threads, [&](std::size_t c) {
    const auto [lo, hi] = chunk_range(c, data.size());
    for (std::size_t i = lo; i < hi; ++i) {
      const double con = log_partition_constrained(data[i].tokens, data[i].tree, params);
      if (con == kNegInf) continue;
      part[c] += con - log_partition_full(data[i].tokens, params);
    }
  });
  double total = 0.0;
  for (double v : part) total += v;
  total -= l2_lambda * sum_squares(params.weights);
  if (params.neural) total -= l2_lambda * sum_squares(params.neural->values());
  return total;
}

ObjectiveValue objective_and_gradient(const std::vector<Instance>& data, const ModelParams& params,
                                      double l2_lambda, std::size_t threads) {
  const std::size_t F = params.weights.size();
  const std::size_t T = params.neural ? params.neural->values().size() : 0;
  struct Part {
    double objective = 0.0;
    std::size_t skipped = 0;
    std::vector<double> lambda, theta;
  };
  std::vector<Part> parts(kChunks);
  parallel_for(kChunks, threads, [&](std::size_t c) {
    Part& part = parts[c];
    const auto [lo, hi] = chunk_range(c, data.size());
    if (lo == hi) return;
    part.lambda.assign(F, 0.0);
    part.theta.assign(T, 0.0);
    for (std::size_t i = lo; i < hi; ++i) {
      const SentenceScores sc = score_sentence(data[i].tokens, params);
      const Posteriors con = constrained_posteriors(sc, data[i].tree, params);
      if (con.log_z == kNegInf) {
        ++part.skipped;
        continue;
      }
      const Posteriors full = full_posteriors(sc, params);
      part.objective += con.log_z - full.log_z;
      accumulate_features(con, sc, params, 1.0, part.lambda);
      accumulate_features(full, sc, params, -1.0, part.lambda);
      if (params.neural) {
        Matrix diff = con.assoc;
        for (std::size_t k = 0; k < diff.data().size(); ++k) diff.data()[k] -= std::as_const(full.assoc).data()[k];
        const auto g = grad_theta(data[i].tokens, diff, *params.neural);
        for (std::size_t k = 0; k < T; ++k) part.theta[k] += g[k];
      }
    }
  });
  ObjectiveValue out;
  out.grad_lambda.assign(F, 0.0);
  out.grad_theta.assign(T, 0.0);
  for (const Part& part : parts) {
    out.objective += part.objective;
    out.skipped += part.skipped;
    for (std::size_t k = 0; k < part.lambda.size(); ++k) out.grad_lambda[k] += part.lambda[k];
    for (std::size_t k = 0; k < part.theta.size(); ++k) out.grad_theta[k] += part.theta[k];
  }
  out.objective -= l2_lambda * sum_squares(params.weights);
  for (std::size_t k = 0; k < F; ++k) out.grad_lambda[k] -= 2 * l2_lambda * params.weights[k];
  if (params.neural) {
    const auto theta = params.neural->values();
    out.objective -= l2_lambda * sum_squares(theta);
    for (std::size_t k = 0; k < T; ++k) out.grad_theta[k] -= 2 * l2_lambda * theta[k];
  }
  return out;
}

TrainReport train(const std::vector<Instance>& data, ModelParams params, const TrainConfig& config,
                  const std::vector<Instance>* dev) {
  config.validate();
  if (data.empty()) throw DataError("no training instances");
  const auto start = std::chrono::steady_clock::now();
  constexpr double kAscentSlack = 1e-9;
  constexpr int kMaxHalvings = 40;

  ObjectiveValue cur = objective_and_gradient(data, params, config.l2_lambda, config.threads);
  if (!std::isfinite(cur.objective)) throw NumericError("objective is not finite at the initial point");

  TrainReport report;
  report.skipped = cur.skipped;
  std::optional<double> best_f1;
  if (dev && !dev->empty()) {
    best_f1 = dev_f1(params, *dev, config);
    report.params = params;
  }

  std::vector<double> x = gather(params);
  std::vector<double> accum(x.size(), 0.0), accum_try(x.size()), x_try(x.size()), g;
  ModelParams trial = params;
  double scale = 1.0;

  std::vector<std::size_t> context_features;
  for (std::size_t k = 0; k < params.features.size(); ++k) {
    const FeatureKind kind = params.features.key(k).kind;
    if (kind == FeatureKind::kEmitPrev || kind == FeatureKind::kEmitNext) context_features.push_back(k);
  }

  for (std::size_t it = 1; it <= config.max_iterations; ++it) {
    const bool warmup = it <= config.warmup_iterations;
    g = cur.grad_lambda;
    if (warmup)
      for (std::size_t k : context_features) g[k] = 0.0;
    g.insert(g.end(), cur.grad_theta.begin(), cur.grad_theta.end());
    for (std::size_t k = 0; k < g.size(); ++k) accum_try[k] = accum[k] + g[k] * g[k];

    bool accepted = false;
    bool saw_finite = false;
    ObjectiveValue next;
    for (int h = 0; h <= kMaxHalvings && !accepted; ++h) {
      for (std::size_t k = 0; k < x.size(); ++k)
        x_try[k] = accum_try[k] > 0 ? x[k] + config.learning_rate * scale * g[k] / std::sqrt(accum_try[k]) : x[k];
      scatter(x_try, trial);
      next = objective_and_gradient(data, trial, config.l2_lambda, config.threads);
      if (std::isfinite(next.objective)) {
        saw_finite = true;
        if (next.objective >= cur.objective - kAscentSlack) {
          accepted = true;
          break;
        }
      }
      scale *= 0.5;
    }
    if (!saw_finite) throw NumericError("objective diverged at iteration " + std::to_string(it));
    if (!accepted) {
      if (!warmup) break;  // no ascent direction left at any step size
      it = config.warmup_iterations;
      continue;
    }

    const double change = std::abs(next.objective - cur.objective) / std::max(1.0, std::abs(cur.objective));
    accum.swap(accum_try);
    x.swap(x_try);
    cur = std::move(next);
    std::swap(params, trial);
    scale = std::min(config.max_step_scale, scale * config.step_growth);

    IterationRecord rec;
    rec.iteration = it;
    rec.objective = cur.objective;
    rec.grad_norm = std::sqrt(sum_squares(cur.grad_lambda) + sum_squares(cur.grad_theta));
    if (best_f1) {
      rec.dev_f1 = dev_f1(params, *dev, config);
      if (*rec.dev_f1 > *best_f1) {
        best_f1 = rec.dev_f1;
        report.params = params;
        report.selected_iteration = it;
      }
    }
    report.trace.push_back(rec);
    if (change < config.tolerance) {
      if (!warmup) break;
      it = config.warmup_iterations;  // converged early; release the frozen features
    }
  }
  if (!best_f1) {
    report.params = std::move(params);
    report.selected_iteration = report.trace.size();
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

RankTuning tune_rank(const Corpus& corpus, const std::string& language, const std::vector<std::size_t>& candidates,
                     const TrainConfig& config, CoocMode cooc_mode, std::size_t train_size, std::size_t test_size) {
  if (candidates.empty()) throw DataError("no candidate ranks");
  const SplitSpec split = dev_split(standard_split(corpus, language, train_size, test_size), config.seed);
  const auto learn = select(corpus, language, split.train_ids);
  const auto dev = select(corpus, language, split.dev_ids);
  const Corpus aux = auxiliary_corpus(corpus, language);
  if (aux.instances.empty()) throw DataError("no auxiliary language besides " + language);
  const CoocMatrix cooc = build_cooc(aux, cooc_mode);
  const SvdResult s = svd(cooc.counts);

  RankTuning out;
  for (std::size_t d : candidates) {
    if (d == 0 || d > s.singular_values.size()) continue;
    const UnitEmbeddings emb = truncate_embed(s, cooc.units, d);
    const TrainReport rep = train(learn, build_model(learn, config, &emb), config);
    const double f1 = dev_f1(rep.params, dev, config);
    out.scores.push_back(RankScore{d, f1});
  }
  if (out.scores.empty()) throw DataError("no candidate rank fits the co-occurrence matrix");
  RankScore best = out.scores.front();
  for (const auto& r : out.scores)
    if (r.dev_f1 > best.dev_f1 || (r.dev_f1 == best.dev_f1 && r.rank < best.rank)) best = r;
  out.best_rank = best.rank;
  return out;
}

}  // namespace semparse
