#include "semparse/neural.hpp"

#include <cmath>
#include <random>

#include "semparse/errors.hpp"

namespace semparse {

namespace {

// Concatenated window embeddings for position t.
std::vector<double> window_input(const std::vector<std::size_t>& rows, std::size_t t,
                                 const NeuralParams& p) {
  const int J = p.shape().window;
  const std::size_t k = p.shape().word_dim;
  std::vector<double> x(p.input_dim());
  auto vals = p.values();
  for (int o = -J; o <= J; ++o) {
    const long pos = static_cast<long>(t) + o;
    const std::size_t row =
        (pos < 0 || pos >= static_cast<long>(rows.size())) ? NeuralParams::kPadRow : rows[static_cast<std::size_t>(pos)];
    const std::size_t dst = static_cast<std::size_t>(o + J) * k;
    for (std::size_t i = 0; i < k; ++i) x[dst + i] = vals[p.word_offset() + row * k + i];
  }
  return x;
}

std::vector<double> hidden_layer(const std::vector<double>& x, const NeuralParams& p) {
  const std::size_t H = p.shape().hidden, D = p.input_dim();
  auto vals = p.values();
  std::vector<double> h(H);
  for (std::size_t r = 0; r < H; ++r) {
    double z = vals[p.hidden_bias_offset() + r];
    const double* w = vals.data() + p.hidden_offset() + r * D;
    for (std::size_t i = 0; i < D; ++i) z += w[i] * x[i];
    h[r] = std::tanh(z);
  }
  return h;
}

double output_score(const std::vector<double>& h, std::size_t unit_row, const NeuralParams& p) {
  const std::size_t H = p.shape().hidden;
  auto vals = p.values();
  const double* o = vals.data() + p.output_offset() + unit_row * H;
  double s = vals[p.output_bias_offset() + unit_row];
  for (std::size_t r = 0; r < H; ++r) s += o[r] * h[r];
  return s;
}

}  // namespace

NeuralParams::NeuralParams(const std::vector<std::string>& vocabulary, std::vector<SemanticUnit> units,
                           NeuralShape shape)
    : shape_(shape), units_(std::move(units)) {
  if (shape_.window < 0 || shape_.window > 2) throw DataError("neural window must be 0, 1 or 2");
  for (const auto& w : vocabulary) {
    if (word_index_.emplace(w, words_.size() + 2).second) words_.push_back(w);
  }
  for (std::size_t i = 0; i < units_.size(); ++i) unit_index_.emplace(units_[i], i);
  values_.assign(output_bias_offset() + units_.size(), 0.0);
}

void NeuralParams::init_uniform(std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (double& v : values_) v = dist(rng);
}

int NeuralParams::unit_row(const SemanticUnit& unit) const {
  auto it = unit_index_.find(unit);
  return it == unit_index_.end() ? -1 : static_cast<int>(it->second);
}

std::vector<std::size_t> NeuralParams::word_rows(const std::vector<std::string>& tokens) const {
  std::vector<std::size_t> rows;
  rows.reserve(tokens.size());
  for (const auto& t : tokens) {
    auto it = word_index_.find(t);
    rows.push_back(it == word_index_.end() ? kUnknownRow : it->second);
  }
  return rows;
}

double assoc_score(const std::vector<std::string>& tokens, std::size_t position, const SemanticUnit& unit,
                   const NeuralParams& params) {
  const int row = params.unit_row(unit);
  if (row < 0) throw DataError("neural scorer has no output for unit " + unit_to_string(unit));
  if (position >= tokens.size()) throw DataError("association position out of range");
  const auto rows = params.word_rows(tokens);
  return output_score(hidden_layer(window_input(rows, position, params), params),
                      static_cast<std::size_t>(row), params);
}

Matrix assoc_scores(const std::vector<std::string>& tokens, const NeuralParams& params) {
  const auto rows = params.word_rows(tokens);
  const std::size_t U = params.units().size();
  Matrix out(tokens.size(), U);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const auto h = hidden_layer(window_input(rows, t, params), params);
    for (std::size_t u = 0; u < U; ++u) out(t, u) = output_score(h, u, params);
  }
  return out;
}

std::vector<double> grad_theta(const std::vector<std::string>& tokens, const Matrix& weights,
                               const NeuralParams& params) {
  const std::size_t H = params.shape().hidden, D = params.input_dim(), k = params.shape().word_dim;
  const std::size_t U = params.units().size();
  const int J = params.shape().window;
  if (weights.rows() != tokens.size() || weights.cols() != U)
    throw DataError("grad_theta: weight matrix shape mismatch");
  std::vector<double> grad(params.values().size(), 0.0);
  auto vals = params.values();
  const auto rows = params.word_rows(tokens);

  std::vector<double> dh(H), dz(H);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    bool any = false;
    for (std::size_t u = 0; u < U && !any; ++u) any = weights(t, u) != 0.0;
    if (!any) continue;
    const auto x = window_input(rows, t, params);
    const auto h = hidden_layer(x, params);
    std::fill(dh.begin(), dh.end(), 0.0);
    for (std::size_t u = 0; u < U; ++u) {
      const double p = weights(t, u);
      if (p == 0.0) continue;
      grad[params.output_bias_offset() + u] += p;
      double* go = grad.data() + params.output_offset() + u * H;
      const double* o = vals.data() + params.output_offset() + u * H;
      for (std::size_t r = 0; r < H; ++r) {
        go[r] += p * h[r];
        dh[r] += p * o[r];
      }
    }
    for (std::size_t r = 0; r < H; ++r) dz[r] = dh[r] * (1.0 - h[r] * h[r]);
    std::vector<double> dx(D, 0.0);
    for (std::size_t r = 0; r < H; ++r) {
      if (dz[r] == 0.0) continue;
      grad[params.hidden_bias_offset() + r] += dz[r];
      double* gw = grad.data() + params.hidden_offset() + r * D;
      const double* w = vals.data() + params.hidden_offset() + r * D;
      for (std::size_t i = 0; i < D; ++i) {
        gw[i] += dz[r] * x[i];
        dx[i] += dz[r] * w[i];
      }
    }
    for (int o = -J; o <= J; ++o) {
      const long pos = static_cast<long>(t) + o;
      const std::size_t row = (pos < 0 || pos >= static_cast<long>(rows.size()))
                                  ? NeuralParams::kPadRow
                                  : rows[static_cast<std::size_t>(pos)];
      const std::size_t src = static_cast<std::size_t>(o + J) * k;
      for (std::size_t i = 0; i < k; ++i) grad[params.word_offset() + row * k + i] += dx[src + i];
    }
  }
  return grad;
}

}  // namespace semparse
