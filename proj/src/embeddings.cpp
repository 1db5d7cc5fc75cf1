#include "semparse/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "semparse/errors.hpp"

namespace semparse {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void rotate_rows(Matrix& m, std::size_t p, std::size_t q, double c, double s) {
  auto rp = m.row(p);
  auto rq = m.row(q);
  for (std::size_t i = 0; i < rp.size(); ++i) {
    const double a = rp[i], b = rq[i];
    rp[i] = c * a - s * b;
    rq[i] = s * a + c * b;
  }
}

// Replaces rows flagged in `deficient` with unit vectors orthogonal to all
// other rows.
void complete_basis(Matrix& rows, const std::vector<bool>& deficient) {
  const std::size_t len = rows.cols();
  std::vector<bool> accepted(rows.rows());
  for (std::size_t i = 0; i < rows.rows(); ++i) accepted[i] = !deficient[i];
  auto residual = [&](std::size_t axis) {
    std::vector<double> cand(len, 0.0);
    cand[axis] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t j = 0; j < rows.rows(); ++j) {
        if (!accepted[j]) continue;
        auto rj = rows.row(j);
        const double proj = dot(cand, rj);
        for (std::size_t k = 0; k < len; ++k) cand[k] -= proj * rj[k];
      }
    }
    return cand;
  };
  std::size_t next_axis = 0;
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    if (!deficient[i]) continue;
    // First axis with a comfortable residual, else the best one seen.
    std::vector<double> best;
    double best_norm = 0.0;
    for (std::size_t tried = 0; tried < len; ++tried, next_axis = (next_axis + 1) % len) {
      std::vector<double> cand = residual(next_axis);
      const double norm = std::sqrt(dot(cand, cand));
      if (norm > best_norm) {
        best_norm = norm;
        best = std::move(cand);
      }
      if (norm > 0.5) break;
    }
    next_axis = (next_axis + 1) % len;
    if (best_norm > 1e-6) {
      auto ri = rows.row(i);
      for (std::size_t k = 0; k < len; ++k) ri[k] = best[k] / best_norm;
      accepted[i] = true;
    }
    if (!accepted[i]) throw NumericError("svd: cannot complete orthonormal basis");
  }
}

void write_string(std::ostream& out, const std::string& s) {
  const auto len = static_cast<std::uint32_t>(s.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  std::uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  std::string s(len, '\0');
  in.read(s.data(), len);
  return s;
}

constexpr char kBinaryMagic[8] = {'S', 'P', 'E', 'M', 'B', '0', '0', '1'};

}  // namespace

CoocMatrix build_cooc(const Corpus& aux, CoocMode mode) {
  CoocMatrix m;
  // sparse accumulation first; dimensions are only known at the end
  std::map<std::pair<std::size_t, std::size_t>, double> cells;
  for (const auto& inst : aux.instances) {
    std::map<std::size_t, double> unit_mult;
    for (const auto& u : collect_units(inst.tree)) {
      auto [it, fresh] = m.unit_index.emplace(u, m.units.size());
      if (fresh) m.units.push_back(u);
      unit_mult[it->second] += 1.0;
    }
    std::map<std::size_t, double> word_freq;
    for (const auto& w : inst.tokens) {
      auto [it, fresh] = m.word_index.emplace(w, m.words.size());
      if (fresh) m.words.push_back(w);
      word_freq[it->second] += 1.0;
    }
    for (const auto& [u, cu] : unit_mult)
      for (const auto& [w, cw] : word_freq)
        cells[{u, w}] += (mode == CoocMode::kBinary) ? 1.0 : cu * cw;
  }
  m.counts = Matrix(m.units.size(), m.words.size());
  for (const auto& [key, v] : cells) m.counts(key.first, key.second) = v;
  return m;
}

SvdResult svd(const Matrix& input) {
  const std::size_t m = input.rows(), n = input.cols();
  if (m == 0 || n == 0) throw DataError("svd: empty matrix");
  for (double v : input.data())
    if (!std::isfinite(v)) throw NumericError("svd: non-finite matrix entry");

  // Work on the rows of the shorter side: k vectors of length len.
  const bool wide = m <= n;
  Matrix work = wide ? input : input.transposed();
  const std::size_t k = work.rows();
  Matrix rot(k, k);
  for (std::size_t i = 0; i < k; ++i) rot(i, i) = 1.0;

  constexpr double kTol = 1e-15;
  constexpr int kMaxSweeps = 80;
  std::vector<double> sq(k);
  for (std::size_t i = 0; i < k; ++i) sq[i] = dot(work.row(i), work.row(i));
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < k; ++p) {
      for (std::size_t q = p + 1; q < k; ++q) {
        const double alpha = sq[p], beta = sq[q];
        if (alpha == 0.0 || beta == 0.0) continue;
        const double gamma = dot(work.row(p), work.row(q));
        if (std::abs(gamma) <= kTol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        rotate_rows(work, p, q, c, s);
        rotate_rows(rot, p, q, c, s);
        sq[p] = dot(work.row(p), work.row(p));
        sq[q] = dot(work.row(q), work.row(q));
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sigma(k);
  for (std::size_t i = 0; i < k; ++i) sigma[i] = std::sqrt(dot(work.row(i), work.row(i)));
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sigma[a] > sigma[b]; });

  const double smax = sigma[order[0]];
  const std::size_t len = work.cols();
  Matrix long_vecs(k, len);  // rows: normalized work rows
  Matrix short_vecs(k, k);   // rows: accumulated rotations
  std::vector<bool> deficient(k, false);
  SvdResult out;
  out.singular_values.resize(k);
  for (std::size_t r = 0; r < k; ++r) {
    const std::size_t i = order[r];
    out.singular_values[r] = sigma[i];
    auto dst = long_vecs.row(r);
    auto src = work.row(i);
    if (sigma[i] > 0.0 && sigma[i] > smax * 1e-13) {
      for (std::size_t j = 0; j < len; ++j) dst[j] = src[j] / sigma[i];
    } else {
      deficient[r] = true;
    }
    auto rs = rot.row(i);
    std::copy(rs.begin(), rs.end(), short_vecs.row(r).begin());
  }
  complete_basis(long_vecs, deficient);

  if (wide) {
    out.u = short_vecs.transposed();  // m x m
    out.v = long_vecs.transposed();   // n x m
  } else {
    out.u = long_vecs.transposed();   // m x n
    out.v = short_vecs.transposed();  // n x n
  }
  return out;
}

UnitEmbeddings make_embeddings(std::vector<SemanticUnit> units, Matrix vectors) {
  if (units.size() != vectors.rows()) throw DataError("embedding rows do not match unit count");
  UnitEmbeddings emb;
  emb.units = std::move(units);
  emb.vectors = std::move(vectors);
  for (std::size_t i = 0; i < emb.units.size(); ++i) {
    if (!emb.unit_index.emplace(emb.units[i], i).second)
      throw DataError("duplicate embedding unit " + unit_to_string(emb.units[i]));
  }
  for (double v : emb.vectors.data())
    if (!std::isfinite(v)) throw NumericError("non-finite embedding value");
  return emb;
}

UnitEmbeddings truncate_embed(const SvdResult& result, const std::vector<SemanticUnit>& units,
                              std::size_t rank) {
  const std::size_t r = result.singular_values.size();
  if (rank < 1 || rank > r)
    throw DataError("rank " + std::to_string(rank) + " out of range [1, " + std::to_string(r) + "]");
  if (units.size() != result.u.rows()) throw DataError("unit list does not match svd rows");
  Matrix vecs(result.u.rows(), rank);
  for (std::size_t i = 0; i < vecs.rows(); ++i)
    for (std::size_t j = 0; j < rank; ++j) vecs(i, j) = result.u(i, j) * result.singular_values[j];
  return make_embeddings(units, std::move(vecs));
}

std::vector<double> lookup(const UnitEmbeddings& emb, const SemanticUnit& unit) {
  auto it = emb.unit_index.find(unit);
  if (it == emb.unit_index.end()) return std::vector<double>(emb.rank(), 0.0);
  auto row = emb.vectors.row(it->second);
  return {row.begin(), row.end()};
}

void export_embeddings(const UnitEmbeddings& emb, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << std::setprecision(17);
  for (std::size_t i = 0; i < emb.units.size(); ++i) {
    out << unit_to_string(emb.units[i]);
    for (double v : emb.vectors.row(i)) out << '\t' << v;
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
}

UnitEmbeddings load_embeddings_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<SemanticUnit> units;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    std::getline(ss, field, '\t');
    units.push_back(parse_unit(field));
    std::vector<double> row;
    while (std::getline(ss, field, '\t')) {
      try {
        row.push_back(std::stod(field));
      } catch (const std::exception&) {
        throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + field + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": inconsistent dimension");
    if (row.empty()) throw DataError(path.string() + ":" + std::to_string(lineno) + ": no values");
    rows.push_back(std::move(row));
  }
  Matrix vecs(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(rows[i].begin(), rows[i].end(), vecs.row(i).begin());
  return make_embeddings(std::move(units), std::move(vecs));
}

void save_embeddings_binary(const UnitEmbeddings& emb, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(kBinaryMagic, sizeof kBinaryMagic);
  const std::uint64_t rows = emb.units.size(), rank = emb.rank();
  out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
  out.write(reinterpret_cast<const char*>(&rank), sizeof rank);
  for (std::size_t i = 0; i < emb.units.size(); ++i) {
    write_string(out, unit_to_string(emb.units[i]));
    auto row = emb.vectors.row(i);
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(rank * sizeof(double)));
  }
  if (!out) throw DataError("write failed: " + path.string());
}

UnitEmbeddings load_embeddings_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  char magic[sizeof kBinaryMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kBinaryMagic, sizeof magic) != 0)
    throw DataError(path.string() + ": not a binary embedding file");
  std::uint64_t rows = 0, rank = 0;
  in.read(reinterpret_cast<char*>(&rows), sizeof rows);
  in.read(reinterpret_cast<char*>(&rank), sizeof rank);
  std::vector<SemanticUnit> units;
  Matrix vecs(rows, rank);
  for (std::size_t i = 0; i < rows && in; ++i) {
    units.push_back(parse_unit(read_string(in)));
    in.read(reinterpret_cast<char*>(vecs.row(i).data()), static_cast<std::streamsize>(rank * sizeof(double)));
  }
  if (!in) throw DataError(path.string() + ": truncated binary embedding file");
  return make_embeddings(std::move(units), std::move(vecs));
}

}  // namespace semparse
