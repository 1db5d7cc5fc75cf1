#ifndef SEMPARSE_EMBEDDINGS_HPP
#define SEMPARSE_EMBEDDINGS_HPP

// Cross-lingual distributed representations of semantic units.
//
// Rows of a semantics-word co-occurrence matrix M (units x words, counted
// over every auxiliary-language instance) are embedded with a truncated SVD:
// M = U S V^T, and unit i gets row i of U[:, :d] * diag(s_1 .. s_d).

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "semparse/corpus.hpp"
#include "semparse/logic.hpp"
#include "semparse/matrix.hpp"

namespace semparse {

enum class CoocMode {
  kFrequency,  // unit multiplicity x token frequency
  kBinary,     // unit presence x token presence
};

struct CoocMatrix {
  std::vector<SemanticUnit> units;  // row order (first occurrence)
  std::unordered_map<SemanticUnit, std::size_t, SemanticUnitHash> unit_index;
  std::vector<std::string> words;   // column order (first occurrence)
  std::unordered_map<std::string, std::size_t> word_index;
  Matrix counts;
};

CoocMatrix build_cooc(const Corpus& aux, CoocMode mode = CoocMode::kFrequency);

// Thin SVD, r = min(m, n): u is m x r, v is n x r, both with orthonormal
// columns; singular values non-increasing. When m <= n this is exactly the
// m x m U and n x m V of M = U S V^T.
struct SvdResult {
  Matrix u;
  std::vector<double> singular_values;
  Matrix v;
};

// One-sided Jacobi on the smaller side. Equal singular values keep their
// original column order. Throws NumericError on non-finite input.
SvdResult svd(const Matrix& m);

struct UnitEmbeddings {
  std::vector<SemanticUnit> units;
  std::unordered_map<SemanticUnit, std::size_t, SemanticUnitHash> unit_index;
  Matrix vectors;  // units x rank

  std::size_t rank() const { return vectors.cols(); }
};

// Rows of U[:, :d] * diag(s_1..s_d), keyed by the co-occurrence rows.
UnitEmbeddings truncate_embed(const SvdResult& svd, const std::vector<SemanticUnit>& units,
                              std::size_t rank);

// Stored row, or a zero vector for units that never occurred in the
// auxiliary data.
std::vector<double> lookup(const UnitEmbeddings& emb, const SemanticUnit& unit);

UnitEmbeddings make_embeddings(std::vector<SemanticUnit> units, Matrix vectors);

// TSV: canonical unit string, then rank values with 9 significant digits.
void export_embeddings(const UnitEmbeddings& emb, const std::filesystem::path& path);
UnitEmbeddings load_embeddings_tsv(const std::filesystem::path& path);

// Full-precision binary dump.
void save_embeddings_binary(const UnitEmbeddings& emb, const std::filesystem::path& path);
UnitEmbeddings load_embeddings_binary(const std::filesystem::path& path);

}  // namespace semparse

#endif
