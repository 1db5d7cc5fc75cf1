#ifndef SEMPARSE_CORPUS_HPP
#define SEMPARSE_CORPUS_HPP

// Multilingual (sentence, logical form) corpora.
//
// File layout, three sections separated by a line "%%":
//
//   lang en
//   lang de
//   %%
//   QUERY:answer(STATE)
//   STATE:state(STATE)
//   ...
//   %%
//   id 1 en
//   nl: which states have a river ?
//   mrl: answer(state(loc(river(all))))
//
// Blank lines and lines starting with '#' are ignored.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "semparse/logic.hpp"

namespace semparse {

struct Instance {
  std::int64_t id = 0;
  std::string language;
  std::vector<std::string> tokens;
  MeaningTree tree;
};

struct Corpus {
  std::vector<Instance> instances;
  SignatureTable signatures;
  std::set<std::string> languages;

  std::size_t count(std::string_view language) const;
};

struct SplitSpec {
  std::vector<std::int64_t> train_ids;
  std::vector<std::int64_t> dev_ids;
  std::vector<std::int64_t> test_ids;
  std::string language;
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kStandardTrainSize = 600;
inline constexpr std::size_t kStandardTestSize = 280;

// Whitespace split followed by lowercasing.
std::vector<std::string> tokenize(std::string_view sentence);

Corpus read_corpus(std::istream& in, const std::string& source_name = "<stream>");
Corpus load_corpus(const std::filesystem::path& path);
void write_corpus(std::ostream& out, const Corpus& corpus);

// First `train_size` instances of `language` in file order go to training,
// the next `test_size` to test.
SplitSpec standard_split(const Corpus& corpus, const std::string& language,
                         std::size_t train_size = kStandardTrainSize,
                         std::size_t test_size = kStandardTestSize);

// Moves a uniformly chosen 20% of the training ids to dev (600 -> 480/120).
SplitSpec dev_split(const SplitSpec& split, std::uint64_t seed);

// All instances whose language differs from `target`.
Corpus auxiliary_corpus(const Corpus& corpus, const std::string& target);

// Instances of `language` with the given ids, in id-list order.
std::vector<Instance> select(const Corpus& corpus, const std::string& language,
                             const std::vector<std::int64_t>& ids);

}  // namespace semparse

#endif
