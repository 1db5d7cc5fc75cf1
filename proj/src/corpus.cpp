#include "semparse/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "semparse/errors.hpp"

namespace semparse {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

}  // namespace

std::size_t Corpus::count(std::string_view language) const {
  return static_cast<std::size_t>(std::count_if(
      instances.begin(), instances.end(), [&](const Instance& i) { return i.language == language; }));
}

std::vector<std::string> tokenize(std::string_view sentence) {
  std::vector<std::string> out;
  std::istringstream ss{std::string(sentence)};
  std::string tok;
  while (ss >> tok) {
    std::transform(tok.begin(), tok.end(), tok.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    out.push_back(std::move(tok));
  }
  return out;
}

Corpus read_corpus(std::istream& in, const std::string& source_name) {
  Corpus corpus;
  std::string line;
  std::size_t lineno = 0;
  int section = 0;
  auto fail = [&](const std::string& why) {
    return DataError(source_name + ":" + std::to_string(lineno) + ": " + why);
  };

  // pending instance record
  int expect = 0;  // 0 = id line, 1 = nl line, 2 = mrl line
  Instance current;
  std::set<std::pair<std::string, std::int64_t>> seen;

  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t == "%%") {
      if (section == 2) throw fail("unexpected section separator");
      ++section;
      continue;
    }
    if (section == 0) {
      std::istringstream ss(t);
      std::string kw, tag, extra;
      if (!(ss >> kw >> tag) || kw != "lang" || (ss >> extra)) throw fail("expected 'lang <tag>'");
      corpus.languages.insert(tag);
    } else if (section == 1) {
      try {
        corpus.signatures.add(parse_unit(t));
      } catch (const DataError& e) {
        throw fail(e.what());
      }
    } else {
      if (expect == 0) {
        std::istringstream ss(t);
        std::string kw, lang, extra;
        std::int64_t id = 0;
        if (!(ss >> kw >> id >> lang) || kw != "id" || (ss >> extra)) throw fail("expected 'id <int> <lang>'");
        if (!corpus.languages.count(lang)) throw fail("language '" + lang + "' not declared in header");
        if (!seen.emplace(lang, id).second)
          throw fail("duplicate id " + std::to_string(id) + " for language " + lang);
        current = Instance{};
        current.id = id;
        current.language = lang;
        expect = 1;
      } else if (expect == 1) {
        if (!starts_with(t, "nl:")) throw fail("expected 'nl: <tokens>'");
        current.tokens = tokenize(std::string_view(t).substr(3));
        if (current.tokens.empty()) throw fail("empty sentence");
        expect = 2;
      } else {
        if (!starts_with(t, "mrl:")) throw fail("expected 'mrl: <logical form>'");
        try {
          current.tree = parse_mrl(std::string_view(t).substr(4), corpus.signatures);
        } catch (const DataError& e) {
          throw fail(e.what());
        }
        corpus.instances.push_back(std::move(current));
        expect = 0;
      }
    }
  }
  if (expect != 0) throw fail("truncated instance record");
  if (section == 1) throw fail("missing instance section");
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file " + path.string());
  return read_corpus(in, path.string());
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& l : corpus.languages) out << "lang " << l << '\n';
  out << "%%\n";
  for (const auto& u : corpus.signatures.units()) out << unit_to_string(u) << '\n';
  out << "%%\n";
  for (const auto& inst : corpus.instances) {
    out << "id " << inst.id << ' ' << inst.language << "\nnl:";
    for (const auto& t : inst.tokens) out << ' ' << t;
    out << "\nmrl: " << serialize_mrl(inst.tree) << '\n';
  }
}

SplitSpec standard_split(const Corpus& corpus, const std::string& language, std::size_t train_size,
                         std::size_t test_size) {
  SplitSpec split;
  split.language = language;
  for (const auto& inst : corpus.instances) {
    if (inst.language != language) continue;
    if (split.train_ids.size() < train_size)
      split.train_ids.push_back(inst.id);
    else if (split.test_ids.size() < test_size)
      split.test_ids.push_back(inst.id);
  }
  if (split.train_ids.size() + split.test_ids.size() < train_size + test_size) {
    throw DataError("language '" + language + "' has " + std::to_string(corpus.count(language)) +
                    " instances, split needs " + std::to_string(train_size + test_size));
  }
  return split;
}

SplitSpec dev_split(const SplitSpec& split, std::uint64_t seed) {
  SplitSpec out;
  out.language = split.language;
  out.test_ids = split.test_ids;
  out.seed = seed;

  const std::size_t n = split.train_ids.size();
  const std::size_t learn = (4 * n + 2) / 5;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> learn_pos(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(learn));
  std::vector<std::size_t> dev_pos(order.begin() + static_cast<std::ptrdiff_t>(learn), order.end());
  std::sort(learn_pos.begin(), learn_pos.end());
  std::sort(dev_pos.begin(), dev_pos.end());
  for (std::size_t p : learn_pos) out.train_ids.push_back(split.train_ids[p]);
  for (std::size_t p : dev_pos) out.dev_ids.push_back(split.train_ids[p]);
  // carried over dev ids stay in dev
  out.dev_ids.insert(out.dev_ids.end(), split.dev_ids.begin(), split.dev_ids.end());
  return out;
}

Corpus auxiliary_corpus(const Corpus& corpus, const std::string& target) {
  Corpus aux;
  aux.signatures = corpus.signatures;
  for (const auto& l : corpus.languages)
    if (l != target) aux.languages.insert(l);
  for (const auto& inst : corpus.instances)
    if (inst.language != target) aux.instances.push_back(inst);
  return aux;
}

std::vector<Instance> select(const Corpus& corpus, const std::string& language,
                             const std::vector<std::int64_t>& ids) {
  std::map<std::int64_t, const Instance*> by_id;
  for (const auto& inst : corpus.instances)
    if (inst.language == language) by_id.emplace(inst.id, &inst);
  std::vector<Instance> out;
  out.reserve(ids.size());
  for (auto id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end())
      throw DataError("no instance " + std::to_string(id) + " for language " + language);
    out.push_back(*it->second);
  }
  return out;
}

}  // namespace semparse
