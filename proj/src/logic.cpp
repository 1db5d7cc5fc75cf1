#include "semparse/logic.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <sstream>

#include "semparse/errors.hpp"

namespace semparse {

namespace {

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-';
}

DataError syntax_error(std::size_t pos, const std::string& what) {
  return DataError("logical form syntax error at position " + std::to_string(pos) + ": " + what);
}

// Untyped term as read from the surface string.
struct RawTerm {
  std::string name;
  bool quoted = false;
  std::size_t position = 0;
  std::vector<RawTerm> args;
};

class TermReader {
 public:
  explicit TermReader(std::string_view text) : text_(text) {}

  RawTerm read_all() {
    RawTerm t = read_term();
    skip_space();
    if (pos_ != text_.size()) throw syntax_error(pos_, "trailing input");
    return t;
  }

 private:
  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  RawTerm read_term() {
    skip_space();
    if (pos_ >= text_.size()) throw syntax_error(pos_, "unexpected end of input");
    RawTerm t;
    t.position = pos_;
    if (text_[pos_] == '\'') {
      std::size_t close = text_.find('\'', pos_ + 1);
      if (close == std::string_view::npos) throw syntax_error(pos_, "unterminated quoted constant");
      t.name = std::string(text_.substr(pos_ + 1, close - pos_ - 1));
      t.quoted = true;
      pos_ = close + 1;
      return t;
    }
    std::size_t start = pos_;
    while (pos_ < text_.size() && is_ident_char(text_[pos_])) ++pos_;
    if (pos_ == start) throw syntax_error(pos_, std::string("unexpected character '") + text_[pos_] + "'");
    t.name = std::string(text_.substr(start, pos_ - start));
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == '(') {
      ++pos_;
      for (;;) {
        t.args.push_back(read_term());
        skip_space();
        if (pos_ >= text_.size()) throw syntax_error(pos_, "expected ',' or ')'");
        if (text_[pos_] == ',') {
          ++pos_;
          continue;
        }
        if (text_[pos_] == ')') {
          ++pos_;
          break;
        }
        throw syntax_error(pos_, "expected ',' or ')'");
      }
    }
    return t;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

// All typed readings of `raw` whose return type matches `expected` (any type
// when empty). Stops after two readings since only uniqueness matters.
std::vector<MeaningTree> readings(const RawTerm& raw, const SignatureTable& sig,
                                  const std::optional<SemanticType>& expected) {
  std::vector<const SemanticUnit*> candidates =
      raw.quoted ? sig.constants(raw.name) : sig.functions(lowercase(raw.name), raw.args.size());
  if (candidates.empty()) {
    throw DataError("unknown " + std::string(raw.quoted ? "constant '" : "function '") + raw.name +
                    (raw.quoted ? "'" : "'/" + std::to_string(raw.args.size())) + " at position " +
                    std::to_string(raw.position));
  }
  std::vector<MeaningTree> out;
  for (const SemanticUnit* unit : candidates) {
    if (expected && unit->return_type != *expected) continue;
    std::vector<std::vector<MeaningTree>> child_options;
    bool ok = true;
    for (std::size_t i = 0; i < raw.args.size() && ok; ++i) {
      child_options.push_back(readings(raw.args[i], sig, unit->arg_types[i]));
      ok = !child_options.back().empty();
    }
    if (!ok) continue;
    // cartesian product, truncated at two complete readings
    std::vector<std::size_t> pick(child_options.size(), 0);
    for (;;) {
      MeaningTree t{*unit, {}};
      for (std::size_t i = 0; i < pick.size(); ++i) t.children.push_back(child_options[i][pick[i]]);
      out.push_back(std::move(t));
      if (out.size() >= 2) return out;
      std::size_t k = 0;
      while (k < pick.size() && ++pick[k] == child_options[k].size()) pick[k++] = 0;
      if (k == pick.size()) break;
    }
  }
  return out;
}

void serialize_into(const MeaningTree& t, std::string& out) {
  if (t.unit.is_constant) {
    out += '\'';
    out += t.unit.function;
    out += '\'';
    return;
  }
  out += t.unit.function;
  if (t.children.empty()) return;
  out += '(';
  for (std::size_t i = 0; i < t.children.size(); ++i) {
    if (i) out += ", ";
    serialize_into(t.children[i], out);
  }
  out += ')';
}

void collect_into(const MeaningTree& t, std::vector<SemanticUnit>& out) {
  out.push_back(t.unit);
  for (const auto& c : t.children) collect_into(c, out);
}

}  // namespace

std::size_t SemanticUnitHash::operator()(const SemanticUnit& u) const noexcept {
  std::size_t h = std::hash<std::string>{}(u.return_type.name);
  auto mix = [&h](std::size_t v) { h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2); };
  mix(std::hash<std::string>{}(u.function));
  for (const auto& a : u.arg_types) mix(std::hash<std::string>{}(a.name));
  mix(u.is_constant ? 1 : 0);
  return h;
}

std::string unit_to_string(const SemanticUnit& unit) {
  std::string out = unit.return_type.name + ":";
  if (unit.is_constant) return out + "'" + unit.function + "'";
  out += unit.function;
  if (!unit.arg_types.empty()) {
    out += '(';
    for (std::size_t i = 0; i < unit.arg_types.size(); ++i) {
      if (i) out += ',';
      out += unit.arg_types[i].name;
    }
    out += ')';
  }
  return out;
}

SemanticUnit parse_unit(std::string_view text) {
  auto fail = [&](const std::string& why) {
    return DataError("bad signature '" + std::string(text) + "': " + why);
  };
  std::string compact;
  bool in_quote = false;
  for (char c : text) {
    if (c == '\'') in_quote = !in_quote;
    if (!in_quote && std::isspace(static_cast<unsigned char>(c))) continue;
    compact += c;
  }
  if (in_quote) throw fail("unterminated quote");

  std::size_t colon = compact.find(':');
  if (colon == std::string::npos || colon == 0) throw fail("expected RET:function");
  SemanticUnit unit;
  unit.return_type.name = compact.substr(0, colon);
  for (char c : unit.return_type.name)
    if (!is_ident_char(c)) throw fail("bad type name");
  std::string rest = compact.substr(colon + 1);
  if (rest.size() >= 4 && rest.front() == '(' && rest.back() == ')' && rest[1] == '\'')
    rest = rest.substr(1, rest.size() - 2);  // RET:('texas')
  if (!rest.empty() && rest.front() == '\'') {
    if (rest.size() < 2 || rest.back() != '\'' || rest.find('\'', 1) != rest.size() - 1)
      throw fail("bad constant");
    unit.function = rest.substr(1, rest.size() - 2);
    unit.is_constant = true;
    return unit;
  }
  std::size_t paren = rest.find('(');
  unit.function = lowercase(rest.substr(0, paren));
  if (unit.function.empty()) throw fail("missing function name");
  for (char c : unit.function)
    if (!is_ident_char(c)) throw fail("bad function name");
  if (paren == std::string::npos) return unit;
  if (rest.back() != ')') throw fail("missing ')'");
  std::string args = rest.substr(paren + 1, rest.size() - paren - 2);
  if (args.empty()) return unit;
  std::stringstream ss(args);
  std::string a;
  while (std::getline(ss, a, ',')) {
    if (a.empty()) throw fail("empty argument type");
    for (char c : a)
      if (!is_ident_char(c)) throw fail("bad argument type");
    unit.arg_types.push_back(SemanticType{a});
  }
  if (unit.arg_types.size() > 2) throw fail("arity above 2");
  return unit;
}

bool SignatureTable::add(const SemanticUnit& unit) {
  if (contains(unit)) return false;
  by_name_.emplace(unit.function, units_.size());
  units_.push_back(unit);
  return true;
}

bool SignatureTable::contains(const SemanticUnit& unit) const {
  auto [lo, hi] = by_name_.equal_range(unit.function);
  for (auto it = lo; it != hi; ++it)
    if (units_[it->second] == unit) return true;
  return false;
}

std::vector<const SemanticUnit*> SignatureTable::functions(std::string_view function,
                                                           std::size_t arity) const {
  std::vector<const SemanticUnit*> out;
  auto [lo, hi] = by_name_.equal_range(function);
  for (auto it = lo; it != hi; ++it) {
    const SemanticUnit& u = units_[it->second];
    if (!u.is_constant && u.arity() == arity) out.push_back(&u);
  }
  return out;
}

std::vector<const SemanticUnit*> SignatureTable::constants(std::string_view literal) const {
  std::vector<const SemanticUnit*> out;
  auto [lo, hi] = by_name_.equal_range(literal);
  for (auto it = lo; it != hi; ++it) {
    const SemanticUnit& u = units_[it->second];
    if (u.is_constant) out.push_back(&u);
  }
  return out;
}

MeaningTree parse_mrl(std::string_view text, const SignatureTable& signatures) {
  RawTerm raw = TermReader(text).read_all();
  std::vector<MeaningTree> found = readings(raw, signatures, std::nullopt);
  if (found.empty())
    throw DataError("child type mismatch: no typed reading of '" + std::string(text) + "'");
  if (found.size() > 1)
    throw DataError("ambiguous typing for '" + std::string(text) + "'");
  return std::move(found.front());
}

std::string serialize_mrl(const MeaningTree& tree) {
  std::string out;
  serialize_into(tree, out);
  return out;
}

std::vector<SemanticUnit> collect_units(const MeaningTree& tree) {
  std::vector<SemanticUnit> out;
  collect_into(tree, out);
  return out;
}

std::size_t node_count(const MeaningTree& tree) {
  std::size_t n = 1;
  for (const auto& c : tree.children) n += node_count(c);
  return n;
}

bool trees_equal(const MeaningTree& a, const MeaningTree& b) {
  return serialize_mrl(a) == serialize_mrl(b);
}

void validate_tree(const MeaningTree& tree) {
  const SemanticUnit& u = tree.unit;
  if (u.return_type.name.empty()) throw DataError("unit with empty return type");
  if (u.arity() > 2) throw DataError("unit arity above 2: " + unit_to_string(u));
  if (u.is_constant && u.arity() != 0) throw DataError("constant with arguments: " + unit_to_string(u));
  if (tree.children.size() != u.arity())
    throw DataError("node " + unit_to_string(u) + " has " + std::to_string(tree.children.size()) +
                    " children");
  for (std::size_t i = 0; i < tree.children.size(); ++i) {
    if (tree.children[i].unit.return_type != u.arg_types[i])
      throw DataError("child " + std::to_string(i) + " of " + unit_to_string(u) + " has type " +
                      tree.children[i].unit.return_type.name);
    validate_tree(tree.children[i]);
  }
}

}  // namespace semparse
