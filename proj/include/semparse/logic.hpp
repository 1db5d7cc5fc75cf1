#ifndef SEMPARSE_LOGIC_HPP
#define SEMPARSE_LOGIC_HPP

// Variable-free tree-shaped logical forms (GeoQuery FunQL style):
//
//   answer(exclude(river(all), traverse(stateid('texas'))))
//
// Every node is a typed semantic unit "RET:function(ARG1,ARG2)". Constants
// such as 'texas' are arity-0 units of their own.

#include <compare>
#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace semparse {

struct SemanticType {
  std::string name;

  auto operator<=>(const SemanticType&) const = default;
};

struct SemanticUnit {
  SemanticType return_type;
  // Lowercased function name, or the literal text (without quotes) for
  // constants.
  std::string function;
  std::vector<SemanticType> arg_types;
  bool is_constant = false;

  std::size_t arity() const { return arg_types.size(); }

  auto operator<=>(const SemanticUnit&) const = default;
};

struct SemanticUnitHash {
  std::size_t operator()(const SemanticUnit& u) const noexcept;
};

// "RET:function(ARG1,ARG2)", "RET:all", "RET:'texas'".
std::string unit_to_string(const SemanticUnit& unit);

// Inverse of unit_to_string. Also accepts "RET:all()" for arity 0.
SemanticUnit parse_unit(std::string_view text);

struct MeaningTree {
  SemanticUnit unit;
  std::vector<MeaningTree> children;

  bool operator==(const MeaningTree&) const = default;
};

// Maps surface names to typed units. Several units may share a function
// name and arity; parse_mrl disambiguates them by expected type.
class SignatureTable {
 public:
  // Returns false when the unit was already present.
  bool add(const SemanticUnit& unit);

  bool contains(const SemanticUnit& unit) const;
  std::size_t size() const { return units_.size(); }
  const std::vector<SemanticUnit>& units() const { return units_; }

  // Non-constant units named `function` with the given arity.
  std::vector<const SemanticUnit*> functions(std::string_view function,
                                             std::size_t arity) const;
  std::vector<const SemanticUnit*> constants(std::string_view literal) const;

 private:
  std::vector<SemanticUnit> units_;
  std::multimap<std::string, std::size_t, std::less<>> by_name_;
};

// Parses `term := IDENT | IDENT '(' term (',' term)* ')' | QUOTED` and
// resolves every node against the signature table. Throws DataError on
// syntax errors (with position), unknown function/arity, type mismatch or an
// ambiguous typing.
MeaningTree parse_mrl(std::string_view text, const SignatureTable& signatures);

// Canonical form: lowercase function names, single-quoted constants, ", "
// between arguments.
std::string serialize_mrl(const MeaningTree& tree);

// Preorder, with multiplicity.
std::vector<SemanticUnit> collect_units(const MeaningTree& tree);

std::size_t node_count(const MeaningTree& tree);

bool trees_equal(const MeaningTree& a, const MeaningTree& b);

// Checks arity and child-type consistency; throws DataError on violation.
void validate_tree(const MeaningTree& tree);

}  // namespace semparse

#endif
