#ifndef TYPECTL_LOGIC_HPP_
#define TYPECTL_LOGIC_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "typectl/table.hpp"

namespace typectl {

// The seven substantive logic-types. Order is the tie-breaking order used
// everywhere an argmax over types is taken.
enum class LogicType : int {
  kCount = 0,
  kComparative,
  kSuperlative,
  kUnique,
  kOrdinal,
  kAggregation,
  kMajority,
};
inline constexpr int kNumTypes = 7;
inline constexpr std::array<LogicType, kNumTypes> kAllTypes = {
    LogicType::kCount,   LogicType::kComparative, LogicType::kSuperlative,
    LogicType::kUnique,  LogicType::kOrdinal,     LogicType::kAggregation,
    LogicType::kMajority};

// A control value fed to the generator: a substantive type or the mask.
struct Control {
  std::optional<LogicType> type;  // nullopt means masked
  static Control masked() { return {}; }
  static Control of(LogicType t) { return {t}; }
  bool is_masked() const { return !type.has_value(); }
  bool operator==(const Control&) const = default;
};

std::string_view type_name(LogicType t);
std::optional<LogicType> type_from_name(std::string_view name);
std::string control_name(const Control& c);  // "masked" or the type name
std::optional<Control> control_from_name(std::string_view name);

enum class CmpOp { kEq, kGt, kLt };
enum class Extremum { kHighest, kLowest };
enum class Relation { kMore, kLess };
enum class AggKind { kAverage, kTotal };
enum class Scope { kMajority, kAll };

struct Predicate {
  std::string column;
  CmpOp op;
  int value;
  bool operator==(const Predicate&) const = default;
};

struct CountForm {
  Predicate pred;
  int asserted_n;
  bool operator==(const CountForm&) const = default;
};
struct ComparativeForm {
  std::string column;
  std::string entity_a;
  std::string entity_b;
  Relation relation;
  bool operator==(const ComparativeForm&) const = default;
};
struct SuperlativeForm {
  std::string column;
  Extremum extremum;
  std::string entity;
  bool operator==(const SuperlativeForm&) const = default;
};
struct UniqueForm {
  Predicate pred;
  std::string entity;
  bool operator==(const UniqueForm&) const = default;
};
struct OrdinalForm {
  std::string column;
  int rank;
  Extremum direction;
  int asserted_value;
  bool operator==(const OrdinalForm&) const = default;
};
// Aggregates are kept in hundredths so that two-decimal rendering is exact.
struct AggregationForm {
  std::string column;
  AggKind agg;
  std::int64_t asserted_centi;
  bool operator==(const AggregationForm&) const = default;
};
struct MajorityForm {
  Predicate pred;
  Scope scope;
  bool operator==(const MajorityForm&) const = default;
};

using LogicalForm = std::variant<CountForm, ComparativeForm, SuperlativeForm, UniqueForm,
                                 OrdinalForm, AggregationForm, MajorityForm>;

LogicType type_of(const LogicalForm& form);

struct Statement {
  std::string text;
  std::vector<std::string> tokens;

  static Statement from_text(std::string_view text);
  static Statement from_tokens(std::vector<std::string> tokens);
  bool operator==(const Statement&) const = default;
};

// Throws ValidityError if the form names a missing column/entity or an
// out-of-range rank.
void validate_form(const LogicalForm& form, const Table& table);

// Exact truth value. Averages are compared in integer arithmetic:
// |sum/n - centi/100| <= 1/200.
bool evaluate(const LogicalForm& form, const Table& table);

struct TypedForm {
  LogicalForm form;
  LogicType type;
  bool operator==(const TypedForm&) const = default;
};

// Up to `budget` distinct true forms. The first draws cover every type the
// table supports; the rest are drawn from the pooled remaining candidates.
std::vector<TypedForm> enumerate_forms(const Table& table, int budget, std::uint64_t seed);

// Every true form the enumerator considers, grouped by type order.
std::vector<LogicalForm> true_candidates(const Table& table, LogicType type);

inline constexpr int kVariantsPerType = 2;

Statement realize(const LogicalForm& form, const Table& table, int variant);

enum class ParseFailureReason {
  kNoTemplateMatch,
  kUnknownColumn,
  kUnknownEntity,
  kMalformedNumber,
  kRankOutOfRange,
};
std::string_view failure_name(ParseFailureReason r);

struct ParseFailure {
  ParseFailureReason reason;
};

using ParseResult = std::variant<LogicalForm, ParseFailure>;

// Total: never throws for any input text.
ParseResult parse_statement(std::string_view text, const Table& table);

// nullopt means Unknown.
std::optional<LogicType> classify_type_rule(std::string_view text, const Table& table);

// Structural description of the surface templates, exposed for tests and
// documentation.
struct TemplateInfo {
  LogicType type;
  int variant;
  // One entry per token position: the set of literal words allowed there,
  // or empty for a free slot.
  std::vector<std::vector<std::string>> positions;
  std::string display;
};
const std::vector<TemplateInfo>& surface_templates();

// Canonical s-expression, e.g. (count (pred pts > 2) 2).
std::string to_sexpr(const LogicalForm& form);
// Throws ValidityError on malformed input.
LogicalForm from_sexpr(std::string_view text);

std::string format_centi(std::int64_t centi);
std::optional<std::int64_t> parse_centi(std::string_view text);
std::string ordinal_word(int rank);

}  // namespace typectl

#endif  // TYPECTL_LOGIC_HPP_
