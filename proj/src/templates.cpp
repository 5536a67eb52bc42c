// Surface realization and its exact inverse. Every type has two fixed-length
// templates; literal and closed-class positions make the 14 templates
// pairwise disjoint, so at most one template matches any token sequence.

#include <array>
#include <charconv>
#include <tuple>

#include "typectl/common.hpp"
#include "typectl/logic.hpp"

namespace typectl {

namespace {

enum class Slot {
  kLiteral,
  kColumn,
  kEntityA,  // also the single entity of superlative/unique
  kEntityB,
  kCountN,
  kValue,
  kDecimal,
  kRankWord,
  kOp,  // two tokens: greater than | less than | equal to
  kDir,
  kRel,
  kCmp,
  kAgg,
  kScope,
};

struct Elem {
  Slot slot;
  std::string literal;
};

struct Template {
  LogicType type;
  int variant;
  std::string display;
  std::vector<Elem> elems;
};

const std::array<std::string_view, 10> kOrdinalWords = {
    "first", "second", "third", "fourth", "fifth",
    "sixth", "seventh", "eighth", "ninth", "tenth"};

std::vector<Elem> compile(std::string_view pattern) {
  std::vector<Elem> out;
  for (const auto& tok : split_ws(pattern)) {
    if (tok == "{C}") out.push_back({Slot::kColumn, {}});
    else if (tok == "{A}" || tok == "{E}") out.push_back({Slot::kEntityA, {}});
    else if (tok == "{B}") out.push_back({Slot::kEntityB, {}});
    else if (tok == "{N}") out.push_back({Slot::kCountN, {}});
    else if (tok == "{V}") out.push_back({Slot::kValue, {}});
    else if (tok == "{X}") out.push_back({Slot::kDecimal, {}});
    else if (tok == "{K}") out.push_back({Slot::kRankWord, {}});
    else if (tok == "{OP}") out.push_back({Slot::kOp, {}});
    else if (tok == "{DIR}") out.push_back({Slot::kDir, {}});
    else if (tok == "{REL}") out.push_back({Slot::kRel, {}});
    else if (tok == "{CMP}") out.push_back({Slot::kCmp, {}});
    else if (tok == "{AGG}") out.push_back({Slot::kAgg, {}});
    else if (tok == "{SCOPE}") out.push_back({Slot::kScope, {}});
    else out.push_back({Slot::kLiteral, tok});
  }
  return out;
}

const std::vector<Template>& templates() {
  static const std::vector<Template> all = [] {
    const std::vector<std::tuple<LogicType, int, const char*>> defs = {
        {LogicType::kCount, 0, "there are {N} rows where {C} is {OP} {V}"},
        {LogicType::kCount, 1, "exactly {N} rows have {C} {OP} {V}"},
        {LogicType::kComparative, 0, "{A} has {REL} {C} than {B}"},
        {LogicType::kComparative, 1, "the {C} of {A} is {CMP} than that of {B}"},
        {LogicType::kSuperlative, 0, "{E} has the {DIR} {C}"},
        {LogicType::kSuperlative, 1, "the {DIR} {C} belongs to {E}"},
        {LogicType::kUnique, 0, "{E} is the only row where {C} is {OP} {V}"},
        {LogicType::kUnique, 1, "only {E} has {C} {OP} {V}"},
        {LogicType::kOrdinal, 0, "the {K} {DIR} {C} is {V}"},
        {LogicType::kOrdinal, 1, "{V} is the {K} {DIR} value of {C}"},
        {LogicType::kAggregation, 0, "the {AGG} {C} is {X}"},
        {LogicType::kAggregation, 1, "{C} has a {AGG} of {X} across all rows"},
        {LogicType::kMajority, 0, "{SCOPE} rows have {C} {OP} {V}"},
        {LogicType::kMajority, 1, "for {SCOPE} of the rows {C} is {OP} {V}"},
    };
    std::vector<Template> out;
    for (const auto& [type, variant, pattern] : defs)
      out.push_back({type, variant, pattern, compile(pattern)});
    return out;
  }();
  return all;
}

const Template& find_template(LogicType type, int variant) {
  for (const auto& t : templates())
    if (t.type == type && t.variant == variant) return t;
  throw RangeError("no template");
}

std::string_view op_first(CmpOp op) {
  switch (op) {
    case CmpOp::kGt: return "greater";
    case CmpOp::kLt: return "less";
    case CmpOp::kEq: return "equal";
  }
  return "";
}
std::string_view op_second(CmpOp op) { return op == CmpOp::kEq ? "to" : "than"; }

// Slot values of a form, filled per type.
struct Fill {
  std::string column, entity_a, entity_b;
  int count_n = 0, value = 0, rank = 0;
  std::int64_t centi = 0;
  CmpOp op = CmpOp::kEq;
  Extremum dir = Extremum::kHighest;
  Relation rel = Relation::kMore;
  AggKind agg = AggKind::kAverage;
  Scope scope = Scope::kMajority;
};

Fill fill_of(const LogicalForm& form) {
  Fill f;
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, CountForm>) {
          f.column = x.pred.column, f.op = x.pred.op, f.value = x.pred.value;
          f.count_n = x.asserted_n;
        } else if constexpr (std::is_same_v<T, ComparativeForm>) {
          f.column = x.column, f.entity_a = x.entity_a, f.entity_b = x.entity_b;
          f.rel = x.relation;
        } else if constexpr (std::is_same_v<T, SuperlativeForm>) {
          f.column = x.column, f.dir = x.extremum, f.entity_a = x.entity;
        } else if constexpr (std::is_same_v<T, UniqueForm>) {
          f.column = x.pred.column, f.op = x.pred.op, f.value = x.pred.value;
          f.entity_a = x.entity;
        } else if constexpr (std::is_same_v<T, OrdinalForm>) {
          f.column = x.column, f.rank = x.rank, f.dir = x.direction;
          f.value = x.asserted_value;
        } else if constexpr (std::is_same_v<T, AggregationForm>) {
          f.column = x.column, f.agg = x.agg, f.centi = x.asserted_centi;
        } else if constexpr (std::is_same_v<T, MajorityForm>) {
          f.column = x.pred.column, f.op = x.pred.op, f.value = x.pred.value;
          f.scope = x.scope;
        }
      },
      form);
  return f;
}

LogicalForm form_of(LogicType type, const Fill& f) {
  switch (type) {
    case LogicType::kCount: return CountForm{{f.column, f.op, f.value}, f.count_n};
    case LogicType::kComparative: return ComparativeForm{f.column, f.entity_a, f.entity_b, f.rel};
    case LogicType::kSuperlative: return SuperlativeForm{f.column, f.dir, f.entity_a};
    case LogicType::kUnique: return UniqueForm{{f.column, f.op, f.value}, f.entity_a};
    case LogicType::kOrdinal: return OrdinalForm{f.column, f.rank, f.dir, f.value};
    case LogicType::kAggregation: return AggregationForm{f.column, f.agg, f.centi};
    case LogicType::kMajority: return MajorityForm{{f.column, f.op, f.value}, f.scope};
  }
  throw RangeError("bad type");
}

int width(const Elem& e) { return e.slot == Slot::kOp ? 2 : 1; }

bool parse_int(std::string_view s, int& out) {
  if (s.empty() || s.size() > 9) return false;
  for (char c : s)
    if (c < '0' || c > '9') return false;
  std::from_chars(s.data(), s.data() + s.size(), out);
  return true;
}

// Structural match: literal and closed-class positions only.
bool matches_shape(const Template& t, const std::vector<std::string>& toks) {
  std::size_t len = 0;
  for (const auto& e : t.elems) len += width(e);
  if (len != toks.size()) return false;
  std::size_t i = 0;
  for (const auto& e : t.elems) {
    const std::string& w = toks[i];
    switch (e.slot) {
      case Slot::kLiteral:
        if (w != e.literal) return false;
        break;
      case Slot::kOp: {
        const std::string& w2 = toks[i + 1];
        const bool ok = (w == "greater" && w2 == "than") || (w == "less" && w2 == "than") ||
                        (w == "equal" && w2 == "to");
        if (!ok) return false;
        break;
      }
      case Slot::kDir:
        if (w != "highest" && w != "lowest") return false;
        break;
      case Slot::kRel:
        if (w != "more" && w != "less") return false;
        break;
      case Slot::kCmp:
        if (w != "higher" && w != "lower") return false;
        break;
      case Slot::kAgg:
        if (w != "average" && w != "total") return false;
        break;
      case Slot::kScope:
        if (w != "most" && w != "all") return false;
        break;
      default:
        break;
    }
    i += width(e);
  }
  return true;
}

ParseResult resolve(const Template& t, const std::vector<std::string>& toks, const Table& table) {
  Fill f;
  // Slot tokens by kind; resolution order fixes which failure is reported.
  std::size_t i = 0;
  std::vector<std::pair<Slot, std::string>> slots;
  for (const auto& e : t.elems) {
    const std::string& w = toks[i];
    switch (e.slot) {
      case Slot::kOp:
        f.op = w == "greater" ? CmpOp::kGt : w == "less" ? CmpOp::kLt : CmpOp::kEq;
        break;
      case Slot::kDir: f.dir = w == "highest" ? Extremum::kHighest : Extremum::kLowest; break;
      case Slot::kRel: f.rel = w == "more" ? Relation::kMore : Relation::kLess; break;
      case Slot::kCmp: f.rel = w == "higher" ? Relation::kMore : Relation::kLess; break;
      case Slot::kAgg: f.agg = w == "average" ? AggKind::kAverage : AggKind::kTotal; break;
      case Slot::kScope: f.scope = w == "most" ? Scope::kMajority : Scope::kAll; break;
      case Slot::kLiteral: break;
      default: slots.emplace_back(e.slot, w);
    }
    i += width(e);
  }
  for (const auto& [slot, w] : slots)
    if (slot == Slot::kColumn) {
      if (!table.find_numeric_column(w)) return ParseFailure{ParseFailureReason::kUnknownColumn};
      f.column = w;
    }
  for (const auto& [slot, w] : slots)
    if (slot == Slot::kEntityA || slot == Slot::kEntityB) {
      if (!table.find_entity(w)) return ParseFailure{ParseFailureReason::kUnknownEntity};
      (slot == Slot::kEntityA ? f.entity_a : f.entity_b) = w;
    }
  for (const auto& [slot, w] : slots) {
    if (slot == Slot::kCountN || slot == Slot::kValue) {
      int v = 0;
      if (!parse_int(w, v)) return ParseFailure{ParseFailureReason::kMalformedNumber};
      (slot == Slot::kCountN ? f.count_n : f.value) = v;
    } else if (slot == Slot::kDecimal) {
      auto c = parse_centi(w);
      if (!c) return ParseFailure{ParseFailureReason::kMalformedNumber};
      f.centi = *c;
    } else if (slot == Slot::kRankWord) {
      int k = 0;
      for (std::size_t j = 0; j < kOrdinalWords.size(); ++j)
        if (kOrdinalWords[j] == w) k = static_cast<int>(j) + 1;
      if (k == 0) return ParseFailure{ParseFailureReason::kMalformedNumber};
      f.rank = k;
    }
  }
  if (t.type == LogicType::kOrdinal && f.rank > table.row_count())
    return ParseFailure{ParseFailureReason::kRankOutOfRange};
  return form_of(t.type, f);
}

}  // namespace

std::string ordinal_word(int rank) {
  if (rank >= 1 && rank <= static_cast<int>(kOrdinalWords.size()))
    return std::string(kOrdinalWords[rank - 1]);
  throw RangeError("no ordinal word for rank " + std::to_string(rank));
}

Statement realize(const LogicalForm& form, const Table& table, int variant) {
  if (variant < 0 || variant >= kVariantsPerType)
    throw RangeError("variant must be 0 or 1, got " + std::to_string(variant));
  validate_form(form, table);
  const Template& t = find_template(type_of(form), variant);
  const Fill f = fill_of(form);
  std::vector<std::string> out;
  for (const auto& e : t.elems) {
    switch (e.slot) {
      case Slot::kLiteral: out.push_back(e.literal); break;
      case Slot::kColumn: out.push_back(f.column); break;
      case Slot::kEntityA: out.push_back(f.entity_a); break;
      case Slot::kEntityB: out.push_back(f.entity_b); break;
      case Slot::kCountN: out.push_back(std::to_string(f.count_n)); break;
      case Slot::kValue: out.push_back(std::to_string(f.value)); break;
      case Slot::kDecimal: out.push_back(format_centi(f.centi)); break;
      case Slot::kRankWord: out.push_back(ordinal_word(f.rank)); break;
      case Slot::kOp:
        out.emplace_back(op_first(f.op));
        out.emplace_back(op_second(f.op));
        break;
      case Slot::kDir: out.push_back(f.dir == Extremum::kHighest ? "highest" : "lowest"); break;
      case Slot::kRel: out.push_back(f.rel == Relation::kMore ? "more" : "less"); break;
      case Slot::kCmp: out.push_back(f.rel == Relation::kMore ? "higher" : "lower"); break;
      case Slot::kAgg: out.push_back(f.agg == AggKind::kAverage ? "average" : "total"); break;
      case Slot::kScope: out.push_back(f.scope == Scope::kMajority ? "most" : "all"); break;
    }
  }
  return Statement::from_tokens(std::move(out));
}

ParseResult parse_statement(std::string_view text, const Table& table) {
  const auto toks = split_ws(text);
  for (const auto& t : templates())
    if (matches_shape(t, toks)) return resolve(t, toks, table);
  return ParseFailure{ParseFailureReason::kNoTemplateMatch};
}

std::optional<LogicType> classify_type_rule(std::string_view text, const Table& table) {
  const auto r = parse_statement(text, table);
  if (const auto* f = std::get_if<LogicalForm>(&r)) return type_of(*f);
  return std::nullopt;
}

const std::vector<TemplateInfo>& surface_templates() {
  static const std::vector<TemplateInfo> infos = [] {
    std::vector<TemplateInfo> out;
    for (const auto& t : templates()) {
      TemplateInfo info{t.type, t.variant, {}, t.display};
      for (const auto& e : t.elems) {
        switch (e.slot) {
          case Slot::kLiteral: info.positions.push_back({e.literal}); break;
          case Slot::kOp:
            info.positions.push_back({"greater", "less", "equal"});
            info.positions.push_back({"than", "to"});
            break;
          case Slot::kDir: info.positions.push_back({"highest", "lowest"}); break;
          case Slot::kRel: info.positions.push_back({"more", "less"}); break;
          case Slot::kCmp: info.positions.push_back({"higher", "lower"}); break;
          case Slot::kAgg: info.positions.push_back({"average", "total"}); break;
          case Slot::kScope: info.positions.push_back({"most", "all"}); break;
          default: info.positions.push_back({}); break;
        }
      }
      out.push_back(std::move(info));
    }
    return out;
  }();
  return infos;
}

}  // namespace typectl
