#include <algorithm>
#include <charconv>
#include <numeric>

#include "typectl/common.hpp"
#include "typectl/logic.hpp"

namespace typectl {

namespace {

constexpr std::array<std::string_view, kNumTypes> kTypeNames = {
    "count", "comparative", "superlative", "unique", "ordinal", "aggregation", "majority"};

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

bool satisfies(int v, const Predicate& p) {
  switch (p.op) {
    case CmpOp::kEq: return v == p.value;
    case CmpOp::kGt: return v > p.value;
    case CmpOp::kLt: return v < p.value;
  }
  return false;
}

int count_satisfying(const Table& t, const Predicate& p) {
  const int col = *t.find_numeric_column(p.column);
  int n = 0;
  for (const auto& row : t.rows)
    if (satisfies(row[col].value(), p)) ++n;
  return n;
}

int value_of(const Table& t, const std::string& column, const std::string& entity) {
  return t.rows[*t.find_entity(entity)][*t.find_numeric_column(column)].value();
}

void require_column(const Table& t, const std::string& col) {
  if (!t.find_numeric_column(col))
    throw ValidityError("form names unknown numeric column '" + col + "' for table " + t.id);
}
void require_entity(const Table& t, const std::string& e) {
  if (!t.find_entity(e))
    throw ValidityError("form names unknown entity '" + e + "' for table " + t.id);
}

}  // namespace

std::string_view type_name(LogicType t) { return kTypeNames[static_cast<int>(t)]; }

std::optional<LogicType> type_from_name(std::string_view name) {
  for (int i = 0; i < kNumTypes; ++i)
    if (kTypeNames[i] == name) return static_cast<LogicType>(i);
  return std::nullopt;
}

std::string control_name(const Control& c) {
  return c.is_masked() ? "masked" : std::string(type_name(*c.type));
}

std::optional<Control> control_from_name(std::string_view name) {
  if (name == "masked") return Control::masked();
  if (auto t = type_from_name(name)) return Control::of(*t);
  return std::nullopt;
}

LogicType type_of(const LogicalForm& form) {
  return static_cast<LogicType>(form.index());
}

Statement Statement::from_text(std::string_view text) {
  Statement s;
  s.tokens = split_ws(text);
  s.text = join_ws(s.tokens);
  return s;
}

Statement Statement::from_tokens(std::vector<std::string> tokens) {
  Statement s;
  s.text = join_ws(tokens);
  s.tokens = std::move(tokens);
  return s;
}

void validate_form(const LogicalForm& form, const Table& t) {
  std::visit(Overloaded{
                 [&](const CountForm& f) { require_column(t, f.pred.column); },
                 [&](const ComparativeForm& f) {
                   require_column(t, f.column);
                   require_entity(t, f.entity_a);
                   require_entity(t, f.entity_b);
                 },
                 [&](const SuperlativeForm& f) {
                   require_column(t, f.column);
                   require_entity(t, f.entity);
                 },
                 [&](const UniqueForm& f) {
                   require_column(t, f.pred.column);
                   require_entity(t, f.entity);
                 },
                 [&](const OrdinalForm& f) {
                   require_column(t, f.column);
                   if (f.rank < 1 || f.rank > t.row_count())
                     throw ValidityError("ordinal rank " + std::to_string(f.rank) +
                                         " out of range for table " + t.id);
                 },
                 [&](const AggregationForm& f) { require_column(t, f.column); },
                 [&](const MajorityForm& f) { require_column(t, f.pred.column); },
             },
             form);
}

bool evaluate(const LogicalForm& form, const Table& t) {
  validate_form(form, t);
  return std::visit(
      Overloaded{
          [&](const CountForm& f) { return count_satisfying(t, f.pred) == f.asserted_n; },
          [&](const ComparativeForm& f) {
            const int a = value_of(t, f.column, f.entity_a);
            const int b = value_of(t, f.column, f.entity_b);
            return f.relation == Relation::kMore ? a > b : a < b;
          },
          [&](const SuperlativeForm& f) {
            const auto vals = t.column_values(*t.find_numeric_column(f.column));
            const int target = f.extremum == Extremum::kHighest
                                   ? *std::max_element(vals.begin(), vals.end())
                                   : *std::min_element(vals.begin(), vals.end());
            return value_of(t, f.column, f.entity) == target;
          },
          [&](const UniqueForm& f) {
            const int col = *t.find_numeric_column(f.pred.column);
            int hits = 0;
            bool entity_hits = false;
            for (const auto& row : t.rows) {
              if (satisfies(row[col].value(), f.pred)) {
                ++hits;
                entity_hits = entity_hits || row[0].label() == f.entity;
              }
            }
            return hits == 1 && entity_hits;
          },
          [&](const OrdinalForm& f) {
            auto vals = t.column_values(*t.find_numeric_column(f.column));
            if (f.direction == Extremum::kHighest)
              std::sort(vals.begin(), vals.end(), std::greater<>());
            else
              std::sort(vals.begin(), vals.end());
            return vals[f.rank - 1] == f.asserted_value;
          },
          [&](const AggregationForm& f) {
            const auto vals = t.column_values(*t.find_numeric_column(f.column));
            const std::int64_t sum = std::accumulate(vals.begin(), vals.end(), std::int64_t{0});
            const std::int64_t n = static_cast<std::int64_t>(vals.size());
            if (f.agg == AggKind::kTotal) return sum * 100 == f.asserted_centi;
            const std::int64_t diff = 200 * sum - 2 * n * f.asserted_centi;
            return (diff < 0 ? -diff : diff) <= n;
          },
          [&](const MajorityForm& f) {
            const int n = count_satisfying(t, f.pred);
            return f.scope == Scope::kAll ? n == t.row_count() : 2 * n > t.row_count();
          },
      },
      form);
}

std::vector<LogicalForm> true_candidates(const Table& t, LogicType type) {
  std::vector<LogicalForm> out;
  const auto cols = t.numeric_columns();
  const int n_rows = t.row_count();

  // Predicates over values that occur in the column, in a fixed order.
  auto predicates = [&](int col) {
    auto vals = t.column_values(col);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    std::vector<Predicate> preds;
    for (CmpOp op : {CmpOp::kEq, CmpOp::kGt, CmpOp::kLt})
      for (int v : vals) preds.push_back({t.columns[col].name, op, v});
    return preds;
  };

  for (int col : cols) {
    const std::string& cname = t.columns[col].name;
    const auto vals = t.column_values(col);
    switch (type) {
      case LogicType::kCount:
        for (const auto& p : predicates(col)) {
          const int n = count_satisfying(t, p);
          if (n >= 1) out.push_back(CountForm{p, n});
        }
        break;
      case LogicType::kComparative:
        for (int a = 0; a < n_rows; ++a)
          for (int b = 0; b < n_rows; ++b) {
            if (vals[a] == vals[b]) continue;
            out.push_back(ComparativeForm{cname, t.entity(a), t.entity(b),
                                          vals[a] > vals[b] ? Relation::kMore : Relation::kLess});
          }
        break;
      case LogicType::kSuperlative: {
        const int hi = *std::max_element(vals.begin(), vals.end());
        const int lo = *std::min_element(vals.begin(), vals.end());
        for (int r = 0; r < n_rows; ++r)
          if (vals[r] == hi) out.push_back(SuperlativeForm{cname, Extremum::kHighest, t.entity(r)});
        for (int r = 0; r < n_rows; ++r)
          if (vals[r] == lo) out.push_back(SuperlativeForm{cname, Extremum::kLowest, t.entity(r)});
        break;
      }
      case LogicType::kUnique:
        for (const auto& p : predicates(col)) {
          int hits = 0, who = -1;
          for (int r = 0; r < n_rows; ++r)
            if (satisfies(vals[r], p)) {
              ++hits;
              who = r;
            }
          if (hits == 1) out.push_back(UniqueForm{p, t.entity(who)});
        }
        break;
      case LogicType::kOrdinal: {
        auto desc = vals;
        std::sort(desc.begin(), desc.end(), std::greater<>());
        auto asc = vals;
        std::sort(asc.begin(), asc.end());
        for (int k = 1; k <= n_rows; ++k) {
          out.push_back(OrdinalForm{cname, k, Extremum::kHighest, desc[k - 1]});
          out.push_back(OrdinalForm{cname, k, Extremum::kLowest, asc[k - 1]});
        }
        break;
      }
      case LogicType::kAggregation: {
        const std::int64_t sum = std::accumulate(vals.begin(), vals.end(), std::int64_t{0});
        const std::int64_t n = n_rows;
        // Round half up in hundredths.
        const std::int64_t avg_centi = (200 * sum + n) / (2 * n);
        out.push_back(AggregationForm{cname, AggKind::kAverage, avg_centi});
        out.push_back(AggregationForm{cname, AggKind::kTotal, sum * 100});
        break;
      }
      case LogicType::kMajority:
        for (const auto& p : predicates(col)) {
          const int n = count_satisfying(t, p);
          if (2 * n > n_rows) out.push_back(MajorityForm{p, Scope::kMajority});
          if (n == n_rows) out.push_back(MajorityForm{p, Scope::kAll});
        }
        break;
    }
  }
  return out;
}

std::vector<TypedForm> enumerate_forms(const Table& table, int budget, std::uint64_t seed) {
  if (budget < kNumTypes) throw RangeError("enumerate_forms budget must be >= 7");
  Rng rng(derive_seed(seed, fnv1a(table.id)));

  std::vector<std::vector<LogicalForm>> by_type;
  for (LogicType t : kAllTypes) by_type.push_back(true_candidates(table, t));

  std::vector<TypedForm> out;
  std::vector<std::vector<bool>> taken;
  for (const auto& c : by_type) taken.emplace_back(c.size(), false);

  std::vector<int> type_order(kNumTypes);
  std::iota(type_order.begin(), type_order.end(), 0);
  rng.shuffle(type_order);
  for (int ti : type_order) {
    if (by_type[ti].empty()) continue;
    const std::size_t pick = rng.below(by_type[ti].size());
    taken[ti][pick] = true;
    out.push_back({by_type[ti][pick], static_cast<LogicType>(ti)});
  }

  std::vector<std::pair<int, std::size_t>> rest;
  for (int ti = 0; ti < kNumTypes; ++ti)
    for (std::size_t i = 0; i < by_type[ti].size(); ++i)
      if (!taken[ti][i]) rest.emplace_back(ti, i);
  rng.shuffle(rest);
  for (const auto& [ti, i] : rest) {
    if (static_cast<int>(out.size()) >= budget) break;
    out.push_back({by_type[ti][i], static_cast<LogicType>(ti)});
  }
  return out;
}

std::string format_centi(std::int64_t centi) {
  const bool neg = centi < 0;
  const std::int64_t mag = neg ? -centi : centi;
  std::string s = (neg ? "-" : "") + std::to_string(mag / 100);
  const std::int64_t frac = mag % 100;
  if (frac != 0) {
    s += '.';
    s += static_cast<char>('0' + frac / 10);
    if (frac % 10 != 0) s += static_cast<char>('0' + frac % 10);
  }
  return s;
}

std::optional<std::int64_t> parse_centi(std::string_view text) {
  if (text.empty()) return std::nullopt;
  const auto dot = text.find('.');
  const std::string_view whole = text.substr(0, dot);
  const std::string_view frac = dot == std::string_view::npos ? std::string_view{} : text.substr(dot + 1);
  if (whole.empty() || whole.size() > 12) return std::nullopt;
  if (dot != std::string_view::npos && (frac.empty() || frac.size() > 2)) return std::nullopt;
  std::int64_t w = 0;
  for (char c : whole) {
    if (c < '0' || c > '9') return std::nullopt;
    w = w * 10 + (c - '0');
  }
  std::int64_t f = 0;
  for (std::size_t i = 0; i < 2; ++i) {
    f *= 10;
    if (i < frac.size()) {
      if (frac[i] < '0' || frac[i] > '9') return std::nullopt;
      f += frac[i] - '0';
    }
  }
  return w * 100 + f;
}

std::string_view failure_name(ParseFailureReason r) {
  switch (r) {
    case ParseFailureReason::kNoTemplateMatch: return "no-template-match";
    case ParseFailureReason::kUnknownColumn: return "unknown-column";
    case ParseFailureReason::kUnknownEntity: return "unknown-entity";
    case ParseFailureReason::kMalformedNumber: return "malformed-number";
    case ParseFailureReason::kRankOutOfRange: return "rank-out-of-range";
  }
  return "?";
}

}  // namespace typectl
