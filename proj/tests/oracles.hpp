// Naive reference implementations used only by tests. They deliberately
// share no code with the library beyond the data types.
#ifndef TYPECTL_TESTS_ORACLES_HPP_
#define TYPECTL_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "typectl/logic.hpp"
#include "typectl/table.hpp"

namespace oracle {

using namespace typectl;

inline std::vector<int> column(const Table& t, const std::string& name) {
  std::size_t c = 0;
  while (t.columns[c].name != name) ++c;
  std::vector<int> out;
  for (const auto& row : t.rows) out.push_back(row[c].value());
  return out;
}

inline int value_of(const Table& t, const std::string& col, const std::string& entity) {
  std::size_t c = 0;
  while (t.columns[c].name != col) ++c;
  for (const auto& row : t.rows)
    if (row[0].label() == entity) return row[c].value();
  return -1;
}

inline bool holds(const Predicate& p, int v) {
  if (p.op == CmpOp::kEq) return v == p.value;
  if (p.op == CmpOp::kGt) return v > p.value;
  return v < p.value;
}

inline std::vector<std::string> satisfying(const Table& t, const Predicate& p) {
  std::vector<std::string> out;
  const auto vals = column(t, p.column);
  for (std::size_t r = 0; r < vals.size(); ++r)
    if (holds(p, vals[r])) out.push_back(t.rows[r][0].label());
  return out;
}

// Truth by direct scans and full sorts.
inline bool evaluate(const LogicalForm& form, const Table& t) {
  if (auto* f = std::get_if<CountForm>(&form))
    return static_cast<int>(satisfying(t, f->pred).size()) == f->asserted_n;
  if (auto* f = std::get_if<ComparativeForm>(&form)) {
    const int a = value_of(t, f->column, f->entity_a), b = value_of(t, f->column, f->entity_b);
    return f->relation == Relation::kMore ? a > b : a < b;
  }
  if (auto* f = std::get_if<SuperlativeForm>(&form)) {
    auto vals = column(t, f->column);
    std::sort(vals.begin(), vals.end());
    const int target = f->extremum == Extremum::kHighest ? vals.back() : vals.front();
    return value_of(t, f->column, f->entity) == target;
  }
  if (auto* f = std::get_if<UniqueForm>(&form)) {
    const auto s = satisfying(t, f->pred);
    return s.size() == 1 && s[0] == f->entity;
  }
  if (auto* f = std::get_if<OrdinalForm>(&form)) {
    auto vals = column(t, f->column);
    std::sort(vals.begin(), vals.end());
    if (f->direction == Extremum::kHighest) std::reverse(vals.begin(), vals.end());
    return vals[f->rank - 1] == f->asserted_value;
  }
  if (auto* f = std::get_if<AggregationForm>(&form)) {
    const auto vals = column(t, f->column);
    long sum = 0;
    for (int v : vals) sum += v;
    if (f->agg == AggKind::kTotal) return sum * 100 == f->asserted_centi;
    // |sum/n - c/100| <= 1/200, scaled by 200 n.
    const long n = static_cast<long>(vals.size());
    const long diff = 200 * sum - 2 * n * f->asserted_centi;
    return (diff < 0 ? -diff : diff) <= n;
  }
  const auto& f = std::get<MajorityForm>(form);
  const auto s = satisfying(t, f.pred);
  const int rows = t.row_count();
  return f.scope == Scope::kAll ? static_cast<int>(s.size()) == rows
                                : 2 * static_cast<int>(s.size()) > rows;
}

using Gram = std::vector<std::string>;

inline std::vector<std::string> words(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ' ') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline std::map<Gram, int> grams(const std::vector<std::string>& w, int n) {
  std::map<Gram, int> out;
  for (int i = 0; i + n <= static_cast<int>(w.size()); ++i)
    ++out[Gram(w.begin() + i, w.begin() + i + n)];
  return out;
}

inline double bleu(const std::string& cand, const std::vector<std::string>& refs, int n) {
  const auto c = words(cand);
  if (c.empty()) return 0.0;
  double log_sum = 0.0;
  for (int k = 1; k <= n; ++k) {
    const auto cg = grams(c, k);
    std::map<Gram, int> maxref;
    for (const auto& r : refs)
      for (const auto& [g, cnt] : grams(words(r), k)) maxref[g] = std::max(maxref[g], cnt);
    double num = 0.0, den = 0.0;
    for (const auto& [g, cnt] : cg) {
      num += std::min(cnt, maxref.count(g) ? maxref[g] : 0);
      den += cnt;
    }
    if (k >= 2 && num == 0.0) {
      num += 1.0;
      den += 1.0;
    }
    if (num == 0.0 || den == 0.0) return 0.0;
    log_sum += std::log(num / den) / n;
  }
  std::size_t best = 0;
  long best_gap = -1;
  for (const auto& r : refs) {
    const long len = static_cast<long>(words(r).size());
    const long gap = std::labs(len - static_cast<long>(c.size()));
    if (best_gap < 0 || gap < best_gap || (gap == best_gap && static_cast<std::size_t>(len) < best)) {
      best_gap = gap;
      best = static_cast<std::size_t>(len);
    }
  }
  const double bp = c.size() >= best ? 1.0 : std::exp(1.0 - static_cast<double>(best) / c.size());
  return bp * std::exp(log_sum);
}

inline double self_bleu(const std::vector<std::string>& set, int n) {
  double total = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    std::vector<std::string> others;
    for (std::size_t j = 0; j < set.size(); ++j)
      if (j != i) others.push_back(set[j]);
    total += bleu(set[i], others, n);
  }
  return total / set.size();
}

inline double dist(const std::vector<std::string>& set, int n) {
  std::map<Gram, int> all;
  double tokens = 0;
  for (const auto& s : set) {
    const auto w = words(s);
    tokens += w.size();
    for (const auto& [g, c] : grams(w, n)) all[g] += c;
  }
  return all.size() / tokens;
}

inline double ent(const std::vector<std::string>& set, int n) {
  std::map<Gram, int> all;
  double total = 0;
  for (const auto& s : set)
    for (const auto& [g, c] : grams(words(s), n)) {
      all[g] += c;
      total += c;
    }
  double h = 0.0;
  for (const auto& [g, c] : all) h -= (c / total) * std::log(c / total);
  return h;
}

}  // namespace oracle

#endif  // TYPECTL_TESTS_ORACLES_HPP_
