#include "typectl/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "typectl/common.hpp"

namespace typectl {

namespace {

using Counts = std::map<std::vector<std::string>, long>;

Counts ngram_counts(const std::vector<std::string>& toks, int n) {
  Counts out;
  for (std::size_t i = 0; i + n <= toks.size(); ++i)
    ++out[std::vector<std::string>(toks.begin() + i, toks.begin() + i + n)];
  return out;
}

void check_order(int n) {
  if (n < 1) throw RangeError("n-gram order must be >= 1");
}

}  // namespace

double bleu_n(const Statement& candidate, const std::vector<Statement>& references, int n) {
  if (n < 1 || n > 4) throw RangeError("BLEU order must be in [1, 4]");
  if (references.empty()) throw RangeError("BLEU needs at least one reference");
  const auto& cand = candidate.tokens;
  const long c = static_cast<long>(cand.size());
  if (c == 0) return 0.0;

  double log_sum = 0.0;
  for (int k = 1; k <= n; ++k) {
    const Counts cc = ngram_counts(cand, k);
    Counts max_ref;
    for (const auto& ref : references)
      for (const auto& [g, cnt] : ngram_counts(ref.tokens, k)) {
        long& m = max_ref[g];
        m = std::max(m, cnt);
      }
    long clipped = 0;
    for (const auto& [g, cnt] : cc) {
      auto it = max_ref.find(g);
      if (it != max_ref.end()) clipped += std::min(cnt, it->second);
    }
    const long denom = std::max(c - k + 1, 0L);
    double p;
    if (k == 1) {
      if (clipped == 0) return 0.0;
      p = static_cast<double>(clipped) / static_cast<double>(denom);
    } else if (clipped == 0) {
      p = 1.0 / static_cast<double>(denom + 1);
    } else {
      p = static_cast<double>(clipped) / static_cast<double>(denom);
    }
    log_sum += std::log(p);
  }

  long r = -1;
  for (const auto& ref : references) {
    const long len = static_cast<long>(ref.tokens.size());
    if (r < 0 || std::abs(len - c) < std::abs(r - c) || (std::abs(len - c) == std::abs(r - c) && len < r))
      r = len;
  }
  const double bp = c > r ? 1.0 : std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
  return bp * std::exp(log_sum / n);
}

double self_bleu_n(const std::vector<Statement>& statements, int n) {
  if (statements.size() < 2) throw RangeError("self-BLEU needs at least two statements");
  CompensatedSum total;
  for (std::size_t i = 0; i < statements.size(); ++i) {
    std::vector<Statement> others;
    for (std::size_t j = 0; j < statements.size(); ++j)
      if (j != i) others.push_back(statements[j]);
    total.add(bleu_n(statements[i], others, n));
  }
  return total.value() / static_cast<double>(statements.size());
}

double dist_n(const std::vector<Statement>& statements, int n) {
  check_order(n);
  if (statements.empty()) throw RangeError("dist-n needs a nonempty set");
  std::map<std::vector<std::string>, long> distinct;
  long tokens = 0;
  for (const auto& s : statements) {
    tokens += static_cast<long>(s.tokens.size());
    for (const auto& [g, cnt] : ngram_counts(s.tokens, n)) distinct[g] += cnt;
  }
  if (tokens == 0) throw RangeError("dist-n needs at least one token");
  return static_cast<double>(distinct.size()) / static_cast<double>(tokens);
}

long ngram_total(const std::vector<Statement>& statements, int n) {
  long total = 0;
  for (const auto& s : statements)
    total += std::max(0L, static_cast<long>(s.tokens.size()) - n + 1);
  return total;
}

double ent_n(const std::vector<Statement>& statements, int n) {
  check_order(n);
  Counts freq;
  long total = 0;
  for (const auto& s : statements)
    for (const auto& [g, cnt] : ngram_counts(s.tokens, n)) {
      freq[g] += cnt;
      total += cnt;
    }
  if (total == 0) throw RangeError("ent-n: the set has no n-grams of this order");
  CompensatedSum h;
  const double F = static_cast<double>(total);
  for (const auto& [g, f] : freq) {
    const double p = static_cast<double>(f) / F;
    h.add(-p * std::log(p));
  }
  return std::max(0.0, h.value());
}

double factuality_acc(const std::vector<std::pair<Table, Statement>>& pairs) {
  if (pairs.empty()) throw RangeError("factuality_acc needs a nonempty set");
  long ok = 0;
  for (const auto& [table, stmt] : pairs) {
    const auto r = parse_statement(stmt.text, table);
    if (const auto* f = std::get_if<LogicalForm>(&r); f && evaluate(*f, table)) ++ok;
  }
  return static_cast<double>(ok) / static_cast<double>(pairs.size());
}

TypeClassifierFn rule_classifier() {
  return [](const Statement& s, const Table& t) { return classify_type_rule(s.text, t); };
}

TypeClassifierFn learned_classifier(ClassifierModel model) {
  return [m = std::move(model)](const Statement& s, const Table&) -> std::optional<LogicType> {
    return predict_type(m, s).type;
  };
}

TypeConsistency type_consistency(const std::vector<ConsistencyItem>& items,
                                 const TypeClassifierFn& classify) {
  TypeConsistency out;
  std::map<LogicType, int> hits;
  for (const auto& it : items) {
    ++out.counts[it.control];
    const auto pred = classify(it.statement, *it.table);
    if (!pred) ++out.unknown;
    if (pred && *pred == it.control) ++hits[it.control];
  }
  std::vector<double> rates;
  for (LogicType t : kAllTypes) {
    auto c = out.counts.find(t);
    if (c == out.counts.end()) {
      out.empty_types.push_back(t);
      continue;
    }
    const double rate = static_cast<double>(hits[t]) / c->second;
    out.per_type[t] = rate;
    rates.push_back(rate);
  }
  out.macro = mean_of(rates);
  return out;
}

}  // namespace typectl
