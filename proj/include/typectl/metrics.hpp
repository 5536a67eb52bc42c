#ifndef TYPECTL_METRICS_HPP_
#define TYPECTL_METRICS_HPP_

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "typectl/classifier.hpp"
#include "typectl/logic.hpp"
#include "typectl/table.hpp"

namespace typectl {

// All n-gram statistics use whitespace surface tokens.

// Sentence BLEU, cumulative over orders 1..n with uniform weights. Clipping
// uses the per-n-gram maximum over references; brevity penalty uses the
// closest reference length (ties to the shorter). A zero numerator at order
// >= 2 is smoothed to 1 / (denominator + 1). Empty candidate scores 0.
double bleu_n(const Statement& candidate, const std::vector<Statement>& references, int n);

// Mean BLEU-n of each statement against all the others. Needs >= 2.
double self_bleu_n(const std::vector<Statement>& statements, int n);

// Distinct n-grams over the set divided by total tokens.
double dist_n(const std::vector<Statement>& statements, int n);

// Entropy (nats) of the pooled n-gram frequency distribution. Throws
// RangeError if the set has no n-grams.
double ent_n(const std::vector<Statement>& statements, int n);

// Total number of n-grams in the set.
long ngram_total(const std::vector<Statement>& statements, int n);

// Fraction of pairs that parse and evaluate true.
double factuality_acc(const std::vector<std::pair<Table, Statement>>& pairs);

// Returns nullopt for Unknown.
using TypeClassifierFn = std::function<std::optional<LogicType>(const Statement&, const Table&)>;
TypeClassifierFn rule_classifier();
// The returned function keeps a copy of `model`.
TypeClassifierFn learned_classifier(ClassifierModel model);

struct ConsistencyItem {
  LogicType control;
  Statement statement;
  const Table* table;
};

struct TypeConsistency {
  std::map<LogicType, double> per_type;  // only types with items
  std::map<LogicType, int> counts;
  std::vector<LogicType> empty_types;    // excluded from the macro mean
  double macro = 0.0;
  int unknown = 0;
};

TypeConsistency type_consistency(const std::vector<ConsistencyItem>& items,
                                 const TypeClassifierFn& classify);

struct EvalReport {
  std::optional<double> bleu_1, bleu_2, bleu_3;  // set when references exist
  double factuality_acc = 0.0;
  std::optional<TypeConsistency> type_consistency;
  std::map<int, double> ent_n, dist_n, self_bleu_n;
  int set_size = 0;
  int sets = 0;
  int statements = 0;
  int parse_failures = 0;
  std::map<std::string, int> failure_reasons;
};

}  // namespace typectl

#endif  // TYPECTL_METRICS_HPP_
