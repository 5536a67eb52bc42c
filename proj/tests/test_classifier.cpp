#include <cmath>

#include "doctest.h"
#include "generators.hpp"
#include "typectl/classifier.hpp"
#include "typectl/harness.hpp"

using namespace typectl;

namespace {

std::vector<LabeledStatement> grammar_statements(std::uint64_t seed, int n) {
  Rng rng(seed);
  std::vector<LabeledStatement> out;
  while (static_cast<int>(out.size()) < n) {
    const Table t = gen::table(rng, false);
    for (const auto& f : enumerate_forms(t, 7, rng.next_u64()))
      out.emplace_back(realize(f.form, t, static_cast<int>(rng.below(2))), f.type);
  }
  out.resize(n);
  return out;
}

}  // namespace

TEST_CASE("macro_f1 conventions") {
  using T = LogicType;
  CHECK(macro_f1({T::kCount, T::kComparative}, {T::kCount, T::kCount}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  std::vector<T> all(kAllTypes.begin(), kAllTypes.end());
  CHECK(macro_f1(all, all) == 1.0);
  CHECK(macro_f1({T::kCount, T::kCount}, {T::kUnique, T::kMajority}) == 0.0);
  CHECK_THROWS(macro_f1({T::kCount}, {}));
  CHECK_THROWS(macro_f1({}, {}));
}

TEST_CASE("classifier generalizes to held-out grammar statements") {
  const auto train = grammar_statements(1, 1000);
  const auto test = grammar_statements(2, 1000);
  const auto model = train_classifier(train, 5, 0.1, 3);
  std::vector<LogicType> preds, golds;
  for (const auto& [s, t] : test) {
    const auto p = predict_type(model, s);
    double total = 0.0;
    for (double x : p.probabilities) {
      CHECK(x >= 0.0);
      total += x;
    }
    CHECK(std::abs(total - 1.0) < 1e-9);
    preds.push_back(p.type);
    golds.push_back(t);
  }
  CHECK(macro_f1(preds, golds) >= 0.95);
}

TEST_CASE("one statement per type is memorized in one epoch") {
  std::vector<LabeledStatement> pairs;
  Rng rng(4);
  while (pairs.size() < kAllTypes.size()) {
    const Table t = gen::table(rng, false);
    for (const auto& f : enumerate_forms(t, 7, 1))
      if (static_cast<std::size_t>(f.type) == pairs.size()) {
        pairs.emplace_back(realize(f.form, t, 0), f.type);
        break;
      }
  }
  const auto model = train_classifier(pairs, 1, 0.5, 9);
  for (const auto& [s, t] : pairs) CHECK(predict_type(model, s).type == t);
}

TEST_CASE("classifier determinism, coverage and zero-feature input") {
  const auto data = grammar_statements(5, 300);
  CHECK(train_classifier(data, 2, 0.1, 1) == train_classifier(data, 2, 0.1, 1));
  std::vector<LabeledStatement> partial;
  for (const auto& p : data)
    if (p.second != LogicType::kMajority) partial.push_back(p);
  CHECK_THROWS_AS(train_classifier(partial, 1, 0.1, 1), CoverageError);

  const auto model = train_classifier(data, 2, 0.1, 1);
  CHECK(featurize(model, Statement::from_text("zzz qqq")).empty());
  const auto p = predict_type(model, Statement::from_text("zzz qqq"));
  int best = 0;
  for (int i = 1; i < kNumTypes; ++i)
    if (model.bias[i] > model.bias[best]) best = i;
  CHECK(static_cast<int>(p.type) == best);
  ClassifierModel fresh = model;
  std::fill(fresh.bias.begin(), fresh.bias.end(), 0.0);
  for (double x : predict_type(fresh, Statement::from_text("zzz")).probabilities)
    CHECK(x == doctest::Approx(1.0 / 7.0));
}

TEST_CASE("features are unigrams and bigrams") {
  const auto keys = ngram_keys({"a", "b", "c"});
  const std::vector<std::string> want = {"a", "b", "c", "a b", "b c"};
  std::vector<std::string> got = keys, w = want;
  std::sort(got.begin(), got.end());
  std::sort(w.begin(), w.end());
  CHECK(got == w);
}

TEST_CASE("logistic gradient matches finite differences") {
  Rng rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    auto data = grammar_statements(100 + trial, 40);
    ClassifierModel m = train_classifier(data, 1, 0.05, trial);
    for (auto& w : m.weights) w += 0.3 * rng.normal();
    for (auto& b : m.bias) b += 0.3 * rng.normal();
    const auto grad = classifier_loss_gradient(m, data);
    REQUIRE(grad.size() == m.weights.size() + kNumTypes);
    const double eps = 1e-6;
    double worst = 0.0;
    for (int k = 0; k < 60; ++k) {
      const std::size_t i = rng.below(grad.size());
      ClassifierModel up = m, down = m;
      if (i < m.weights.size()) {
        up.weights[i] += eps;
        down.weights[i] -= eps;
      } else {
        up.bias[i - m.weights.size()] += eps;
        down.bias[i - m.weights.size()] -= eps;
      }
      const double numeric = (classifier_loss(up, data) - classifier_loss(down, data)) / (2 * eps);
      const double err = std::abs(grad[i] - numeric) /
                         std::max({std::abs(grad[i]), std::abs(numeric), 1e-8});
      // Coordinates with a vanishing gradient are dominated by rounding.
      if (std::abs(numeric) > 1e-6) worst = std::max(worst, err);
    }
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("training loss is non-increasing over epochs at lr 0.01") {
  CorpusConfig cc;
  const Splits s = build_corpus(cc);
  std::vector<LabeledStatement> data;
  for (const auto& rec : s.train)
    for (const auto& ref : rec.references) data.emplace_back(ref.statement, ref.gold_type);
  double prev = std::log(7.0) + 1e-12;
  for (int epochs = 1; epochs <= 4; ++epochs) {
    const double loss = classifier_loss(train_classifier(data, epochs, 0.01, 5), data);
    CHECK(loss <= prev);
    prev = loss;
  }
}

TEST_CASE("classifier persistence") {
  const auto model = train_classifier(grammar_statements(6, 200), 2, 0.1, 2);
  const auto path = std::filesystem::temp_directory_path() / "typectl_test_clf.json";
  save_classifier(model, path);
  CHECK(load_classifier(path) == model);
  std::filesystem::remove(path);
}
