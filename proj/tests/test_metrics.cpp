#include <cmath>

#include "doctest.h"
#include "generators.hpp"
#include "oracles.hpp"
#include "typectl/metrics.hpp"

using namespace typectl;

namespace {

std::vector<Statement> stmts(const std::vector<std::string>& texts) {
  std::vector<Statement> out;
  for (const auto& t : texts) out.push_back(Statement::from_text(t));
  return out;
}

}  // namespace

TEST_CASE("metric anchors") {
  CHECK(bleu_n(Statement::from_text("a b c d"), stmts({"a b c d e"}), 1) ==
        doctest::Approx(std::exp(-0.25)).epsilon(1e-15));
  CHECK(std::abs(bleu_n(Statement::from_text("a b c d"), stmts({"a b c d e"}), 1) - 0.7788) < 5e-5);
  CHECK(ent_n(stmts({"a b c"}), 2) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(dist_n(stmts({"a b", "a b"}), 2) == 0.25);
  for (int n = 1; n <= 4; ++n) {
    CHECK(bleu_n(Statement::from_text("the cat sat on it"), stmts({"the cat sat on it"}), n) == doctest::Approx(1.0));
    CHECK(self_bleu_n(stmts({"x y z w", "x y z w", "x y z w", "x y z w", "x y z w"}), n) == doctest::Approx(1.0));
  }
  CHECK(self_bleu_n(stmts({"a b", "c d", "e f"}), 1) == 0.0);
  CHECK(bleu_n(Statement::from_text(""), stmts({"a"}), 2) == 0.0);
  CHECK(dist_n(stmts({"a b c d"}), 1) == 1.0);
  CHECK(ent_n(stmts({"a a a a"}), 1) == 0.0);
  CHECK(ent_n(stmts({"a b c d e"}), 1) == doctest::Approx(std::log(5.0)).epsilon(1e-15));
}

TEST_CASE("metric errors") {
  CHECK_THROWS_AS(ent_n(stmts({"a"}), 2), RangeError);
  CHECK_THROWS(self_bleu_n(stmts({"a b"}), 1));
  CHECK_THROWS(dist_n({}, 1));
  CHECK_THROWS(bleu_n(Statement::from_text("a"), {}, 1));
  CHECK_THROWS(bleu_n(Statement::from_text("a"), stmts({"a"}), 5));
}

TEST_CASE("metrics agree with brute-force reimplementations") {
  Rng rng(1000);
  for (int i = 0; i < 1000; ++i) {
    const int alphabet = rng.range(2, 8);
    const std::string cand = gen::sentence(rng, 1, 9, alphabet);
    std::vector<std::string> refs;
    for (int r = rng.range(1, 5); r > 0; --r) refs.push_back(gen::sentence(rng, 1, 10, alphabet));
    std::vector<std::string> set;
    for (int s = rng.range(2, 6); s > 0; --s) set.push_back(gen::sentence(rng, 1, 9, alphabet));
    const auto cand_s = Statement::from_text(cand);
    const auto ref_s = stmts(refs);
    const auto set_s = stmts(set);
    for (int n = 1; n <= 4; ++n) {
      CHECK(std::abs(bleu_n(cand_s, ref_s, n) - oracle::bleu(cand, refs, n)) <= 1e-12);
      CHECK(std::abs(self_bleu_n(set_s, n) - oracle::self_bleu(set, n)) <= 1e-12);
      CHECK(std::abs(dist_n(set_s, n) - oracle::dist(set, n)) <= 1e-12);
      if (ngram_total(set_s, n) > 0)
        CHECK(std::abs(ent_n(set_s, n) - oracle::ent(set, n)) <= 1e-12);
    }
  }
}

TEST_CASE("metric invariances and ranges") {
  Rng rng(77);
  for (int i = 0; i < 300; ++i) {
    std::vector<std::string> set;
    for (int s = rng.range(2, 6); s > 0; --s) set.push_back(gen::sentence(rng, 2, 8, 5));
    auto s1 = stmts(set);
    auto s2 = s1;
    rng.shuffle(s2);
    for (int n = 1; n <= 3; ++n) {
      const double sb = self_bleu_n(s1, n);
      CHECK(sb >= 0.0);
      CHECK(sb <= 1.0);
      CHECK(std::abs(sb - self_bleu_n(s2, n)) < 1e-12);
      if (ngram_total(s1, n) > 0) {
        CHECK(std::abs(ent_n(s1, n) - ent_n(s2, n)) < 1e-12);
        CHECK(ent_n(s1, n) <= std::log(static_cast<double>(ngram_total(s1, n))) + 1e-12);
      }
      const double b1 = bleu_n(s1[0], std::vector<Statement>(s1.begin() + 1, s1.end()), n);
      CHECK(b1 >= 0.0);
      CHECK(b1 <= 1.0);
      const double d = dist_n(s1, n);
      CHECK(d >= 0.0);
      CHECK(d <= 1.0);
      auto doubled = s1;
      doubled.insert(doubled.end(), s1.begin(), s1.end());
      CHECK(std::abs(dist_n(doubled, n) - d / 2) < 1e-15);
      // Replacing the set by copies of one member lowers entropy.
      const std::vector<Statement> copies(s1.size(), s1[0]);
      if (ngram_total(copies, n) > 0 && oracle::grams(s1[0].tokens, n).size() > 1 &&
          ent_n(s1, n) > ent_n(std::vector<Statement>{s1[0]}, n) + 1e-12)
        CHECK(ent_n(copies, n) < ent_n(s1, n));
    }
    std::vector<Statement> refs(s1.begin() + 1, s1.end());
    auto shuffled = refs;
    rng.shuffle(shuffled);
    CHECK(std::abs(bleu_n(s1[0], refs, 3) - bleu_n(s1[0], shuffled, 3)) < 1e-15);
  }
}

namespace {

Table pts_table() {
  Table t;
  t.id = "m";
  t.title = "metric cup";
  t.columns = {{"name", ColumnKind::kEntity}, {"pts", ColumnKind::kNumeric}, {"wins", ColumnKind::kNumeric}};
  const char* names[] = {"alice", "bob", "carol", "dave"};
  const int pts[] = {3, 5, 2, 1};
  for (int i = 0; i < 4; ++i) t.rows.push_back({Cell::text(names[i]), Cell::number(pts[i]), Cell::number(i)});
  return t;
}

}  // namespace

TEST_CASE("factuality accuracy") {
  const Table t = pts_table();
  std::vector<std::pair<Table, Statement>> pairs = {
      {t, Statement::from_text("bob has the highest pts")},
      {t, Statement::from_text("there are 2 rows where pts is greater than 2")},
      {t, Statement::from_text("the total pts is 11")},
      {t, Statement::from_text("alice has the highest pts")},
      {t, Statement::from_text("moon cheese")},
  };
  CHECK(factuality_acc(pairs) == doctest::Approx(0.6).epsilon(1e-15));
  pairs.resize(3);
  CHECK(factuality_acc(pairs) == 1.0);
  CHECK(factuality_acc({{t, Statement::from_text("gibberish words")}}) == 0.0);
}

TEST_CASE("type consistency") {
  const Table t = pts_table();
  const auto rule = rule_classifier();
  std::vector<ConsistencyItem> items;
  for (LogicType ty : kAllTypes)
    for (const auto& f : true_candidates(t, ty))
      for (int v = 0; v < 2; ++v) items.push_back({ty, realize(f, t, v), &t});
  const auto tc = type_consistency(items, rule);
  CHECK(tc.macro == 1.0);
  for (const auto& [ty, v] : tc.per_type) CHECK(v == 1.0);

  std::vector<ConsistencyItem> junk = {{LogicType::kCount, Statement::from_text("nonsense here"), &t},
                                       {LogicType::kUnique, Statement::from_text("more nonsense"), &t}};
  const auto zero = type_consistency(junk, rule);
  CHECK(zero.macro == 0.0);
  CHECK(zero.unknown == 2);
  CHECK(zero.empty_types.size() == 5);
  CHECK(zero.per_type.size() == 2);

  // Mixed: count 1/2, superlative 1/1 -> macro 0.75.
  std::vector<ConsistencyItem> mixed = {
      {LogicType::kCount, Statement::from_text("there are 2 rows where pts is greater than 2"), &t},
      {LogicType::kCount, Statement::from_text("bob has the highest pts"), &t},
      {LogicType::kSuperlative, Statement::from_text("bob has the highest pts"), &t}};
  CHECK(type_consistency(mixed, rule).macro == 0.75);
}
