#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "generators.hpp"
#include "typectl/corpus.hpp"
#include "typectl/table.hpp"

using namespace typectl;

TEST_CASE("synthetic table shape") {
  const Table t = gen_synthetic_table(0, 4, 2);
  REQUIRE(t.columns.size() == 3);
  CHECK(t.columns[0].kind == ColumnKind::kEntity);
  CHECK(t.columns[1].kind == ColumnKind::kNumeric);
  CHECK(t.columns[2].kind == ColumnKind::kNumeric);
  CHECK(t.row_count() == 4);
  std::set<std::string> names;
  for (int r = 0; r < 4; ++r) names.insert(t.entity(r));
  CHECK(names.size() == 4);
  CHECK_NOTHROW(validate_table(t));
  CHECK(entity_name_pool().size() >= 64);
}

TEST_CASE("synthetic table determinism and seed sensitivity") {
  CHECK(gen_synthetic_table(0, 4, 2) == gen_synthetic_table(0, 4, 2));
  CHECK_FALSE(gen_synthetic_table(1, 4, 2) == gen_synthetic_table(0, 4, 2));
}

TEST_CASE("synthetic table rejects bad sizes") {
  CHECK_THROWS_AS(gen_synthetic_table(0, 3, 2), RangeError);
  CHECK_THROWS_AS(gen_synthetic_table(0, 9, 2), RangeError);
  CHECK_THROWS_AS(gen_synthetic_table(0, 4, 1), RangeError);
  CHECK_THROWS_AS(gen_synthetic_table(0, 4, 4), RangeError);
}

TEST_CASE("every generated table is valid") {
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    const Table t = gen::table(rng, false);
    CHECK_NOTHROW(validate_table(t));
    for (int c : t.numeric_columns())
      for (int v : t.column_values(c)) CHECK((v >= 0 && v <= 100));
  }
}

TEST_CASE("validate_table catches broken invariants") {
  Table t = gen_synthetic_table(3, 4, 2);
  Table empty_title = t;
  empty_title.title.clear();
  CHECK_THROWS_AS(validate_table(empty_title), ValidityError);
  Table dup = t;
  dup.rows[1][0] = dup.rows[0][0];
  CHECK_THROWS_AS(validate_table(dup), ValidityError);
  Table ragged = t;
  ragged.rows[2].pop_back();
  CHECK_THROWS_AS(validate_table(ragged), ValidityError);
  Table kind = t;
  kind.rows[0][1] = Cell::text("x");
  CHECK_THROWS_AS(validate_table(kind), ValidityError);
}

TEST_CASE("linearize small table") {
  Table t;
  t.id = "x";
  t.title = "t";
  t.columns = {{"name", ColumnKind::kEntity}, {"pts", ColumnKind::kNumeric}};
  t.rows = {{Cell::text("a"), Cell::number(7)}};
  const std::vector<std::string> want = {"[TTL]", "t", "[HDR]", "name", "[BAR]", "pts",
                                         "[ROW]", "a", "[BAR]", "7"};
  CHECK(linearize_table(t) == want);
}

TEST_CASE("one changed cell changes exactly one token") {
  Table a = gen_synthetic_table(5, 5, 3);
  Table b = a;
  b.rows[2][2] = Cell::number((a.rows[2][2].value() + 1) % 101);
  const auto la = linearize_table(a), lb = linearize_table(b);
  REQUIRE(la.size() == lb.size());
  int diffs = 0;
  for (std::size_t i = 0; i < la.size(); ++i) diffs += la[i] != lb[i];
  CHECK(diffs == 1);
}

TEST_CASE("linearization is injective over a generated family") {
  Rng rng(21);
  std::set<std::vector<std::string>> seen;
  std::vector<Table> tables;
  for (int i = 0; i < 400; ++i) tables.push_back(gen::table(rng, i % 2 == 0));
  int distinct_tables = 0;
  for (std::size_t i = 0; i < tables.size(); ++i) {
    bool dup = false;
    for (std::size_t j = 0; j < i && !dup; ++j) {
      Table a = tables[i], b = tables[j];
      a.id = b.id;
      dup = a == b;
    }
    if (!dup) ++distinct_tables;
    seen.insert(linearize_table(tables[i]));
  }
  CHECK(static_cast<int>(seen.size()) == distinct_tables);
}

namespace {

std::vector<CorpusRecord> sample_records(int n) {
  std::vector<CorpusRecord> out;
  for (int i = 0; i < n; ++i) {
    CorpusRecord rec;
    rec.table = gen_synthetic_table(100 + i, 4 + i % 5, 2 + i % 2);
    for (const auto& f : enumerate_forms(rec.table, 7, i)) {
      if (rec.references.size() == 5) break;
      rec.references.push_back({realize(f.form, rec.table, i % 2), f.type, f.form});
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("typectl_test_" + name);
}

}  // namespace

TEST_CASE("corpus round trip") {
  const auto records = sample_records(10);
  for (const auto& r : records) CHECK_NOTHROW(validate_record(r));
  const auto path = temp_path("roundtrip.jsonl");
  save_corpus(records, path);
  CHECK(load_corpus(path) == records);
  save_corpus({}, path);
  CHECK(load_corpus(path).empty());
  std::filesystem::remove(path);
}

TEST_CASE("corpus load reports the truncated line") {
  const auto records = sample_records(3);
  const auto path = temp_path("truncated.jsonl");
  save_corpus(records, path);
  std::string text;
  {
    std::ifstream in(path);
    text.assign(std::istreambuf_iterator<char>(in), {});
  }
  text.resize(text.size() - 20);
  {
    std::ofstream out(path, std::ios::trunc);
    out << text;
  }
  try {
    load_corpus(path);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  std::filesystem::remove(path);
}

TEST_CASE("corpus JSON uses numbers for numeric cells") {
  const auto records = sample_records(1);
  const std::string line = record_to_json_line(records[0]);
  CHECK(line.find("\"references\"") != std::string::npos);
  CHECK(record_from_json_line(line) == records[0]);
  CHECK_THROWS_AS(load_corpus(temp_path("missing.jsonl")), IoError);
}

TEST_CASE("validate_record rejects false and surplus references") {
  auto rec = sample_records(1)[0];
  auto bad = rec;
  bad.references.resize(6, rec.references[0]);
  CHECK_THROWS_AS(validate_record(bad), ValidityError);
  bad = rec;
  bad.references.clear();
  CHECK_THROWS_AS(validate_record(bad), ValidityError);
  bad = rec;
  const auto& t = bad.table;
  const std::string col = t.columns[1].name;
  LogicalForm f = CountForm{{col, CmpOp::kGt, 100}, 1};
  bad.references[0] = {realize(f, t, 0), LogicType::kCount, f};
  CHECK_THROWS_AS(validate_record(bad), ValidityError);
}
