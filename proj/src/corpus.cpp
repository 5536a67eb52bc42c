#include "typectl/corpus.hpp"

#include <fstream>

#include "json.hpp"

#include "typectl/common.hpp"

namespace typectl {

using nlohmann::json;

namespace {

json table_to_json(const Table& t) {
  json cols = json::array();
  for (const auto& c : t.columns)
    cols.push_back({{"name", c.name}, {"kind", c.kind == ColumnKind::kEntity ? "entity" : "numeric"}});
  json rows = json::array();
  for (const auto& row : t.rows) {
    json r = json::array();
    for (const auto& cell : row) {
      if (cell.is_text()) r.push_back(cell.label());
      else r.push_back(cell.value());
    }
    rows.push_back(std::move(r));
  }
  return {{"id", t.id}, {"title", t.title}, {"columns", cols}, {"rows", rows}};
}

Table table_from_json(const json& j) {
  Table t;
  t.id = j.at("id").get<std::string>();
  t.title = j.at("title").get<std::string>();
  for (const auto& c : j.at("columns")) {
    const auto kind = c.at("kind").get<std::string>();
    if (kind != "entity" && kind != "numeric") throw ValidityError("bad column kind " + kind);
    t.columns.push_back({c.at("name").get<std::string>(),
                         kind == "entity" ? ColumnKind::kEntity : ColumnKind::kNumeric});
  }
  for (const auto& r : j.at("rows")) {
    std::vector<Cell> row;
    for (const auto& cell : r) {
      if (cell.is_string()) row.push_back(Cell::text(cell.get<std::string>()));
      else if (cell.is_number_integer()) row.push_back(Cell::number(cell.get<int>()));
      else throw ValidityError("cells must be strings or integers");
    }
    t.rows.push_back(std::move(row));
  }
  validate_table(t);
  return t;
}

}  // namespace

void validate_record(const CorpusRecord& record) {
  validate_table(record.table);
  if (record.references.empty() || record.references.size() > 5)
    throw ValidityError("record " + record.table.id + ": need 1..5 references");
  for (const auto& ref : record.references) {
    if (type_of(ref.gold_form) != ref.gold_type)
      throw ValidityError("record " + record.table.id + ": gold type does not match form");
    if (!evaluate(ref.gold_form, record.table))
      throw ValidityError("record " + record.table.id + ": reference is false: " +
                          ref.statement.text);
  }
}

std::string record_to_json_line(const CorpusRecord& record) {
  json refs = json::array();
  for (const auto& r : record.references)
    refs.push_back({{"text", r.statement.text},
                    {"type", std::string(type_name(r.gold_type))},
                    {"form", to_sexpr(r.gold_form)}});
  json j = {{"table", table_to_json(record.table)}, {"references", refs}};
  return j.dump();
}

CorpusRecord record_from_json_line(const std::string& line) {
  const json j = json::parse(line);
  CorpusRecord rec;
  rec.table = table_from_json(j.at("table"));
  for (const auto& r : j.at("references")) {
    const auto tname = r.at("type").get<std::string>();
    auto type = type_from_name(tname);
    if (!type) throw ValidityError("unknown logic type " + tname);
    rec.references.push_back({Statement::from_text(r.at("text").get<std::string>()), *type,
                              from_sexpr(r.at("form").get<std::string>())});
  }
  validate_record(rec);
  return rec;
}

void save_corpus(const std::vector<CorpusRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& r : records) out << record_to_json_line(r) << '\n';
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<CorpusRecord> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<CorpusRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json_line(line));
    } catch (const json::exception& e) {
      throw ParseError(lineno, path.string() + ": " + e.what());
    } catch (const ValidityError& e) {
      throw ParseError(lineno, path.string() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace typectl
