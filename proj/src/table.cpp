#include "typectl/table.hpp"

#include <algorithm>
#include <set>

#include "typectl/common.hpp"

namespace typectl {

std::vector<std::string> split_ws(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t' || text[i] == '\n' || text[i] == '\r'))
      ++i;
    std::size_t j = i;
    while (j < text.size() && !(text[j] == ' ' || text[j] == '\t' || text[j] == '\n' || text[j] == '\r'))
      ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string join_ws(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::string Cell::token() const {
  return is_text() ? label() : std::to_string(value());
}

std::optional<int> Table::find_column(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i].name == name) return static_cast<int>(i);
  return std::nullopt;
}

std::optional<int> Table::find_numeric_column(const std::string& name) const {
  auto c = find_column(name);
  if (c && columns[*c].kind == ColumnKind::kNumeric) return c;
  return std::nullopt;
}

std::optional<int> Table::find_entity(const std::string& name) const {
  for (int r = 0; r < row_count(); ++r)
    if (entity(r) == name) return r;
  return std::nullopt;
}

std::vector<int> Table::numeric_columns() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i].kind == ColumnKind::kNumeric) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> Table::column_values(int col) const {
  std::vector<int> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(row[col].value());
  return out;
}

void validate_table(const Table& table) {
  if (table.title.empty()) throw ValidityError("table " + table.id + ": empty title");
  if (table.columns.empty() || table.columns[0].kind != ColumnKind::kEntity)
    throw ValidityError("table " + table.id + ": column 0 must be the entity column");
  int numeric = 0;
  std::set<std::string> names;
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    const auto& c = table.columns[i];
    if (c.name.empty() || split_ws(c.name).size() != 1)
      throw ValidityError("table " + table.id + ": column names must be single tokens");
    if (!names.insert(c.name).second)
      throw ValidityError("table " + table.id + ": duplicate column " + c.name);
    if (i > 0 && c.kind != ColumnKind::kNumeric)
      throw ValidityError("table " + table.id + ": exactly one entity column allowed");
    if (c.kind == ColumnKind::kNumeric) ++numeric;
  }
  if (numeric < kMinNumericCols || numeric > kMaxNumericCols)
    throw ValidityError("table " + table.id + ": numeric column count out of range");
  if (table.row_count() < kMinRows || table.row_count() > kMaxRows)
    throw ValidityError("table " + table.id + ": row count out of range");
  std::set<std::string> entities;
  for (const auto& row : table.rows) {
    if (row.size() != table.columns.size())
      throw ValidityError("table " + table.id + ": ragged row");
    for (std::size_t i = 0; i < row.size(); ++i) {
      const bool want_text = table.columns[i].kind == ColumnKind::kEntity;
      if (row[i].is_text() != want_text)
        throw ValidityError("table " + table.id + ": cell kind mismatch");
      if (row[i].is_number() && (row[i].value() < 0 || row[i].value() > kMaxCellValue))
        throw ValidityError("table " + table.id + ": cell value out of range");
    }
    const auto& label = row[0].label();
    if (label.empty() || split_ws(label).size() != 1)
      throw ValidityError("table " + table.id + ": entity labels must be single tokens");
    if (!entities.insert(label).second)
      throw ValidityError("table " + table.id + ": duplicate entity " + label);
  }
}

const std::vector<std::string>& entity_name_pool() {
  static const std::vector<std::string> pool = {
      "alice",  "bob",    "carol",  "dave",    "erin",   "frank",  "grace",
      "heidi",  "ivan",   "judy",   "mallory", "niaj",   "olivia", "peggy",
      "rupert", "sybil",  "trent",  "victor",  "walter", "xavier", "yolanda",
      "zoe",    "adam",   "bella",  "chloe",   "diego",  "elena",  "felix",
      "gina",   "hugo",   "iris",   "jack",    "kira",   "leo",    "mia",
      "nora",   "oscar",  "paula",  "quinn",   "rosa",   "sam",    "tara",
      "uma",    "vera",   "wade",   "yara",    "zane",   "anton",  "beth",
      "cyrus",  "dana",   "eli",    "fiona",   "gus",    "hana",   "igor",
      "jade",   "kurt",   "lena",   "milo",    "nina",   "otto",   "pia",
      "reid",   "sofia",  "theo",   "ursula",  "vince",  "wren",   "yuri",
  };
  return pool;
}

const std::vector<std::string>& entity_column_pool() {
  static const std::vector<std::string> pool = {"name", "team",   "player",
                                                "club", "driver", "racer"};
  return pool;
}

const std::vector<std::string>& numeric_column_pool() {
  static const std::vector<std::string> pool = {
      "pts",   "wins",   "losses", "goals",  "games",  "laps",
      "votes", "assists", "titles", "medals", "starts", "draws"};
  return pool;
}

const std::vector<std::string>& title_word_pool() {
  // First eight words are regions, the rest are event kinds.
  static const std::vector<std::string> pool = {
      "northern", "southern", "eastern", "western", "central", "coastal",
      "island",   "mountain", "league",  "cup",     "open",    "series",
      "trophy",   "championship", "classic", "derby"};
  return pool;
}

namespace {

template <typename T>
std::vector<T> sample_without_replacement(const std::vector<T>& pool, int k, Rng& rng) {
  std::vector<T> copy = pool;
  for (int i = 0; i < k; ++i) {
    const std::size_t j = i + rng.below(copy.size() - i);
    std::swap(copy[i], copy[j]);
  }
  copy.resize(k);
  return copy;
}

}  // namespace

Table gen_synthetic_table(std::uint64_t seed, int row_count, int numeric_cols) {
  if (row_count < kMinRows || row_count > kMaxRows)
    throw RangeError("row_count must be in [" + std::to_string(kMinRows) + ", " +
                     std::to_string(kMaxRows) + "], got " + std::to_string(row_count));
  if (numeric_cols < kMinNumericCols || numeric_cols > kMaxNumericCols)
    throw RangeError("numeric_cols must be in [" + std::to_string(kMinNumericCols) + ", " +
                     std::to_string(kMaxNumericCols) + "], got " +
                     std::to_string(numeric_cols));

  Rng rng(derive_seed(seed, (static_cast<std::uint64_t>(row_count) << 8) | numeric_cols));
  Table t;
  t.id = "t" + std::to_string(seed);
  const auto& words = title_word_pool();
  t.title = words[rng.below(8)] + " " + words[8 + rng.below(8)];

  const auto& ecols = entity_column_pool();
  t.columns.push_back({ecols[rng.below(ecols.size())], ColumnKind::kEntity});
  for (auto& name : sample_without_replacement(numeric_column_pool(), numeric_cols, rng))
    t.columns.push_back({name, ColumnKind::kNumeric});

  auto names = sample_without_replacement(entity_name_pool(), row_count, rng);
  for (int r = 0; r < row_count; ++r) {
    std::vector<Cell> row;
    row.push_back(Cell::text(names[r]));
    for (int c = 0; c < numeric_cols; ++c) row.push_back(Cell::number(rng.range(0, kMaxCellValue)));
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::vector<std::string> linearize_table(const Table& table) {
  std::vector<std::string> out;
  out.push_back(kTitleMarker);
  for (auto& w : split_ws(table.title)) out.push_back(std::move(w));
  out.push_back(kHeaderMarker);
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    if (i) out.push_back(kBarMarker);
    out.push_back(table.columns[i].name);
  }
  for (const auto& row : table.rows) {
    out.push_back(kRowMarker);
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out.push_back(kBarMarker);
      out.push_back(row[i].token());
    }
  }
  return out;
}

}  // namespace typectl
