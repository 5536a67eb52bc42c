#ifndef TYPECTL_TABLE_HPP_
#define TYPECTL_TABLE_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace typectl {

enum class ColumnKind { kEntity, kNumeric };

struct Column {
  std::string name;
  ColumnKind kind;
  bool operator==(const Column&) const = default;
};

// A table cell holds either an entity label or an integer in [0, 100].
class Cell {
 public:
  static Cell text(std::string label) { return Cell(std::move(label)); }
  static Cell number(int value) { return Cell(value); }

  bool is_text() const { return std::holds_alternative<std::string>(value_); }
  bool is_number() const { return std::holds_alternative<int>(value_); }
  const std::string& label() const { return std::get<std::string>(value_); }
  int value() const { return std::get<int>(value_); }

  // Surface token used by the linearizer.
  std::string token() const;

  bool operator==(const Cell&) const = default;

 private:
  explicit Cell(std::string s) : value_(std::move(s)) {}
  explicit Cell(int v) : value_(v) {}
  std::variant<std::string, int> value_;
};

inline constexpr int kMinRows = 4;
inline constexpr int kMaxRows = 8;
inline constexpr int kMinNumericCols = 2;
inline constexpr int kMaxNumericCols = 3;
inline constexpr int kMaxCellValue = 100;

struct Table {
  std::string id;
  std::string title;
  std::vector<Column> columns;
  std::vector<std::vector<Cell>> rows;

  int row_count() const { return static_cast<int>(rows.size()); }
  const std::string& entity(int row) const { return rows[row][0].label(); }

  std::optional<int> find_column(const std::string& name) const;
  // Index of a numeric column by name, if present.
  std::optional<int> find_numeric_column(const std::string& name) const;
  std::optional<int> find_entity(const std::string& name) const;
  std::vector<int> numeric_columns() const;
  std::vector<int> column_values(int col) const;

  bool operator==(const Table&) const = default;
};

// Throws ValidityError describing the first violated invariant.
void validate_table(const Table& table);

// Built-in vocabularies the synthesizer draws from.
const std::vector<std::string>& entity_name_pool();
const std::vector<std::string>& entity_column_pool();
const std::vector<std::string>& numeric_column_pool();
const std::vector<std::string>& title_word_pool();

// Deterministic synthetic table. Throws RangeError on out-of-range sizes.
Table gen_synthetic_table(std::uint64_t seed, int row_count, int numeric_cols);

// Marker tokens of the linearized form.
inline constexpr const char* kTitleMarker = "[TTL]";
inline constexpr const char* kHeaderMarker = "[HDR]";
inline constexpr const char* kRowMarker = "[ROW]";
inline constexpr const char* kBarMarker = "[BAR]";

// [TTL] title [HDR] c0 [BAR] c1 ... [ROW] v00 [BAR] v01 ... per row.
std::vector<std::string> linearize_table(const Table& table);

}  // namespace typectl

#endif  // TYPECTL_TABLE_HPP_
