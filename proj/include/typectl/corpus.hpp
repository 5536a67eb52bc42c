#ifndef TYPECTL_CORPUS_HPP_
#define TYPECTL_CORPUS_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "typectl/logic.hpp"
#include "typectl/table.hpp"

namespace typectl {

struct Reference {
  Statement statement;
  LogicType gold_type;
  LogicalForm gold_form;
  bool operator==(const Reference&) const = default;
};

struct CorpusRecord {
  Table table;
  std::vector<Reference> references;
  bool operator==(const CorpusRecord&) const = default;
};

// Checks table invariants, 1..5 references, gold types matching forms, and
// that every reference is true and parses back to its form.
void validate_record(const CorpusRecord& record);

// One JSON object per line. Throws IoError on I/O failure.
void save_corpus(const std::vector<CorpusRecord>& records, const std::filesystem::path& path);
// Throws ParseError (with the 1-based line number) on a malformed line.
std::vector<CorpusRecord> load_corpus(const std::filesystem::path& path);

std::string record_to_json_line(const CorpusRecord& record);
CorpusRecord record_from_json_line(const std::string& line);

}  // namespace typectl

#endif  // TYPECTL_CORPUS_HPP_
