#include "tabplus/csv.hpp"

#include "tabplus/io.hpp"

namespace tabplus {

CsvError::CsvError(std::size_t line, const std::string& message)
    : std::runtime_error("csv line " + std::to_string(line) + ": " + message), line_(line) {}

namespace {

// Splits one record starting at `pos`; advances `pos` past its line ending.
std::vector<std::string> read_record(std::string_view text, std::size_t& pos, char delim,
                                     std::size_t& line) {
  std::vector<std::string> fields;
  std::string field;
  const std::size_t start_line = line;
  bool quoted = false;
  bool was_quoted = false;
  while (pos < text.size()) {
    const char c = text[pos];
    if (quoted) {
      if (c == '"') {
        if (pos + 1 < text.size() && text[pos + 1] == '"') {
          field.push_back('"');
          pos += 2;
          continue;
        }
        quoted = false;
        ++pos;
        continue;
      }
      if (c == '\n') ++line;
      field.push_back(c);
      ++pos;
      continue;
    }
    if (c == '"') {
      if (!field.empty() || was_quoted) throw CsvError(line, "quote inside an unquoted field");
      quoted = true;
      was_quoted = true;
      ++pos;
    } else if (c == delim) {
      fields.push_back(std::move(field));
      field.clear();
      was_quoted = false;
      ++pos;
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && pos + 1 < text.size() && text[pos + 1] == '\n') ++pos;
      ++pos;
      ++line;
      fields.push_back(std::move(field));
      return fields;
    } else {
      if (was_quoted) throw CsvError(line, "text after a closing quote");
      field.push_back(c);
      ++pos;
    }
  }
  if (quoted) throw CsvError(start_line, "unterminated quoted field");
  fields.push_back(std::move(field));
  ++line;
  return fields;
}

bool blank(const std::vector<std::string>& record) {
  return record.size() == 1 && record[0].empty();
}

}  // namespace

CsvTable parse_csv(std::string_view text, char delimiter, bool has_header) {
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  CsvTable table;
  std::size_t pos = 0, line = 1;
  bool have_width = false;
  while (pos < text.size()) {
    const std::size_t record_line = line;
    auto record = read_record(text, pos, delimiter, line);
    if (blank(record)) continue;
    if (!have_width) {
      have_width = true;
      if (has_header) {
        table.header = std::move(record);
        continue;
      }
      for (std::size_t i = 0; i < record.size(); ++i) table.header.push_back("c" + std::to_string(i));
    }
    if (record.size() != table.header.size()) {
      throw CsvError(record_line, "expected " + std::to_string(table.header.size()) + " fields, found " +
                                      std::to_string(record.size()));
    }
    table.rows.push_back(std::move(record));
  }
  if (!have_width) throw CsvError(1, "empty file");
  return table;
}

CsvTable read_csv(const std::filesystem::path& path, char delimiter, bool has_header) {
  return parse_csv(io::read_file(path), delimiter, has_header);
}

}  // namespace tabplus
