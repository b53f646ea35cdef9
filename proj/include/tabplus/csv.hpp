#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tabplus {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

class CsvError : public std::runtime_error {
 public:
  CsvError(std::size_t line, const std::string& message);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// RFC 4180 reader: quoted fields may hold delimiters, newlines and doubled
/// quotes; CRLF and LF line endings are accepted; blank lines are skipped.
/// Without a header, columns are named c0, c1, ...
/// Every record must have as many fields as the first one.
CsvTable parse_csv(std::string_view text, char delimiter = ',', bool has_header = true);

CsvTable read_csv(const std::filesystem::path& path, char delimiter = ',', bool has_header = true);

}  // namespace tabplus
