#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace drmatch {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // column index or -1
  int column(std::string_view name) const;
};

// RFC 4180: quoted fields, "" escapes, embedded commas/newlines, CRLF or
// LF line endings, optional trailing newline. Rows must all have the
// header's field count; violations raise ParseError with the row number.
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);
CsvTable read_csv_string(const std::string& data);

std::string csv_escape(std::string_view field);
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace drmatch
