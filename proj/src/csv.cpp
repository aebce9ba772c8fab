#include "csv.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "errors.hpp"

namespace drmatch {

int CsvTable::column(std::string_view name) const {
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

namespace {

// one record; returns false on clean EOF before any character
bool read_record(std::istream& in, std::vector<std::string>& fields,
                 size_t& line_no) {
  fields.clear();
  int c = in.get();
  if (c == EOF) return false;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  auto push = [&]() {
    fields.push_back(field);
    field.clear();
    field_started = false;
  };
  while (true) {
    if (quoted) {
      if (c == EOF)
        fail(Status::ParseError,
             "unterminated quoted field at line " + std::to_string(line_no));
      if (c == '"') {
        if (in.peek() == '"') {
          field.push_back('"');
          in.get();
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line_no;
        field.push_back(static_cast<char>(c));
      }
    } else {
      if (c == EOF) {
        push();
        return true;
      }
      if (c == '"' && !field_started) {
        quoted = true;
        field_started = true;
      } else if (c == ',') {
        push();
      } else if (c == '\n') {
        push();
        ++line_no;
        return true;
      } else if (c == '\r') {
        if (in.peek() == '\n') {
          in.get();
          push();
          ++line_no;
          return true;
        }
        field.push_back('\r');
        field_started = true;
      } else {
        field.push_back(static_cast<char>(c));
        field_started = true;
      }
    }
    c = in.get();
  }
}

}  // namespace

CsvTable read_csv(std::istream& in) {
  CsvTable t;
  size_t line_no = 1;
  std::vector<std::string> rec;
  if (!read_record(in, rec, line_no))
    fail(Status::ParseError, "empty input: no header row");
  t.header = rec;
  size_t width = t.header.size();
  while (read_record(in, rec, line_no)) {
    if (rec.size() == 1 && rec[0].empty()) continue;  // blank line
    if (rec.size() != width)
      fail(Status::ParseError,
           "row ending at line " + std::to_string(line_no) + " has " +
               std::to_string(rec.size()) + " fields, header has " +
               std::to_string(width));
    t.rows.push_back(std::move(rec));
  }
  return t;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Status::IoError, "cannot open " + path);
  return read_csv(in);
}

CsvTable read_csv_string(const std::string& data) {
  std::istringstream in(data);
  return read_csv(in);
}

std::string csv_escape(std::string_view field) {
  bool need = false;
  for (char c : field)
    if (c == ',' || c == '"' || c == '\n' || c == '\r') {
      need = true;
      break;
    }
  if (!need) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << csv_escape(fields[i]);
  }
  out << '\n';
}

}  // namespace drmatch
