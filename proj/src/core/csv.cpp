#include "csv.hpp"

#include <fstream>
#include <sstream>

#include "error.hpp"

namespace ctrl::csv {

namespace {

// Splits one logical CSV record; consumes extra physical lines inside quotes.
std::vector<std::string> parse_record(std::istream& in, const std::string& first_line, const std::string& where) {
  std::vector<std::string> fields;
  std::string field;
  bool in_quotes = false;
  std::string line = first_line;
  for (;;) {
    for (size_t i = 0; i < line.size(); ++i) {
      char c = line[i];
      if (in_quotes) {
        if (c == '"') {
          if (i + 1 < line.size() && line[i + 1] == '"') {
            field.push_back('"');
            ++i;
          } else {
            in_quotes = false;
          }
        } else {
          field.push_back(c);
        }
      } else if (c == '"') {
        in_quotes = true;
      } else if (c == ',') {
        fields.push_back(std::move(field));
        field.clear();
      } else if (c == '\r' && i + 1 == line.size()) {
        // trailing CR of a CRLF line
      } else {
        field.push_back(c);
      }
    }
    if (!in_quotes) break;
    field.push_back('\n');
    if (!std::getline(in, line)) fail_parse(where + ": unterminated quoted field");
  }
  fields.push_back(std::move(field));
  return fields;
}

}  // namespace

Table read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_io("cannot open file: " + path);

  Table table;
  std::string line;
  if (!std::getline(in, line)) fail_parse("empty file: " + path);
  table.header = parse_record(in, line, path + " header");
  while (std::getline(in, line)) {
    if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
    table.rows.push_back(parse_record(in, line, path));
  }
  return table;
}

std::string escape(const std::string& field) {
  bool needs_quotes = field.find_first_of(",\"\n\r") != std::string::npos;
  if (!needs_quotes) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_file(const std::string& path, const std::vector<std::string>& header,
                const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_io("cannot write file: " + path);
  auto write_row = [&out](const std::vector<std::string>& row) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << escape(row[i]);
    }
    out << '\n';
  };
  write_row(header);
  for (const auto& row : rows) write_row(row);
  if (!out) fail_io("write failed: " + path);
}

}  // namespace ctrl::csv
