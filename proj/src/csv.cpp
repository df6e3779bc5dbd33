#include "surt/csv.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "surt/errors.hpp"

namespace surt {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_field(const std::string& field, const std::string& path,
                   std::size_t line_no) {
  if (field.empty())
    fail(ErrorCode::ParseError,
         path + ": empty field on line " + std::to_string(line_no));
  const char* begin = field.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end != begin + field.size())
    fail(ErrorCode::ParseError, path + ": non-numeric field '" + field +
                                    "' on line " + std::to_string(line_no));
  return v;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line))
    fail(ErrorCode::ParseError, path + ": missing header row");
  CsvTable table;
  table.names = split_line(line);
  std::set<std::string> seen;
  for (const auto& name : table.names) {
    if (name.empty())
      fail(ErrorCode::ParseError, path + ": empty column name in header");
    if (!seen.insert(name).second)
      fail(ErrorCode::ParseError, path + ": duplicate column name " + name);
  }
  table.columns.assign(table.names.size(), {});
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() && in.eof()) break;
    const auto fields = split_line(line);
    if (fields.size() != table.names.size())
      fail(ErrorCode::ParseError,
           path + ": expected " + std::to_string(table.names.size()) +
               " fields, got " + std::to_string(fields.size()) + " on line " +
               std::to_string(line_no));
    for (std::size_t c = 0; c < fields.size(); ++c)
      table.columns[c].push_back(parse_field(fields[c], path, line_no));
  }
  if (table.n() == 0) fail(ErrorCode::EmptyData, path + ": no data rows");
  return table;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& names,
               const std::vector<std::vector<double>>& columns) {
  if (names.size() != columns.size())
    fail(ErrorCode::InvalidArgument, "write_csv: names/columns mismatch");
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path);
  for (std::size_t c = 0; c < names.size(); ++c)
    out << (c ? "," : "") << names[c];
  out << "\n";
  const std::size_t n = columns.empty() ? 0 : columns[0].size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < columns.size(); ++c)
      out << (c ? "," : "") << format_double(columns[c][i]);
    out << "\n";
  }
  if (!out) fail(ErrorCode::IoError, "short write to " + path);
}

}  // namespace surt
