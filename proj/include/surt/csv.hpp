#pragma once

#include <string>
#include <vector>

namespace surt {

struct CsvTable {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;
  int n() const { return columns.empty() ? 0 : static_cast<int>(columns[0].size()); }
};

// Strictly numeric CSV with a mandatory header row. Ragged rows, empty
// fields, duplicate names, or non-numeric cells are ParseError; an absent or
// unreadable file is IoError.
CsvTable read_csv(const std::string& path);

// Writes with 17 significant digits so re-runs are byte-comparable.
void write_csv(const std::string& path, const std::vector<std::string>& names,
               const std::vector<std::vector<double>>& columns);

std::string format_double(double v);

}  // namespace surt
