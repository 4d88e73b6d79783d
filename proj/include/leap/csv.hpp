#pragma once

#include <string>
#include <vector>

namespace leap {

// Minimal CSV with a single header row; numeric payload only.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int column_index(const std::string& name) const;  // -1 if absent
  double at(size_t row, const std::string& name) const;
};

void write_csv(const std::string& path, const CsvTable& table);
CsvTable read_csv(const std::string& path);

}  // namespace leap
