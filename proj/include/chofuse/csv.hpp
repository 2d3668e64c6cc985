#pragma once

#include <string>
#include <vector>

#include "chofuse/errors.hpp"

namespace chofuse {

// Comma-separated with a header row; empty string means missing. Quoted
// fields may contain commas, doubled quotes and newlines.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // index of the named column, -1 when absent
  int column(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& text, const std::string& origin = "csv");

std::string csv_escape(const std::string& field);

}  // namespace chofuse
