#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fusereg {

// Row-major table of raw cells. Comma separated, UTF-8, '.' decimal,
// header required; lines starting with '#' are metadata and skipped.
struct RawTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  int find_column(const std::string& name) const;  // -1 when absent
};

RawTable read_csv(std::istream& in);
RawTable read_csv_file(const std::string& path);

std::string csv_quote(const std::string& field);
std::string format_double(double v);  // shortest round-trip decimal

bool parse_double(const std::string& cell, double& out);

}  // namespace fusereg
