#pragma once

#include <string>
#include <vector>

namespace covsteer {

/// 17 significant digits, '.' decimal separator, independent of locale.
std::string format_number(double x);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::string str() const;
};

/// Parses text produced by CsvTable::str.
CsvTable parse_csv(const std::string& text);

/// Writes to a temporary sibling and renames it into place.
void write_file_atomic(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

}  // namespace covsteer
