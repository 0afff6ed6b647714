#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace whisker {

/// Minimal CSV writer with a fixed header and round-trip-exact doubles.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);

  void write_row(const std::vector<double>& values);
  void write_row_raw(const std::string& line);

 private:
  std::ofstream out_;
  size_t columns_;
};

/// Formats a double with enough digits to round-trip exactly.
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::string& path);

}  // namespace whisker
