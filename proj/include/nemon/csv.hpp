#pragma once

// Minimal CSV tables. Numbers are written in the shortest form that reads
// back to the same double, so parse followed by emit reproduces the bytes.

#include <stdexcept>
#include <string>
#include <vector>

namespace nemon {

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> cells);
  /// Column index by header name; throws CsvError when absent.
  std::size_t column(const std::string& name) const;
  double number(std::size_t row, const std::string& name) const;
};

/// Shortest round-trip decimal form ("nan", "inf", "-inf" for non-finite).
std::string format_number(double v);
std::string format_number(long long v);
double parse_number(const std::string& text);

/// Cells may not contain commas, quotes or newlines. Lines end in '\n'.
std::string emit_csv(const CsvTable& table);
CsvTable parse_csv(const std::string& text);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace nemon
