#include "nemon/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace nemon {

void CsvTable::add_row(std::vector<std::string> cells) {
  if (cells.size() != header.size()) throw CsvError("csv: row width does not match header");
  rows.push_back(std::move(cells));
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (header[k] == name) return k;
  }
  throw CsvError("csv: no column '" + name + "'");
}

double CsvTable::number(std::size_t row, const std::string& name) const {
  if (row >= rows.size()) throw CsvError("csv: row out of range");
  return parse_number(rows[row][column(name)]);
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw CsvError("csv: cannot format number");
  return std::string(buf, ptr);
}

std::string format_number(long long v) { return std::to_string(v); }

double parse_number(const std::string& text) {
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw CsvError("csv: not a number: '" + text + "'");
  return v;
}

namespace {

void check_cell(const std::string& cell) {
  if (cell.find_first_of(",\"\n\r") != std::string::npos) {
    throw CsvError("csv: cell contains a reserved character: '" + cell + "'");
  }
}

void emit_line(std::string& out, const std::vector<std::string>& cells) {
  for (std::size_t k = 0; k < cells.size(); ++k) {
    check_cell(cells[k]);
    if (k > 0) out += ',';
    out += cells[k];
  }
  out += '\n';
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

}  // namespace

std::string emit_csv(const CsvTable& table) {
  std::string out;
  emit_line(out, table.header);
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) throw CsvError("csv: row width does not match header");
    emit_line(out, row);
  }
  return out;
}

CsvTable parse_csv(const std::string& text) {
  if (text.empty()) throw CsvError("csv: empty input");
  if (text.back() != '\n') throw CsvError("csv: missing final newline");
  CsvTable table;
  std::size_t start = 0;
  bool first = true;
  while (start < text.size()) {
    const auto nl = text.find('\n', start);
    const std::string line = text.substr(start, nl - start);
    start = nl + 1;
    if (line.find('\r') != std::string::npos) throw CsvError("csv: carriage return in input");
    if (first) {
      table.header = split_line(line);
      first = false;
    } else {
      std::vector<std::string> cells = split_line(line);
      if (cells.size() != table.header.size()) throw CsvError("csv: ragged row");
      table.rows.push_back(std::move(cells));
    }
  }
  return table;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CsvError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw CsvError("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CsvError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace nemon
