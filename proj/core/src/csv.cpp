#include "ogl/csv.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace ogl::csv {

std::string format_double(double x) {
  char buf[40];
  auto r = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& cell, std::size_t row, std::size_t col) {
  double v{};
  const char* first = cell.data();
  const char* last = first + cell.size();
  while (first != last && (*first == ' ' || *first == '\t')) ++first;
  auto r = std::from_chars(first, last, v);
  if (r.ec != std::errc{} || r.ptr != last) {
    std::ostringstream msg;
    msg << "csv: non-numeric cell '" << cell << "' at row " << row << ", column " << col;
    throw std::runtime_error(msg.str());
  }
  return v;
}

long long parse_int(const std::string& cell, std::size_t row, std::size_t col) {
  long long v{};
  const char* first = cell.data();
  const char* last = first + cell.size();
  while (first != last && (*first == ' ' || *first == '\t')) ++first;
  auto r = std::from_chars(first, last, v);
  if (r.ec != std::errc{} || r.ptr != last) {
    std::ostringstream msg;
    msg << "csv: non-integer cell '" << cell << "' at row " << row << ", column " << col;
    throw std::runtime_error(msg.str());
  }
  return v;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

int Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

Table read_table(std::istream& in) {
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("csv: empty input");
  t.header = split_line(line);
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != t.header.size()) {
      std::ostringstream msg;
      msg << "csv: row " << row << " has " << cells.size() << " cells, expected "
          << t.header.size();
      throw std::runtime_error(msg.str());
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

Table read_table_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("csv: cannot open " + path);
  return read_table(f);
}

void Writer::header(const std::vector<std::string>& names) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out_ << ',';
    out_ << names[i];
  }
  out_ << '\n';
}

Writer& Writer::cell(const std::string& v) {
  if (row_open_) out_ << ',';
  out_ << v;
  row_open_ = true;
  return *this;
}

Writer& Writer::cell(double v) { return cell(format_double(v)); }

Writer& Writer::cell(long long v) { return cell(std::to_string(v)); }

Writer& Writer::cell(std::uint64_t v) { return cell(std::to_string(v)); }

void Writer::end_row() {
  out_ << '\n';
  row_open_ = false;
}

}  // namespace ogl::csv
