#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace ogl::csv {

/// Shortest round-trip decimal form of a double. Deterministic output: the
/// same value always formats to the same bytes.
std::string format_double(double x);

double parse_double(const std::string& cell, std::size_t row, std::size_t col);
long long parse_int(const std::string& cell, std::size_t row, std::size_t col);

std::vector<std::string> split_line(const std::string& line);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

Table read_table(std::istream& in);
Table read_table_file(const std::string& path);

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void header(const std::vector<std::string>& names);

  Writer& cell(const std::string& v);
  Writer& cell(double v);
  Writer& cell(long long v);
  Writer& cell(int v) { return cell(static_cast<long long>(v)); }
  Writer& cell(std::uint64_t v);
  void end_row();

 private:
  std::ostream& out_;
  bool row_open_ = false;
};

}  // namespace ogl::csv
