#include "rcr/csv.hpp"

#include <fmt/format.h>

#include <charconv>
#include <ostream>
#include <stdexcept>

namespace rcr::csv {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

}  // namespace

std::string number(double x) { return fmt::format("{:.10g}", x); }

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    fields.emplace_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

int parse_int(std::string_view field, std::string_view what) {
  int out = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty())
    throw std::invalid_argument(
        fmt::format("cannot parse {} '{}' as an integer", what, field));
  return out;
}

double parse_double(std::string_view field, std::string_view what) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty())
    throw std::invalid_argument(
        fmt::format("cannot parse {} '{}' as a number", what, field));
  return out;
}

void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << number(m(r, c));
    }
    out << '\n';
  }
}

}  // namespace rcr::csv
