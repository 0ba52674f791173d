#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace rcr::csv {

/// 10 significant digits, '.' decimal separator.
std::string number(double x);

std::vector<std::string> split_line(std::string_view line);

int parse_int(std::string_view field, std::string_view what);
double parse_double(std::string_view field, std::string_view what);

/// Row-major dump of a dense matrix without a header.
void write_matrix(std::ostream& out, const Eigen::MatrixXd& m);

}  // namespace rcr::csv
