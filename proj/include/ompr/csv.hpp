#pragma once

#include <Eigen/Core>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ompr {

struct csv_parse_error : std::invalid_argument {
  explicit csv_parse_error(const std::string& what) : std::invalid_argument("CsvParse: " + what) {}
};

// Rectangular matrix of comma-separated doubles, one row per line. Blank
// lines and lines starting with '#' are skipped.
inline Eigen::MatrixXd load_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw csv_parse_error("cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos || line[start] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        while (used < cell.size() && (cell[used] == ' ' || cell[used] == '\t' || cell[used] == '\r'))
          ++used;
        if (used != cell.size()) throw std::invalid_argument("trailing characters");
        row.push_back(v);
      } catch (const std::exception&) {
        throw csv_parse_error(path + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
      }
    }
    if (row.empty())
      throw csv_parse_error(path + ":" + std::to_string(line_no) + ": empty row");
    if (!rows.empty() && row.size() != rows.front().size())
      throw csv_parse_error(path + ":" + std::to_string(line_no) + ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw csv_parse_error(path + ": no data rows");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

inline Eigen::VectorXd load_vector_csv(const std::string& path) {
  Eigen::MatrixXd m = load_matrix_csv(path);
  if (m.cols() == 1) return m.col(0);
  if (m.rows() == 1) return m.row(0).transpose();
  throw csv_parse_error(path + ": expected a single row or column");
}

// Shortest-exact formatting for doubles keeps CSV output byte-stable.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace ompr
