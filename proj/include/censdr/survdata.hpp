// Right-censored survival data: container, CSV ingestion, standardization.
//
// CSV layout is fixed: header `x1,...,xp,time,status`, UTF-8, '.' decimal
// point, no missing values. status is 1 for an observed event and 0 for a
// censored observation. Row order is preserved: file row k becomes
// observation k.

#pragma once

#include <Eigen/Core>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace censdr {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateColumnError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SurvivalDataset {
  Eigen::MatrixXd covariates;  // n x p baseline covariates
  Eigen::VectorXd times;       // observed time Z = min(T, C), > 0
  Eigen::VectorXi events;      // 1 = event, 0 = censored

  Eigen::Index n() const { return times.size(); }
  Eigen::Index p() const { return covariates.cols(); }

  // Throws std::invalid_argument on any violated invariant.
  void validate() const {
    if (n() < 2) throw std::invalid_argument("dataset needs n >= 2 observations");
    if (p() < 1) throw std::invalid_argument("dataset needs p >= 1 covariates");
    if (covariates.rows() != n() || events.size() != n())
      throw std::invalid_argument("dataset dimensions disagree");
    for (Eigen::Index i = 0; i < n(); ++i) {
      if (!(times[i] > 0.0) || !std::isfinite(times[i]))
        throw std::invalid_argument("times must be positive and finite, row " +
                                    std::to_string(i + 1));
      if (events[i] != 0 && events[i] != 1)
        throw std::invalid_argument("status outside {0,1}, row " +
                                    std::to_string(i + 1));
    }
    if (!covariates.allFinite())
      throw std::invalid_argument("covariates must be finite");
  }
};

// Column-name mapping for load_csv. Covariate columns are
// `<covariate_prefix>1 .. <covariate_prefix>p` and must come first.
struct CsvSchema {
  std::string covariate_prefix = "x";
  std::string time_column = "time";
  std::string status_column = "status";
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_number(const std::string& cell, int row,
                           const std::string& column) {
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  while (first < last && (*first == ' ' || *first == '\t')) ++first;
  while (last > first && (*(last - 1) == ' ' || *(last - 1) == '\t')) --last;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    throw ParseError("non-numeric cell, row " + std::to_string(row) +
                     ", column " + column);
  return value;
}

}  // namespace detail

inline SurvivalDataset load_csv(const std::string& path,
                                const CsvSchema& schema = {}) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file: " + path);
  const auto header = detail::split_csv_line(line);

  // Header must be x1..xp,time,status in order.
  if (header.size() < 3)
    throw ParseError("missing column: need x1..xp, " + schema.time_column +
                     ", " + schema.status_column);
  const int p = static_cast<int>(header.size()) - 2;
  for (int j = 0; j < p; ++j) {
    const std::string want = schema.covariate_prefix + std::to_string(j + 1);
    if (header[j] != want)
      throw ParseError("missing column: expected '" + want + "', found '" +
                       header[j] + "'");
  }
  if (header[p] != schema.time_column)
    throw ParseError("missing column: expected '" + schema.time_column +
                     "', found '" + header[p] + "'");
  if (header[p + 1] != schema.status_column)
    throw ParseError("missing column: expected '" + schema.status_column +
                     "', found '" + header[p + 1] + "'");

  std::vector<std::array<double, 2>> tail;  // (time, status)
  std::vector<double> xs;
  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw ParseError("wrong number of cells, row " + std::to_string(row));
    for (int j = 0; j < p; ++j)
      xs.push_back(detail::parse_number(cells[j], row, header[j]));
    const double t = detail::parse_number(cells[p], row, schema.time_column);
    if (!(t > 0.0) || !std::isfinite(t))
      throw ParseError("nonpositive time, row " + std::to_string(row));
    const double s = detail::parse_number(cells[p + 1], row, schema.status_column);
    if (s != 0.0 && s != 1.0)
      throw ParseError("status outside {0,1}, row " + std::to_string(row));
    tail.push_back({t, s});
  }
  if (row < 2) throw ParseError("need at least 2 data rows, got " +
                                std::to_string(row));

  SurvivalDataset data;
  data.covariates.resize(row, p);
  data.times.resize(row);
  data.events.resize(row);
  for (int i = 0; i < row; ++i) {
    for (int j = 0; j < p; ++j) data.covariates(i, j) = xs[i * p + j];
    data.times[i] = tail[i][0];
    data.events[i] = static_cast<int>(tail[i][1]);
  }
  data.validate();
  return data;
}

// Componentwise affine transform x -> (x - mean) / scale.
struct Standardization {
  Eigen::VectorXd means;
  Eigen::VectorXd scales;  // sample standard deviations, all > 0

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
    return (x.rowwise() - means.transpose()).array().rowwise() /
           scales.transpose().array();
  }
  Eigen::MatrixXd invert(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd out =
        (x.array().rowwise() * scales.transpose().array()).matrix();
    out.rowwise() += means.transpose();
    return out;
  }
};

inline std::pair<SurvivalDataset, Standardization> standardize(
    const SurvivalDataset& data) {
  const Eigen::Index n = data.n(), p = data.p();
  Standardization st;
  st.means = data.covariates.colwise().mean();
  st.scales.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double ss =
        (data.covariates.col(j).array() - st.means[j]).square().sum();
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (!(sd > 0.0))
      throw DegenerateColumnError("constant covariate column x" +
                                  std::to_string(j + 1));
    st.scales[j] = sd;
  }
  SurvivalDataset out = data;
  out.covariates = st.apply(data.covariates);
  return {std::move(out), std::move(st)};
}

}  // namespace censdr
