#include "influence_gate/core_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace influence_gate {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
    } else if (ch == ',' && !quoted) {
      out.push_back(trim(cell));
      cell.clear();
    } else {
      cell.push_back(ch);
    }
  }
  out.push_back(trim(cell));
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (*b == '+') ++b;
  auto [ptr, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && ptr == e && std::isfinite(out);
}

}  // namespace

bool has_full_column_rank(const Eigen::MatrixXd& X) {
  if (X.cols() == 0 || X.rows() < X.cols()) return false;
  Eigen::MatrixXd Xs = X;
  for (Eigen::Index j = 0; j < Xs.cols(); ++j) {
    double nrm = Xs.col(j).norm();
    if (nrm == 0.0) return false;
    Xs.col(j) /= nrm;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Xs);
  const auto& sv = svd.singularValues();
  return sv(sv.size() - 1) > 1e-10 * sv(0);
}

RegressionData::RegressionData(Eigen::MatrixXd design, Eigen::VectorXd response)
    : X_(std::move(design)), y_(std::move(response)) {
  if (X_.rows() < 1 || X_.cols() < 1)
    throw DataError(DataFault::Schema, "regression data needs n >= 1 and k >= 1");
  if (X_.rows() != y_.size())
    throw DataError(DataFault::Schema, "design rows and response length differ");
  if (!has_full_column_rank(X_))
    throw DataError(DataFault::RankDeficient,
                    "design matrix does not have full column rank");
}

MMData::MMData(Eigen::VectorXd concentration, Eigen::VectorXd velocity)
    : c_(std::move(concentration)), v_(std::move(velocity)) {
  if (c_.size() < 1 || c_.size() != v_.size())
    throw DataError(DataFault::Schema, "concentration and velocity lengths differ or are empty");
  for (Eigen::Index i = 0; i < c_.size(); ++i)
    if (!(c_(i) > 0.0))
      throw DataError(DataFault::NonPositiveConcentration,
                      "concentration must be strictly positive (row " +
                          std::to_string(i + 1) + ")",
                      static_cast<long>(i + 1), "concentration");
}

LogitData::LogitData(Eigen::MatrixXd design, Eigen::VectorXd outcome)
    : X_(std::move(design)), y_(std::move(outcome)) {
  if (X_.rows() < 1 || X_.cols() < 1 || X_.rows() != y_.size())
    throw DataError(DataFault::Schema, "logistic design and outcome shapes disagree");
  for (Eigen::Index i = 0; i < y_.size(); ++i)
    if (y_(i) != 0.0 && y_(i) != 1.0)
      throw DataError(DataFault::NonBinaryOutcome,
                      "outcome must be 0 or 1 (row " + std::to_string(i + 1) + ")",
                      static_cast<long>(i + 1), "outcome");
}

// ---------------------------------------------------------------- deletion

bool DeletionSet::contains(int i) const {
  return std::binary_search(idx_.begin(), idx_.end(), i);
}

std::vector<int> DeletionSet::complement(int n) const {
  std::vector<int> out;
  out.reserve(n - idx_.size());
  for (int i = 0; i < n; ++i)
    if (!contains(i)) out.push_back(i);
  return out;
}

DeletionSet deletion_set(const std::vector<int>& indices, int n) {
  DeletionSet d;
  for (int i : indices) {
    if (i < 0 || i >= n)
      throw DataError(DataFault::IndexOutOfRange,
                      "deletion index " + std::to_string(i + 1) +
                          " (1-based) outside 1.." + std::to_string(n));
  }
  d.idx_ = indices;
  std::sort(d.idx_.begin(), d.idx_.end());
  d.idx_.erase(std::unique(d.idx_.begin(), d.idx_.end()), d.idx_.end());
  return d;
}

std::string format_one_based(const DeletionSet& del) {
  std::string s;
  for (int i : del.indices()) {
    if (!s.empty()) s += ' ';
    s += std::to_string(i + 1);
  }
  return s;
}

// ---------------------------------------------------------------- names

std::string to_string(MomentVerdict::Tag tag) {
  switch (tag) {
    case MomentVerdict::Tag::Finite: return "Finite";
    case MomentVerdict::Tag::Infinite: return "Infinite";
    case MomentVerdict::Tag::Boundary: return "Boundary";
    case MomentVerdict::Tag::Indeterminate: return "Indeterminate";
  }
  return "?";
}

std::string to_string(Binding b) {
  switch (b) {
    case Binding::None: return "none";
    case Binding::Leverage: return "leverage";
    case Binding::SampleSize: return "sample_size";
    case Binding::Residual: return "residual";
    case Binding::Criterion: return "criterion";
  }
  return "?";
}

std::string to_string(ModelKind m) {
  switch (m) {
    case ModelKind::Linear: return "linear";
    case ModelKind::MM: return "mm";
    case ModelKind::Logit: return "logit";
  }
  return "?";
}

// ---------------------------------------------------------------- CSV

int CsvTable::column_index(const std::string& name) const {
  auto it = std::find(header.begin(), header.end(), name);
  return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

std::vector<double> CsvTable::numeric_column(const std::string& name) const {
  int j = column_index(name);
  if (j < 0)
    throw DataError(DataFault::MissingColumn, "missing column '" + name + "'", -1, name);
  std::vector<double> out(rows.size());
  for (size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (static_cast<int>(row.size()) <= j || !parse_double(row[j], out[r]))
      throw DataError(DataFault::NonNumeric,
                      "non-numeric cell in column '" + name + "' at row " +
                          std::to_string(r + 1),
                      static_cast<long>(r + 1), name);
  }
  return out;
}

CsvTable read_csv_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(DataFault::Schema, "cannot open data file '" + path + "'");
  CsvTable t;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cells = split_row(line);
    if (!have_header) {
      t.header = std::move(cells);
      have_header = true;
    } else {
      if (cells.size() != t.header.size())
        throw DataError(DataFault::Schema,
                        "row " + std::to_string(t.rows.size() + 1) + " has " +
                            std::to_string(cells.size()) + " cells, header has " +
                            std::to_string(t.header.size()),
                        static_cast<long>(t.rows.size() + 1));
      t.rows.push_back(std::move(cells));
    }
  }
  if (!have_header) throw DataError(DataFault::Schema, "empty data file '" + path + "'");
  if (t.rows.empty()) throw DataError(DataFault::Schema, "data file '" + path + "' has no rows");
  return t;
}

void write_numeric_csv(const std::string& path, const std::vector<std::string>& header,
                       const std::vector<std::vector<double>>& columns) {
  std::ofstream out(path);
  if (!out) throw DataError(DataFault::Schema, "cannot write '" + path + "'");
  for (size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << '\n';
  size_t n = columns.empty() ? 0 : columns[0].size();
  char buf[40];
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < columns.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", columns[j][i]);
      out << (j ? "," : "") << buf;
    }
    out << '\n';
  }
}

namespace {

Eigen::MatrixXd design_from(const CsvTable& t, const CsvSchema& schema) {
  const int n = static_cast<int>(t.rows.size());
  const int k = static_cast<int>(schema.design.size()) + (schema.intercept ? 1 : 0);
  if (k == 0) throw DataError(DataFault::Schema, "schema names no design columns");
  Eigen::MatrixXd X(n, k);
  int j = 0;
  if (schema.intercept) X.col(j++).setOnes();
  for (const auto& name : schema.design) {
    auto col = t.numeric_column(name);
    X.col(j++) = Eigen::Map<Eigen::VectorXd>(col.data(), n);
  }
  return X;
}

Eigen::VectorXd vec(std::vector<double> v) {
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

RegressionData load_regression_csv(const std::string& path, const CsvSchema& schema) {
  auto t = read_csv_table(path);
  return RegressionData(design_from(t, schema), vec(t.numeric_column(schema.response)));
}

MMData load_mm_csv(const std::string& path, const CsvSchema& schema) {
  auto t = read_csv_table(path);
  return MMData(vec(t.numeric_column(schema.concentration)),
                vec(t.numeric_column(schema.velocity)));
}

LogitData load_logit_csv(const std::string& path, const CsvSchema& schema) {
  auto t = read_csv_table(path);
  auto y = vec(t.numeric_column(schema.response));
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (y(i) != 0.0 && y(i) != 1.0)
      throw DataError(DataFault::NonBinaryOutcome,
                      "outcome must be 0 or 1 at row " + std::to_string(i + 1),
                      static_cast<long>(i + 1), schema.response);
  return LogitData(design_from(t, schema), std::move(y));
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  switch (schema.kind) {
    case ModelKind::Linear: return load_regression_csv(path, schema);
    case ModelKind::MM: return load_mm_csv(path, schema);
    case ModelKind::Logit: return load_logit_csv(path, schema);
  }
  throw DataError(DataFault::Schema, "unknown model kind");
}

}  // namespace influence_gate
