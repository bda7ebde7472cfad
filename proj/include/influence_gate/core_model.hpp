#pragma once

#include <Eigen/Dense>

#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace influence_gate {

// ---------------------------------------------------------------- errors

// Each category maps to a stable CLI exit code (see cli).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class DataFault {
  Schema,
  MissingColumn,
  NonNumeric,
  RankDeficient,
  NonPositiveConcentration,
  NonBinaryOutcome,
  IndexOutOfRange,
  EmptyDeletion,
};

class DataError : public Error {
 public:
  DataError(DataFault fault, std::string message, long row = -1,
            std::string column = {})
      : Error(std::move(message)), fault_(fault), row_(row),
        column_(std::move(column)) {}
  DataFault fault() const { return fault_; }
  // 1-based data row (header excluded), -1 when not row-specific.
  long row() const { return row_; }
  const std::string& column() const { return column_; }

 private:
  DataFault fault_;
  long row_;
  std::string column_;
};

class BudgetError : public Error {
 public:
  using Error::Error;
};

class SamplerError : public Error {
 public:
  using Error::Error;
};

// Arithmetic preconditions: singular (I - rH), non-positive variance, etc.
class DomainError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------- datasets

class RegressionData {
 public:
  RegressionData(Eigen::MatrixXd design, Eigen::VectorXd response);
  const Eigen::MatrixXd& design() const { return X_; }
  const Eigen::VectorXd& response() const { return y_; }
  int n() const { return static_cast<int>(X_.rows()); }
  int k() const { return static_cast<int>(X_.cols()); }

 private:
  Eigen::MatrixXd X_;
  Eigen::VectorXd y_;
};

class MMData {
 public:
  MMData(Eigen::VectorXd concentration, Eigen::VectorXd velocity);
  const Eigen::VectorXd& concentration() const { return c_; }
  const Eigen::VectorXd& velocity() const { return v_; }
  int n() const { return static_cast<int>(c_.size()); }

 private:
  Eigen::VectorXd c_;
  Eigen::VectorXd v_;
};

class LogitData {
 public:
  LogitData(Eigen::MatrixXd design, Eigen::VectorXd outcome);
  const Eigen::MatrixXd& design() const { return X_; }
  const Eigen::VectorXd& outcome() const { return y_; }
  int n() const { return static_cast<int>(X_.rows()); }
  int k() const { return static_cast<int>(X_.cols()); }

 private:
  Eigen::MatrixXd X_;
  Eigen::VectorXd y_;
};

using Dataset = std::variant<RegressionData, MMData, LogitData>;

// Full column rank under the scaled-singular-value rule.
bool has_full_column_rank(const Eigen::MatrixXd& X);

// ---------------------------------------------------------------- deletion

class DeletionSet {
 public:
  DeletionSet() = default;
  const std::vector<int>& indices() const { return idx_; }
  int cardinality() const { return static_cast<int>(idx_.size()); }
  bool empty() const { return idx_.empty(); }
  bool contains(int i) const;
  // Indices not in the set, ascending.
  std::vector<int> complement(int n) const;
  bool operator==(const DeletionSet&) const = default;

 private:
  friend DeletionSet deletion_set(const std::vector<int>&, int);
  std::vector<int> idx_;
};

// 0-based indices; sorts and deduplicates, rejects anything outside [0, n).
DeletionSet deletion_set(const std::vector<int>& indices, int n);

// 1-based labels as used in CLI input/output.
std::string format_one_based(const DeletionSet& del);

// ---------------------------------------------------------------- verdicts

struct MomentVerdict {
  enum class Tag { Finite, Infinite, Boundary, Indeterminate };
  Tag tag = Tag::Indeterminate;
  // Boundary: the binding condition. Indeterminate: the reason. Otherwise
  // the condition that decided the verdict.
  std::string detail;

  static MomentVerdict finite(std::string d = {}) { return {Tag::Finite, std::move(d)}; }
  static MomentVerdict infinite(std::string d) { return {Tag::Infinite, std::move(d)}; }
  static MomentVerdict boundary(std::string d) { return {Tag::Boundary, std::move(d)}; }
  static MomentVerdict indeterminate(std::string d) { return {Tag::Indeterminate, std::move(d)}; }
  bool is(Tag t) const { return tag == t; }
};

std::string to_string(MomentVerdict::Tag tag);

enum class Binding { None, Leverage, SampleSize, Residual, Criterion };
std::string to_string(Binding b);

struct MomentIndexReport {
  static constexpr double inf = std::numeric_limits<double>::infinity();
  double r_a = inf;
  double r_b = inf;
  double r_c = inf;
  double r_star = inf;
  Binding binding = Binding::None;
  // True when r_star is a search cap (a lower bound on the true index).
  bool capped = false;
  std::string note;
};

// ---------------------------------------------------------------- CSV

enum class ModelKind { Linear, MM, Logit };
std::string to_string(ModelKind m);

struct CsvSchema {
  ModelKind kind = ModelKind::Linear;
  std::vector<std::string> design;  // linear / logit covariates
  bool intercept = true;            // prepend a column of ones
  std::string response;             // linear response or logit outcome
  std::string concentration;        // mm
  std::string velocity;             // mm
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  int column_index(const std::string& name) const;  // -1 when absent
  // Parses one column; DataError naming the row on a bad cell.
  std::vector<double> numeric_column(const std::string& name) const;
};

CsvTable read_csv_table(const std::string& path);

// Numeric table writer; 17 significant digits so a reload is bit-exact.
void write_numeric_csv(const std::string& path,
                       const std::vector<std::string>& header,
                       const std::vector<std::vector<double>>& columns);

Dataset load_csv(const std::string& path, const CsvSchema& schema);
RegressionData load_regression_csv(const std::string& path, const CsvSchema& schema);
MMData load_mm_csv(const std::string& path, const CsvSchema& schema);
LogitData load_logit_csv(const std::string& path, const CsvSchema& schema);

}  // namespace influence_gate
