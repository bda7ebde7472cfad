#pragma once

#include "influence_gate/core_model.hpp"
#include "influence_gate/is_engine.hpp"
#include "influence_gate/samplers.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace influence_gate {

// Flat "key = value" text; '#' starts a comment. Keys are dotted names.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text, const std::string& base_dir = ".");
  static KeyValueConfig load(const std::string& path);

  bool has(const std::string& key) const;
  std::string str(const std::string& key) const;
  std::string str(const std::string& key, const std::string& fallback) const;
  double num(const std::string& key) const;
  double num(const std::string& key, double fallback) const;
  long integer(const std::string& key, long fallback) const;
  bool flag(const std::string& key, bool fallback) const;
  std::vector<double> nums(const std::string& key) const;
  std::vector<std::string> words(const std::string& key) const;  // comma separated

  // Keys present in the file but never read; reported as typos.
  std::vector<std::string> unused() const;
  const std::string& base_dir() const { return base_dir_; }

 private:
  struct Entry {
    std::string value;
    int line;
    mutable bool used = false;
  };
  const Entry& at(const std::string& key) const;
  std::map<std::string, Entry> entries_;
  std::string base_dir_;
};

struct DeletionSpec {
  enum class Mode { Sets, ScanSize, KFold };
  Mode mode = Mode::Sets;
  bool singletons = false;
  std::vector<std::vector<int>> sets;  // 0-based, validated against n on load
  int scan_size = 0;
  int folds = 0;
  int partitions = 1;
};

struct LinearPriorConfig {
  bool conjugate = false;
  double alpha = 1, beta = 1;
  std::string theta_family = "normal";  // normal | t
  std::vector<double> theta_mean;        // empty: zeros
  double theta_scale = 10;
  double theta_dof = 5;
};

struct LogitPriorConfig {
  std::string family = "laplace";  // laplace | normal | t
  std::vector<double> epsilon{1.0};  // laplace rate(s)
  double scale = 10;                 // normal / t scale
  double dof = 3;
  bool multistart = false;
};

struct MeasureRequest {
  Measure measure = Measure::KL;
  int coordinate = -1;      // 0-based, Delta and Bdd
  double threshold = 0;     // Bdd: g = 1{s_coordinate > threshold}
};

struct RunConfig {
  ModelKind model = ModelKind::Linear;
  std::string data_path;
  CsvSchema schema;

  LinearPriorConfig linear_prior;
  HalfTPrior kappa_prior;
  LogitPriorConfig logit_prior;

  DeletionSpec deletion;
  std::vector<double> r_values{2.0};
  int mm_grid_size = 4096;

  SamplerConfig sampler;
  int chains = 1;

  std::vector<MeasureRequest> measures;
  std::optional<double> log_c_hat;
  bool likelihood_bounded = false;

  double top_fraction = 0.01;
  std::vector<int> scaling_grid{1000, 10000, 100000};
  int scaling_replications = 200;
  bool plots = true;

  std::vector<int> scan_flag;  // 0-based cases to summarize
  int scan_top = 100;

  std::string output_dir = "out";
};

RunConfig run_config_from(const KeyValueConfig& kv);
RunConfig load_run_config(const std::string& path);

}  // namespace influence_gate
