#pragma once

#include "influence_gate/config.hpp"
#include "influence_gate/linear_gate.hpp"
#include "influence_gate/tail_verifier.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace influence_gate {

inline constexpr double kScanBudget = 1e7;

// INFLUENCE_GATE_THREADS when set, hardware concurrency otherwise.
int worker_threads();

// A loaded dataset with its prior, able to gate any deletion set.
class ModelContext {
 public:
  explicit ModelContext(const RunConfig& cfg);
  ModelContext(const RunConfig& cfg, Dataset data);

  const RunConfig& config() const { return cfg_; }
  const Dataset& data() const { return data_; }
  int n() const;
  ModelBundle bundle() const;

  MomentIndexReport moment_index(const DeletionSet& del) const;
  MomentVerdict verdict(const DeletionSet& del, double r) const;
  // Asymptotic coefficient (mm only).
  std::optional<double> asymptotic_coefficient(const DeletionSet& del) const;
  // log of likelihood times prior at a draw; drives L1 / L2.
  double log_joint(const Eigen::VectorXd& s) const;
  // Prior used by the adjusted-prior check.
  AdjustablePrior adjustable_prior(const DeletionSet& del) const;

 private:
  void init();
  RunConfig cfg_;
  Dataset data_;
  std::shared_ptr<const LinearFit> fit_;          // linear
  std::optional<LogitData> scaled_logit_;        // logit with per-coordinate epsilon
  double logit_epsilon_ = 0;
};

std::vector<DeletionSet> deletion_sets(const RunConfig& cfg, int n);

struct GateRow {
  DeletionSet del;
  MomentIndexReport report;
  std::vector<MomentVerdict> verdicts;  // one per cfg.r_values
  std::optional<double> asymptotic_coefficient;
};
std::vector<GateRow> run_gate(const ModelContext& ctx, int threads = 1);
std::vector<GateRow> cmd_gate(const RunConfig& cfg);

std::size_t binomial(int n, int k);  // saturates at SIZE_MAX

struct ScanRow {
  double r_a, r_b, r_c, r_star;
  Binding binding;
};
struct ScanResult {
  int n = 0, size = 0;
  std::vector<ScanRow> rows;  // lexicographic subset order
  std::vector<std::size_t> rank_ra, rank_rc, rank_star;  // ascending, ties by order
  // Per flagged case: membership in the top scan_top of each ranking.
  struct Membership {
    int case_index;
    int in_top_ra, in_top_rc, in_top_star;
  };
  std::vector<Membership> membership;
};
// Subset at a lexicographic position.
std::vector<int> subset_at(int n, int size, std::size_t pos);
ScanResult run_scan(const ModelContext& ctx, int threads = 1);
ScanResult cmd_scan(const RunConfig& cfg);

struct KFoldResult {
  int folds = 0, partitions = 0;
  // partition x fold
  std::vector<std::vector<std::vector<int>>> members;
  std::vector<std::vector<double>> r_star;
  int with_one_or_more_below_two = 0;
  int with_two_or_more_below_two = 0;
  int with_exactly_one_below_two = 0;
};
KFoldResult run_kfold(const ModelContext& ctx, int threads = 1);
KFoldResult cmd_kfold_audit(const RunConfig& cfg);

struct EstimateRow {
  DeletionSet del;
  InfluenceEstimate estimate;
  std::string advisory;  // present when the gate blocked
};
std::vector<EstimateRow> run_estimate(const ModelContext& ctx, const Draws& draws);
std::vector<EstimateRow> cmd_estimate(const RunConfig& cfg);

struct VerifyResult {
  std::vector<DeletionSet> sets;
  std::vector<TailReport> tails;
  std::optional<ScalingReport> scaling;
  std::string scaling_note;
};
VerifyResult cmd_verify(const RunConfig& cfg);

}  // namespace influence_gate
