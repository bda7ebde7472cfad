#pragma once

#include "influence_gate/core_model.hpp"
#include "influence_gate/linear_gate.hpp"
#include "influence_gate/samplers.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

namespace influence_gate {

inline constexpr int kMinExceedances = 50;
inline constexpr int kMinRegressionPoints = 20;
inline constexpr double kAgreementTolerance = 0.25;
inline constexpr double kAgreementMaxIndex = 6.0;

struct HillEstimate {
  double top_fraction = 0;
  int exceedances = 0;
  double threshold_log = 0;  // log of the (k+1)-th largest weight
  double estimate = 0;       // +inf when the top weights are all equal
  bool degenerate = false;
};

// Works on log weights (any order) so that huge weights stay representable.
// Throws DomainError with fewer than kMinExceedances order statistics.
HillEstimate hill_tail_index(const Eigen::VectorXd& log_weights, double top_fraction);

struct SurvivalPoint {
  double log_threshold;
  int exceedances;
};

struct RegressionIndex {
  double estimate = 0;  // minus the slope of log P(W > t) on log t
  std::vector<SurvivalPoint> points;
};

// Log-survival regression over geometric ranks from floor(top_fraction M) down to 10.
RegressionIndex regression_index(const Eigen::VectorXd& log_weights, double top_fraction);

struct TailReport {
  HillEstimate hill;
  std::vector<HillEstimate> sweep;  // fractions 0.005, 0.01, 0.02
  RegressionIndex regression;
  double analytic_r_star = 0;
  bool degenerate = false;
  // Empty when no judgment is made (degenerate weights or r* above 6).
  std::optional<bool> agreement;
};

TailReport tail_report(const Eigen::VectorXd& log_weights, double analytic_r_star,
                       double top_fraction = 0.01);

struct LinearBundle {
  RegressionData data;
  LinearPrior prior;
};
struct MMBundle {
  MMData data;
  HalfTPrior kappa_prior;
};
struct LogitBundle {
  LogitData data;
  ThetaPriorSpec prior;
};
using ModelBundle = std::variant<LinearBundle, MMBundle, LogitBundle>;

struct VerifyConfig {
  SamplerConfig sampler;
  double top_fraction = 0.01;
  int chains = 1;
  int max_threads = 1;
};

// Draws from the model's sampler and tail-audits the realized weights.
Draws draw_posterior(const ModelBundle& model, const SamplerConfig& cfg, int chains,
                     int max_threads);
TailReport verify_moment_index(const ModelBundle& model, const DeletionSet& del,
                               const MomentIndexReport& analytic, const VerifyConfig& cfg);

struct ScalingReport {
  std::vector<int> m_grid;
  int replications = 0;
  std::vector<double> variance_at_m;
  std::optional<double> loglog_slope;  // empty when every variance is zero
};

using ScalingEstimator = std::function<double(int m, std::uint64_t seed)>;

// Seeds are derived from (seed, grid index, replication). m_grid must be
// strictly increasing with at least 3 entries.
ScalingReport clt_scaling_audit(const ScalingEstimator& estimator, const std::vector<int>& m_grid,
                                int replications, std::uint64_t seed, int max_threads = 1);

// R-hat = mean of the case-deletion weights over m noninformative draws.
ScalingEstimator linear_weight_mean_estimator(const RegressionData& data, const DeletionSet& del);

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

}  // namespace influence_gate
