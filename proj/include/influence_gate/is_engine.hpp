#pragma once

#include "influence_gate/core_model.hpp"
#include "influence_gate/prior_tails.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace influence_gate {

// Draw layouts: linear (theta_1..theta_k, sigma2); mm (m, sigma2, kappa);
// logit (beta_1..beta_k).
struct WeightedSample {
  ModelKind model = ModelKind::Linear;
  Eigen::MatrixXd draws;        // M x p
  Eigen::VectorXd log_weights;  // length M
  int size() const { return static_cast<int>(log_weights.size()); }
};

double log_weight(const RegressionData& data, const DeletionSet& del, const Eigen::VectorXd& s);
double log_weight(const MMData& data, const DeletionSet& del, const Eigen::VectorXd& s);
double log_weight(const LogitData& data, const DeletionSet& del, const Eigen::VectorXd& s);
double log_weight(ModelKind model, const Eigen::VectorXd& s, const Dataset& data,
                  const DeletionSet& del);

// log(1 / L_I(s)) including normalizing constants; the CPO weight.
double log_inverse_likelihood(const Dataset& data, const DeletionSet& del, const Eigen::VectorXd& s);

WeightedSample make_weighted_sample(const Dataset& data, const DeletionSet& del,
                                    const Eigen::MatrixXd& draws);

// sum w g / sum w, evaluated through max-shifted exponentials.
double self_normalized_estimate(const WeightedSample& sample, const Eigen::VectorXd& g_values);

// ---------------------------------------------------------------- measures

enum class Measure { KL, L1, L2, Delta1, Delta2, Hellinger, ChiSq, CPO, Bdd };
std::string to_string(Measure m);
Measure measure_from_string(const std::string& s);

// Adjustment functions accepted by the adjusted-prior check.
namespace gspec {
struct Polynomial {  // |theta|^degree in one coordinate
  int degree;
};
struct LikelihoodPower {  // pi^p L_{\I}^p
  int power;
  bool likelihood_bounded;
};
struct Bounded {};
}  // namespace gspec
using GSpec = std::variant<gspec::Polynomial, gspec::LikelihoodPower, gspec::Bounded>;

// The noninformative linear prior: polynomial integrability follows the
// case-deleted posterior t with n - I - k degrees of freedom.
struct NoninformativeLinearPrior {
  int n, k, I;
};

// Mixture components of the theta prior, or the noninformative linear prior.
using AdjustablePrior = std::variant<std::vector<ThetaPriorSpec>, NoninformativeLinearPrior>;

bool adjusted_prior_check(ModelKind model, const GSpec& g, const AdjustablePrior& prior);

struct GateInputs {
  MomentIndexReport report;
  // Outcome of adjusted_prior_check for measures with an adjustment.
  bool adjusted_prior_ok = true;
  // Moment index under the adjusted prior; defaults to report.r_star.
  std::optional<double> adjusted_r_star;
};

struct GateStatus {
  bool passed = false;
  double required_moments = 0;
  double required_adjusted_moments = 0;  // 0 when no adjustment applies
  std::string adjustment;                // e.g. "theta^2"
  double available_r_star = 0;
  std::string reason;
};

struct MeasureAux {
  std::optional<double> log_c_hat;          // L1, L2
  std::optional<Eigen::VectorXd> log_q;     // L1, L2: log joint density at each draw
  std::optional<Eigen::VectorXd> values;    // Delta1/Delta2: theta coordinate; Bdd: g
  std::optional<Eigen::VectorXd> log_inverse_likelihood;  // CPO
  int coordinate = -1;                      // recorded for Delta measures
};

struct InfluenceEstimate {
  Measure measure = Measure::KL;
  int coordinate = -1;
  double value = 0;
  GateStatus gate;
  std::optional<double> standard_error;
  bool out_of_range = false;  // Hellinger outside [0, 2]
};

inline constexpr double kKLDelta = 1e-6;
inline constexpr int kBatchCount = 32;

// Mom's and Adj-Mom's entries.
GateStatus gate_for(Measure m, const GateInputs& inputs);

InfluenceEstimate estimate_measure(const WeightedSample& sample, Measure m, const MeasureAux& aux,
                                   const GateInputs& gate);

// Logistic: max h(beta, 2, eps) < 0. Linear / MM: r* exceeds 2 + delta.
bool bounding_moment_check(ModelKind model, const GateInputs& gate,
                           std::optional<double> logit_max_h_r2 = std::nullopt);

struct CombinedBound {
  double r_prior, r_deletion, bound;
};
CombinedBound combined_moment_bound(double r_prior, double r_deletion);

inline const char* kMixtureAdvisory =
    "CLT not licensed for this measure: the required weight moments are not established. "
    "Sampling from a mixture of the full and case-deleted posteriors restores a central "
    "limit theorem for the importance-sampling estimator (not implemented here).";

}  // namespace influence_gate
