#pragma once

#include "influence_gate/core_model.hpp"
#include "influence_gate/prior_tails.hpp"

#include <Eigen/Dense>

#include <vector>

namespace influence_gate {

inline constexpr double kLogitBoundaryBand = 1e-9;
inline constexpr double kLogitVertexBudget = 1e7;
inline constexpr double kLogitRCap = 64.0;

struct LogitCandidate {
  Eigen::VectorXd beta;  // unit L1 norm, original covariate units
  double value;
};

struct LogitCriterion {
  double epsilon = 0;
  double r = 0;
  double max_value = 0;
  Eigen::VectorXd argmax;
  std::vector<LogitCandidate> certificate;  // every evaluated vertex
  Eigen::VectorXd column_scale;             // max |x_ij| per column used for enumeration
  bool approximate = false;                 // multistart fallback was used
};

// h(beta, r, eps) with max(0, .) for the indicator terms.
double h_eval(const LogitData& data, const DeletionSet& del, const Eigen::VectorXd& beta, double r,
              double epsilon);

// C(n+k, k-1) * 2^k
double logit_vertex_budget(int n, int k);

// Exact maximum over the L1 sphere by vertex enumeration. Throws BudgetError
// beyond the budget unless allow_multistart is set, in which case a seeded
// multistart local search is used and the result is marked approximate.
LogitCriterion max_h_l1_sphere(const LogitData& data, const DeletionSet& del, double r,
                               double epsilon, bool allow_multistart = false);

MomentVerdict theorem51_verdict(const LogitData& data, const DeletionSet& del, double r,
                                double epsilon, bool allow_multistart = false);

// Tail class relative to products of double exponentials. InFamily must carry
// epsilon as params[0].
MomentVerdict corollary5_dispatch(const LogitData& data, const DeletionSet& del, double r,
                                  const TailClass& tail, bool allow_multistart = false);

// Tail class of a prior on beta relative to the double-exponential family.
TailClass classify_logit_prior(const ThetaPriorSpec& spec);

MomentIndexReport moment_index_logit(const LogitData& data, const DeletionSet& del,
                                     double epsilon, bool allow_multistart = false);

bool propriety_certificate(const LogitData& data, double epsilon, bool allow_multistart = false);

}  // namespace influence_gate
