#pragma once

#include "influence_gate/core_model.hpp"
#include "influence_gate/prior_tails.hpp"

#include <Eigen/Dense>

#include <optional>
#include <variant>

namespace influence_gate {

// |lambda - 1/r| below this is treated as equality.
inline constexpr double kEigenBoundaryTol = 1e-9;

struct LeverageReport {
  Eigen::MatrixXd minor;             // H_I
  Eigen::VectorXd eigenvalues;       // ascending
  Eigen::MatrixXd eigenvectors;      // columns match eigenvalues
  Eigen::VectorXd deleted_residuals; // e_I
  double rss = 0.0;
  std::optional<Eigen::VectorXd> theta_tilde;
  double theta_tilde_r = 0.0;  // the r used for theta_tilde

  double lambda_max() const { return eigenvalues.size() ? eigenvalues(eigenvalues.size() - 1) : 0.0; }
};

// Full-data least-squares quantities shared by every deletion set of one
// dataset. Forms the hat matrix for n <= 64, uses a thin QR basis otherwise.
class LinearFit {
 public:
  explicit LinearFit(const RegressionData& data);
  LeverageReport leverage(const DeletionSet& del) const;
  const Eigen::VectorXd& residuals() const { return e_; }
  double rss() const { return rss_; }
  int n() const { return n_; }
  int k() const { return k_; }
  bool uses_qr() const { return use_qr_; }

 private:
  int n_, k_;
  bool use_qr_;
  Eigen::MatrixXd H_;  // n x n when !use_qr_
  Eigen::MatrixXd Q_;  // n x k when use_qr_
  Eigen::VectorXd e_;
  double rss_;
};

LeverageReport leverage_minor(const RegressionData& data, const DeletionSet& del);

// (X'X - r X_I X_I')^{-1} (X'y - r X_I y_I); empty when the matrix is singular.
std::optional<Eigen::VectorXd> theta_tilde(const RegressionData& data, const DeletionSet& del,
                                           double r);

double rss_star(const LeverageReport& lev, double r);
double rss_star(const RegressionData& data, const DeletionSet& del, double r);

struct ConjugatePrior {
  double alpha;
  double beta;
  ThetaPriorSpec theta;
};
struct NoninformativePrior {};
using LinearPrior = std::variant<ConjugatePrior, NoninformativePrior>;

MomentVerdict theorem31_verdict(const RegressionData& data, const DeletionSet& del, double r,
                                const LinearPrior& prior);
MomentVerdict theorem31_verdict(const LeverageReport& lev, int n, int k, double r,
                                const LinearPrior& prior);

MomentIndexReport moment_index_linear(const RegressionData& data, const DeletionSet& del,
                                      const LinearPrior& prior);
MomentIndexReport moment_index_linear(const LeverageReport& lev, int n, int k,
                                      const LinearPrior& prior);

// Tail-class dispatch for non-conjugate priors. side_condition is the
// caller's assertion that the sigma^2 prior integrability assumption holds.
MomentVerdict corollary3_dispatch(const RegressionData& data, const DeletionSet& del, double r,
                                  const TailClass& theta_tail, const TailClass& sigma2_tail,
                                  bool side_condition);

struct SupportBox {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

// min over the box of t'(X'X - r X_I X_I')t - 2(y'X - r y_I' X_I')t, k <= 3.
double bounded_support_M(const RegressionData& data, const DeletionSet& del, double r,
                         const SupportBox& box);

// Verdict for a bounded-support theta prior. sigma2_tail InFamily must carry
// (alpha, beta).
MomentVerdict bounded_support_verdict(const RegressionData& data, const DeletionSet& del,
                                      double r, const SupportBox& box,
                                      const TailClass& sigma2_tail, bool side_condition);

}  // namespace influence_gate
