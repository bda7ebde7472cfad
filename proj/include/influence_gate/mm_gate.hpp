#pragma once

#include "influence_gate/core_model.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace influence_gate {

struct MMEval {
  double kappa = 0;
  Eigen::VectorXd x;  // c_i / (kappa + c_i)
  double a_val = 0, b_val = 0, c_val = 0;
  double leverage = 0;  // l(I, kappa)
  double g_val = 0;     // g(I, kappa)
  std::optional<double> rss_star;  // C - B^2/A, undefined where A = 0
};

MMEval mm_eval(const MMData& data, const DeletionSet& del, double r, double kappa);

struct KappaExtremum {
  double value = 0;
  double kappa = 0;  // 0 or +inf for an endpoint limit
};

// Golden-section refinement of one grid extremum.
struct Refinement {
  std::string quantity;  // "leverage", "g", "rss_star"
  double kappa_lo, kappa_hi, kappa, value;
};

struct KappaScan {
  double r = 0;
  std::vector<double> grid;
  std::vector<Refinement> refinements;
  KappaExtremum sup_leverage, inf_rss_star, sup_g, inf_g;
  bool rss_defined = false;  // some kappa with A > 0
  double c_val = 0;
  // Sum_{j not in I} c_j^2 - (r-1) Sum_{i in I} c_i^2, the limit of kappa^2 A.
  double asymptotic_coefficient = 0;
  // kappa ranges where the quadratic A m^2 - 2 B m + C goes negative for some m > 0
  std::vector<std::pair<double, double>> sign_change_intervals;
  // The negative region has positive length (three-point rule or an endpoint regime).
  bool negative_set_non_negligible = false;
};

KappaScan scan_kappa(const MMData& data, const DeletionSet& del, double r, double kmin,
                     double kmax, int grid_size);

// Default bracket [1e-4 min c, 1e4 max c] with 4096 points.
KappaScan scan_kappa(const MMData& data, const DeletionSet& del, double r, int grid_size = 4096);

MomentVerdict theorem41_verdict(const MMData& data, const DeletionSet& del, double r,
                                const KappaScan& scan);

struct MMScanParams {
  double kmin_factor = 1e-4;
  double kmax_factor = 1e4;
  int grid_size = 4096;
};

MomentIndexReport moment_index_mm(const MMData& data, const DeletionSet& del,
                                  const MMScanParams& params = {});

}  // namespace influence_gate
