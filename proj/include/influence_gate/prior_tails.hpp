#pragma once

#include "influence_gate/core_model.hpp"

#include <Eigen/Dense>

#include <variant>
#include <vector>

namespace influence_gate {

// Tail class relative to a reference family: normals on R^k for theta,
// inverse gammas at sigma^2 -> 0 for the variance.
struct TailClass {
  enum class Tag { Thick, Thin, InFamily, BoundedSupport, Unknown };
  Tag tag = Tag::Unknown;
  std::vector<double> params;  // InFamily parameters, when known
  bool operator==(const TailClass&) const = default;
};

std::string to_string(TailClass::Tag t);

// ---------------------------------------------------------------- theta

namespace theta_prior {
struct Normal {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};
struct StudentT {
  double dof;
  Eigen::VectorXd location;
  Eigen::MatrixXd scale;
};
// Product of double exponentials, density prop. to exp(-sum |b_j - loc_j| / scale_j).
struct Laplace {
  Eigen::VectorXd location;
  Eigen::VectorXd scale;
};
// exp{-sum (theta_j - center_j)^4}
struct QuarticExponential {
  Eigen::VectorXd center;
};
struct BoundedUniform {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};
// Flat improper prior is Custom{Thick, proper=false, full_support=true}.
struct Custom {
  TailClass declared;
  bool proper;
  bool full_support;
};
}  // namespace theta_prior

using ThetaPriorSpec =
    std::variant<theta_prior::Normal, theta_prior::StudentT, theta_prior::Laplace,
                 theta_prior::QuarticExponential, theta_prior::BoundedUniform,
                 theta_prior::Custom>;

// ---------------------------------------------------------------- sigma^2

namespace sigma2_prior {
// Density prop. to (s2)^(-alpha-1) exp{-1/(beta s2)}.
struct InverseGamma {
  double alpha;
  double beta;
};
struct GammaOnVariance {
  double shape;
  double rate;
};
struct HalfCauchyOnSd {
  double scale;
};
// exp{-(s2)^(-p) - s2}
struct SharpZero {
  double p;
};
struct Custom {
  TailClass declared;
};
}  // namespace sigma2_prior

using Sigma2PriorSpec =
    std::variant<sigma2_prior::InverseGamma, sigma2_prior::GammaOnVariance,
                 sigma2_prior::HalfCauchyOnSd, sigma2_prior::SharpZero, sigma2_prior::Custom>;

// Validates parameters; throws ConfigError on bad values.
void validate(const ThetaPriorSpec& spec);
void validate(const Sigma2PriorSpec& spec);

TailClass classify_theta(const ThetaPriorSpec& spec);
TailClass classify_sigma2(const Sigma2PriorSpec& spec);

bool is_proper(const ThetaPriorSpec& spec);
bool has_full_support(const ThetaPriorSpec& spec);
// Bounded density (every cataloged proper family; Custom is not assumed).
bool has_bounded_density(const ThetaPriorSpec& spec);

// Unnormalized log densities, used by samplers and by the tail audits.
double log_density(const ThetaPriorSpec& spec, const Eigen::VectorXd& theta);
double log_density(const Sigma2PriorSpec& spec, double sigma2);

// Finiteness transfer from a reference prior pi0 to pi1 given bounds on
// pi0/pi1: bounded above carries Infinite over, bounded below carries Finite.
MomentVerdict transfer_finiteness(const MomentVerdict& reference, bool ratio_bounded_above,
                                  bool ratio_bounded_below);

}  // namespace influence_gate
