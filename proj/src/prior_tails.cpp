#include "influence_gate/prior_tails.hpp"

#include <cmath>

namespace influence_gate {

namespace {
template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("invalid prior parameter: " + what);
}

bool is_pd(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() == 0) return false;
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  return llt.info() == Eigen::Success;
}
}  // namespace

std::string to_string(TailClass::Tag t) {
  switch (t) {
    case TailClass::Tag::Thick: return "Thick";
    case TailClass::Tag::Thin: return "Thin";
    case TailClass::Tag::InFamily: return "InFamily";
    case TailClass::Tag::BoundedSupport: return "BoundedSupport";
    case TailClass::Tag::Unknown: return "Unknown";
  }
  return "?";
}

void validate(const ThetaPriorSpec& spec) {
  std::visit(overloaded{
                 [](const theta_prior::Normal& p) {
                   require(p.mean.size() == p.covariance.rows(), "normal mean/covariance size");
                   require(is_pd(p.covariance), "normal covariance must be positive definite");
                 },
                 [](const theta_prior::StudentT& p) {
                   require(p.dof > 0, "t dof must be positive");
                   require(p.location.size() == p.scale.rows(), "t location/scale size");
                   require(is_pd(p.scale), "t scale must be positive definite");
                 },
                 [](const theta_prior::Laplace& p) {
                   require(p.location.size() == p.scale.size(), "laplace location/scale size");
                   require((p.scale.array() > 0).all(), "laplace scale must be positive");
                 },
                 [](const theta_prior::QuarticExponential&) {},
                 [](const theta_prior::BoundedUniform& p) {
                   require(p.lower.size() == p.upper.size(), "box bound sizes");
                   require((p.lower.array() <= p.upper.array()).all(), "box lower <= upper");
                 },
                 [](const theta_prior::Custom&) {},
             },
             spec);
}

void validate(const Sigma2PriorSpec& spec) {
  std::visit(overloaded{
                 [](const sigma2_prior::InverseGamma& p) {
                   require(p.alpha > 0 && p.beta > 0, "inverse gamma alpha, beta > 0");
                 },
                 [](const sigma2_prior::GammaOnVariance& p) {
                   require(p.shape > 0 && p.rate > 0, "gamma shape, rate > 0");
                 },
                 [](const sigma2_prior::HalfCauchyOnSd& p) { require(p.scale > 0, "half-Cauchy scale > 0"); },
                 [](const sigma2_prior::SharpZero& p) { require(p.p > 0, "sharp-zero exponent > 0"); },
                 [](const sigma2_prior::Custom&) {},
             },
             spec);
}

TailClass classify_theta(const ThetaPriorSpec& spec) {
  using T = TailClass::Tag;
  return std::visit(overloaded{
                        [](const theta_prior::Normal&) { return TailClass{T::InFamily, {}}; },
                        [](const theta_prior::StudentT&) { return TailClass{T::Thick, {}}; },
                        [](const theta_prior::Laplace&) { return TailClass{T::Thick, {}}; },
                        [](const theta_prior::QuarticExponential&) { return TailClass{T::Thin, {}}; },
                        [](const theta_prior::BoundedUniform&) { return TailClass{T::BoundedSupport, {}}; },
                        [](const theta_prior::Custom& c) { return c.declared; },
                    },
                    spec);
}

TailClass classify_sigma2(const Sigma2PriorSpec& spec) {
  using T = TailClass::Tag;
  return std::visit(
      overloaded{
          [](const sigma2_prior::InverseGamma& p) { return TailClass{T::InFamily, {p.alpha, p.beta}}; },
          // Polynomial behaviour at 0 beats exp{-1/(beta s2)} for every beta.
          [](const sigma2_prior::GammaOnVariance&) { return TailClass{T::Thick, {}}; },
          [](const sigma2_prior::HalfCauchyOnSd&) { return TailClass{T::Thick, {}}; },
          [](const sigma2_prior::SharpZero& p) {
            // exp{-(s2)^-p} against exp{-c/s2}: p > 1 decays faster, p < 1 slower,
            // p = 1 depends on beta.
            if (p.p > 1) return TailClass{T::Thin, {}};
            if (p.p < 1) return TailClass{T::Thick, {}};
            return TailClass{T::Unknown, {}};
          },
          [](const sigma2_prior::Custom& c) { return c.declared; },
      },
      spec);
}

bool is_proper(const ThetaPriorSpec& spec) {
  if (auto c = std::get_if<theta_prior::Custom>(&spec)) return c->proper;
  return true;
}

bool has_full_support(const ThetaPriorSpec& spec) {
  if (auto c = std::get_if<theta_prior::Custom>(&spec)) return c->full_support;
  return !std::holds_alternative<theta_prior::BoundedUniform>(spec);
}

bool has_bounded_density(const ThetaPriorSpec& spec) {
  return !std::holds_alternative<theta_prior::Custom>(spec);
}

double log_density(const ThetaPriorSpec& spec, const Eigen::VectorXd& theta) {
  return std::visit(
      overloaded{
          [&](const theta_prior::Normal& p) {
            Eigen::VectorXd d = theta - p.mean;
            return -0.5 * d.dot(p.covariance.llt().solve(d));
          },
          [&](const theta_prior::StudentT& p) {
            Eigen::VectorXd d = theta - p.location;
            double q = d.dot(p.scale.llt().solve(d));
            return -0.5 * (p.dof + static_cast<double>(theta.size())) * std::log1p(q / p.dof);
          },
          [&](const theta_prior::Laplace& p) {
            return -((theta - p.location).array().abs() / p.scale.array()).sum();
          },
          [&](const theta_prior::QuarticExponential& p) {
            return -(theta - p.center).array().pow(4).sum();
          },
          [&](const theta_prior::BoundedUniform& p) {
            bool inside = (theta.array() >= p.lower.array()).all() &&
                          (theta.array() <= p.upper.array()).all();
            return inside ? 0.0 : -std::numeric_limits<double>::infinity();
          },
          [&](const theta_prior::Custom&) { return 0.0; },
      },
      spec);
}

double log_density(const Sigma2PriorSpec& spec, double s2) {
  if (!(s2 > 0)) return -std::numeric_limits<double>::infinity();
  return std::visit(
      overloaded{
          [&](const sigma2_prior::InverseGamma& p) {
            return -(p.alpha + 1) * std::log(s2) - 1.0 / (p.beta * s2);
          },
          [&](const sigma2_prior::GammaOnVariance& p) {
            return (p.shape - 1) * std::log(s2) - p.rate * s2;
          },
          [&](const sigma2_prior::HalfCauchyOnSd& p) {
            // sd = sqrt(s2), Jacobian 1/(2 sqrt(s2))
            return -std::log1p(s2 / (p.scale * p.scale)) - 0.5 * std::log(s2);
          },
          [&](const sigma2_prior::SharpZero& p) { return -std::pow(s2, -p.p) - s2; },
          [&](const sigma2_prior::Custom&) { return 0.0; },
      },
      spec);
}

MomentVerdict transfer_finiteness(const MomentVerdict& reference, bool above, bool below) {
  using T = MomentVerdict::Tag;
  if (reference.is(T::Infinite) && above)
    return MomentVerdict::infinite("transferred: reference infinite, ratio bounded above");
  if (reference.is(T::Finite) && below)
    return MomentVerdict::finite("transferred: reference finite, ratio bounded below");
  if (!reference.is(T::Finite) && !reference.is(T::Infinite))
    return MomentVerdict::indeterminate("reference verdict is neither Finite nor Infinite");
  return MomentVerdict::indeterminate("ratio bounds give no direction for this reference verdict");
}

}  // namespace influence_gate
