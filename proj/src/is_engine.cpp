#include "influence_gate/is_engine.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

namespace influence_gate {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double softplus(double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

void require_positive_variance(double s2) {
  if (!(s2 > 0)) throw DomainError("non-positive sigma^2 in draw: " + std::to_string(s2));
}

void require_length(const Eigen::VectorXd& s, Eigen::Index p, const char* model) {
  if (s.size() != p)
    throw ConfigError(std::string("draw layout mismatch for ") + model + " model: expected " +
                      std::to_string(p) + " coordinates, got " + std::to_string(s.size()));
}

ModelKind kind_of(const Dataset& data) {
  return std::visit(
      [](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, RegressionData>) return ModelKind::Linear;
        else if constexpr (std::is_same_v<T, MMData>) return ModelKind::MM;
        else return ModelKind::Logit;
      },
      data);
}

// Max-shifted weights u = exp(lw - max lw).
Eigen::VectorXd shifted_weights(const Eigen::VectorXd& lw) {
  if (lw.size() == 0) throw DomainError("empty weighted sample");
  double mx = lw.maxCoeff();
  if (!std::isfinite(mx)) throw DomainError("degenerate sample: no finite log-weight");
  return (lw.array() - mx).exp().matrix();
}

// A smooth function of sample means of per-draw components. The standard
// error comes from the delta method with a batch-means covariance.
struct MeanFunctional {
  Eigen::MatrixXd f;  // M x c
  std::function<double(const Eigen::VectorXd&)> phi;
};

double functional_value(const MeanFunctional& mf) {
  Eigen::VectorXd mean = mf.f.colwise().mean().transpose();
  return mf.phi(mean);
}

std::optional<double> functional_se(const MeanFunctional& mf) {
  const Eigen::Index M = mf.f.rows(), c = mf.f.cols();
  const int B = kBatchCount;
  if (M < 2 * B) return std::nullopt;
  Eigen::MatrixXd bm(B, c);
  for (int b = 0; b < B; ++b) {
    Eigen::Index lo = b * M / B, hi = (b + 1) * M / B;
    bm.row(b) = mf.f.middleRows(lo, hi - lo).colwise().mean();
  }
  Eigen::RowVectorXd centre = bm.colwise().mean();
  Eigen::MatrixXd d = bm.rowwise() - centre;
  Eigen::MatrixXd cov = d.transpose() * d / double(B - 1) / double(B);

  Eigen::VectorXd mean = mf.f.colwise().mean().transpose();
  Eigen::VectorXd grad(c);
  for (Eigen::Index j = 0; j < c; ++j) {
    double h = 1e-6 * std::max(std::abs(mean(j)), 1e-8);
    Eigen::VectorXd up = mean, dn = mean;
    up(j) += h;
    dn(j) -= h;
    grad(j) = (mf.phi(up) - mf.phi(dn)) / (2 * h);
  }
  double var = grad.dot(cov * grad);
  if (!std::isfinite(var)) return std::nullopt;
  return std::sqrt(std::max(var, 0.0));
}

struct MomsRow {
  double moms;
  double adj_moms;  // 0 when not applicable
  const char* adjustment;
};

MomsRow moms_row(Measure m) {
  switch (m) {
    case Measure::KL: return {2 + kKLDelta, 0, ""};
    case Measure::L1: return {2, 2, "pi^2 L^2"};
    case Measure::L2: return {2, 4, "pi^4 L^4"};
    case Measure::Delta1: return {2, 2, "theta^2"};
    case Measure::Delta2: return {2, 2, "theta^4"};
    case Measure::Hellinger: return {2, 0, ""};
    case Measure::ChiSq: return {4, 0, ""};
    case Measure::CPO: return {2, 0, ""};
    case Measure::Bdd: return {2, 0, ""};
  }
  return {2, 0, ""};
}

const Eigen::VectorXd& require(const std::optional<Eigen::VectorXd>& v, Eigen::Index M,
                               const char* what) {
  if (!v) throw ConfigError(std::string("missing ") + what);
  if (v->size() != M) throw ConfigError(std::string(what) + " length does not match the sample");
  return *v;
}

}  // namespace

// ---------------------------------------------------------------- weights

double log_weight(const RegressionData& data, const DeletionSet& del, const Eigen::VectorXd& s) {
  const int k = data.k();
  require_length(s, k + 1, "linear");
  double s2 = s(k);
  require_positive_variance(s2);
  if (del.empty()) return 0.0;
  double ss = 0;
  for (int i : del.indices()) {
    double e = data.response()(i) - data.design().row(i).dot(s.head(k));
    ss += e * e;
  }
  return 0.5 * del.cardinality() * std::log(s2) + ss / (2 * s2);
}

double log_weight(const MMData& data, const DeletionSet& del, const Eigen::VectorXd& s) {
  require_length(s, 3, "mm");
  double m = s(0), s2 = s(1), kappa = s(2);
  require_positive_variance(s2);
  if (del.empty()) return 0.0;
  double ss = 0;
  for (int i : del.indices()) {
    double c = data.concentration()(i);
    double e = data.velocity()(i) - m * c / (kappa + c);
    ss += e * e;
  }
  return 0.5 * del.cardinality() * std::log(s2) + ss / (2 * s2);
}

double log_weight(const LogitData& data, const DeletionSet& del, const Eigen::VectorXd& s) {
  require_length(s, data.k(), "logit");
  double out = 0;
  for (int i : del.indices()) {
    double eta = data.design().row(i).dot(s);
    out += softplus(eta) - eta * data.outcome()(i);
  }
  return out;
}

double log_weight(ModelKind model, const Eigen::VectorXd& s, const Dataset& data,
                  const DeletionSet& del) {
  if (model != kind_of(data))
    throw ConfigError("model tag " + to_string(model) + " does not match the dataset");
  return std::visit([&](const auto& d) { return log_weight(d, del, s); }, data);
}

double log_inverse_likelihood(const Dataset& data, const DeletionSet& del,
                              const Eigen::VectorXd& s) {
  double lw = std::visit([&](const auto& d) { return log_weight(d, del, s); }, data);
  if (kind_of(data) == ModelKind::Logit) return lw;
  return lw + 0.5 * del.cardinality() * std::log(2 * std::numbers::pi);
}

WeightedSample make_weighted_sample(const Dataset& data, const DeletionSet& del,
                                    const Eigen::MatrixXd& draws) {
  WeightedSample out;
  out.model = kind_of(data);
  out.draws = draws;
  out.log_weights.resize(draws.rows());
  for (Eigen::Index m = 0; m < draws.rows(); ++m) {
    Eigen::VectorXd s = draws.row(m).transpose();
    out.log_weights(m) = std::visit([&](const auto& d) { return log_weight(d, del, s); }, data);
  }
  return out;
}

double self_normalized_estimate(const WeightedSample& sample, const Eigen::VectorXd& g_values) {
  if (g_values.size() != sample.log_weights.size())
    throw ConfigError("g_values length does not match the sample");
  Eigen::VectorXd u = shifted_weights(sample.log_weights);
  double den = u.sum();
  if (!(den > 0)) throw DomainError("degenerate sample: all weights underflow");
  return u.dot(g_values) / den;
}

// ---------------------------------------------------------------- measures

std::string to_string(Measure m) {
  switch (m) {
    case Measure::KL: return "KL";
    case Measure::L1: return "L1";
    case Measure::L2: return "L2";
    case Measure::Delta1: return "Delta1";
    case Measure::Delta2: return "Delta2";
    case Measure::Hellinger: return "Hellinger";
    case Measure::ChiSq: return "ChiSq";
    case Measure::CPO: return "CPO";
    case Measure::Bdd: return "Bdd";
  }
  return "?";
}

Measure measure_from_string(const std::string& s) {
  for (Measure m : {Measure::KL, Measure::L1, Measure::L2, Measure::Delta1, Measure::Delta2,
                    Measure::Hellinger, Measure::ChiSq, Measure::CPO, Measure::Bdd})
    if (to_string(m) == s) return m;
  throw ConfigError("unknown measure '" + s + "'");
}

bool adjusted_prior_check(ModelKind model, const GSpec& g, const AdjustablePrior& prior) {
  if (std::holds_alternative<gspec::Bounded>(g)) return true;

  if (const auto* ni = std::get_if<NoninformativeLinearPrior>(&prior)) {
    if (model != ModelKind::Linear)
      throw ConfigError("noninformative adjustment rule applies to the linear model only");
    if (const auto* p = std::get_if<gspec::Polynomial>(&g)) return p->degree < ni->n - ni->I - ni->k;
    return false;  // an improper prior admits no likelihood-power adjustment
  }

  const auto& comps = std::get<std::vector<ThetaPriorSpec>>(prior);
  if (comps.empty()) throw ConfigError("adjusted-prior check needs at least one prior component");

  if (const auto* lp = std::get_if<gspec::LikelihoodPower>(&g)) {
    if (lp->power < 1) throw ConfigError("likelihood power must be positive");
    bool lik_bounded = model == ModelKind::Logit || lp->likelihood_bounded;
    if (!lik_bounded) return false;
    return std::all_of(comps.begin(), comps.end(), [](const ThetaPriorSpec& s) {
      return is_proper(s) && has_bounded_density(s);
    });
  }

  const int degree = std::get<gspec::Polynomial>(g).degree;
  if (degree < 0) throw ConfigError("polynomial degree must be nonnegative");
  for (const auto& s : comps) {
    bool ok = std::visit(
        [&](const auto& p) -> bool {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, theta_prior::StudentT>) return degree < p.dof;
          else if constexpr (std::is_same_v<T, theta_prior::Custom>) {
            if (!p.proper) return false;
            if (p.declared.tag == TailClass::Tag::Thin ||
                p.declared.tag == TailClass::Tag::BoundedSupport ||
                p.declared.tag == TailClass::Tag::InFamily)
              return true;
            throw ConfigError("polynomial integrability of a custom thick-tailed prior is unknown");
          } else {
            return true;  // normal, Laplace, quartic, bounded: all moments finite
          }
        },
        s);
    if (!ok) return false;
  }
  return true;
}

GateStatus gate_for(Measure m, const GateInputs& in) {
  MomsRow row = moms_row(m);
  GateStatus g;
  g.required_moments = row.moms;
  g.required_adjusted_moments = row.adj_moms;
  g.adjustment = row.adjustment;
  g.available_r_star = in.report.r_star;
  if (!(in.report.r_star > row.moms)) {
    g.reason = "needs more than " + std::to_string(row.moms) + " weight moments; r* = " +
               std::to_string(in.report.r_star);
    return g;
  }
  if (row.adj_moms > 0) {
    if (!in.adjusted_prior_ok) {
      g.reason = "adjusted prior (" + std::string(row.adjustment) + ") is not integrable";
      return g;
    }
    double adj = in.adjusted_r_star.value_or(in.report.r_star);
    if (!(adj > row.adj_moms)) {
      g.reason = "needs more than " + std::to_string(row.adj_moms) +
                 " moments under the adjusted prior; r* = " + std::to_string(adj);
      return g;
    }
  }
  g.passed = true;
  return g;
}

InfluenceEstimate estimate_measure(const WeightedSample& sample, Measure m, const MeasureAux& aux,
                                   const GateInputs& gate) {
  const Eigen::Index M = sample.log_weights.size();
  InfluenceEstimate est;
  est.measure = m;
  est.coordinate = aux.coordinate;
  est.gate = gate_for(m, gate);

  MeanFunctional mf;
  Eigen::VectorXd u;
  if (m != Measure::CPO) u = shifted_weights(sample.log_weights);

  switch (m) {
    case Measure::KL: {
      // -E_{p_I}[log u/ubar]: -mean(u log u)/ubar + log ubar.
      mf.f.resize(M, 2);
      mf.f.col(0) = u;
      for (Eigen::Index i = 0; i < M; ++i) mf.f(i, 1) = u(i) > 0 ? u(i) * std::log(u(i)) : 0.0;
      mf.phi = [](const Eigen::VectorXd& a) { return -a(1) / a(0) + std::log(a(0)); };
      break;
    }
    case Measure::ChiSq: {
      mf.f.resize(M, 2);
      mf.f.col(0) = u;
      mf.f.col(1) = u.array().square();
      mf.phi = [](const Eigen::VectorXd& a) { return a(1) / (a(0) * a(0)) - 1.0; };
      break;
    }
    case Measure::Hellinger: {
      mf.f.resize(M, 2);
      mf.f.col(0) = u;
      mf.f.col(1) = u.array().sqrt();
      mf.phi = [](const Eigen::VectorXd& a) { return 2.0 - 2.0 * a(1) / std::sqrt(a(0)); };
      break;
    }
    case Measure::Delta1:
    case Measure::Delta2: {
      if (aux.coordinate < 0) throw ConfigError("Delta measures need a coordinate");
      const Eigen::VectorXd& th = require(aux.values, M, "coordinate values");
      Eigen::VectorXd t = m == Measure::Delta1 ? th : Eigen::VectorXd(th.array().square());
      mf.f.resize(M, 3);
      mf.f.col(0) = u;
      mf.f.col(1) = u.cwiseProduct(t);
      mf.f.col(2) = t;
      mf.phi = [](const Eigen::VectorXd& a) { return a(1) / a(0) - a(2); };
      break;
    }
    case Measure::Bdd: {
      const Eigen::VectorXd& gv = require(aux.values, M, "bounded-function values");
      mf.f.resize(M, 2);
      mf.f.col(0) = u;
      mf.f.col(1) = u.cwiseProduct(gv);
      mf.phi = [](const Eigen::VectorXd& a) { return a(1) / a(0); };
      break;
    }
    case Measure::CPO: {
      const Eigen::VectorXd& lil = require(aux.log_inverse_likelihood, M, "log 1/L_I values");
      double mx = lil.maxCoeff();
      if (!std::isfinite(mx)) throw DomainError("degenerate sample: no finite inverse likelihood");
      mf.f = (lil.array() - mx).exp().matrix();
      mf.phi = [mx](const Eigen::VectorXd& a) { return std::exp(-mx - std::log(a(0))); };
      break;
    }
    case Measure::L1:
    case Measure::L2: {
      if (!aux.log_c_hat) throw ConfigError("L1/L2 need a caller-supplied log C-hat");
      const Eigen::VectorXd& lq = require(aux.log_q, M, "log q values");
      Eigen::VectorXd qc = (lq.array() - *aux.log_c_hat).exp().matrix();
      if (m == Measure::L1) {
        // C^-1 mean(q (u/ubar) |u/ubar - 1|); ubar inside the absolute value is
        // held at its full-sample value for the variance.
        double ubar = u.mean();
        mf.f.resize(M, 2);
        mf.f.col(0) = u;
        mf.f.col(1) = (qc.array() * u.array() * (u.array() - ubar).abs()).matrix();
        mf.phi = [](const Eigen::VectorXd& a) { return a(1) / (a(0) * a(0)); };
      } else {
        // C^-2 mean(q^2 (u/ubar - 1)^2 u/ubar), expanded in powers of 1/ubar.
        Eigen::ArrayXd q2 = qc.array().square();
        mf.f.resize(M, 4);
        mf.f.col(0) = u;
        mf.f.col(1) = (q2 * u.array()).matrix();
        mf.f.col(2) = (q2 * u.array().square()).matrix();
        mf.f.col(3) = (q2 * u.array().cube()).matrix();
        mf.phi = [](const Eigen::VectorXd& a) {
          double ub = a(0);
          return a(3) / (ub * ub * ub) - 2 * a(2) / (ub * ub) + a(1) / ub;
        };
      }
      break;
    }
  }

  est.value = functional_value(mf);
  if (m == Measure::ChiSq && est.value < 0 && est.value > -1e-12) est.value = 0.0;
  if (m == Measure::Hellinger) est.out_of_range = est.value < 0 || est.value > 2;
  if (est.gate.passed) est.standard_error = functional_se(mf);
  return est;
}

bool bounding_moment_check(ModelKind model, const GateInputs& gate,
                           std::optional<double> logit_max_h_r2) {
  if (model == ModelKind::Logit) return logit_max_h_r2 && *logit_max_h_r2 < 0;
  return gate.report.r_star > 2 + kKLDelta;
}

CombinedBound combined_moment_bound(double r_prior, double r_deletion) {
  if (!(r_prior > 0) || !(r_deletion > 0))
    throw DomainError("combined moment bound needs positive arguments");
  double inv = 1.0 / r_prior + 1.0 / r_deletion;
  return {r_prior, r_deletion, inv == 0 ? kInf : 1.0 / inv};
}

}  // namespace influence_gate
