#include "influence_gate/linear_gate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace influence_gate {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& X, const std::vector<int>& idx) {
  Eigen::MatrixXd out(idx.size(), X.cols());
  for (size_t a = 0; a < idx.size(); ++a) out.row(a) = X.row(idx[a]);
  return out;
}

// e' (I - rH)^{-1} e through the eigenbasis of H_I.
struct Quad {
  Eigen::VectorXd a;  // squared projections of e on eigenvectors
  Eigen::VectorXd lam;
  double value(double r) const {
    double s = 0;
    for (Eigen::Index j = 0; j < a.size(); ++j) s += a(j) / (1.0 - r * lam(j));
    return s;
  }
  // d/dr of r * value(r)
  double slope(double r) const {
    double s = 0;
    for (Eigen::Index j = 0; j < a.size(); ++j) {
      double d = 1.0 - r * lam(j);
      s += a(j) / (d * d);
    }
    return s;
  }
};

Quad quad_of(const LeverageReport& lev) {
  Quad q;
  Eigen::VectorXd p = lev.eigenvectors.transpose() * lev.deleted_residuals;
  q.a = p.array().square();
  q.lam = lev.eigenvalues;
  return q;
}

void check_nonsingular(const LeverageReport& lev, double r) {
  for (Eigen::Index j = 0; j < lev.eigenvalues.size(); ++j) {
    double lam = lev.eigenvalues(j);
    if (std::abs(lam - 1.0 / r) < kEigenBoundaryTol)
      throw DomainError("(I - r H_I) is singular: eigenvalue " + fmt(lam) + " equals 1/r = " +
                        fmt(1.0 / r));
  }
}

struct PriorTerms {
  bool conjugate;
  double alpha = 0, beta = 0;
  double threshold;  // RSS* threshold
};

PriorTerms prior_terms(const LinearPrior& prior) {
  if (auto c = std::get_if<ConjugatePrior>(&prior)) {
    if (!(c->alpha > 0 && c->beta > 0))
      throw ConfigError("conjugate prior requires alpha > 0 and beta > 0");
    if (!is_proper(c->theta) || !has_full_support(c->theta))
      throw DomainError("conjugate-branch verdict requires a proper theta prior with full support");
    return {true, c->alpha, c->beta, -2.0 / c->beta};
  }
  return {false, 0, 0, 0.0};
}

bool sample_size_ok(const PriorTerms& p, int n, int k, int I, double r) {
  if (p.conjugate) return n / 2.0 + p.alpha > r * I / 2.0;
  return n > r * I + k;
}

double rss_tol(double rss) { return 1e-9 * std::max(1.0, std::abs(rss)); }

}  // namespace

// ---------------------------------------------------------------- leverage

LinearFit::LinearFit(const RegressionData& data)
    : n_(data.n()), k_(data.k()), use_qr_(data.n() > 64) {
  const auto& X = data.design();
  const auto& y = data.response();
  Eigen::VectorXd theta_hat;
  if (use_qr_) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
    Q_ = qr.householderQ() * Eigen::MatrixXd::Identity(n_, k_);
    theta_hat = qr.solve(y);
  } else {
    Eigen::LDLT<Eigen::MatrixXd> xtx(X.transpose() * X);
    H_ = X * xtx.solve(X.transpose());
    theta_hat = xtx.solve(X.transpose() * y);
  }
  e_ = y - X * theta_hat;
  rss_ = e_.squaredNorm();
}

LeverageReport LinearFit::leverage(const DeletionSet& del) const {
  if (del.empty())
    throw DataError(DataFault::EmptyDeletion, "leverage is undefined for an empty deletion set");
  const auto& idx = del.indices();
  const int I = del.cardinality();
  LeverageReport rep;
  rep.minor.resize(I, I);
  if (use_qr_) {
    Eigen::MatrixXd QI = rows_of(Q_, idx);
    rep.minor = QI * QI.transpose();
  } else {
    for (int a = 0; a < I; ++a)
      for (int b = 0; b < I; ++b) rep.minor(a, b) = H_(idx[a], idx[b]);
  }
  rep.minor = 0.5 * (rep.minor + rep.minor.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(rep.minor);
  rep.eigenvalues = es.eigenvalues().cwiseMax(0.0).cwiseMin(1.0);
  rep.eigenvectors = es.eigenvectors();
  rep.deleted_residuals.resize(I);
  for (int a = 0; a < I; ++a) rep.deleted_residuals(a) = e_(idx[a]);
  rep.rss = rss_;
  return rep;
}

LeverageReport leverage_minor(const RegressionData& data, const DeletionSet& del) {
  return LinearFit(data).leverage(del);
}

std::optional<Eigen::VectorXd> theta_tilde(const RegressionData& data, const DeletionSet& del,
                                           double r) {
  const auto& X = data.design();
  const auto& y = data.response();
  Eigen::MatrixXd XI = rows_of(X, del.indices());
  Eigen::VectorXd yI(del.cardinality());
  for (int a = 0; a < del.cardinality(); ++a) yI(a) = y(del.indices()[a]);
  if (!del.empty()) {
    auto lev = leverage_minor(data, del);
    for (Eigen::Index j = 0; j < lev.eigenvalues.size(); ++j)
      if (std::abs(lev.eigenvalues(j) - 1.0 / r) < kEigenBoundaryTol) return std::nullopt;
  }
  Eigen::MatrixXd Q = X.transpose() * X - r * XI.transpose() * XI;
  Eigen::VectorXd b = X.transpose() * y - r * XI.transpose() * yI;
  return Eigen::FullPivLU<Eigen::MatrixXd>(Q).solve(b);
}

double rss_star(const LeverageReport& lev, double r) {
  if (r == 0.0) return lev.rss;
  check_nonsingular(lev, r);
  return lev.rss - r * quad_of(lev).value(r);
}

double rss_star(const RegressionData& data, const DeletionSet& del, double r) {
  return rss_star(leverage_minor(data, del), r);
}

// ---------------------------------------------------------------- verdicts

MomentVerdict theorem31_verdict(const LeverageReport& lev, int n, int k, double r,
                                const LinearPrior& prior) {
  const PriorTerms p = prior_terms(prior);
  const int I = static_cast<int>(lev.eigenvalues.size());
  const double lam = lev.lambda_max();
  const double inv = 1.0 / r;

  std::vector<std::string> infinite;
  const bool lev_boundary = std::abs(lam - inv) < kEigenBoundaryTol;
  if (!lev_boundary && lam > inv) infinite.push_back("(a') leverage " + fmt(lam) + " > 1/r");
  if (!sample_size_ok(p, n, k, I, r)) infinite.push_back("(b') sample size");

  bool rss_boundary = false;
  bool any_singular = false;
  for (Eigen::Index j = 0; j < lev.eigenvalues.size(); ++j)
    any_singular |= std::abs(lev.eigenvalues(j) - inv) < kEigenBoundaryTol;
  if (!any_singular) {
    double rs = rss_star(lev, r);
    if (std::abs(rs - p.threshold) <= rss_tol(lev.rss))
      rss_boundary = true;
    else if (rs < p.threshold)
      infinite.push_back("(c') RSS* " + fmt(rs) + " < " + fmt(p.threshold));
  }

  if (!infinite.empty()) {
    std::string d;
    for (auto& s : infinite) d += (d.empty() ? "" : "; ") + s;
    return MomentVerdict::infinite(d);
  }
  if (lev_boundary) return MomentVerdict::boundary("leverage: lambda_I = 1/r");
  if (rss_boundary) return MomentVerdict::boundary("residual: RSS* equals threshold");
  return MomentVerdict::finite("(a), (b), (c) hold");
}

MomentVerdict theorem31_verdict(const RegressionData& data, const DeletionSet& del, double r,
                                const LinearPrior& prior) {
  if (del.empty()) {
    prior_terms(prior);
    return MomentVerdict::finite("empty deletion: weight is constant");
  }
  return theorem31_verdict(leverage_minor(data, del), data.n(), data.k(), r, prior);
}

MomentIndexReport moment_index_linear(const LeverageReport& lev, int n, int k,
                                      const LinearPrior& prior) {
  const PriorTerms p = prior_terms(prior);
  const int I = static_cast<int>(lev.eigenvalues.size());
  MomentIndexReport rep;
  if (I == 0) {
    rep.note = "empty deletion set";
    return rep;
  }
  const double lam = lev.lambda_max();
  rep.r_a = lam <= 1e-15 ? kInf : 1.0 / lam;
  rep.r_b = p.conjugate ? (n + 2.0 * p.alpha) / I : static_cast<double>(n - k) / I;

  const Quad q = quad_of(lev);
  auto f = [&](double r) { return lev.rss - r * q.value(r) - p.threshold; };

  if (lev.deleted_residuals.cwiseAbs().maxCoeff() == 0.0) {
    rep.r_c = rep.r_a;
    rep.note = "deleted residuals are zero; RSS* is constant";
  } else {
    double hi;
    if (std::isfinite(rep.r_a)) {
      hi = rep.r_a - 1e-9;
    } else {
      hi = 1.0;
      while (f(hi) > 0 && hi < 1e15) hi *= 2;
    }
    if (f(hi) > 0) {
      rep.r_c = rep.r_a;
    } else {
      double lo = 0.0;
      for (int it = 0; it < 200 && hi - lo >= 1e-10; ++it) {
        double mid = 0.5 * (lo + hi);
        (f(mid) > 0 ? lo : hi) = mid;
      }
      // Newton polish inside the final bracket; f is smooth and decreasing.
      double r = 0.5 * (lo + hi);
      for (int it = 0; it < 4; ++it) {
        double d = -q.slope(r);
        if (d == 0) break;
        double next = r - f(r) / d;
        if (!(next > lo && next < hi)) break;
        r = next;
      }
      rep.r_c = r;
    }
  }

  rep.r_star = std::min({rep.r_a, rep.r_b, rep.r_c});
  if (rep.r_a <= rep.r_star)
    rep.binding = Binding::Leverage;
  else if (rep.r_b <= rep.r_star)
    rep.binding = Binding::SampleSize;
  else
    rep.binding = Binding::Residual;
  return rep;
}

MomentIndexReport moment_index_linear(const RegressionData& data, const DeletionSet& del,
                                      const LinearPrior& prior) {
  if (del.empty()) {
    prior_terms(prior);
    MomentIndexReport rep;
    rep.note = "empty deletion set";
    return rep;
  }
  return moment_index_linear(leverage_minor(data, del), data.n(), data.k(), prior);
}

// ---------------------------------------------------------------- corollaries

MomentVerdict corollary3_dispatch(const RegressionData& data, const DeletionSet& del, double r,
                                  const TailClass& theta_tail, const TailClass& sigma2_tail,
                                  bool side_condition) {
  using T = TailClass::Tag;
  if (del.empty()) return MomentVerdict::finite("empty deletion: weight is constant");
  if (theta_tail.tag == T::BoundedSupport && sigma2_tail.tag != T::Thin)
    return MomentVerdict::indeterminate(
        "bounded theta support: decide with bounded_support_verdict and the support box");
  if (sigma2_tail.tag == T::InFamily) {
    if (sigma2_tail.params.size() != 2)
      return MomentVerdict::indeterminate("inverse-gamma sigma^2 prior without (alpha, beta)");
    theta_prior::Custom th{theta_tail, true, true};
    return theorem31_verdict(data, del, r,
                             ConjugatePrior{sigma2_tail.params[0], sigma2_tail.params[1], th});
  }
  if (sigma2_tail.tag != T::Thick && sigma2_tail.tag != T::Thin)
    return MomentVerdict::indeterminate("sigma^2 prior tail class is " + to_string(sigma2_tail.tag));
  if (!side_condition)
    return MomentVerdict::indeterminate("sigma^2 prior integrability side condition not asserted");

  auto lev = leverage_minor(data, del);
  const double lam = lev.lambda_max();
  if (std::abs(lam - 1.0 / r) < kEigenBoundaryTol)
    return MomentVerdict::boundary("leverage: lambda_I = 1/r");

  if (sigma2_tail.tag == T::Thick) {
    if (lam > 1.0 / r) return MomentVerdict::infinite("leverage " + fmt(lam) + " > 1/r");
    double rs = rss_star(lev, r);
    if (std::abs(rs) <= rss_tol(lev.rss)) return MomentVerdict::boundary("residual: RSS* = 0");
    if (rs < 0) return MomentVerdict::infinite("RSS* " + fmt(rs) + " < 0");
    return MomentVerdict::finite("leverage and RSS* conditions hold");
  }

  // thin sigma^2 tail
  if (theta_tail.tag == T::BoundedSupport)
    return MomentVerdict::finite("bounded theta support with thin sigma^2 tail");
  if (lam < 1.0 / r) return MomentVerdict::finite("leverage " + fmt(lam) + " < 1/r");
  if (theta_tail.tag == T::Thick)
    return MomentVerdict::infinite("leverage " + fmt(lam) + " > 1/r with thick theta tail");
  if (theta_tail.tag == T::Thin)
    return MomentVerdict::indeterminate(
        "both priors thin-tailed and leverage exceeds 1/r: either outcome is possible");
  return MomentVerdict::indeterminate("leverage exceeds 1/r and theta tail class is " +
                                      to_string(theta_tail.tag));
}

// ---------------------------------------------------------------- bounded support

namespace {

struct BoxQuadratic {
  Eigen::MatrixXd Q;
  Eigen::VectorXd b;
  double value(const Eigen::VectorXd& t) const { return t.dot(Q * t) - 2.0 * b.dot(t); }
};

BoxQuadratic box_quadratic(const RegressionData& data, const DeletionSet& del, double r) {
  const auto& X = data.design();
  const auto& y = data.response();
  Eigen::MatrixXd XI = rows_of(X, del.indices());
  Eigen::VectorXd yI(del.cardinality());
  for (int a = 0; a < del.cardinality(); ++a) yI(a) = y(del.indices()[a]);
  return {X.transpose() * X - r * XI.transpose() * XI, X.transpose() * y - r * XI.transpose() * yI};
}

// Projected gradient descent with a Lipschitz step; ends at a box-stationary point.
Eigen::VectorXd descend(const BoxQuadratic& f, Eigen::VectorXd t, const SupportBox& box,
                        double step) {
  for (int it = 0; it < 5000; ++it) {
    Eigen::VectorXd g = 2.0 * (f.Q * t - f.b);
    Eigen::VectorXd next = (t - step * g).cwiseMax(box.lower).cwiseMin(box.upper);
    if ((next - t).norm() <= 1e-14 * (1.0 + t.norm())) return next;
    t = next;
  }
  return t;
}

}  // namespace

double bounded_support_M(const RegressionData& data, const DeletionSet& del, double r,
                         const SupportBox& box) {
  const int k = data.k();
  if (k > 3) throw DomainError("bounded_support_M supports k <= 3 only");
  if (box.lower.size() != k || box.upper.size() != k)
    throw ConfigError("support box dimension does not match k");
  if ((box.lower.array() > box.upper.array()).any()) throw ConfigError("support box has lower > upper");
  const BoxQuadratic f = box_quadratic(data, del, r);

  const int per_dim = k == 1 ? 2001 : (k == 2 ? 201 : 41);
  const Eigen::Index total = static_cast<Eigen::Index>(std::pow(per_dim, k));
  std::vector<double> vals(total);
  std::vector<Eigen::VectorXd> pts(total);
  auto coord = [&](int j, int i) {
    if (box.lower(j) == box.upper(j)) return box.lower(j);
    return box.lower(j) + (box.upper(j) - box.lower(j)) * i / (per_dim - 1);
  };
  for (Eigen::Index g = 0; g < total; ++g) {
    Eigen::VectorXd t(k);
    Eigen::Index rem = g;
    for (int j = 0; j < k; ++j) {
      t(j) = coord(j, static_cast<int>(rem % per_dim));
      rem /= per_dim;
    }
    vals[g] = f.value(t);
    pts[g] = std::move(t);
  }

  const double L = 2.0 * std::max(1e-300, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(f.Q)
                                              .eigenvalues()
                                              .cwiseAbs()
                                              .maxCoeff());
  double best = *std::min_element(vals.begin(), vals.end());
  // Descend from every grid point that is a minimum among its axis neighbours.
  for (Eigen::Index g = 0; g < total; ++g) {
    bool local = true;
    Eigen::Index stride = 1;
    for (int j = 0; j < k && local; ++j) {
      int i = static_cast<int>((g / stride) % per_dim);
      if (i > 0 && vals[g - stride] < vals[g]) local = false;
      if (i + 1 < per_dim && vals[g + stride] < vals[g]) local = false;
      stride *= per_dim;
    }
    if (!local) continue;
    best = std::min(best, f.value(descend(f, pts[g], box, 1.0 / L)));
  }
  return best;
}

MomentVerdict bounded_support_verdict(const RegressionData& data, const DeletionSet& del,
                                      double r, const SupportBox& box,
                                      const TailClass& sigma2_tail, bool side_condition) {
  using T = TailClass::Tag;
  if (del.empty()) return MomentVerdict::finite("empty deletion: weight is constant");
  if (sigma2_tail.tag == T::Thin)
    return MomentVerdict::finite("bounded theta support with thin sigma^2 tail");

  const auto& y = data.response();
  double yIy = 0;
  for (int i : del.indices()) yIy += y(i) * y(i);
  // Minimum over the support of the bracket multiplying -1/(2 sigma^2).
  const double E = y.squaredNorm() - r * yIy + bounded_support_M(data, del, r, box);
  const double tol = 1e-9 * std::max(1.0, y.squaredNorm());
  const int I = del.cardinality();

  if (sigma2_tail.tag == T::InFamily) {
    if (sigma2_tail.params.size() != 2)
      return MomentVerdict::indeterminate("inverse-gamma sigma^2 prior without (alpha, beta)");
    const double alpha = sigma2_tail.params[0], beta = sigma2_tail.params[1];
    const double v = E + 2.0 / beta;
    const bool size_ok = data.n() / 2.0 + alpha > r * I / 2.0;
    if (!size_ok) return MomentVerdict::infinite("sample size: n/2 + alpha <= rI/2");
    if (std::abs(v) <= tol) return MomentVerdict::boundary("residual: bounded-support exponent is 0");
    return v > 0 ? MomentVerdict::finite("bounded-support exponent " + fmt(v) + " > 0")
                 : MomentVerdict::infinite("bounded-support exponent " + fmt(v) + " < 0");
  }
  if (sigma2_tail.tag == T::Thick) {
    if (!side_condition)
      return MomentVerdict::indeterminate("sigma^2 prior integrability side condition not asserted");
    if (std::abs(E) <= tol) return MomentVerdict::boundary("residual: bounded-support exponent is 0");
    return E > 0 ? MomentVerdict::finite("bounded-support exponent " + fmt(E) + " > 0")
                 : MomentVerdict::infinite("bounded-support exponent " + fmt(E) + " < 0");
  }
  return MomentVerdict::indeterminate("sigma^2 prior tail class is " + to_string(sigma2_tail.tag));
}

}  // namespace influence_gate
