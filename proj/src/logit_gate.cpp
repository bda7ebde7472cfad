#include "influence_gate/logit_gate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
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

// h = a + (r - 1) b - pen, with a, b, pen independent of r.
struct Terms {
  double a = 0, b = 0, pen = 0;
  double at(double r) const { return a + (r - 1.0) * b - pen; }
};

Terms terms(const LogitData& data, const std::vector<char>& in, const Eigen::VectorXd& beta,
            const Eigen::VectorXd& eps) {
  Terms t;
  const auto& X = data.design();
  const auto& y = data.outcome();
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    double s = X.row(i).dot(beta);
    double u = s * y(i) - std::max(0.0, s);
    if (in[i]) t.b -= u;
    else t.a += u;
  }
  t.pen = eps.cwiseProduct(beta.cwiseAbs()).sum();
  return t;
}

std::vector<char> membership(const LogitData& data, const DeletionSet& del) {
  std::vector<char> in(data.n(), 0);
  for (int i : del.indices()) in[i] = 1;
  return in;
}

bool lex_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  for (Eigen::Index j = 0; j < a.size(); ++j) {
    if (a(j) < b(j)) return true;
    if (a(j) > b(j)) return false;
  }
  return false;
}

double binom(int n, int k) {
  if (k < 0 || k > n) return 0;
  double r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

struct Enumeration {
  std::vector<Eigen::VectorXd> rays;  // unit L1, original units
  Eigen::VectorXd scale;
  bool approximate = false;
};

// Rays of the arrangement {beta' x_i = 0} u {beta_j = 0}: null directions of
// every (k-1)-subset of hyperplane normals, both signs.
Enumeration enumerate_rays(const LogitData& data) {
  const int n = data.n(), k = data.k();
  Enumeration en;
  en.scale = data.design().cwiseAbs().colwise().maxCoeff().transpose();
  for (Eigen::Index j = 0; j < k; ++j)
    if (en.scale(j) == 0) en.scale(j) = 1;
  Eigen::MatrixXd Xs = data.design() * en.scale.cwiseInverse().asDiagonal();

  auto push = [&](const Eigen::VectorXd& d_scaled) {
    Eigen::VectorXd b = d_scaled.cwiseQuotient(en.scale);
    double l1 = b.lpNorm<1>();
    if (!(l1 > 0)) return;
    en.rays.push_back(b / l1);
    en.rays.push_back(-b / l1);
  };

  if (k == 1) {
    push(Eigen::VectorXd::Ones(1));
    return en;
  }
  std::vector<Eigen::VectorXd> normals;
  for (int i = 0; i < n; ++i)
    if (Xs.row(i).cwiseAbs().maxCoeff() > 0) normals.push_back(Xs.row(i).transpose());
  for (int j = 0; j < k; ++j) normals.push_back(Eigen::VectorXd::Unit(k, j));
  const int m = static_cast<int>(normals.size());
  const int q = k - 1;

  std::vector<int> comb(q);
  for (int a = 0; a < q; ++a) comb[a] = a;
  Eigen::MatrixXd M(q, k), minor(q, q);
  while (true) {
    for (int a = 0; a < q; ++a) M.row(a) = normals[comb[a]].transpose();
    // Generalized cross product: cofactor expansion along a virtual top row.
    Eigen::VectorXd d(k);
    for (int j = 0; j < k; ++j) {
      int c = 0;
      for (int jj = 0; jj < k; ++jj)
        if (jj != j) minor.col(c++) = M.col(jj);
      double det = q == 1 ? minor(0, 0) : minor.partialPivLu().determinant();
      d(j) = (j % 2 ? -1.0 : 1.0) * det;
    }
    double scale = 1.0;
    for (int a = 0; a < q; ++a) scale *= M.row(a).norm();
    if (d.norm() > 1e-12 * scale) push(d);

    int a = q - 1;
    while (a >= 0 && comb[a] == m - q + a) --a;
    if (a < 0) break;
    ++comb[a];
    for (int b = a + 1; b < q; ++b) comb[b] = comb[b - 1] + 1;
  }
  return en;
}

// Seeded multistart local search; used only when enumeration exceeds budget.
Enumeration multistart_rays(const LogitData& data, const DeletionSet& del, double r,
                            const Eigen::VectorXd& eps) {
  const int k = data.k();
  Enumeration en;
  en.scale = Eigen::VectorXd::Ones(k);
  en.approximate = true;
  auto in = membership(data, del);
  std::mt19937_64 rng(0x5eed);
  std::exponential_distribution<double> ex(1.0);
  std::uniform_int_distribution<int> coord(0, k - 1);
  std::bernoulli_distribution coin(0.5);
  auto normalize = [](Eigen::VectorXd b) { return Eigen::VectorXd(b / b.lpNorm<1>()); };
  for (int s = 0; s < 400; ++s) {
    Eigen::VectorXd b(k);
    for (int j = 0; j < k; ++j) b(j) = (coin(rng) ? 1 : -1) * ex(rng);
    b = normalize(b);
    double best = terms(data, in, b, eps).at(r);
    double step = 0.5;
    for (int it = 0; it < 400 && step > 1e-12; ++it) {
      bool improved = false;
      for (int j = 0; j < k; ++j) {
        for (double sgn : {1.0, -1.0}) {
          Eigen::VectorXd c = b;
          c(j) += sgn * step;
          if (c.lpNorm<1>() == 0) continue;
          c = normalize(c);
          double v = terms(data, in, c, eps).at(r);
          if (v > best) {
            best = v;
            b = c;
            improved = true;
          }
        }
      }
      if (!improved) step *= 0.5;
    }
    en.rays.push_back(b);
  }
  return en;
}

Enumeration rays_for(const LogitData& data, const DeletionSet& del, double r,
                     const Eigen::VectorXd& eps, bool allow_multistart) {
  const double budget = logit_vertex_budget(data.n(), data.k());
  if (budget > kLogitVertexBudget) {
    if (!allow_multistart)
      throw BudgetError("logistic vertex enumeration needs " + fmt(budget) +
                        " candidates (cap 1e7); rerun with the multistart fallback "
                        "(logit.multistart = true) for an approximate maximum");
    return multistart_rays(data, del, r, eps);
  }
  return enumerate_rays(data);
}

Eigen::VectorXd eps_vector(int k, double epsilon) {
  if (!(epsilon >= 0)) throw ConfigError("epsilon must be nonnegative");
  return Eigen::VectorXd::Constant(k, epsilon);
}

struct Table {
  std::vector<Eigen::VectorXd> rays;
  std::vector<Terms> t;
  bool approximate;
  Eigen::VectorXd scale;
  // Max over candidates with lexicographic tie-break.
  std::pair<double, size_t> max_at(double r) const {
    double best = -kInf;
    size_t arg = 0;
    for (size_t c = 0; c < t.size(); ++c) {
      double v = t[c].at(r);
      double tol = 1e-12 * std::max(1.0, std::abs(best));
      if (c == 0 || v > best + tol) {
        arg = c;
      } else if (v >= best - tol && lex_less(rays[c], rays[arg])) {
        arg = c;
      }
      best = std::max(best, v);
    }
    return {t.empty() ? -kInf : t[arg].at(r), arg};
  }
};

Table build_table(const LogitData& data, const DeletionSet& del, double r,
                  const Eigen::VectorXd& eps, bool allow_multistart) {
  Enumeration en = rays_for(data, del, r, eps, allow_multistart);
  auto in = membership(data, del);
  Table tb{std::move(en.rays), {}, en.approximate, en.scale};
  tb.t.reserve(tb.rays.size());
  for (const auto& b : tb.rays) tb.t.push_back(terms(data, in, b, eps));
  return tb;
}

MomentVerdict verdict_from(double mx) {
  if (mx < -kLogitBoundaryBand) return MomentVerdict::finite("max h = " + fmt(mx) + " < 0");
  if (mx > kLogitBoundaryBand) return MomentVerdict::infinite("max h = " + fmt(mx) + " > 0");
  return MomentVerdict::boundary("criterion: max h within 1e-9 of 0");
}

}  // namespace

double h_eval(const LogitData& data, const DeletionSet& del, const Eigen::VectorXd& beta, double r,
              double epsilon) {
  if (beta.size() != data.k()) throw DomainError("beta dimension does not match k");
  return terms(data, membership(data, del), beta, eps_vector(data.k(), epsilon)).at(r);
}

double logit_vertex_budget(int n, int k) { return binom(n + k, k - 1) * std::pow(2.0, k); }

LogitCriterion max_h_l1_sphere(const LogitData& data, const DeletionSet& del, double r,
                               double epsilon, bool allow_multistart) {
  Table tb = build_table(data, del, r, eps_vector(data.k(), epsilon), allow_multistart);
  LogitCriterion out;
  out.epsilon = epsilon;
  out.r = r;
  out.column_scale = tb.scale;
  out.approximate = tb.approximate;
  auto [mx, arg] = tb.max_at(r);
  out.max_value = mx;
  out.argmax = tb.rays[arg];
  out.certificate.reserve(tb.rays.size());
  for (size_t c = 0; c < tb.rays.size(); ++c) out.certificate.push_back({tb.rays[c], tb.t[c].at(r)});
  return out;
}

MomentVerdict theorem51_verdict(const LogitData& data, const DeletionSet& del, double r,
                                double epsilon, bool allow_multistart) {
  if (del.empty()) return MomentVerdict::finite("empty deletion: weight is constant");
  return verdict_from(max_h_l1_sphere(data, del, r, epsilon, allow_multistart).max_value);
}

TailClass classify_logit_prior(const ThetaPriorSpec& spec) {
  using T = TailClass::Tag;
  if (auto p = std::get_if<theta_prior::Laplace>(&spec)) {
    TailClass tc{T::InFamily, {}};
    for (Eigen::Index j = 0; j < p->scale.size(); ++j) tc.params.push_back(1.0 / p->scale(j));
    return tc;
  }
  if (std::holds_alternative<theta_prior::Normal>(spec)) return {T::Thin, {}};
  if (std::holds_alternative<theta_prior::QuarticExponential>(spec)) return {T::Thin, {}};
  if (std::holds_alternative<theta_prior::StudentT>(spec)) return {T::Thick, {}};
  if (std::holds_alternative<theta_prior::BoundedUniform>(spec)) return {T::BoundedSupport, {}};
  return std::get<theta_prior::Custom>(spec).declared;
}

MomentVerdict corollary5_dispatch(const LogitData& data, const DeletionSet& del, double r,
                                  const TailClass& tail, bool allow_multistart) {
  using T = TailClass::Tag;
  if (del.empty()) return MomentVerdict::finite("empty deletion: weight is constant");
  switch (tail.tag) {
    case T::Thick:
      return theorem51_verdict(data, del, r, 0.0, allow_multistart);
    case T::Thin:
    case T::BoundedSupport:
      return MomentVerdict::finite("prior thinner than every double exponential");
    case T::InFamily: {
      if (tail.params.empty())
        return MomentVerdict::indeterminate("double-exponential prior without epsilon");
      if (tail.params.size() == 1)
        return theorem51_verdict(data, del, r, tail.params[0], allow_multistart);
      Eigen::VectorXd eps = Eigen::Map<const Eigen::VectorXd>(tail.params.data(), tail.params.size());
      if (eps.size() != data.k()) throw ConfigError("per-coordinate epsilon length differs from k");
      Table tb = build_table(data, del, r, eps, allow_multistart);
      return verdict_from(tb.max_at(r).first);
    }
    case T::Unknown:
      break;
  }
  return MomentVerdict::indeterminate("prior tail class unknown");
}

MomentIndexReport moment_index_logit(const LogitData& data, const DeletionSet& del,
                                     double epsilon, bool allow_multistart) {
  MomentIndexReport rep;
  rep.r_a = kInf;
  rep.r_b = kInf;
  if (del.empty()) {
    rep.note = "empty deletion set";
    return rep;
  }
  const Table tb = build_table(data, del, 2.0, eps_vector(data.k(), epsilon), allow_multistart);
  auto finite_at = [&](double r) { return tb.max_at(r).first < 0; };
  rep.binding = Binding::Criterion;
  if (finite_at(kLogitRCap)) {
    rep.r_c = kLogitRCap;
    rep.capped = true;
    rep.note = "criterion negative up to the cap; r* > 64";
  } else if (!finite_at(1.0)) {
    rep.r_c = 1.0;
    rep.note = "criterion not negative at r = 1";
  } else {
    double lo = 1.0, hi = kLogitRCap;
    for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
      double mid = 0.5 * (lo + hi);
      (finite_at(mid) ? lo : hi) = mid;
    }
    rep.r_c = 0.5 * (lo + hi);
    const auto& b = tb.rays[tb.max_at(hi).second];
    std::ostringstream os;
    os.precision(6);
    os << "binding vertex (";
    for (Eigen::Index j = 0; j < b.size(); ++j) os << (j ? ", " : "") << b(j);
    os << ")";
    rep.note = os.str();
  }
  if (tb.approximate) rep.note += "; multistart approximation";
  rep.r_star = rep.r_c;
  return rep;
}

bool propriety_certificate(const LogitData& data, double epsilon, bool allow_multistart) {
  const double r = 1.0 + 1e-6;
  for (int i = 0; i < data.n(); ++i) {
    auto v = theorem51_verdict(data, deletion_set({i}, data.n()), r, epsilon, allow_multistart);
    if (v.is(MomentVerdict::Tag::Finite)) return true;
  }
  return false;
}

}  // namespace influence_gate
