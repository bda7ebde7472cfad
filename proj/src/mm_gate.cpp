#include "influence_gate/mm_gate.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

namespace influence_gate {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(8);
  os << v;
  return os.str();
}

// Everything at one kappa is a function of four partial sums.
struct Sums {
  double in_x2 = 0, out_x2 = 0, in_xv = 0, out_xv = 0;
};

class MMKernel {
 public:
  MMKernel(const MMData& data, const DeletionSet& del, double r)
      : c_(data.concentration()), v_(data.velocity()), r_(r) {
    in_.assign(c_.size(), false);
    for (int i : del.indices()) in_[i] = true;
    double in_v2 = 0, out_v2 = 0;
    double in_c2 = 0, out_c2 = 0, in_cv = 0, out_cv = 0, in_v = 0, out_v = 0;
    for (Eigen::Index i = 0; i < c_.size(); ++i) {
      double c = c_(i), v = v_(i);
      if (in_[i]) {
        in_v2 += v * v; in_c2 += c * c; in_cv += c * v; in_v += v; ++n_in_;
      } else {
        out_v2 += v * v; out_c2 += c * c; out_cv += c * v; out_v += v; ++n_out_;
      }
    }
    C_ = out_v2 - (r - 1) * in_v2;
    // kappa -> infinity: x_i ~ c_i / kappa
    inf_.in_x2 = in_c2; inf_.out_x2 = out_c2; inf_.in_xv = in_cv; inf_.out_xv = out_cv;
    // kappa -> 0: x_i -> 1
    zero_.in_x2 = n_in_; zero_.out_x2 = n_out_; zero_.in_xv = in_v; zero_.out_xv = out_v;
  }

  Sums sums(double kappa) const {
    Sums s;
    for (Eigen::Index i = 0; i < c_.size(); ++i) {
      double x = c_(i) / (kappa + c_(i));
      if (in_[i]) {
        s.in_x2 += x * x; s.in_xv += x * v_(i);
      } else {
        s.out_x2 += x * x; s.out_xv += x * v_(i);
      }
    }
    return s;
  }

  double A(const Sums& s) const { return s.out_x2 - (r_ - 1) * s.in_x2; }
  double B(const Sums& s) const { return s.out_xv - (r_ - 1) * s.in_xv; }
  double C() const { return C_; }
  static double lev(const Sums& s) { return s.in_x2 / (s.in_x2 + s.out_x2); }
  static double g(const Sums& s) {
    double den = s.in_xv + s.out_xv;
    return den == 0 ? kNaN : s.in_xv / den;
  }
  double rss(const Sums& s) const {
    double a = A(s);
    return a == 0 ? kNaN : C_ - B(s) * B(s) / a;
  }
  // Some m > 0 makes A m^2 - 2 B m + C negative.
  bool negative(const Sums& s) const {
    double a = A(s);
    if (a < 0) return true;
    if (a > 0) {
      double rs = C_ - B(s) * B(s) / a;
      return rs < 0 && (C_ < 0 || B(s) > 0);
    }
    return false;
  }
  bool negative_at(double kappa) const { return negative(sums(kappa)); }

  const Sums& at_infinity() const { return inf_; }
  const Sums& at_zero() const { return zero_; }
  double r() const { return r_; }

 private:
  const Eigen::VectorXd& c_;
  const Eigen::VectorXd& v_;
  double r_;
  std::vector<bool> in_;
  double C_ = 0;
  int n_in_ = 0, n_out_ = 0;
  Sums inf_, zero_;
};

// Golden-section search for the minimum of f over log-kappa in [lo, hi].
std::pair<double, double> golden_min(const std::function<double(double)>& f, double klo,
                                     double khi) {
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = std::log(klo), b = std::log(khi);
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = f(std::exp(x1)), f2 = f(std::exp(x2));
  while (std::exp(b) - std::exp(a) > 1e-8 * std::max(1.0, std::exp(a)) && b - a > 1e-15) {
    if (f1 <= f2) {
      b = x2; x2 = x1; f2 = f1;
      x1 = b - phi * (b - a); f1 = f(std::exp(x1));
    } else {
      a = x1; x1 = x2; f1 = f2;
      x2 = a + phi * (b - a); f2 = f(std::exp(x2));
    }
  }
  double k = std::exp(0.5 * (a + b));
  return {k, f(k)};
}

bool three_point_negative(const MMKernel& K, double kappa) {
  const double d = 1e-6;
  return K.negative_at(kappa * (1 - d)) && K.negative_at(kappa) && K.negative_at(kappa * (1 + d));
}

}  // namespace

MMEval mm_eval(const MMData& data, const DeletionSet& del, double r, double kappa) {
  if (!(kappa > 0)) throw DomainError("kappa must be positive");
  MMKernel K(data, del, r);
  MMEval e;
  e.kappa = kappa;
  e.x = data.concentration().array() / (kappa + data.concentration().array());
  Sums s = K.sums(kappa);
  e.a_val = K.A(s);
  e.b_val = K.B(s);
  e.c_val = K.C();
  e.leverage = MMKernel::lev(s);
  e.g_val = MMKernel::g(s);
  if (e.a_val != 0) e.rss_star = K.rss(s);
  return e;
}

KappaScan scan_kappa(const MMData& data, const DeletionSet& del, double r, double kmin,
                     double kmax, int grid_size) {
  if (grid_size < 16) throw ConfigError("kappa grid_size must be at least 16");
  if (!(kmin > 0 && kmin < kmax)) throw ConfigError("kappa bracket requires 0 < kmin < kmax");
  MMKernel K(data, del, r);
  KappaScan out;
  out.r = r;
  out.c_val = K.C();
  out.asymptotic_coefficient = K.A(K.at_infinity());

  const int G = grid_size;
  out.grid.resize(G);
  std::vector<Sums> S(G);
  std::vector<double> L(G), Gv(G), R(G);
  std::vector<char> neg(G), apos(G);
  const double l0 = std::log(kmin), l1 = std::log(kmax);
  for (int j = 0; j < G; ++j) {
    double k = std::exp(l0 + (l1 - l0) * j / (G - 1));
    out.grid[j] = k;
    S[j] = K.sums(k);
    L[j] = MMKernel::lev(S[j]);
    Gv[j] = MMKernel::g(S[j]);
    apos[j] = K.A(S[j]) > 0;
    R[j] = apos[j] ? K.rss(S[j]) : kNaN;
    neg[j] = K.negative(S[j]);
  }

  auto lev_at = [&](double k) { return MMKernel::lev(K.sums(k)); };
  auto g_at = [&](double k) { return MMKernel::g(K.sums(k)); };
  auto rss_at = [&](double k) {
    Sums s = K.sums(k);
    return K.A(s) > 0 ? K.rss(s) : kInf;
  };

  // Extremum over grid + refinement of each interior local extremum.
  auto extremum = [&](const std::vector<double>& vals, bool maximize, const std::string& name,
                      const std::function<double(double)>& f) {
    KappaExtremum best{maximize ? -kInf : kInf, 0};
    auto better = [&](double a, double b) { return maximize ? a > b : a < b; };
    for (int j = 0; j < G; ++j) {
      if (std::isnan(vals[j])) continue;
      if (better(vals[j], best.value)) best = {vals[j], out.grid[j]};
      if (j == 0 || j == G - 1 || std::isnan(vals[j - 1]) || std::isnan(vals[j + 1])) continue;
      if (better(vals[j - 1], vals[j]) || better(vals[j + 1], vals[j])) continue;
      auto obj = [&](double k) { return maximize ? -f(k) : f(k); };
      auto [k, v] = golden_min(obj, out.grid[j - 1], out.grid[j + 1]);
      double val = maximize ? -v : v;
      out.refinements.push_back({name, out.grid[j - 1], out.grid[j + 1], k, val});
      if (better(val, best.value)) best = {val, k};
    }
    return best;
  };

  out.sup_leverage = extremum(L, true, "leverage", lev_at);
  out.sup_g = extremum(Gv, true, "g", g_at);
  out.inf_g = extremum(Gv, false, "g", g_at);
  out.inf_rss_star = extremum(R, false, "rss_star", rss_at);
  out.rss_defined = std::isfinite(out.inf_rss_star.value);

  // Endpoint limits.
  const Sums& s0 = K.at_zero();
  const Sums& si = K.at_infinity();
  for (auto [s, k] : {std::pair<const Sums&, double>{s0, 0.0}, {si, kInf}}) {
    double l = MMKernel::lev(s), g = MMKernel::g(s);
    if (l > out.sup_leverage.value) out.sup_leverage = {l, k};
    if (!std::isnan(g)) {
      if (g > out.sup_g.value) out.sup_g = {g, k};
      if (g < out.inf_g.value) out.inf_g = {g, k};
    }
    if (K.A(s) > 0) {
      double rs = K.rss(s);
      out.rss_defined = true;
      if (rs < out.inf_rss_star.value) out.inf_rss_star = {rs, k};
    }
  }

  // Negative region of the quadratic in m: grid runs, three-point rule, endpoints.
  for (int j = 0; j < G; ++j) {
    if (!neg[j]) continue;
    int e = j;
    while (e + 1 < G && neg[e + 1]) ++e;
    out.sign_change_intervals.push_back({out.grid[j], out.grid[e]});
    j = e;
  }
  bool nn = false;
  for (int j = 0; j < G && !nn; ++j)
    if (neg[j] && three_point_negative(K, out.grid[j])) nn = true;
  for (const auto& ref : out.refinements)
    if (!nn && ref.kappa > 0 && std::isfinite(ref.kappa) && three_point_negative(K, ref.kappa))
      nn = true;
  if (K.negative(si)) {
    nn = true;
    out.sign_change_intervals.push_back({kmax, kInf});
  }
  if (K.negative(s0)) {
    nn = true;
    out.sign_change_intervals.insert(out.sign_change_intervals.begin(), {0.0, kmin});
  }
  out.negative_set_non_negligible = nn;
  return out;
}

KappaScan scan_kappa(const MMData& data, const DeletionSet& del, double r, int grid_size) {
  const auto& c = data.concentration();
  return scan_kappa(data, del, r, 1e-4 * c.minCoeff(), 1e4 * c.maxCoeff(), grid_size);
}

MomentVerdict theorem41_verdict(const MMData& data, const DeletionSet& del, double r,
                                const KappaScan& scan) {
  if (del.empty()) return MomentVerdict::finite("empty deletion: weight is constant");
  const int n = data.n(), I = del.cardinality();
  if (n <= r * I + 1) return MomentVerdict::infinite("(f) n <= rI + 1");
  if (scan.negative_set_non_negligible)
    return MomentVerdict::infinite("(e) quadratic in m negative on a kappa interval");
  const bool a_ok = scan.sup_leverage.value < 1.0 / r;
  const bool c_ok = scan.rss_defined && scan.inf_rss_star.value > 0;
  const bool d_ok = scan.c_val > 0 && scan.inf_g.value > 1.0 / r;
  if (a_ok && (c_ok || d_ok))
    return MomentVerdict::finite(c_ok ? "(a), (b), (c) hold" : "(a), (b), (d) hold");
  std::string why;
  if (!a_ok) why = "leverage: sup l = " + fmt(scan.sup_leverage.value) + " not below 1/r";
  else why = "residual: inf RSS* = " + fmt(scan.inf_rss_star.value) + " and (d) fails";
  return MomentVerdict::boundary(why);
}

MomentIndexReport moment_index_mm(const MMData& data, const DeletionSet& del,
                                  const MMScanParams& params) {
  MomentIndexReport rep;
  if (del.empty()) {
    rep.note = "empty deletion set";
    return rep;
  }
  const auto& c = data.concentration();
  const double kmin = params.kmin_factor * c.minCoeff();
  const double kmax = params.kmax_factor * c.maxCoeff();
  auto scan = [&](double r) { return scan_kappa(data, del, r, kmin, kmax, params.grid_size); };

  const int n = data.n(), I = del.cardinality();
  // The leverage function does not depend on r.
  const KappaScan base = scan(2.0);
  const double sup_l = base.sup_leverage.value;
  rep.r_a = sup_l > 0 ? 1.0 / sup_l : kInf;
  rep.r_b = static_cast<double>(n - 1) / I;

  auto residual_ok = [&](double r) {
    KappaScan s = scan(r);
    return (s.rss_defined && s.inf_rss_star.value > 0) ||
           (s.c_val > 0 && s.inf_g.value > 1.0 / r);
  };
  const double hi0 = rep.r_a - 1e-9;
  if (hi0 <= 1.0 || !residual_ok(1.0 + 1e-12)) {
    rep.r_c = std::min(1.0, rep.r_a);
    rep.note = "residual condition fails immediately above r = 1";
  } else if (residual_ok(hi0)) {
    rep.r_c = rep.r_a;
  } else {
    double lo = 1.0, hi = hi0;
    for (int it = 0; it < 200 && hi - lo >= 1e-10; ++it) {
      double mid = 0.5 * (lo + hi);
      (residual_ok(mid) ? lo : hi) = mid;
    }
    rep.r_c = 0.5 * (lo + hi);
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

}  // namespace influence_gate
