#include "influence_gate/tail_verifier.hpp"

#include "influence_gate/is_engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <thread>

namespace influence_gate {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> sorted_desc(const Eigen::VectorXd& lw) {
  std::vector<double> v(lw.data(), lw.data() + lw.size());
  std::sort(v.begin(), v.end(), std::greater<>());
  return v;
}

HillEstimate hill_sorted(const std::vector<double>& L, double top_fraction) {
  if (!(top_fraction > 0) || top_fraction > 0.2)
    throw ConfigError("top fraction must lie in (0, 0.2]");
  const int M = static_cast<int>(L.size());
  const int k = static_cast<int>(std::floor(top_fraction * M));
  if (k < kMinExceedances || k >= M)
    throw DomainError("Hill estimator needs at least " + std::to_string(kMinExceedances) +
                      " exceedances; got " + std::to_string(k));
  HillEstimate h;
  h.top_fraction = top_fraction;
  h.exceedances = k;
  h.threshold_log = L[k];
  double s = 0;
  for (int i = 0; i < k; ++i) s += L[i] - L[k];
  double mean_excess = s / k;
  h.degenerate = !(mean_excess > 0);
  h.estimate = h.degenerate ? kInf : 1.0 / mean_excess;
  return h;
}

}  // namespace

HillEstimate hill_tail_index(const Eigen::VectorXd& log_weights, double top_fraction) {
  return hill_sorted(sorted_desc(log_weights), top_fraction);
}

RegressionIndex regression_index(const Eigen::VectorXd& log_weights, double top_fraction) {
  std::vector<double> L = sorted_desc(log_weights);
  const int M = static_cast<int>(L.size());
  const int k = static_cast<int>(std::floor(top_fraction * M));
  const int lo = 10;
  if (k < 2 * lo) throw DomainError("too few order statistics for the survival regression");

  // Geometric ranks j (number of weights strictly above the j-th order statistic
  // is j - 1; P(W >= t_j) ~ j / M).
  std::vector<int> ranks;
  const int target = std::max(kMinRegressionPoints, 40);
  for (int p = 0; p < target; ++p) {
    double t = double(p) / (target - 1);
    int j = static_cast<int>(std::lround(lo * std::pow(double(k) / lo, t)));
    if (ranks.empty() || j != ranks.back()) ranks.push_back(j);
  }
  if (static_cast<int>(ranks.size()) < kMinRegressionPoints)
    throw DomainError("fewer than " + std::to_string(kMinRegressionPoints) + " regression points");

  RegressionIndex out;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int j : ranks) {
    double x = L[j - 1];
    double y = std::log(double(j) / M);
    out.points.push_back({x, j});
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  double n = static_cast<double>(ranks.size());
  double den = n * sxx - sx * sx;
  out.estimate = den > 0 ? -(n * sxy - sx * sy) / den : kInf;
  return out;
}

TailReport tail_report(const Eigen::VectorXd& log_weights, double analytic_r_star,
                       double top_fraction) {
  std::vector<double> L = sorted_desc(log_weights);
  TailReport rep;
  rep.analytic_r_star = analytic_r_star;
  rep.hill = hill_sorted(L, top_fraction);
  for (double f : {0.005, 0.01, 0.02}) {
    if (std::floor(f * L.size()) >= kMinExceedances) rep.sweep.push_back(hill_sorted(L, f));
  }
  rep.degenerate = rep.hill.degenerate;
  if (!rep.degenerate) {
    rep.regression = regression_index(log_weights, top_fraction);
    if (analytic_r_star <= kAgreementMaxIndex)
      rep.agreement =
          std::abs(rep.hill.estimate - analytic_r_star) / analytic_r_star < kAgreementTolerance;
  }
  return rep;
}

Draws draw_posterior(const ModelBundle& model, const SamplerConfig& cfg, int chains,
                     int max_threads) {
  std::function<Draws(const SamplerConfig&)> sampler = std::visit(
      [](const auto& b) -> std::function<Draws(const SamplerConfig&)> {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, LinearBundle>) {
          return [&b](const SamplerConfig& c) {
            if (const auto* cp = std::get_if<ConjugatePrior>(&b.prior))
              return sample_linear_conjugate(b.data, c, *cp);
            return sample_linear_noninformative(b.data, c);
          };
        } else if constexpr (std::is_same_v<T, MMBundle>) {
          return [&b](const SamplerConfig& c) { return sample_mm(b.data, c, b.kappa_prior); };
        } else {
          return [&b](const SamplerConfig& c) { return sample_logit(b.data, c, b.prior); };
        }
      },
      model);
  return run_chains(sampler, cfg, chains, max_threads);
}

TailReport verify_moment_index(const ModelBundle& model, const DeletionSet& del,
                               const MomentIndexReport& analytic, const VerifyConfig& cfg) {
  Draws d = draw_posterior(model, cfg.sampler, cfg.chains, cfg.max_threads);
  Dataset data = std::visit([](const auto& b) -> Dataset { return b.data; }, model);
  WeightedSample ws = make_weighted_sample(data, del, d.values);
  return tail_report(ws.log_weights, analytic.r_star, cfg.top_fraction);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over a simple combination
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (a + 1) + 0xbf58476d1ce4e5b9ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

ScalingReport clt_scaling_audit(const ScalingEstimator& estimator, const std::vector<int>& m_grid,
                                int replications, std::uint64_t seed, int max_threads) {
  if (m_grid.size() < 3) throw ConfigError("scaling audit needs at least 3 sample sizes");
  for (size_t i = 0; i < m_grid.size(); ++i) {
    if (m_grid[i] < 1) throw ConfigError("scaling sample sizes must be positive");
    if (i > 0 && m_grid[i] <= m_grid[i - 1])
      throw ConfigError("scaling sample sizes must be strictly increasing");
  }
  if (replications < 2) throw ConfigError("scaling audit needs at least 2 replications");

  const int G = static_cast<int>(m_grid.size());
  std::vector<double> values(static_cast<size_t>(G) * replications);
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(std::max(1, max_threads));
  auto work = [&](int w) {
    try {
      for (int t; (t = next.fetch_add(1)) < G * replications;) {
        int g = t / replications, r = t % replications;
        values[t] = estimator(m_grid[g], derive_seed(seed, g, r));
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  int workers = std::max(1, max_threads);
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(work, w);
  work(0);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  ScalingReport rep;
  rep.m_grid = m_grid;
  rep.replications = replications;
  for (int g = 0; g < G; ++g) {
    const double* v = &values[static_cast<size_t>(g) * replications];
    double mean = 0;
    for (int r = 0; r < replications; ++r) mean += v[r];
    mean /= replications;
    double ss = 0;
    for (int r = 0; r < replications; ++r) ss += (v[r] - mean) * (v[r] - mean);
    rep.variance_at_m.push_back(ss / (replications - 1));
  }
  bool all_positive = std::all_of(rep.variance_at_m.begin(), rep.variance_at_m.end(),
                                  [](double x) { return x > 0 && std::isfinite(x); });
  if (all_positive) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int g = 0; g < G; ++g) {
      double x = std::log(double(m_grid[g])), y = std::log(rep.variance_at_m[g]);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    rep.loglog_slope = (G * sxy - sx * sy) / (G * sxx - sx * sx);
  }
  return rep;
}

ScalingEstimator linear_weight_mean_estimator(const RegressionData& data, const DeletionSet& del) {
  return [data, del](int m, std::uint64_t seed) {
    SamplerConfig cfg;
    cfg.seed = seed;
    cfg.draws = m;
    Draws d = sample_linear_noninformative(data, cfg);
    double s = 0;
    for (int i = 0; i < m; ++i) s += std::exp(log_weight(data, del, d.values.row(i).transpose()));
    return s / m;
  };
}

}  // namespace influence_gate
