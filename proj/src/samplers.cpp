#include "influence_gate/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

namespace influence_gate {

namespace {

using Rng = std::mt19937_64;

Eigen::VectorXd standard_normal(Rng& rng, Eigen::Index d) {
  std::normal_distribution<double> z;
  Eigen::VectorXd out(d);
  for (Eigen::Index j = 0; j < d; ++j) out(j) = z(rng);
  return out;
}

// 1 / Gamma(shape, rate)
double inverse_gamma(Rng& rng, double shape, double rate) {
  std::gamma_distribution<double> g(shape, 1.0 / rate);
  return 1.0 / g(rng);
}

double softplus(double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

std::vector<std::string> linear_columns(int k) {
  std::vector<std::string> cols;
  for (int j = 0; j < k; ++j) cols.push_back("theta" + std::to_string(j + 1));
  cols.push_back("sigma2");
  return cols;
}

int total_iterations(const SamplerConfig& cfg) { return cfg.burn_in + cfg.draws * cfg.thin; }

}  // namespace

void validate(const SamplerConfig& cfg) {
  if (cfg.draws < 1) throw ConfigError("sampler.draws must be at least 1");
  if (cfg.thin < 1) throw ConfigError("sampler.thin must be at least 1");
  if (cfg.burn_in < 0) throw ConfigError("sampler.burn_in must be nonnegative");
  if (cfg.warmup < 0) throw ConfigError("sampler.warmup must be nonnegative");
  for (double s : cfg.proposal_scale)
    if (!(s > 0)) throw ConfigError("sampler.proposal_scale entries must be positive");
}

Draws random_walk_metropolis(const LogTarget& log_target, const Eigen::VectorXd& init,
                             const Eigen::VectorXd& init_scale, const SamplerConfig& cfg,
                             std::vector<std::string> columns) {
  validate(cfg);
  const Eigen::Index d = init.size();
  if (init_scale.size() != d) throw ConfigError("proposal scale length does not match the target");
  Rng rng(cfg.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Eigen::VectorXd x = init;
  double lp = log_target(x);
  if (!std::isfinite(lp)) throw SamplerError("initial point has zero target density");
  Eigen::VectorXd scale = init_scale;
  int rejected_run = 0;

  auto step = [&]() -> bool {
    Eigen::VectorXd y = x + scale.cwiseProduct(standard_normal(rng, d));
    double ly = log_target(y);
    bool accept = std::isfinite(ly) && std::log(unif(rng)) < ly - lp;
    if (accept) {
      x = std::move(y);
      lp = ly;
      rejected_run = 0;
    } else if (++rejected_run >= kMaxConsecutiveRejections) {
      throw SamplerError("no accepted proposal in " + std::to_string(kMaxConsecutiveRejections) +
                         " consecutive steps; proposal scale needs tuning");
    }
    return accept;
  };

  if (cfg.adapt && cfg.warmup > 0) {
    // First half: global factor toward 0.3 acceptance. Then per-coordinate
    // scales from the warm-up spread, followed by another global retune.
    const int block = 100;
    int half = cfg.warmup / 2;
    Eigen::MatrixXd trace(half, d);
    for (int it = 0, acc = 0; it < half; ++it) {
      acc += step();
      trace.row(it) = x.transpose();
      if ((it + 1) % block == 0) {
        double rate = double(acc) / block;
        scale *= rate < 0.2 ? 0.6 : rate > 0.4 ? 1.6 : 1.0;
        acc = 0;
      }
    }
    if (half > 1) {
      Eigen::RowVectorXd mu = trace.colwise().mean();
      Eigen::VectorXd sd =
          ((trace.rowwise() - mu).array().square().colwise().sum() / double(half - 1)).sqrt();
      for (Eigen::Index j = 0; j < d; ++j)
        if (sd(j) > 0 && std::isfinite(sd(j))) scale(j) = 2.38 / std::sqrt(double(d)) * sd(j);
    }
    for (int it = 0, acc = 0; it < cfg.warmup - half; ++it) {
      acc += step();
      if ((it + 1) % block == 0) {
        double rate = double(acc) / block;
        scale *= rate < 0.2 ? 0.8 : rate > 0.4 ? 1.25 : 1.0;
        acc = 0;
      }
    }
  }

  Draws out;
  out.columns = std::move(columns);
  out.values.resize(cfg.draws, d);
  long accepted = 0, proposed = 0;
  for (int it = 0, kept = 0; it < total_iterations(cfg); ++it) {
    accepted += step();
    ++proposed;
    if (it >= cfg.burn_in && (it - cfg.burn_in + 1) % cfg.thin == 0)
      out.values.row(kept++) = x.transpose();
  }
  out.acceptance_rate = double(accepted) / double(proposed);
  out.proposal_scale.assign(scale.data(), scale.data() + d);
  return out;
}

Draws sample_linear_noninformative(const RegressionData& data, const SamplerConfig& cfg) {
  validate(cfg);
  const int n = data.n(), k = data.k();
  if (n <= k) throw ConfigError("noninformative sampler needs n > k");
  const Eigen::MatrixXd& X = data.design();
  Eigen::LLT<Eigen::MatrixXd> llt(X.transpose() * X);
  Eigen::VectorXd theta_hat = llt.solve(X.transpose() * data.response());
  double rss = (data.response() - X * theta_hat).squaredNorm();
  if (!(rss > 0)) throw DomainError("zero residual sum of squares: posterior is improper");
  Eigen::MatrixXd LT = llt.matrixU();

  Rng rng(cfg.seed);
  Draws out;
  out.columns = linear_columns(k);
  out.values.resize(cfg.draws, k + 1);
  for (int m = 0; m < cfg.draws; ++m) {
    double s2 = inverse_gamma(rng, 0.5 * (n - k), 0.5 * rss);
    Eigen::VectorXd z = standard_normal(rng, k);
    Eigen::VectorXd th = theta_hat + std::sqrt(s2) * LT.triangularView<Eigen::Upper>().solve(z);
    out.values.row(m).head(k) = th.transpose();
    out.values(m, k) = s2;
  }
  return out;
}

Draws sample_linear_conjugate(const RegressionData& data, const SamplerConfig& cfg,
                              const ConjugatePrior& prior) {
  validate(cfg);
  const auto* normal = std::get_if<theta_prior::Normal>(&prior.theta);
  if (!normal) throw ConfigError("conjugate Gibbs sampler needs a normal theta prior");
  validate(prior.theta);
  if (!(prior.alpha > 0) || !(prior.beta > 0))
    throw ConfigError("inverse-gamma parameters must be positive");
  const int n = data.n(), k = data.k();
  const Eigen::MatrixXd& X = data.design();
  const Eigen::VectorXd& y = data.response();
  Eigen::MatrixXd prior_prec = normal->covariance.inverse();
  Eigen::VectorXd prior_lin = prior_prec * normal->mean;
  Eigen::MatrixXd XtX = X.transpose() * X;
  Eigen::VectorXd Xty = X.transpose() * y;

  Rng rng(cfg.seed);
  Eigen::VectorXd theta = Eigen::LLT<Eigen::MatrixXd>(XtX + prior_prec).solve(Xty + prior_lin);
  Draws out;
  out.columns = linear_columns(k);
  out.values.resize(cfg.draws, k + 1);
  for (int it = 0, kept = 0; it < total_iterations(cfg); ++it) {
    double rss = (y - X * theta).squaredNorm();
    double s2 = inverse_gamma(rng, prior.alpha + 0.5 * n, 1.0 / prior.beta + 0.5 * rss);
    Eigen::MatrixXd P = prior_prec + XtX / s2;
    Eigen::LLT<Eigen::MatrixXd> llt(P);
    Eigen::VectorXd mean = llt.solve(prior_lin + Xty / s2);
    Eigen::MatrixXd U = llt.matrixU();
    theta = mean + U.triangularView<Eigen::Upper>().solve(standard_normal(rng, k));
    if (it >= cfg.burn_in && (it - cfg.burn_in + 1) % cfg.thin == 0) {
      out.values.row(kept).head(k) = theta.transpose();
      out.values(kept, k) = s2;
      ++kept;
    }
  }
  return out;
}

Draws sample_mm(const MMData& data, const SamplerConfig& cfg, const HalfTPrior& kappa_prior) {
  const int n = data.n();
  if (n < 3) throw ConfigError("mm sampler needs at least 3 observations");
  if (!(kappa_prior.dof > 0) || !(kappa_prior.scale > 0))
    throw ConfigError("half-t prior needs positive dof and scale");
  const Eigen::VectorXd& c = data.concentration();
  const Eigen::VectorXd& v = data.velocity();

  // Sampling coordinates (m, log sigma2, log kappa).
  auto log_target = [&](const Eigen::VectorXd& s) {
    double m = s(0), ls2 = s(1), lk = s(2);
    if (!(m > 0)) return -std::numeric_limits<double>::infinity();
    double s2 = std::exp(ls2), kappa = std::exp(lk);
    double ss = 0;
    for (int i = 0; i < n; ++i) {
      double e = v(i) - m * c(i) / (kappa + c(i));
      ss += e * e;
    }
    double t = kappa / kappa_prior.scale;
    double log_kappa_prior = -0.5 * (kappa_prior.dof + 1) * std::log1p(t * t / kappa_prior.dof);
    // likelihood, 1/sigma2 prior, half-t prior, Jacobians sigma2 and kappa
    return -0.5 * n * ls2 - ss / (2 * s2) - ls2 + log_kappa_prior + ls2 + lk;
  };

  std::vector<double> cs(c.data(), c.data() + n);
  std::nth_element(cs.begin(), cs.begin() + n / 2, cs.end());
  double kappa0 = cs[n / 2];
  Eigen::VectorXd x = c.array() / (kappa0 + c.array());
  double m0 = x.dot(v) / x.squaredNorm();
  if (!(m0 > 0)) m0 = v.cwiseAbs().maxCoeff() + 1.0;
  double s20 = std::max((v - m0 * x).squaredNorm() / (n - 1), 1e-8 * v.squaredNorm() / n + 1e-300);

  Eigen::Vector3d init(m0, std::log(s20), std::log(kappa0));
  Eigen::Vector3d scale(0.05 * m0, 0.3, 0.3);
  if (!cfg.proposal_scale.empty()) {
    if (cfg.proposal_scale.size() != 3) throw ConfigError("mm proposal_scale needs 3 entries");
    scale = Eigen::Vector3d(cfg.proposal_scale[0], cfg.proposal_scale[1], cfg.proposal_scale[2]);
  }
  Draws d = random_walk_metropolis(log_target, init, scale, cfg, {"m", "sigma2", "kappa"});
  d.values.col(1) = d.values.col(1).array().exp();
  d.values.col(2) = d.values.col(2).array().exp();
  return d;
}

Draws sample_logit(const LogitData& data, const SamplerConfig& cfg, const ThetaPriorSpec& prior) {
  validate(prior);
  if (!is_proper(prior)) throw ConfigError("logit sampler needs a proper prior");
  const int k = data.k();
  const Eigen::MatrixXd& X = data.design();
  const Eigen::VectorXd& y = data.outcome();
  auto log_target = [&](const Eigen::VectorXd& b) {
    double ll = 0;
    Eigen::VectorXd eta = X * b;
    for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y(i) * eta(i) - softplus(eta(i));
    return ll + log_density(prior, b);
  };
  Eigen::VectorXd init = Eigen::VectorXd::Zero(k);
  if (const auto* bu = std::get_if<theta_prior::BoundedUniform>(&prior))
    init = 0.5 * (bu->lower + bu->upper);
  Eigen::VectorXd scale = Eigen::VectorXd::Constant(k, 0.5 / std::sqrt(double(k)));
  if (!cfg.proposal_scale.empty()) {
    if (static_cast<int>(cfg.proposal_scale.size()) != k)
      throw ConfigError("logit proposal_scale needs one entry per coefficient");
    scale = Eigen::Map<const Eigen::VectorXd>(cfg.proposal_scale.data(), k);
  }
  std::vector<std::string> cols;
  for (int j = 0; j < k; ++j) cols.push_back("beta" + std::to_string(j + 1));
  return random_walk_metropolis(log_target, init, scale, cfg, std::move(cols));
}

Draws run_chains(const std::function<Draws(const SamplerConfig&)>& sampler,
                 const SamplerConfig& cfg, int chains, int max_threads) {
  if (chains < 1) throw ConfigError("sampler.chains must be at least 1");
  std::vector<Draws> parts(chains);
  std::vector<std::exception_ptr> errors(chains);
  int workers = std::max(1, std::min(chains, max_threads));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int ch = w; ch < chains; ch += workers) {
        try {
          SamplerConfig c = cfg;
          c.seed = cfg.seed + static_cast<std::uint64_t>(ch);
          parts[ch] = sampler(c);
        } catch (...) {
          errors[ch] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  Draws out;
  out.columns = parts[0].columns;
  Eigen::Index rows = 0;
  for (const auto& p : parts) rows += p.values.rows();
  out.values.resize(rows, parts[0].values.cols());
  double acc = 0;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.values.middleRows(at, p.values.rows()) = p.values;
    at += p.values.rows();
    acc += p.acceptance_rate;
  }
  out.acceptance_rate = acc / chains;
  out.proposal_scale = parts[0].proposal_scale;
  return out;
}

void write_draws_csv(const std::string& path, const Draws& draws) {
  std::vector<std::vector<double>> cols(draws.values.cols());
  for (Eigen::Index j = 0; j < draws.values.cols(); ++j)
    cols[j].assign(draws.values.col(j).data(), draws.values.col(j).data() + draws.values.rows());
  write_numeric_csv(path, draws.columns, cols);
}

}  // namespace influence_gate
