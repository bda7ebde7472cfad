#pragma once

#include "influence_gate/core_model.hpp"
#include "influence_gate/linear_gate.hpp"
#include "influence_gate/prior_tails.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace influence_gate {

struct SamplerConfig {
  std::uint64_t seed = 1;
  int draws = 10000;
  int burn_in = 1000;
  int thin = 1;
  // MH only. Empty: model defaults. With adapt these seed the warm-up.
  std::vector<double> proposal_scale;
  bool adapt = true;
  int warmup = 4000;  // adaptive iterations, discarded before burn_in
};

void validate(const SamplerConfig& cfg);

struct Draws {
  Eigen::MatrixXd values;  // one row per retained draw
  std::vector<std::string> columns;
  double acceptance_rate = 1.0;       // 1 for exact samplers
  std::vector<double> proposal_scale;  // frozen MH scales
};

using LogTarget = std::function<double(const Eigen::VectorXd&)>;

inline constexpr int kMaxConsecutiveRejections = 10000;

// Random-walk Metropolis with independent normal increments. Returns draws in
// the sampling coordinates. Throws SamplerError after kMaxConsecutiveRejections
// proposals without an acceptance.
Draws random_walk_metropolis(const LogTarget& log_target, const Eigen::VectorXd& init,
                             const Eigen::VectorXd& init_scale, const SamplerConfig& cfg,
                             std::vector<std::string> columns);

// Layout (theta_1..theta_k, sigma2).
Draws sample_linear_noninformative(const RegressionData& data, const SamplerConfig& cfg);
// Gibbs with exact conditionals; the theta prior must be Normal.
Draws sample_linear_conjugate(const RegressionData& data, const SamplerConfig& cfg,
                              const ConjugatePrior& prior);

// t prior restricted to [0, inf) on kappa.
struct HalfTPrior {
  double dof = 3;
  double scale = 1;
};

// Layout (m, sigma2, kappa); prior 1/sigma2 on (m > 0, sigma2), half-t on kappa.
Draws sample_mm(const MMData& data, const SamplerConfig& cfg, const HalfTPrior& kappa_prior = {});

// Layout (beta_1..beta_k).
Draws sample_logit(const LogitData& data, const SamplerConfig& cfg, const ThetaPriorSpec& prior);

// Independent chains with seeds seed + chain; rows concatenated in chain order.
Draws run_chains(const std::function<Draws(const SamplerConfig&)>& sampler,
                 const SamplerConfig& cfg, int chains, int max_threads);

void write_draws_csv(const std::string& path, const Draws& draws);

}  // namespace influence_gate
