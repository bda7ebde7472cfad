#include "influence_gate/is_engine.hpp"
#include "influence_gate/mm_gate.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace influence_gate;

namespace {

GateInputs gate_with(double r_star) {
  GateInputs g;
  g.report.r_star = r_star;
  return g;
}

// Standard normal draws with log weight a x: the tilted target is N(a, 1).
WeightedSample tilted(double a, int M, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  WeightedSample s;
  s.draws.resize(M, 1);
  s.log_weights.resize(M);
  for (int m = 0; m < M; ++m) {
    s.draws(m, 0) = z(rng);
    s.log_weights(m) = a * s.draws(m, 0);
  }
  return s;
}

}  // namespace

TEST_SUITE("is_engine") {
  TEST_CASE("self-normalized two-point estimate") {
    WeightedSample s;
    s.draws = Eigen::MatrixXd::Zero(2, 1);
    s.log_weights = Eigen::Vector2d(0, std::log(3.0));
    CHECK(self_normalized_estimate(s, Eigen::Vector2d(1, 5)) == doctest::Approx(4.0).epsilon(1e-15));
  }

  TEST_CASE("shifting every log weight leaves the estimate bit-identical") {
    std::mt19937_64 rng(41);
    std::uniform_int_distribution<int> k(-20, 20);
    std::uniform_real_distribution<double> u(-3, 3);
    WeightedSample s;
    s.draws = Eigen::MatrixXd::Zero(64, 1);
    s.log_weights.resize(64);
    Eigen::VectorXd g(64);
    for (int m = 0; m < 64; ++m) {
      s.log_weights(m) = k(rng);
      g(m) = u(rng);
    }
    double ref = self_normalized_estimate(s, g);
    for (double c : {-700.0, -3.0, 5.0, 900.0}) {
      WeightedSample t = s;
      t.log_weights.array() += c;
      CHECK(self_normalized_estimate(t, g) == ref);
    }
  }

  TEST_CASE("empty deletion: plain mean and zero discrepancies") {
    std::mt19937_64 rng(42);
    auto d = test_support::random_regression(rng, 12, 2);
    Eigen::MatrixXd draws(50, 3);
    std::normal_distribution<double> z;
    for (int m = 0; m < 50; ++m) draws.row(m) << z(rng), z(rng), 0.5 + std::abs(z(rng));
    auto s = make_weighted_sample(d, DeletionSet{}, draws);
    CHECK(s.log_weights.isZero(0));
    Eigen::VectorXd g = draws.col(0);
    CHECK(self_normalized_estimate(s, g) == doctest::Approx(g.mean()).epsilon(1e-14));
    auto gate = gate_with(INFINITY);
    CHECK(estimate_measure(s, Measure::KL, {}, gate).value == 0.0);
    CHECK(estimate_measure(s, Measure::ChiSq, {}, gate).value == 0.0);
    CHECK(estimate_measure(s, Measure::Hellinger, {}, gate).value == 0.0);

    MMData mm = test_support::puromycin();
    Eigen::VectorXd p(3);
    p << 200, 100, 0.1;
    CHECK(log_weight(mm, DeletionSet{}, p) == 0.0);
    LogitData lg(d.design(), Eigen::VectorXd::Zero(12));
    CHECK(log_weight(lg, DeletionSet{}, Eigen::Vector2d(1, -1)) == 0.0);
  }

  TEST_CASE("weight formulas") {
    // zero residual at the draw: (1/2) log sigma^2
    Eigen::MatrixXd X(3, 1);
    X << 1, 2, 3;
    RegressionData d(X, Eigen::Vector3d(2, 4, 7));
    Eigen::VectorXd s(2);
    s << 2.0, 0.7;
    CHECK(log_weight(d, deletion_set({1}, 3), s) == doctest::Approx(0.5 * std::log(0.7)).epsilon(1e-15));
    s(1) = 0;
    CHECK_THROWS_AS(log_weight(d, deletion_set({1}, 3), s), DomainError);

    std::mt19937_64 rng(43);
    std::normal_distribution<double> z;
    Eigen::MatrixXd Xl(10, 2);
    Eigen::VectorXd yl(10);
    for (int i = 0; i < 10; ++i) {
      Xl.row(i) << 1, z(rng);
      yl(i) = i % 2;
    }
    LogitData lg(Xl, yl);
    for (int t = 0; t < 200; ++t) {
      Eigen::Vector2d b(10 * z(rng), 10 * z(rng));
      CHECK(log_weight(lg, deletion_set({t % 10, (t + 3) % 10}, 10), b) >= 0.0);
    }
    CHECK_THROWS_AS(log_weight(ModelKind::MM, Eigen::Vector2d(1, 1), Dataset{lg}, DeletionSet{}), ConfigError);
  }

  TEST_CASE("CPO is the harmonic mean of the deleted-case likelihood") {
    std::mt19937_64 rng(44);
    auto d = test_support::random_regression(rng, 8, 2);
    auto del = deletion_set({3}, 8);
    Eigen::MatrixXd draws(10, 3);
    std::normal_distribution<double> z;
    double inv_sum = 0;
    Eigen::VectorXd lil(10);
    for (int m = 0; m < 10; ++m) {
      draws.row(m) << 1 + 0.3 * z(rng), 1 + 0.3 * z(rng), 1.5 + 0.2 * std::abs(z(rng));
      Eigen::VectorXd s = draws.row(m).transpose();
      double mu = d.design().row(3).dot(s.head(2)), s2 = s(2);
      double lik = std::exp(-std::pow(d.response()(3) - mu, 2) / (2 * s2)) / std::sqrt(2 * std::numbers::pi * s2);
      inv_sum += 1 / lik;
      lil(m) = log_inverse_likelihood(Dataset{d}, del, s);
      CHECK(lil(m) == doctest::Approx(-std::log(lik)).epsilon(1e-12));
    }
    auto s = make_weighted_sample(d, del, draws);
    MeasureAux aux;
    aux.log_inverse_likelihood = lil;
    auto e = estimate_measure(s, Measure::CPO, aux, gate_with(10));
    CHECK(e.value == doctest::Approx(10 / inv_sum).epsilon(1e-12));
  }

  TEST_CASE("estimators recover a tilted normal") {
    const double a = 0.5;
    auto s = tilted(a, 200000, 45);
    auto gate = gate_with(INFINITY);
    auto check = [&](Measure m, double truth, const MeasureAux& aux = {}) {
      auto e = estimate_measure(s, m, aux, gate);
      REQUIRE(e.standard_error.has_value());
      CHECK(std::abs(e.value - truth) < 4 * *e.standard_error + 1e-12);
      CHECK(*e.standard_error < 0.05);
    };
    check(Measure::KL, -a * a / 2);
    check(Measure::ChiSq, std::expm1(a * a));
    check(Measure::Hellinger, 2 - 2 * std::exp(-a * a / 8));
    MeasureAux d1;
    d1.values = s.draws.col(0);
    d1.coordinate = 0;
    check(Measure::Delta1, a, d1);
    check(Measure::Delta2, a * a, d1);
    MeasureAux bdd;
    bdd.values = (s.draws.col(0).array() > 0).cast<double>().matrix();
    check(Measure::Bdd, 0.5 * std::erfc(-a / std::sqrt(2.0)), bdd);
  }

  TEST_CASE("L1 and L2 need a normalizing constant") {
    auto s = tilted(0.3, 100, 46);
    CHECK_THROWS_AS(estimate_measure(s, Measure::L1, {}, gate_with(10)), ConfigError);
    MeasureAux aux;
    aux.log_c_hat = 0.0;
    aux.log_q = Eigen::VectorXd::Zero(100);
    auto e1 = estimate_measure(s, Measure::L1, aux, gate_with(10));
    auto e2 = estimate_measure(s, Measure::L2, aux, gate_with(10));
    Eigen::ArrayXd u = s.log_weights.array().exp();
    Eigen::ArrayXd ratio = u / u.mean();
    CHECK(e1.value == doctest::Approx((ratio * (ratio - 1).abs()).mean()).epsilon(1e-10));
    CHECK(e2.value == doctest::Approx(((ratio - 1).square() * ratio).mean()).epsilon(1e-10));
    CHECK_THROWS_AS(estimate_measure(s, Measure::Delta1, {}, gate_with(10)), ConfigError);
  }

  TEST_CASE("moment requirements gate the standard error") {
    auto s = tilted(0.3, 2000, 47);
    auto chi = estimate_measure(s, Measure::ChiSq, {}, gate_with(3.0));
    CHECK_FALSE(chi.gate.passed);
    CHECK_FALSE(chi.standard_error.has_value());
    CHECK(chi.gate.required_moments == 4);
    auto kl = estimate_measure(s, Measure::KL, {}, gate_with(3.0));
    CHECK(kl.gate.passed);
    CHECK(kl.standard_error.has_value());
    CHECK_FALSE(gate_for(Measure::KL, gate_with(2.0 + 1e-7)).passed);
    CHECK(gate_for(Measure::Hellinger, gate_with(2.0 + 1e-7)).passed);
    CHECK_FALSE(gate_for(Measure::Hellinger, gate_with(2.0)).passed);

    GateInputs adj = gate_with(5.0);
    adj.adjusted_prior_ok = false;
    CHECK_FALSE(gate_for(Measure::Delta2, adj).passed);
    CHECK(gate_for(Measure::KL, adj).passed);
    adj.adjusted_prior_ok = true;
    adj.adjusted_r_star = 3.0;
    CHECK(gate_for(Measure::L1, adj).passed);
    CHECK_FALSE(gate_for(Measure::L2, adj).passed);
  }

  TEST_CASE("puromycin case 9 gates") {
    auto d = test_support::puromycin();
    auto rep = moment_index_mm(d, deletion_set({8}, 11));
    CHECK(std::abs(rep.r_star - 3.77) <= 0.02);
    GateInputs g;
    g.report = rep;
    CHECK_FALSE(gate_for(Measure::ChiSq, g).passed);
    CHECK(gate_for(Measure::KL, g).passed);
    CHECK(gate_for(Measure::Hellinger, g).passed);
  }

  TEST_CASE("adjusted prior rules") {
    Eigen::MatrixXd I2 = Eigen::MatrixXd::Identity(2, 2);
    Eigen::VectorXd z2 = Eigen::VectorXd::Zero(2);
    std::vector<ThetaPriorSpec> normals{theta_prior::Normal{z2, I2}, theta_prior::Normal{z2, 4 * I2}};
    std::vector<ThetaPriorSpec> t5{theta_prior::StudentT{5, z2, I2}, theta_prior::StudentT{5, z2, 2 * I2}};
    std::vector<ThetaPriorSpec> t4{theta_prior::StudentT{4, z2, I2}};
    CHECK(adjusted_prior_check(ModelKind::Linear, gspec::Polynomial{4}, normals));
    CHECK(adjusted_prior_check(ModelKind::Linear, gspec::Polynomial{4}, t5));
    CHECK_FALSE(adjusted_prior_check(ModelKind::Linear, gspec::Polynomial{4}, t4));
    CHECK(adjusted_prior_check(ModelKind::Linear, gspec::Bounded{}, t4));
    CHECK(adjusted_prior_check(ModelKind::Linear, gspec::Polynomial{2}, NoninformativeLinearPrior{20, 3, 1}));
    CHECK_FALSE(adjusted_prior_check(ModelKind::Linear, gspec::Polynomial{4}, NoninformativeLinearPrior{8, 3, 1}));
    CHECK(adjusted_prior_check(ModelKind::Logit, gspec::LikelihoodPower{2, false}, normals));
    CHECK_FALSE(adjusted_prior_check(ModelKind::Linear, gspec::LikelihoodPower{2, false}, normals));
    std::vector<ThetaPriorSpec> thick{theta_prior::Custom{{TailClass::Tag::Thick, {}}, true, true}};
    CHECK_THROWS_AS(adjusted_prior_check(ModelKind::Linear, gspec::Polynomial{2}, thick), ConfigError);
  }

  TEST_CASE("combined weight bound") {
    CHECK(combined_moment_bound(4, 4).bound == doctest::Approx(2));
    CHECK(combined_moment_bound(INFINITY, 3).bound == doctest::Approx(3));
    CHECK(combined_moment_bound(6, 3).bound == doctest::Approx(2));
    CHECK(std::isinf(combined_moment_bound(INFINITY, INFINITY).bound));
    std::mt19937_64 rng(48);
    std::uniform_real_distribution<double> u(0.5, 20);
    for (int t = 0; t < 100; ++t) {
      double a = u(rng), b = u(rng);
      CHECK(combined_moment_bound(a, b).bound <= std::min(a, b));
    }
    CHECK_THROWS_AS(combined_moment_bound(0, 2), DomainError);
  }

  TEST_CASE("bounding moment check") {
    CHECK(bounding_moment_check(ModelKind::Linear, gate_with(2.5)));
    CHECK_FALSE(bounding_moment_check(ModelKind::MM, gate_with(2.0)));
    CHECK(bounding_moment_check(ModelKind::Logit, gate_with(0), -0.3));
    CHECK_FALSE(bounding_moment_check(ModelKind::Logit, gate_with(100), 0.1));
    CHECK_FALSE(bounding_moment_check(ModelKind::Logit, gate_with(100)));
  }

  TEST_CASE("measure names round trip") {
    for (Measure m : {Measure::KL, Measure::L1, Measure::L2, Measure::Delta1, Measure::Delta2,
                      Measure::Hellinger, Measure::ChiSq, Measure::CPO, Measure::Bdd})
      CHECK(measure_from_string(to_string(m)) == m);
    CHECK_THROWS_AS(measure_from_string("kl"), ConfigError);
  }
}
