#include "influence_gate/logit_gate.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace influence_gate;

namespace {

LogitData two_point() {
  Eigen::MatrixXd X(2, 1);
  X << 1, 1;
  Eigen::VectorXd y(2);
  y << 1, 0;
  return {X, y};
}

LogitData random_logit(std::mt19937_64& rng, int n, int k) {
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u;
  Eigen::MatrixXd X(n, k);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = 1;
    for (int j = 1; j < k; ++j) X(i, j) = z(rng) * (j + 1);
    double eta = 0.3 + X.row(i).tail(k - 1).sum() * 0.5;
    y(i) = u(rng) < 1 / (1 + std::exp(-eta)) ? 1 : 0;
  }
  return {X, y};
}

Eigen::VectorXd random_l1_direction(std::mt19937_64& rng, int k) {
  std::exponential_distribution<double> e;
  std::bernoulli_distribution coin;
  Eigen::VectorXd b(k);
  for (int j = 0; j < k; ++j) b(j) = e(rng) * (coin(rng) ? 1 : -1);
  return b / b.cwiseAbs().sum();
}

// log of the logistic case-deleted weight: each factor (1 + e^s)/e^{s y} >= 1.
double logit_log_weight(const LogitData& d, const DeletionSet& del, const Eigen::VectorXd& beta) {
  double lw = 0;
  for (int i : del.indices()) {
    double s = d.design().row(i).dot(beta);
    lw += std::log1p(std::exp(s)) - s * d.outcome()(i);
  }
  return lw;
}

}  // namespace

TEST_SUITE("logit_gate") {
  TEST_CASE("criterion spot values") {
    Eigen::MatrixXd X(1, 1);
    X << 1;
    Eigen::VectorXd y(1);
    y << 1;
    LogitData one(X, y);
    CHECK(h_eval(one, DeletionSet{}, Eigen::VectorXd::Ones(1), 2.0, 1.0) == doctest::Approx(-1.0));

    auto d = two_point();
    auto del = deletion_set({0}, 2);
    Eigen::VectorXd neg = -Eigen::VectorXd::Ones(1);
    CHECK(h_eval(d, del, neg, 2.0, 0.5) == doctest::Approx(0.5));
    CHECK(h_eval(d, del, 2 * neg, 2.0, 0.5) == doctest::Approx(1.0));
    CHECK(h_eval(d, del, -neg, 2.0, 0.5) == doctest::Approx(-1.5));
    // ties contribute nothing
    CHECK(h_eval(d, del, Eigen::VectorXd::Zero(1), 2.0, 0.5) == 0.0);
  }

  TEST_CASE("two-point maximum, verdicts and index") {
    auto d = two_point();
    auto del = deletion_set({0}, 2);
    auto c = max_h_l1_sphere(d, del, 2.0, 0.5);
    CHECK(c.max_value == doctest::Approx(0.5));
    CHECK(c.argmax(0) == doctest::Approx(-1.0));
    CHECK(c.certificate.size() == 2);
    CHECK(theorem51_verdict(d, del, 2.0, 0.5).is(MomentVerdict::Tag::Infinite));
    CHECK(theorem51_verdict(d, del, 2.0, 2.0).is(MomentVerdict::Tag::Finite));
    CHECK(theorem51_verdict(d, del, 1.5, 0.5).is(MomentVerdict::Tag::Boundary));
    CHECK(theorem51_verdict(d, DeletionSet{}, 50.0, 0.0).is(MomentVerdict::Tag::Finite));

    auto rep = moment_index_logit(d, del, 0.5);
    CHECK(rep.r_star == doctest::Approx(1.5).epsilon(1e-10));
    CHECK(std::isinf(rep.r_a));
    CHECK(rep.binding == Binding::Criterion);
    auto capped = moment_index_logit(d, del, 100.0);
    CHECK(capped.capped);
    CHECK(capped.r_star == kLogitRCap);
    CHECK(std::isinf(moment_index_logit(d, DeletionSet{}, 0.5).r_star));
  }

  TEST_CASE("certificate entries lie on the sphere and reproduce h") {
    std::mt19937_64 rng(31);
    auto d = random_logit(rng, 25, 3);
    auto del = deletion_set({2, 9}, 25);
    auto c = max_h_l1_sphere(d, del, 2.0, 0.2);
    CHECK(std::abs(c.argmax.cwiseAbs().sum() - 1.0) < 1e-12);
    CHECK(std::abs(h_eval(d, del, c.argmax, 2.0, 0.2) - c.max_value) < 1e-10);
    for (const auto& cand : c.certificate) {
      CHECK(std::abs(cand.beta.cwiseAbs().sum() - 1.0) < 1e-12);
      CHECK(cand.value <= c.max_value + 1e-12);
    }
  }

  TEST_CASE("no random direction beats the vertex maximum") {
    std::mt19937_64 rng(32);
    auto d = random_logit(rng, 30, 3);
    for (const auto& idx : std::vector<std::vector<int>>{{}, {4}, {1, 7}}) {
      auto del = deletion_set(idx, 30);
      for (double eps : {0.0, 0.3}) {
        double mx = max_h_l1_sphere(d, del, 2.0, eps).max_value;
        double best = -INFINITY;
        for (int t = 0; t < 100000; ++t) best = std::max(best, h_eval(d, del, random_l1_direction(rng, 3), 2.0, eps));
        CHECK(best <= mx + 1e-9);
        CHECK(best >= mx - 0.05);
      }
    }
  }

  TEST_CASE("homogeneity and affine dependence on r") {
    std::mt19937_64 rng(33);
    auto d = random_logit(rng, 20, 3);
    auto del = deletion_set({0, 5}, 20);
    for (int t = 0; t < 50; ++t) {
      Eigen::VectorXd b = random_l1_direction(rng, 3);
      double h1 = h_eval(d, del, b, 2.0, 0.4);
      for (double c : {0.5, 2.0, 10.0}) CHECK(std::abs(h_eval(d, del, c * b, 2.0, 0.4) - c * h1) < 1e-10);
      double a = h_eval(d, del, b, 1.5, 0.4), m = h_eval(d, del, b, 2.0, 0.4), z = h_eval(d, del, b, 3.0, 0.4);
      CHECK(std::abs((m - a) / 0.5 - (z - m) / 1.0) < 1e-12);
    }
  }

  TEST_CASE("log weight is nonnegative") {
    std::mt19937_64 rng(34);
    std::normal_distribution<double> z;
    for (int t = 0; t < 200; ++t) {
      auto d = random_logit(rng, 12, 2);
      auto del = deletion_set({t % 12, (t * 7) % 12}, 12);
      Eigen::VectorXd b(2);
      b << 5 * z(rng), 5 * z(rng);
      CHECK(logit_log_weight(d, del, b) >= 0.0);
    }
  }

  TEST_CASE("verdicts are monotone in r and epsilon") {
    std::mt19937_64 rng(35);
    for (int t = 0; t < 10; ++t) {
      auto d = random_logit(rng, 20, 2);
      auto del = deletion_set({t}, 20);
      bool inf_seen = false;
      for (double r = 1.1; r < 20; r *= 1.3) {
        bool inf = theorem51_verdict(d, del, r, 0.1).is(MomentVerdict::Tag::Infinite);
        if (inf_seen) CHECK(inf);
        inf_seen |= inf;
      }
      bool fin_seen = false;
      for (double eps = 0; eps < 5; eps += 0.25) {
        bool fin = theorem51_verdict(d, del, 3.0, eps).is(MomentVerdict::Tag::Finite);
        if (fin_seen) CHECK(fin);
        fin_seen |= fin;
      }
    }
  }

  TEST_CASE("separable data without deletion has negative maximum for positive epsilon") {
    Eigen::MatrixXd X(6, 2);
    X << 1, -3, 1, -2, 1, -1, 1, 1, 1, 2, 1, 3;
    Eigen::VectorXd y(6);
    y << 0, 0, 0, 1, 1, 1;
    LogitData d(X, y);
    auto c = max_h_l1_sphere(d, DeletionSet{}, 2.0, 0.1);
    CHECK(c.max_value < 0);
    std::mt19937_64 rng(36);
    double best = -INFINITY;
    for (int t = 0; t < 200000; ++t) best = std::max(best, h_eval(d, DeletionSet{}, random_l1_direction(rng, 2), 2.0, 0.1));
    CHECK(std::abs(best - c.max_value) < 1e-3);
    CHECK(best <= c.max_value + 1e-9);
  }

  TEST_CASE("prior tail dispatch") {
    auto d = two_point();
    auto del = deletion_set({0, 1}, 2);
    using T = TailClass::Tag;
    for (double r : {2.0, 10.0, 50.0}) CHECK(corollary5_dispatch(d, del, r, {T::Thin, {}}).is(MomentVerdict::Tag::Finite));
    auto one = deletion_set({0}, 2);
    CHECK(corollary5_dispatch(d, one, 2.0, {T::Thick, {}}).tag == theorem51_verdict(d, one, 2.0, 0.0).tag);
    CHECK(corollary5_dispatch(d, one, 2.0, {T::InFamily, {2.0}}).is(MomentVerdict::Tag::Finite));
    CHECK(corollary5_dispatch(d, one, 2.0, {T::InFamily, {}}).is(MomentVerdict::Tag::Indeterminate));
    Eigen::MatrixXd I2 = Eigen::MatrixXd::Identity(2, 2);
    CHECK(classify_logit_prior(theta_prior::Normal{Eigen::VectorXd::Zero(2), I2}).tag == T::Thin);
    CHECK(classify_logit_prior(theta_prior::StudentT{3, Eigen::VectorXd::Zero(2), I2}).tag == T::Thick);
    auto lap = classify_logit_prior(theta_prior::Laplace{Eigen::VectorXd::Zero(2), Eigen::Vector2d(10, 5)});
    CHECK(lap.tag == T::InFamily);
    CHECK(lap.params[0] == doctest::Approx(0.1));
    CHECK(lap.params[1] == doctest::Approx(0.2));
  }

  TEST_CASE("propriety certificate") {
    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(4, 1);
    Eigen::VectorXd y(4);
    y << 1, 0, 1, 0;
    CHECK(propriety_certificate(LogitData(X, y), 0.0));

    Eigen::MatrixXd Xs(4, 1);
    Xs << -2, -1, 1, 2;
    Eigen::VectorXd ys(4);
    ys << 0, 0, 1, 1;
    LogitData sep(Xs, ys);
    CHECK_FALSE(propriety_certificate(sep, 0.0));
    CHECK(propriety_certificate(sep, 0.5));
  }

  TEST_CASE("vertex budget") {
    CHECK(logit_vertex_budget(2, 1) == 2.0);
    std::mt19937_64 rng(37);
    auto d = random_logit(rng, 30, 7);
    CHECK(logit_vertex_budget(30, 7) > kLogitVertexBudget);
    CHECK_THROWS_AS(max_h_l1_sphere(d, deletion_set({0}, 30), 2.0, 0.1), BudgetError);
    auto approx = max_h_l1_sphere(d, deletion_set({0}, 30), 2.0, 0.1, true);
    CHECK(approx.approximate);
  }
}
