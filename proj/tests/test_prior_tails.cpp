#include "influence_gate/prior_tails.hpp"

#include <doctest.h>

#include <cmath>

using namespace influence_gate;
using T = TailClass::Tag;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(v.size());
  int i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

// log(pi / reference) along a ray for theta, reference N(0, I).
double theta_log_ratio(const ThetaPriorSpec& spec, const Eigen::VectorXd& dir, double t) {
  Eigen::VectorXd th = t * dir;
  return log_density(spec, th) + 0.5 * th.squaredNorm();
}

// log(pi / IG(a, b)) as sigma^2 -> 0.
double sigma2_log_ratio(const Sigma2PriorSpec& spec, double s2, double a, double b) {
  return log_density(spec, s2) - log_density(sigma2_prior::InverseGamma{a, b}, s2);
}

}  // namespace

TEST_SUITE("prior_tails") {
  TEST_CASE("theta classification table") {
    Eigen::MatrixXd I2 = Eigen::MatrixXd::Identity(2, 2);
    CHECK(classify_theta(theta_prior::Normal{vec({0, 0}), I2}).tag == T::InFamily);
    CHECK(classify_theta(theta_prior::StudentT{3, vec({0, 0}), I2}).tag == T::Thick);
    CHECK(classify_theta(theta_prior::Laplace{vec({0, 0}), vec({1, 1})}).tag == T::Thick);
    CHECK(classify_theta(theta_prior::QuarticExponential{vec({0, 0})}).tag == T::Thin);
    CHECK(classify_theta(theta_prior::BoundedUniform{vec({0, 0}), vec({1, 1})}).tag == T::BoundedSupport);
    CHECK(classify_theta(theta_prior::Custom{{T::Unknown, {}}, true, true}).tag == T::Unknown);
  }

  TEST_CASE("sigma^2 classification table") {
    auto ig = classify_sigma2(sigma2_prior::InverseGamma{2, 0.5});
    CHECK(ig.tag == T::InFamily);
    CHECK(ig.params == std::vector<double>{2, 0.5});
    CHECK(classify_sigma2(sigma2_prior::GammaOnVariance{2, 1}).tag == T::Thick);
    CHECK(classify_sigma2(sigma2_prior::HalfCauchyOnSd{1}).tag == T::Thick);
    CHECK(classify_sigma2(sigma2_prior::SharpZero{2}).tag == T::Thin);
    CHECK(classify_sigma2(sigma2_prior::SharpZero{1.5}).tag == T::Thin);
    CHECK(classify_sigma2(sigma2_prior::SharpZero{0.5}).tag == T::Thick);
    CHECK(classify_sigma2(sigma2_prior::SharpZero{1}).tag == T::Unknown);
  }

  TEST_CASE("thick and thin theta classes agree with the density ratio") {
    Eigen::MatrixXd I2 = Eigen::MatrixXd::Identity(2, 2);
    ThetaPriorSpec t3 = theta_prior::StudentT{3, vec({0, 0}), I2};
    ThetaPriorSpec lap = theta_prior::Laplace{vec({0.5, -1}), vec({2, 1})};
    ThetaPriorSpec quartic = theta_prior::QuarticExponential{vec({1, 0})};
    for (Eigen::VectorXd dir : std::vector<Eigen::VectorXd>{vec({1, 0}), vec({0.6, -0.8}), vec({-1, 1}) / std::sqrt(2.0)}) {
      double prev_t = -INFINITY, prev_l = -INFINITY, prev_q = INFINITY;
      for (double t : {10.0, 20.0, 40.0, 80.0}) {
        double rt = theta_log_ratio(t3, dir, t), rl = theta_log_ratio(lap, dir, t),
               rq = theta_log_ratio(quartic, dir, t);
        CHECK(rt > prev_t);
        CHECK(rl > prev_l);
        CHECK(rq < prev_q);
        prev_t = rt;
        prev_l = rl;
        prev_q = rq;
      }
      CHECK(prev_t > 1000);
      CHECK(prev_q < -1e6);
    }
  }

  TEST_CASE("thick and thin variance classes agree with the density ratio near zero") {
    for (double b : {0.1, 1.0, 10.0}) {
      double last_gamma = -INFINITY, last_sharp = INFINITY, last_cauchy = -INFINITY;
      for (double s2 : {1e-1, 1e-2, 1e-3, 1e-4, 1e-5}) {
        double g = sigma2_log_ratio(sigma2_prior::GammaOnVariance{2, 1}, s2, 3, b);
        double c = sigma2_log_ratio(sigma2_prior::HalfCauchyOnSd{1}, s2, 3, b);
        double sh = sigma2_log_ratio(sigma2_prior::SharpZero{2}, s2, 3, b);
        // with b = 10 the gamma ratio dips before 1/(b s2) takes over
        if (s2 <= 1e-3) {
          CHECK(g > last_gamma);
          CHECK(c > last_cauchy);
          CHECK(sh < last_sharp);
        }
        last_gamma = g;
        last_cauchy = c;
        last_sharp = sh;
      }
      CHECK(last_gamma > 100);
      CHECK(last_sharp < -1e6);
    }
  }

  TEST_CASE("log densities") {
    CHECK(log_density(sigma2_prior::InverseGamma{2, 0.5}, 1.0) == doctest::Approx(-2.0));
    CHECK(std::isinf(log_density(sigma2_prior::InverseGamma{2, 0.5}, 0.0)));
    ThetaPriorSpec box = theta_prior::BoundedUniform{vec({0}), vec({1})};
    CHECK(log_density(box, vec({0.5})) == 0.0);
    CHECK(std::isinf(log_density(box, vec({1.5}))));
    Eigen::MatrixXd S(2, 2);
    S << 2, 0.5, 0.5, 1;
    ThetaPriorSpec n = theta_prior::Normal{vec({1, 0}), S};
    Eigen::VectorXd d = vec({2, 1}) - vec({1, 0});
    CHECK(log_density(n, vec({2, 1})) == doctest::Approx(-0.5 * d.dot(S.inverse() * d)));
  }

  TEST_CASE("propriety and support flags") {
    CHECK(is_proper(theta_prior::QuarticExponential{vec({0})}));
    CHECK_FALSE(is_proper(theta_prior::Custom{{T::Thick, {}}, false, true}));
    CHECK_FALSE(has_full_support(theta_prior::BoundedUniform{vec({0}), vec({1})}));
    CHECK(has_full_support(theta_prior::Laplace{vec({0}), vec({1})}));
    CHECK_FALSE(has_bounded_density(theta_prior::Custom{{T::Thin, {}}, true, true}));
  }

  TEST_CASE("invalid parameters are config errors") {
    CHECK_THROWS_AS(validate(Sigma2PriorSpec{sigma2_prior::InverseGamma{-1, 1}}), ConfigError);
    CHECK_THROWS_AS(validate(Sigma2PriorSpec{sigma2_prior::SharpZero{0}}), ConfigError);
    Eigen::MatrixXd bad(1, 1);
    bad << -1;
    CHECK_THROWS_AS(validate(ThetaPriorSpec{theta_prior::Normal{vec({0}), bad}}), ConfigError);
    CHECK_THROWS_AS(validate(ThetaPriorSpec{theta_prior::StudentT{0, vec({0}), Eigen::MatrixXd::Identity(1, 1)}}),
                    ConfigError);
    CHECK_THROWS_AS(validate(ThetaPriorSpec{theta_prior::BoundedUniform{vec({1}), vec({0})}}), ConfigError);
  }

  TEST_CASE("finiteness transfer") {
    auto inf = MomentVerdict::infinite("x"), fin = MomentVerdict::finite("y");
    CHECK(transfer_finiteness(inf, true, false).is(MomentVerdict::Tag::Infinite));
    CHECK(transfer_finiteness(fin, false, true).is(MomentVerdict::Tag::Finite));
    CHECK(transfer_finiteness(inf, false, true).is(MomentVerdict::Tag::Indeterminate));
    CHECK(transfer_finiteness(fin, true, false).is(MomentVerdict::Tag::Indeterminate));
    CHECK(transfer_finiteness(MomentVerdict::boundary("b"), true, true).is(MomentVerdict::Tag::Indeterminate));
  }
}
