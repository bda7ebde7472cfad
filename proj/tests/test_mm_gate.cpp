#include "influence_gate/mm_gate.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace influence_gate;

TEST_SUITE("mm_gate") {
  TEST_CASE("reference spot values") {
    auto d = test_support::puromycin();
    CHECK(std::abs(mm_eval(d, deletion_set({10}, 11), 2.0, 2.0).leverage - 0.5065) <= 5e-4);
    auto s1 = scan_kappa(d, deletion_set({0}, 11), 2.0);
    CHECK(std::abs(s1.sup_g.value - 0.05501) <= 5e-4);
    CHECK(s1.inf_rss_star.value < 0);
    // the negative residual region sits near kappa = 0.08
    bool near = false;
    for (auto [lo, hi] : s1.sign_change_intervals) near |= lo <= 0.08 && 0.08 <= hi;
    CHECK(near);
  }

  TEST_CASE("singleton leverages sum to one at every kappa") {
    auto d = test_support::puromycin();
    for (double k : {1e-6, 1e-3, 0.08, 0.5, 2.0, 30.0, 1e5}) {
      double s = 0;
      for (int i = 0; i < 11; ++i) s += mm_eval(d, deletion_set({i}, 11), 2.0, k).leverage;
      CHECK(std::abs(s - 1.0) < 1e-12);
    }
    // kappa -> 0: every x_i -> 1
    CHECK(mm_eval(d, deletion_set({4}, 11), 2.0, 1e-12).leverage == doctest::Approx(1.0 / 11).epsilon(1e-9));
  }

  TEST_CASE("sign equivalences on the grid") {
    auto d = test_support::puromycin();
    for (int i = 0; i < 11; ++i) {
      auto del = deletion_set({i}, 11);
      auto scan = scan_kappa(d, del, 2.0, 256);
      for (double k : scan.grid) {
        auto e = mm_eval(d, del, 2.0, k);
        CHECK((e.a_val < 0) == (e.leverage > 0.5));
        if (e.b_val != 0) CHECK((e.b_val > 0) == (e.g_val < 0.5));
      }
    }
  }

  TEST_CASE("kappa^2 A approaches the asymptotic coefficient") {
    auto d = test_support::puromycin();
    const auto& c = d.concentration();
    const double cmax = c.maxCoeff();
    for (int i = 0; i < 11; ++i) {
      auto del = deletion_set({i}, 11);
      double coef = c.squaredNorm() - 2 * c(i) * c(i);
      auto scan = scan_kappa(d, del, 2.0, 64);
      CHECK(scan.asymptotic_coefficient == doctest::Approx(coef).epsilon(1e-12));
      double k = 1e3 * cmax;
      double scaled = k * k * mm_eval(d, del, 2.0, k).a_val;
      CHECK(std::abs(scaled - coef) < 0.01 * std::abs(coef));
    }
    std::vector<double> reference{1.97, 1.97, 1.96, 1.96, 1.94, 1.94, 1.87, 1.87, 1.34, 1.34, -0.45};
    for (int i = 0; i < 11; ++i)
      CHECK(std::abs(scan_kappa(d, deletion_set({i}, 11), 2.0, 64).asymptotic_coefficient - reference[i]) <= 0.005);
  }

  TEST_CASE("r = 1 residual sum matches a refit") {
    auto d = test_support::puromycin();
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> lk(std::log(1e-3), std::log(1e2));
    for (const auto& idx : std::vector<std::vector<int>>{{0}, {6}, {10}, {2, 3}}) {
      auto del = deletion_set(idx, 11);
      for (int t = 0; t < 20; ++t) {
        double k = std::exp(lk(rng));
        double sxx = 0, sxv = 0, svv = 0;
        for (int i = 0; i < 11; ++i) {
          if (del.contains(i)) continue;
          double x = d.concentration()(i) / (k + d.concentration()(i)), v = d.velocity()(i);
          sxx += x * x;
          sxv += x * v;
          svv += v * v;
        }
        double m = sxv / sxx, refit = 0;
        for (int i = 0; i < 11; ++i) {
          if (del.contains(i)) continue;
          double x = d.concentration()(i) / (k + d.concentration()(i));
          refit += std::pow(d.velocity()(i) - m * x, 2);
        }
        auto e = mm_eval(d, del, 1.0, k);
        REQUIRE(e.rss_star.has_value());
        CHECK(*e.rss_star == doctest::Approx(refit).epsilon(1e-8));
      }
    }
  }

  TEST_CASE("input checks") {
    auto d = test_support::puromycin();
    CHECK_THROWS_AS(scan_kappa(d, deletion_set({0}, 11), 2.0, 15), ConfigError);
    CHECK_THROWS_AS(scan_kappa(d, deletion_set({0}, 11), 2.0, 1.0, 0.5, 64), ConfigError);
    CHECK_THROWS_AS(mm_eval(d, deletion_set({0}, 11), 2.0, 0.0), DomainError);
  }

  TEST_CASE("refined extrema bracket the grid extrema") {
    auto d = test_support::puromycin();
    for (int i : {0, 5, 10}) {
      auto del = deletion_set({i}, 11);
      auto scan = scan_kappa(d, del, 2.0, 512);
      double grid_sup = -INFINITY;
      for (double k : scan.grid) grid_sup = std::max(grid_sup, mm_eval(d, del, 2.0, k).leverage);
      CHECK(scan.sup_leverage.value >= grid_sup);
      for (const auto& r : scan.refinements) {
        CHECK(r.kappa >= r.kappa_lo);
        CHECK(r.kappa <= r.kappa_hi);
      }
    }
  }

  TEST_CASE("verdicts at r = 2") {
    auto d = test_support::puromycin();
    auto verdict = [&](int i) {
      auto del = deletion_set({i}, 11);
      return theorem41_verdict(d, del, 2.0, scan_kappa(d, del, 2.0));
    };
    CHECK(verdict(10).is(MomentVerdict::Tag::Infinite));
    CHECK(verdict(0).is(MomentVerdict::Tag::Infinite));
    for (int i : {2, 3, 5, 6, 7}) CHECK(verdict(i).is(MomentVerdict::Tag::Finite));
    // sample size: n <= rI + 1
    auto big = deletion_set({0, 1, 2, 3, 4}, 11);
    CHECK(theorem41_verdict(d, big, 2.0, scan_kappa(d, big, 2.0, 64)).is(MomentVerdict::Tag::Infinite));
  }

  TEST_CASE("moment index spot values") {
    auto d = test_support::puromycin();
    CHECK(std::abs(moment_index_mm(d, deletion_set({0}, 11)).r_star - 1.59) <= 0.02);
    CHECK(std::abs(moment_index_mm(d, deletion_set({10}, 11)).r_star - 1.32) <= 0.02);
    CHECK(std::abs(moment_index_mm(d, deletion_set({6}, 11)).r_star - 6.38) <= 0.02);
    auto e = moment_index_mm(d, DeletionSet{});
    CHECK(std::isinf(e.r_star));
  }

  TEST_CASE("moment index is permutation invariant") {
    auto d = test_support::puromycin();
    std::vector<int> perm(11);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(4);
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::VectorXd c(11), v(11);
    int where6 = -1;
    for (int i = 0; i < 11; ++i) {
      c(i) = d.concentration()(perm[i]);
      v(i) = d.velocity()(perm[i]);
      if (perm[i] == 6) where6 = i;
    }
    MMScanParams p;
    p.grid_size = 1024;
    double a = moment_index_mm(d, deletion_set({6}, 11), p).r_star;
    double b = moment_index_mm(MMData(c, v), deletion_set({where6}, 11), p).r_star;
    CHECK(b == doctest::Approx(a).epsilon(1e-9));
  }

  TEST_CASE("moving a case away from the curve does not raise its index") {
    auto d = test_support::puromycin();
    MMScanParams p;
    p.grid_size = 1024;
    for (int i : {3, 6}) {
      double prev = INFINITY;
      for (double shift : {0.0, 20.0, 40.0, 80.0}) {
        Eigen::VectorXd v = d.velocity();
        v(i) += shift;
        double r = moment_index_mm(MMData(d.concentration(), v), deletion_set({i}, 11), p).r_star;
        CHECK(r <= prev + 1e-6);
        prev = r;
      }
    }
  }
}
