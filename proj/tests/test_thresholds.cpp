#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "spiked/errors.hpp"
#include "spiked/thresholds.hpp"

using namespace spiked;

namespace {

// beta_k from the stationarity condition of log(-log(1 - q^2)) - k log q,
// 2 q^2 / ((1 - q^2)(-log(1 - q^2))) = k, solved by long-double bisection.
long double beta_oracle(int k) {
  auto h = [k](long double q) {
    const long double s = q * q;
    return 2.0L * s / ((1.0L - s) * -std::log1p(-s)) - k;
  };
  long double lo = 1e-6L;
  long double hi = 1.0L - 1e-15L;
  for (int i = 0; i < 400; ++i) {
    const long double mid = 0.5L * (lo + hi);
    if (h(mid) < 0) lo = mid;
    else hi = mid;
  }
  const long double q = 0.5L * (lo + hi);
  return std::sqrt(-std::log1p(-q * q) / std::pow(q, k));
}

double diag_g(double q, double lambda, int k) {
  return lambda * lambda * std::pow(q, k) + 0.5 * k * std::log(1.0 - q * q);
}

}  // namespace

TEST_CASE("F_beta") {
  CHECK(f_beta(0.0, 3.0, 4).value() == 0.0);
  CHECK(f_beta(0.5, 1.0, 2).value() ==
        doctest::Approx(0.125 + 0.5 * std::log(0.75)).epsilon(1e-15));
  CHECK(f_beta(0.5, 1.0, 2).value() == doctest::Approx(-0.018820).epsilon(1e-4));
  CHECK_THROWS_AS(f_beta(1.0, 1.0, 2), DomainError);
  CHECK_THROWS_AS(f_beta(-1.5, 1.0, 2, BoundaryPolicy::neg_inf), DomainError);
  CHECK(f_beta(-1.0, 1.0, 2, BoundaryPolicy::neg_inf).is_neg_inf());
  CHECK(f_beta(1.0 - 1e-15, 1.0, 2).value() < -10.0);
}

TEST_CASE("G_lambda") {
  const std::vector<double> zero(4, 0.0);
  CHECK(g_lambda(zero, 2.0).value() == 0.0);
  const std::vector<double> half = {0.5, 0.5};
  CHECK(g_lambda(half, 1.0).value() == doctest::Approx(0.25 + std::log(0.75)).epsilon(1e-15));
  CHECK(g_lambda(half, 1.0).value() == doctest::Approx(-0.037682).epsilon(1e-4));
  const std::vector<double> edge = {0.5, 1.0};
  CHECK_THROWS_AS(g_lambda(edge, 1.0), DomainError);
  CHECK(g_lambda(edge, 1.0, BoundaryPolicy::neg_inf).is_neg_inf());

  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-0.99, 0.99);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> q(3);
    for (double& x : q) x = u(gen);
    std::vector<double> a(q);
    for (double& x : a) x = std::fabs(x);
    CHECK(g_lambda(a, 1.3).value() >= g_lambda(q, 1.3).value());
    std::vector<double> flipped = a;
    flipped[0] = -flipped[0];
    if (a[0] * a[1] * a[2] > 0) CHECK(g_lambda(flipped, 1.3).value() < g_lambda(a, 1.3).value());
  }
}

TEST_CASE("extended reals order negative infinity first") {
  const ExtendedReal ninf = ExtendedReal::neg_inf();
  CHECK(ninf < ExtendedReal(-1e308));
  CHECK(ninf == ExtendedReal::neg_inf());
  CHECK(ExtendedReal(1.0) > ExtendedReal(0.5));
  CHECK(std::isinf(ninf.to_double()));
  CHECK(ninf.value() == 0.0);
}

TEST_CASE("beta_k table") {
  const std::pair<int, double> table[] = {{3, 1.398841}, {4, 1.566974}, {5, 1.67676},
                                          {6, 1.757589}, {10, 1.955118}, {100, 2.595874}};
  CHECK(std::fabs(beta_star(2).value - 1.0) < 1e-9);
  for (const auto& [k, v] : table) CHECK(std::fabs(beta_star(k).value - v) < 1e-5);
}

TEST_CASE("beta_k against the stationarity oracle") {
  for (int k : {2, 3, 4, 5, 7, 10, 20, 50, 100, 300}) {
    const ThresholdResult r = beta_star(k);
    CHECK(r.value == doctest::Approx(static_cast<double>(beta_oracle(k))).epsilon(1e-10));
    CHECK(r.q_star > 0.0);
    CHECK(r.q_star < 1.0);
    CHECK(r.tolerance <= 1e-10);
    CHECK(r.unimodal_grid);
    const double at_q = std::sqrt(-std::log1p(-r.q_star * r.q_star) / std::pow(r.q_star, k));
    CHECK(r.objective_at_min == doctest::Approx(at_q).epsilon(1e-12));
  }
  double prev = 0.0;
  for (int k = 2; k <= 10; ++k) {
    CHECK(beta_star(k).value > prev);
    prev = beta_star(k).value;
  }
  CHECK_THROWS_AS(beta_star(1), DomainError);
}

TEST_CASE("F_beta changes sign at beta_k") {
  for (int k = 2; k <= 10; ++k) {
    const double b = beta_star(k).value;
    bool below_negative = true;
    bool above_positive = false;
    for (int i = 0; i < 10'000; ++i) {
      const double q = 1e-3 + (1.0 - 1e-6 - 1e-3) * i / 9999.0;
      below_negative = below_negative && f_beta(q, b - 1e-3, k).value() < 0.0;
      above_positive = above_positive || f_beta(q, b + 1e-3, k).value() > 0.0;
    }
    CHECK(below_negative);
    CHECK(above_positive);
  }
}

TEST_CASE("lambda_k") {
  CHECK(lambda_star(2).value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::fabs(lambda_star(3).value - std::sqrt(1.5) * 1.398841) < 2e-5);
  for (int k = 2; k <= 20; ++k)
    CHECK(lambda_star(k).value / beta_star(k).value ==
          doctest::Approx(std::sqrt(k / 2.0)).epsilon(1e-15));
}

TEST_CASE("large-k asymptotics") {
  CHECK(beta_star_asymptotic(100) == doctest::Approx(std::sqrt(std::log(50.0))).epsilon(1e-15));
  CHECK(std::fabs(beta_star(100).value - beta_star_asymptotic(100)) < 0.7);
  CHECK(beta_star_asymptotic(10) < beta_star_asymptotic(11));
  CHECK_THROWS_AS(beta_star_asymptotic(2), DomainError);
}

TEST_CASE("diagonal stationary points of G_lambda") {
  // Grid oracle: sign changes of lambda^2 q^(k-1) - q / (1 - q^2).
  auto grid_roots = [](double lambda, int k) {
    int count = 0;
    double prev = 0.0;
    for (int i = 1; i < 200'000; ++i) {
      const double q = i / 200'000.0;
      const double v = lambda * lambda * std::pow(q, k - 1) - q / (1.0 - q * q);
      if (i > 1 && (v < 0) != (prev < 0)) ++count;
      prev = v;
    }
    return count;
  };

  const auto low = g_lambda_critical(0.5, 3);
  CHECK(static_cast<int>(low.size()) == grid_roots(0.5, 3));
  for (const auto& p : low) CHECK(p.g_value < 0.0);

  const auto sub = g_lambda_critical(1.6, 3);
  for (const auto& p : sub) CHECK(p.g_value < 0.0);

  for (int k : {3, 4, 6}) {
    const double lk = lambda_star(k).value;
    const auto at = g_lambda_critical(lk, k);
    REQUIRE(!at.empty());
    double best = -HUGE_VAL;
    for (const auto& p : at) best = std::max(best, p.g_value);
    CHECK(std::fabs(best) < 1e-6);

    const auto above = g_lambda_critical(lk + 0.2, k);
    CHECK(static_cast<int>(above.size()) == grid_roots(lk + 0.2, k));
    CHECK(std::any_of(above.begin(), above.end(), [](const auto& p) { return p.g_value > 0.0; }));
  }

  const auto two = g_lambda_critical(2.0, 2);
  REQUIRE(two.size() == 1);
  CHECK(two[0].q == doctest::Approx(std::sqrt(1.0 - 1.0 / 4.0)).epsilon(1e-10));
  CHECK(two[0].g_value > 0.0);
  for (const auto& p : g_lambda_critical(2.5, 5))
    CHECK(p.g_value == doctest::Approx(diag_g(p.q, 2.5, 5)).epsilon(1e-12));

  CHECK_THROWS_AS(g_lambda_critical(0.0, 3), DomainError);
}

TEST_CASE("sphere rate") {
  CHECK(sphere_rate(0.0).value.value() == 0.0);
  CHECK(sphere_rate(0.3).value.value() == doctest::Approx(0.5 * std::log(0.91)).epsilon(1e-15));
  CHECK(sphere_rate(0.3).value.value() == doctest::Approx(-0.047157).epsilon(1e-5));
  CHECK(sphere_rate(-0.3).value == sphere_rate(0.3).value);
  CHECK(sphere_rate(1.0).value.is_neg_inf());
  CHECK(sphere_rate(-1.0).value.is_neg_inf());
  CHECK_THROWS_AS(sphere_rate(1.1), DomainError);
}

TEST_CASE("gradient ascent on G_lambda reaches equal-coordinate stationary points") {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(-0.95, 0.95);
  for (double lambda : {1.6, 2.5}) {
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> start(3);
      for (double& x : start) x = u(gen);
      const AscentResult r = ascend_g_lambda(start, lambda);
      CHECK(r.gradient_norm < 1e-9);
      std::vector<double> mag(r.q);
      for (double& x : mag) x = std::fabs(x);
      const auto [lo, hi] = std::minmax_element(mag.begin(), mag.end());
      CHECK(*hi - *lo < 1e-6);
      if (lambda == 2.5 && *hi > 0.1) {
        // A nonzero maximizer is one of the diagonal roots.
        const auto roots = g_lambda_critical(lambda, 3);
        CHECK(std::any_of(roots.begin(), roots.end(),
                          [&](const auto& p) { return std::fabs(p.q - *hi) < 1e-6; }));
      }
    }
  }
}

TEST_CASE("threshold JSON") {
  const auto j = threshold_json(3);
  CHECK(j["k"] == 3);
  CHECK(std::fabs(j["beta_star"].get<double>() - 1.398841) < 1e-5);
  CHECK(j.contains("lambda_star"));
  CHECK(j.contains("q_star"));
  CHECK(j.contains("tolerance"));
}
