#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "prtlplan/gaussian.hpp"

namespace {

// Independent oracle: standard normal CDF via the Maclaurin series of erf,
// Phi(x) = 1/2 + 1/2 erf(x / sqrt(2)), summed to machine convergence.
double cdf_oracle(double x) {
  double z = x / std::numbers::sqrt2;
  double term = z;           // z^(2n+1) / n! running factor
  double sum = 0.0;
  for (int n = 0; n < 400; ++n) {
    double contrib = term / (2 * n + 1);
    sum += contrib;
    if (std::abs(contrib) < 1e-18 * std::abs(sum) + 1e-300) break;
    term *= -z * z / (n + 1);
  }
  double erf_z = 2.0 / std::sqrt(std::numbers::pi) * sum;
  return 0.5 + 0.5 * erf_z;
}

// Independent tail oracle: asymptotic expansion of the upper tail
// Q(x) = phi(x)/x * (1 - 1/x^2 + 3/x^4 - ...), truncated at its smallest term.
double upper_tail_oracle(double x) {
  double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  double term = 1.0, sum = 0.0;
  for (int n = 0; n < 64; ++n) {
    sum += term;
    double next = term * -(2.0 * n + 1.0) / (x * x);
    if (std::abs(next) >= std::abs(term)) break;
    term = next;
  }
  return phi / x * sum;
}

}  // namespace

TEST_CASE("normal_cdf matches series oracle on the bulk") {
  for (double x : {-3.5, -3.0, -1.0, -0.1, 0.0, 0.1, 0.5, 1.0, 1.96, 2.5, 3.0, 3.5}) {
    REQUIRE(prtlplan::normal_cdf(x) == Catch::Approx(cdf_oracle(x)).epsilon(0).margin(1e-13));
  }
}

TEST_CASE("normal_cdf matches asymptotic oracle in the tails") {
  for (double x : {5.0, 5.5, 6.0, 7.0}) {
    double q = upper_tail_oracle(x);
    REQUIRE(prtlplan::normal_cdf(-x) == Catch::Approx(q).epsilon(2e-5));
    // 1 - cdf(x) quantizes near 1; only meaningful down to q ~ 1e-10.
    if (x <= 6.0) REQUIRE(1.0 - prtlplan::normal_cdf(x) == Catch::Approx(q).epsilon(2e-5));
  }
}

TEST_CASE("normal_cdf is symmetric") {
  for (double x : {0.3, 1.7, 2.9, 4.4}) {
    REQUIRE(prtlplan::normal_cdf(x) + prtlplan::normal_cdf(-x) ==
            Catch::Approx(1.0).margin(1e-15));
  }
}

TEST_CASE("normal_quantile hits known values") {
  using prtlplan::normal_quantile;
  REQUIRE(normal_quantile(0.5) == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(normal_quantile(0.95) == Catch::Approx(1.6448536269514722).margin(1e-9));
  REQUIRE(normal_quantile(0.975) == Catch::Approx(1.9599639845400545).margin(1e-9));
  REQUIRE(normal_quantile(0.99) == Catch::Approx(2.3263478740408408).margin(1e-9));
}

TEST_CASE("normal_quantile is antisymmetric about one half") {
  for (double p : {0.6, 0.75, 0.9, 0.999}) {
    REQUIRE(prtlplan::normal_quantile(p) ==
            Catch::Approx(-prtlplan::normal_quantile(1.0 - p)).margin(1e-10));
  }
}

TEST_CASE("normal_quantile inverts the CDF to stated accuracy") {
  for (double p = 0.01; p < 1.0; p += 0.007) {
    double x = prtlplan::normal_quantile(p);
    REQUIRE(std::abs(prtlplan::normal_cdf(x) - p) < 1e-12);
  }
}

TEST_CASE("normal_quantile rejects out-of-range probabilities") {
  REQUIRE_THROWS_AS(prtlplan::normal_quantile(0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(prtlplan::normal_quantile(1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(prtlplan::normal_quantile(-0.2), std::invalid_argument);
}

TEST_CASE("RandomStream is deterministic per seed") {
  prtlplan::RandomStream a(42), b(42), c(43);
  bool any_diff = false;
  for (int i = 0; i < 64; ++i) {
    double ua = a.uniform(), ub = b.uniform(), uc = c.uniform();
    REQUIRE(ua == ub);
    any_diff = any_diff || ua != uc;
    REQUIRE(ua >= 0.0);
    REQUIRE(ua < 1.0);
  }
  REQUIRE(any_diff);
}

TEST_CASE("RandomStream normal has plausible moments") {
  prtlplan::RandomStream rs(7);
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    double z = rs.normal();
    sum += z;
    sumsq += z * z;
  }
  double mean = sum / n;
  double var = sumsq / n - mean * mean;
  REQUIRE(std::abs(mean) < 0.01);
  REQUIRE(var == Catch::Approx(1.0).margin(0.02));
}

TEST_CASE("RandomStream uniform_int covers its range uniformly") {
  prtlplan::RandomStream rs(11);
  int counts[5] = {0, 0, 0, 0, 0};
  for (int i = 0; i < 50000; ++i) {
    int v = rs.uniform_int(3, 7);
    REQUIRE(v >= 3);
    REQUIRE(v <= 7);
    counts[v - 3]++;
  }
  for (int k = 0; k < 5; ++k) REQUIRE(counts[k] > 9000);
}
