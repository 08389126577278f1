#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "synthgate/rng.hpp"
#include "synthgate/stats.hpp"
#include "synthgate/util.hpp"

using namespace synthgate;

TEST_CASE("mean and sample variance") {
  std::vector<double> v{2, 4};
  CHECK(mean(v) == 3.0);
  CHECK(sample_variance(v) == 2.0);
  std::vector<double> c{5, 5, 5};
  CHECK(sample_variance(c) == 0.0);
}

TEST_CASE("type-7 quantile matches the interpolation definition") {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  CHECK(quantile_type7(v, 0.5) == doctest::Approx(50.5).epsilon(1e-12));
  CHECK(quantile_type7(v, 0.0) == 1.0);
  CHECK(quantile_type7(v, 1.0) == 100.0);
  // n=5: h = 4*0.25 = 1 exactly -> second order statistic
  std::vector<double> w{10, 20, 30, 40, 50};
  CHECK(quantile_type7(w, 0.25) == 20.0);
}

TEST_CASE("normal quantile round-trips known values") {
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-10));
  CHECK(normal_quantile(0.025) == doctest::Approx(-1.959963984540054).epsilon(1e-10));
  CHECK(normal_quantile(1e-10) < -6);
}

TEST_CASE("student t quantile: known table values and the normal limit") {
  CHECK(student_t_quantile(0.975, 2.0) == doctest::Approx(4.302652729911275).epsilon(1e-9));
  CHECK(student_t_quantile(0.975, 1e12) ==
        doctest::Approx(normal_quantile(0.975)).epsilon(1e-6));
}

TEST_CASE("log1pexp is stable over the whole range") {
  CHECK(log1pexp(0.0) == doctest::Approx(std::log(2.0)));
  CHECK(log1pexp(800.0) == doctest::Approx(800.0));
  CHECK(log1pexp(-800.0) == doctest::Approx(0.0));
  CHECK(std::isfinite(log1pexp(700.0)));
  CHECK(std::isfinite(log1pexp(-700.0)));
}

TEST_CASE("kernel density integrates to roughly one") {
  RngStream rng(42);
  std::vector<double> v(500);
  for (auto& x : v) x = rng.normal(10, 2);
  const auto kd = kernel_density(v, 512);
  double integral = 0;
  for (std::size_t i = 1; i < kd.grid.size(); ++i)
    integral += 0.5 * (kd.density[i] + kd.density[i - 1]) * (kd.grid[i] - kd.grid[i - 1]);
  CHECK(integral == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("rng streams are deterministic and label-separated") {
  RngStream a(123, "x", 0), b(123, "x", 0), c(123, "y", 0);
  CHECK(a.next_u64() == b.next_u64());
  CHECK(a.next_u64() == b.next_u64());
  RngStream a2(123, "x", 0);
  CHECK(a2.next_u64() != c.next_u64());
}

TEST_CASE("rng normal moments") {
  RngStream rng(7);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  CHECK(s / n == doctest::Approx(0.0).epsilon(0.02));
  CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("rng gamma moments match shape/rate") {
  RngStream rng(9);
  const double shape = 3.5, rate = 2.0;
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.gamma(shape, rate);
    s += x;
    s2 += x * x;
  }
  const double m = s / n;
  const double var = s2 / n - m * m;
  CHECK(m == doctest::Approx(shape / rate).epsilon(0.02));
  CHECK(var == doctest::Approx(shape / (rate * rate)).epsilon(0.05));
}

TEST_CASE("sha256 known vector") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("format_double round-trips and prints integers bare") {
  CHECK(format_double(5.0) == "5");
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-2.5) == "-2.5");
}
