#include "synthgate/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

namespace synthgate {

double mean(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("mean: empty input");
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v) {
  const std::size_t n = v.size();
  if (n < 2) return 0.0;
  const double m = mean(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(n - 1);
}

double sample_sd(std::span<const double> v) { return std::sqrt(sample_variance(v)); }

double quantile_type7_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile: empty input");
  if (p < 0 || p > 1) throw std::invalid_argument("quantile: p outside [0,1]");
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = static_cast<double>(n - 1) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= n) return sorted[n - 1];
  const double w = h - static_cast<double>(lo);
  return sorted[lo] + w * (sorted[lo + 1] - sorted[lo]);
}

double quantile_type7(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  return quantile_type7_sorted(values, p);
}

// AS 241 algorithm PPND16 (Wichura 1988), |relative error| < 1e-15.
double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p outside (0,1)");
  const double q = p - 0.5;
  double r;
  if (std::fabs(q) <= 0.425) {
    r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
               1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
             1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
           (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
               5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
             4.2313330701600911252e1) * r + 1.0);
  }
  r = q < 0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
              3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
            4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
              6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
            2.05319162663775882187e0) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
              2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
            5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
              1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
            5.99832206555887937690e-1) * r + 1.0);
  }
  return q < 0 ? -val : val;
}

double student_t_quantile(double p, double df) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("student_t_quantile: p outside (0,1)");
  if (!std::isfinite(df) || df > 1e8) return normal_quantile(p);
  if (df <= 0) throw std::invalid_argument("student_t_quantile: df <= 0");
  boost::math::students_t_distribution<double> dist(df);
  return boost::math::quantile(dist, p);
}

double log1pexp(double x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

KernelDensity kernel_density(std::span<const double> values, int grid_size) {
  if (values.empty()) throw std::invalid_argument("kernel_density: empty input");
  if (grid_size < 2) throw std::invalid_argument("kernel_density: grid_size < 2");
  const std::size_t n = values.size();
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double sd = sample_sd(sorted);
  const double iqr = quantile_type7_sorted(sorted, 0.75) - quantile_type7_sorted(sorted, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (spread <= 0) spread = std::max(sd, iqr / 1.34);
  double h = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
  if (h <= 0) h = std::max(1e-6, std::fabs(sorted[0]) * 1e-6);

  KernelDensity kd;
  kd.bandwidth = h;
  const double lo = sorted.front() - 3 * h;
  const double hi = sorted.back() + 3 * h;
  const double step = (hi - lo) / static_cast<double>(grid_size - 1);
  kd.grid.resize(grid_size);
  kd.density.resize(grid_size);
  const double norm = 1.0 / (static_cast<double>(n) * h * std::sqrt(2.0 * M_PI));
  for (int g = 0; g < grid_size; ++g) {
    const double t = lo + step * g;
    kd.grid[g] = t;
    double acc = 0;
    for (double x : sorted) {
      const double z = (t - x) / h;
      acc += std::exp(-0.5 * z * z);
    }
    kd.density[g] = acc * norm;
  }
  return kd;
}

FiveNumber five_number_summary(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("five_number_summary: empty input");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  FiveNumber f;
  f.min = sorted.front();
  f.q1 = quantile_type7_sorted(sorted, 0.25);
  f.median = quantile_type7_sorted(sorted, 0.5);
  f.q3 = quantile_type7_sorted(sorted, 0.75);
  f.max = sorted.back();
  f.mean = mean(sorted);
  return f;
}

}  // namespace synthgate
