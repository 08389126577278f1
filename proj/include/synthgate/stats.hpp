#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace synthgate {

double mean(std::span<const double> v);
// unbiased (n-1 denominator); returns 0 for n < 2
double sample_variance(std::span<const double> v);
double sample_sd(std::span<const double> v);

// Type-7 quantile (linear interpolation of order statistics), the R default.
// `sorted` must be ascending and non-empty; p in [0,1].
double quantile_type7_sorted(std::span<const double> sorted, double p);
double quantile_type7(std::vector<double> values, double p);

// Standard normal inverse CDF, Wichura's AS 241 (PPND16). p in (0,1).
double normal_quantile(double p);

// Student-t inverse CDF; df = +inf (or > 1e8) falls back to the normal.
double student_t_quantile(double p, double df);

// log(1 + exp(x)) without overflow for large |x|
double log1pexp(double x);

struct KernelDensity {
  std::vector<double> grid;
  std::vector<double> density;
  double bandwidth = 0;
};

// Gaussian KDE with Silverman's rule-of-thumb bandwidth on a uniform grid
// spanning [min - 3h, max + 3h].
KernelDensity kernel_density(std::span<const double> values, int grid_size = 512);

struct FiveNumber {
  double min, q1, median, q3, max, mean;
};
FiveNumber five_number_summary(std::span<const double> values);

}  // namespace synthgate
