#pragma once

#include <cstddef>
#include <vector>

namespace rec::stats {

double ln_gamma(double x);
// Regularized incomplete beta I_x(a, b).
double inc_beta(double a, double b, double x);
// Regularized lower incomplete gamma P(a, x).
double inc_gamma_lower(double a, double x);

double normal_cdf(double z);
double student_t_cdf(double t, double df);
// Inverse of the central t CDF (bisection; adequate for tail critical values).
double student_t_quantile(double p, double df);
// CDF of the noncentral t distribution with `df` degrees of freedom and
// noncentrality `delta`, via the incomplete-beta series.
double noncentral_t_cdf(double t, double df, double delta);
// Survival function of the chi-square distribution.
double chi_square_sf(double x, double df);

double mean(const std::vector<double>& v);
double sample_variance(const std::vector<double>& v); // n-1 denominator
double sample_sd(const std::vector<double>& v);
double median(std::vector<double> v);
// Quantile with linear interpolation between order statistics, q in [0, 1].
double quantile(std::vector<double> v, double q);

struct WelchResult {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0; // two-sided
};
WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b);

// Common-language effect size for A over B: P(a > b) + P(a == b)/2 across
// all cross pairs, computed from the Mann-Whitney U statistic with midranks.
double common_language_effect(const std::vector<double>& a, const std::vector<double>& b);

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double stderr_slope = 0.0;
    double t = 0.0;
    double p = 1.0; // two-sided, df = n - 2
};
SlopeFit ols_slope(const std::vector<double>& x, const std::vector<double>& y);

// Pearson chi-square goodness-of-fit p-value for observed counts against
// expected counts (same total); cells with tiny expectation are pooled.
double chi_square_gof_p(const std::vector<double>& observed, const std::vector<double>& expected);

} // namespace rec::stats
