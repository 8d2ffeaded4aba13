#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace mpl {

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
};

/// Kolmogorov survival function Q(x) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 x^2).
double kolmogorov_survival(double x);

/// One-sample KS; p from the asymptotic series with Stephens' small-sample
/// correction. Samples shorter than 30 get p = NaN.
KsResult ks_test(std::vector<double> sample, const std::function<double(double)>& cdf);

/// Two-sample KS with effective size nm/(n+m).
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

struct Moments {
    std::size_t n = 0;
    double mean = 0.0;
    double variance = 0.0;  // unbiased
    double sem = 0.0;       // standard error of the mean
    double variance_se = 0.0;  // standard error of the variance estimate (from the fourth moment)
};

Moments moments(const std::vector<double>& x);

double quantile(std::vector<double> x, double q);
double median(std::vector<double> x);

struct Correlation {
    double r = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    bool degenerate = false;  // zero variance in either sample
};

double pearson_r(const std::vector<double>& x, const std::vector<double>& y);

/// Pearson r with a percentile bootstrap interval (seeded, 95%).
Correlation pearson(const std::vector<double>& x, const std::vector<double>& y, std::uint64_t seed,
                    int resamples = 1000);

/// Spearman rank correlation with the same bootstrap.
Correlation spearman(const std::vector<double>& x, const std::vector<double>& y, std::uint64_t seed,
                     int resamples = 1000);

std::vector<double> ranks(const std::vector<double>& x);

}  // namespace mpl
