#include "mpl/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "mpl/rng.hpp"

namespace mpl {

double kolmogorov_survival(double x) {
    if (x <= 0.0) return 1.0;
    if (x < 1.18) {
        // Theta-function form converges fast for small x.
        const double c = M_PI * M_PI / (8.0 * x * x);
        double s = 0.0;
        for (int j = 1; j < 50; ++j) {
            const double t = std::exp(-(2.0 * j - 1.0) * (2.0 * j - 1.0) * c);
            s += t;
            if (t < 1e-17) break;
        }
        return 1.0 - std::sqrt(2.0 * M_PI) / x * s;
    }
    double s = 0.0;
    for (int j = 1; j < 100; ++j) {
        const double t = std::exp(-2.0 * j * j * x * x);
        s += (j % 2 ? 1.0 : -1.0) * t;
        if (t < 1e-17) break;
    }
    return std::clamp(2.0 * s, 0.0, 1.0);
}

namespace {

double stephens_p(double d, double n_eff) {
    if (n_eff < 30.0) return std::numeric_limits<double>::quiet_NaN();
    const double sn = std::sqrt(n_eff);
    return kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d);
}

}  // namespace

KsResult ks_test(std::vector<double> sample, const std::function<double(double)>& cdf) {
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    KsResult r;
    r.n = sample.size();
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        d = std::max({d, (i + 1) / n - f, f - i / n});
    }
    r.statistic = d;
    r.p_value = stephens_p(d, n);
    return r;
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(i / na - j / nb));
    }
    KsResult r;
    r.n = a.size() + b.size();
    r.statistic = d;
    r.p_value = stephens_p(d, na * nb / (na + nb));
    return r;
}

Moments moments(const std::vector<double>& x) {
    Moments m;
    m.n = x.size();
    if (x.empty()) return m;
    const double n = static_cast<double>(x.size());
    m.mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double m2 = 0.0, m4 = 0.0;
    for (double v : x) {
        const double d = v - m.mean;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    if (x.size() > 1) {
        m.variance = m2 / (n - 1.0);
        m.sem = std::sqrt(m.variance / n);
        const double mu2 = m2 / n, mu4 = m4 / n;
        m.variance_se = std::sqrt(std::max(0.0, mu4 - mu2 * mu2) / n);
    }
    return m;
}

double quantile(std::vector<double> x, double q) {
    if (x.empty()) throw std::invalid_argument("quantile of an empty sample");
    std::sort(x.begin(), x.end());
    const double pos = q * static_cast<double>(x.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, x.size() - 1);
    return x[lo] + (pos - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

double median(std::vector<double> x) { return quantile(std::move(x), 0.5); }

double pearson_r(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("pearson: need paired samples");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return sxy / std::sqrt(sxx * syy);
}

std::vector<double> ranks(const std::vector<double>& x) {
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) r[idx[t]] = avg;
        i = j + 1;
    }
    return r;
}

namespace {

Correlation bootstrap(const std::vector<double>& x, const std::vector<double>& y, std::uint64_t seed, int resamples,
                      double (*stat)(const std::vector<double>&, const std::vector<double>&)) {
    Correlation c;
    c.r = stat(x, y);
    if (std::isnan(c.r)) {
        c.degenerate = true;
        c.ci_low = c.ci_high = c.r;
        return c;
    }
    Engine rng = make_stream(seed, 0, Purpose::bootstrap);
    std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
    std::vector<double> bx(x.size()), by(y.size()), reps;
    reps.reserve(resamples);
    for (int b = 0; b < resamples; ++b) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            const std::size_t t = pick(rng);
            bx[i] = x[t];
            by[i] = y[t];
        }
        const double v = stat(bx, by);
        if (!std::isnan(v)) reps.push_back(v);
    }
    if (reps.empty()) {
        c.degenerate = true;
        return c;
    }
    c.ci_low = quantile(reps, 0.025);
    c.ci_high = quantile(reps, 0.975);
    return c;
}

double spearman_r(const std::vector<double>& x, const std::vector<double>& y) { return pearson_r(ranks(x), ranks(y)); }

}  // namespace

Correlation pearson(const std::vector<double>& x, const std::vector<double>& y, std::uint64_t seed, int resamples) {
    return bootstrap(x, y, seed, resamples, &pearson_r);
}

Correlation spearman(const std::vector<double>& x, const std::vector<double>& y, std::uint64_t seed, int resamples) {
    return bootstrap(x, y, seed, resamples, &spearman_r);
}

}  // namespace mpl
