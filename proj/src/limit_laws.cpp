#include "mpl/limit_laws.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "mpl/ensembles.hpp"

namespace mpl {

namespace {

constexpr double kSeriesLow = -8.5;
constexpr double kSeriesHigh = 2.0;
constexpr long double kAi0 = 0.355028053887817239260063186004183176L;
constexpr long double kAip0 = 0.258819403792806798405183560189203963L;  // -Ai'(0)
const double kSqrtPi = std::sqrt(M_PI);

AiryValues maclaurin(double xd) {
    const long double x = xd;
    const long double x3 = x * x * x;
    long double f = 1.0L, g = x, fp = x * x / 2.0L, gp = 1.0L;
    long double tf = 1.0L, tg = x, tfp = x * x / 2.0L, tgp = 1.0L;
    for (int k = 0; k < 200; ++k) {
        const long double k3 = 3.0L * k;
        tf *= x3 / ((k3 + 2) * (k3 + 3));
        tg *= x3 / ((k3 + 3) * (k3 + 4));
        tgp *= x3 / ((k3 + 1) * (k3 + 3));
        tfp *= x3 / ((k3 + 3) * (k3 + 5));
        f += tf;
        g += tg;
        gp += tgp;
        fp += tfp;
        const long double big = std::max({std::fabs(tf), std::fabs(tg), std::fabs(tfp), std::fabs(tgp)});
        if (k > 2 && big < 1e-22L * (1.0L + std::fabs(f) + std::fabs(g))) break;
    }
    return {static_cast<double>(kAi0 * f - kAip0 * g), static_cast<double>(kAi0 * fp - kAip0 * gp)};
}

// u_k of the asymptotic expansions, u_0 = 1.
const std::array<long double, 40>& u_coeffs() {
    static const std::array<long double, 40> u = [] {
        std::array<long double, 40> c{};
        c[0] = 1.0L;
        for (int k = 1; k < 40; ++k)
            c[k] = c[k - 1] * (6.0L * k - 5) * (6.0L * k - 3) * (6.0L * k - 1) / ((2.0L * k - 1) * 216.0L * k);
        return c;
    }();
    return u;
}

long double v_coeff(int k) {
    const auto& u = u_coeffs();
    return k == 0 ? 1.0L : -(6.0L * k + 1) / (6.0L * k - 1) * u[k];
}

// Ai(x) = sqrt(x/3)/pi K_{1/3}(zeta), Ai'(x) = -x/(pi sqrt 3) K_{2/3}(zeta), with
// K_nu(z) = int_0^inf exp(-z cosh t) cosh(nu t) dt summed by the trapezoid rule,
// which converges geometrically for this integrand.
AiryValues bessel_positive(double x) {
    const double zeta = 2.0 / 3.0 * x * std::sqrt(x);
    const double h = std::min(0.25, 0.6 / std::sqrt(zeta));
    double k13 = 0.5, k23 = 0.5;
    for (int i = 1; i < 100000; ++i) {
        const double t = i * h;
        const double e = std::exp(-zeta * (std::cosh(t) - 1.0));
        if (e < 1e-18) break;
        k13 += e * std::cosh(t / 3.0);
        k23 += e * std::cosh(2.0 * t / 3.0);
    }
    const double ez = std::exp(-zeta) * h;
    return {std::sqrt(x / 3.0) / M_PI * k13 * ez, -x / (M_PI * std::sqrt(3.0)) * k23 * ez};
}

AiryValues asymptotic_negative(double x) {
    const double t = -x;
    const double zeta = 2.0 / 3.0 * t * std::sqrt(t);
    const auto& u = u_coeffs();
    // P = sum (-1)^k c_{2k} zeta^{-2k}, Q = sum (-1)^k c_{2k+1} zeta^{-2k-1}
    long double pu = 0, qu = 0, pv = 0, qv = 0;
    long double pw = 1.0L;
    long double last = 1e300L;
    for (int k = 0; k < 39; ++k) {
        const long double tu = u[k] * pw, tv = v_coeff(k) * pw;
        const long double mag = std::max(std::fabs(tu), std::fabs(tv));
        if (mag > last) break;
        last = mag;
        const int j = k / 2;
        const long double sgn = (j % 2) ? -1.0L : 1.0L;
        if (k % 2 == 0) {
            pu += sgn * tu;
            pv += sgn * tv;
        } else {
            qu += sgn * tu;
            qv += sgn * tv;
        }
        if (mag < 1e-20L) break;
        pw /= zeta;
    }
    const double c = std::cos(zeta), s = std::sin(zeta);
    const double cm = (c + s) * M_SQRT1_2;  // cos(zeta - pi/4)
    const double sm = (s - c) * M_SQRT1_2;  // sin(zeta - pi/4)
    const double q = std::sqrt(std::sqrt(t));
    const double ai = static_cast<double>((cm * pu + sm * qu) / (kSqrtPi * q));
    const double aip = static_cast<double>(q / kSqrtPi * (sm * pv - cm * qv));
    return {ai, aip};
}

}  // namespace

AiryValues airy_pair(double x) {
    if (std::isnan(x)) return {x, x};
    if (x > kSeriesHigh) return bessel_positive(x);
    if (x < kSeriesLow) return asymptotic_negative(x);
    return maclaurin(x);
}

double airy(double x) { return airy_pair(x).ai; }
double airy_prime(double x) { return airy_pair(x).aip; }

namespace {

// Near the diagonal the closed form cancels; expand around the midpoint.
double kernel_near_diagonal(double X, double Y) {
    const double m = 0.5 * (X + Y), d = 0.5 * (X - Y);
    constexpr int J = 12;
    const AiryValues a = airy_pair(m);
    std::array<double, J + 2> c{};
    c[0] = a.ai;
    c[1] = a.aip;
    for (int j = 0; j + 2 <= J + 1; ++j) c[j + 2] = (m * c[j] + (j >= 1 ? c[j - 1] : 0.0)) / ((j + 2.0) * (j + 1.0));
    std::array<double, J + 1> p{}, q{};
    for (int j = 0; j <= J; ++j) {
        p[j] = c[j];
        q[j] = (j + 1.0) * c[j + 1];
    }
    // N(d) = P(d)Q(-d) - Q(d)P(-d), odd in d; K = N(d) / (2d)
    double result = 0.0, dp = 1.0;
    for (int n = 1; n <= J; n += 2) {
        double e = 0.0;
        for (int i = 0; i <= n; ++i) {
            const int j = n - i;
            e += ((j % 2) ? -1.0 : 1.0) * (p[i] * q[j] - q[i] * p[j]);
        }
        result += e * dp / 2.0;
        dp *= d * d;
    }
    return result;
}

}  // namespace

double airy_kernel(double X, double Y) {
    // fixed argument order keeps K(X,Y) == K(Y,X) bit for bit under FMA contraction
    if (X > Y) std::swap(X, Y);
    if (X == Y) {
        const AiryValues a = airy_pair(X);
        return a.aip * a.aip - X * a.ai * a.ai;
    }
    if (std::abs(X - Y) < 1e-3) return kernel_near_diagonal(X, Y);
    const AiryValues a = airy_pair(X), b = airy_pair(Y);
    return (a.ai * b.aip - a.aip * b.ai) / (X - Y);
}

// ---- damped integrals -------------------------------------------------------

namespace {

// Panels on [a, b], split where either argument crosses a regime boundary of
// the Airy evaluation, so the adaptive rule never sees the tiny jump there.
template <class F>
double integrate_panels(F f, double a, double b, double X, double Y, const QuadratureConfig& cfg) {
    using boost::math::quadrature::gauss_kronrod;
    const int panels = cfg.panel_count > 0 ? cfg.panel_count : static_cast<int>(std::ceil(b - a));
    std::vector<double> cuts;
    for (int p = 0; p <= panels; ++p) cuts.push_back(a + (b - a) * p / panels);
    for (double edge : {kSeriesLow, kSeriesHigh})
        for (double shift : {X, Y})
            if (edge - shift > a && edge - shift < b) cuts.push_back(edge - shift);
    std::sort(cuts.begin(), cuts.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        if (cuts[i + 1] - cuts[i] <= 0.0) continue;
        total += gauss_kronrod<double, 31>::integrate(f, cuts[i], cuts[i + 1], cfg.max_depth, cfg.tolerance);
    }
    return total;
}

}  // namespace

double damped_airy_integral(double alpha, double X, double Y, Side side, const QuadratureConfig& cfg) {
    if (!(alpha >= 0.0)) throw std::invalid_argument("damped_airy_integral: alpha must be nonnegative");
    if (side == Side::negative && alpha == 0.0)
        throw std::invalid_argument("damped_airy_integral: the negative side needs alpha > 0");
    if (!(cfg.tolerance > 0.0)) throw std::invalid_argument("damped_airy_integral: tolerance must be positive");
    const double lo = std::min(X, Y), hi = std::max(X, Y);

    double T = cfg.truncation;
    if (side == Side::positive) {
        if (T <= 0.0) T = std::max({1.0, 16.0 - hi, 2.0 - lo});
        auto f = [&](double u) {
            const double w = alpha == 0.0 ? 1.0 : std::exp(-alpha * u);
            return w * airy(X + u) * airy(Y + u);
        };
        return integrate_panels(f, 0.0, T, X, Y, cfg);
    }

    const double c = std::max(std::abs(X), std::abs(Y));
    if (T <= 0.0) {
        T = std::max(30.0, 10.0 / alpha + std::abs(X) + std::abs(Y));
        // tail bound e^{-alpha T} / (alpha pi sqrt(T - c)) below tolerance / 10
        auto bound = [&](double t) { return std::exp(-alpha * t) / (alpha * M_PI * std::sqrt(std::max(t - c, 1.0))); };
        while (bound(T) > cfg.tolerance / 10.0) T *= 1.25;
    }
    auto f = [&](double u) { return std::exp(alpha * u) * airy(X + u) * airy(Y + u); };
    return integrate_panels(f, -T, 0.0, X, Y, cfg);
}

double fn_determinant(const FNKernelParams& p, const QuadratureConfig& cfg) {
    if (!(p.alpha > 0.0)) throw std::invalid_argument("fn kernel: alpha must be positive");
    const double kxx = airy_kernel(p.X, p.X);
    const double kyy = airy_kernel(p.Y, p.Y);
    const double ip = damped_airy_integral(p.alpha, p.X, p.Y, Side::positive, cfg);
    const double im = damped_airy_integral(p.alpha, p.X, p.Y, Side::negative, cfg);
    return kxx * kyy + ip * im;
}

double fn_joint_intensity(const FNKernelParams& p, const QuadratureConfig& cfg) {
    return 4.0 * fn_determinant(p, cfg);
}

// ---- Gauss-Legendre ---------------------------------------------------------

GaussRule gauss_legendre(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
    GaussRule r;
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = z;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) {
                p1 = z;
                p0 = 1.0;
            }
            dp = n * (z * p1 - p0) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        {
            double p0 = 1.0, p1 = z;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n == 1 ? 1.0 : n * (z * p1 - p0) / (z * z - 1.0);
        }
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        r.x[i] = -z;
        r.x[n - 1 - i] = z;
        r.w[i] = r.w[n - 1 - i] = w;
    }
    if (n % 2 == 1) r.x[n / 2] = 0.0;
    return r;
}

// ---- Tracy-Widom ------------------------------------------------------------

namespace {

constexpr double kTwLow = -10.0;
constexpr double kTwHigh = 6.0;
constexpr double kMapScale = 10.0;

struct HalfLineNodes {
    std::vector<double> x, w;
};

// Gauss-Legendre pushed to (0, inf) by x = L tan(pi theta / 2).
HalfLineNodes half_line_nodes(int n) {
    const GaussRule g = gauss_legendre(n);
    HalfLineNodes h;
    for (int i = 0; i < n; ++i) {
        const double theta = 0.5 * (g.x[i] + 1.0);
        const double c = std::cos(M_PI * theta / 2.0);
        h.x.push_back(kMapScale * std::tan(M_PI * theta / 2.0));
        h.w.push_back(0.5 * g.w[i] * kMapScale * (M_PI / 2.0) / (c * c));
    }
    return h;
}

double det_airy_kernel(double s, int n) {
    const HalfLineNodes h = half_line_nodes(n);
    std::vector<AiryValues> a(n);
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i) {
        x[i] = s + h.x[i];
        a[i] = airy_pair(x[i]);
    }
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            double k;
            if (i == j) {
                k = a[i].aip * a[i].aip - x[i] * a[i].ai * a[i].ai;
            } else if (std::abs(x[i] - x[j]) < 1e-3) {
                k = airy_kernel(x[i], x[j]);
            } else {
                k = (a[i].ai * a[j].aip - a[i].aip * a[j].ai) / (x[i] - x[j]);
            }
            m(i, j) = (i == j ? 1.0 : 0.0) - std::sqrt(h.w[i]) * k * std::sqrt(h.w[j]);
        }
    }
    return Eigen::PartialPivLU<Eigen::MatrixXd>(m).determinant();
}

Eigen::MatrixXd hankel_operator(double s, int n) {
    const HalfLineNodes h = half_line_nodes(n);
    Eigen::MatrixXd b(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) b(i, j) = b(j, i) = std::sqrt(h.w[i]) * airy(h.x[i] + h.x[j] + s) * std::sqrt(h.w[j]);
    return b;
}

}  // namespace

AiryHankelDeterminants airy_hankel_determinants(double s, int nodes) {
    const Eigen::MatrixXd b = hankel_operator(s, nodes);
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(nodes, nodes);
    return {Eigen::PartialPivLU<Eigen::MatrixXd>(id - b).determinant(),
            Eigen::PartialPivLU<Eigen::MatrixXd>(id + b).determinant()};
}

namespace {

double tw_raw(int beta, double s, int nodes) {
    return beta == 2 ? det_airy_kernel(s, nodes) : airy_hankel_determinants(s, nodes).minus;
}

}  // namespace

TracyWidomValue tracy_widom_cdf(int beta, double s, int nodes) {
    if (beta != 1 && beta != 2) throw std::invalid_argument("tracy_widom_cdf: beta must be 1 or 2");
    if (nodes < 4) throw std::invalid_argument("tracy_widom_cdf: too few nodes");
    TracyWidomValue v;
    if (s < kTwLow || s > kTwHigh) {
        v.clamped = true;
        s = std::clamp(s, kTwLow, kTwHigh);
    }
    const double f = tw_raw(beta, s, nodes);
    v.cdf = std::clamp(f, 0.0, 1.0);
    return v;
}

DistributionMoments tracy_widom_moments(int beta, int nodes) {
    if (beta != 1 && beta != 2) throw std::invalid_argument("tracy_widom_moments: beta must be 1 or 2");
    // The beta=1 right tail at s=6 is still ~1e-6, so integrate further out.
    const double lo = kTwLow, hi = 12.0;
    const GaussRule g = gauss_legendre(16);
    double i0 = 0.0, i1 = 0.0;
    for (double a = lo; a < hi - 1e-12; a += 1.0) {
        for (std::size_t q = 0; q < g.x.size(); ++q) {
            const double s = a + 0.5 * (g.x[q] + 1.0);
            const double f = std::clamp(tw_raw(beta, s, nodes), 0.0, 1.0);
            i0 += 0.5 * g.w[q] * f;
            i1 += 0.5 * g.w[q] * s * f;
        }
    }
    const double flo = std::clamp(tw_raw(beta, lo, nodes), 0.0, 1.0);
    const double fhi = std::clamp(tw_raw(beta, hi, nodes), 0.0, 1.0);
    DistributionMoments m;
    // integration by parts: E S = [s F] - int F,  E S^2 = [s^2 F] - 2 int s F
    m.mean = hi * fhi - lo * flo - i0;
    const double second = hi * hi * fhi - lo * lo * flo - 2.0 * i1;
    m.variance = second - m.mean * m.mean;
    return m;
}

double GaussianReference::pdf(double x) const {
    return std::exp(-x * x / (2.0 * variance)) / std::sqrt(2.0 * M_PI * variance);
}

double GaussianReference::cdf(double x) const { return 0.5 * std::erfc(-x / std::sqrt(2.0 * variance)); }

GaussianReference gaussian_reference(int beta) {
    if (beta != 1 && beta != 2) throw std::invalid_argument("gaussian_reference: beta must be 1 or 2");
    return GaussianReference{2.0 / beta};
}

}  // namespace mpl
