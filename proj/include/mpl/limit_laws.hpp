#pragma once

#include <vector>

namespace mpl {

struct AiryValues {
    double ai = 0.0;
    double aip = 0.0;
};

/// Ai and Ai' together. Power series in extended precision on [-8.5, 2],
/// the oscillatory asymptotic expansion below, and the modified Bessel
/// integral representation above.
AiryValues airy_pair(double x);
double airy(double x);
double airy_prime(double x);

/// K(X,Y) = int_0^inf Ai(X+u) Ai(Y+u) du in closed form.
double airy_kernel(double X, double Y);

enum class Side { positive, negative };

struct QuadratureConfig {
    double truncation = 0.0;  // 0: chosen from the tail bound
    int panel_count = 0;      // 0: unit-length panels
    double tolerance = 1e-11;  // relative, per panel
    int max_depth = 10;
};

/// positive: int_0^inf e^{-alpha u} Ai(X+u) Ai(Y+u) du
/// negative: int_{-inf}^0 e^{alpha u} Ai(X+u) Ai(Y+u) du   (alpha > 0)
double damped_airy_integral(double alpha, double X, double Y, Side side, const QuadratureConfig& cfg = {});

struct FNKernelParams {
    double alpha = 1.0;
    double X = 0.0;
    double Y = 0.0;
};

/// K(X,X) K(Y,Y) + I_+ I_-, the 2x2 determinant.
double fn_determinant(const FNKernelParams& p, const QuadratureConfig& cfg = {});

/// 4 * fn_determinant.
double fn_joint_intensity(const FNKernelParams& p, const QuadratureConfig& cfg = {});

struct GaussRule {
    std::vector<double> x;
    std::vector<double> w;
};

/// n-point Gauss-Legendre rule on [-1, 1].
GaussRule gauss_legendre(int n);

struct TracyWidomValue {
    double cdf = 0.0;
    bool clamped = false;
};

/// Tracy-Widom CDF for beta in {1, 2}, s in [-10, 6] (clamped outside).
/// beta=2: det(I - K_Ai) on (s, inf); beta=1: det(I - B_s) on (0, inf) with
/// B_s(x,y) = Ai(x+y+s). Both by Nystrom discretisation with `nodes` points.
TracyWidomValue tracy_widom_cdf(int beta, double s, int nodes = 40);

/// Both factors det(I - B_s) and det(I + B_s); their product is F_2(s).
struct AiryHankelDeterminants {
    double minus = 0.0;
    double plus = 0.0;
};
AiryHankelDeterminants airy_hankel_determinants(double s, int nodes = 40);

struct DistributionMoments {
    double mean = 0.0;
    double variance = 0.0;
};

/// Mean and variance from the CDF by Gauss-Legendre integration on [-10, 12].
DistributionMoments tracy_widom_moments(int beta, int nodes = 40);

struct GaussianReference {
    double variance = 1.0;
    double pdf(double x) const;
    double cdf(double x) const;
};

/// N(0, 2/beta).
GaussianReference gaussian_reference(int beta);

}  // namespace mpl
