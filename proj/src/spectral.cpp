#include "mpl/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "lapack_driver.hpp"
#include "scalar_util.hpp"

namespace mpl {

namespace {

template <class Scalar>
Dense<Scalar> reverse_columns(const Dense<Scalar>& z) {
    return z.rowwise().reverse();
}

template <class Scalar>
SpectralData<Scalar> from_ascending(const Eigen::VectorXd& w, const Dense<Scalar>& z, bool vectors) {
    SpectralData<Scalar> s;
    s.eigenvalues = w.reverse();
    if (vectors) {
        s.eigenvectors = reverse_columns(z);
        normalize_phases(s.eigenvectors);
    }
    return s;
}

template <class Scalar>
Dense<cplx> to_complex(const Dense<Scalar>& a) {
    return a.template cast<cplx>();
}

double trace_product_real(const Dense<cplx>& a, const Dense<cplx>& b) {
    return (a.cwiseProduct(b.transpose())).sum().real();
}

}  // namespace

template <class Scalar>
double SpectralData<Scalar>::min_gap() const {
    double g = std::numeric_limits<double>::infinity();
    for (Index i = 0; i + 1 < eigenvalues.size(); ++i) g = std::min(g, eigenvalues(i) - eigenvalues(i + 1));
    return g;
}

template <class Scalar>
void normalize_phases(Dense<Scalar>& v) {
    for (Index j = 0; j < v.cols(); ++j) {
        Index arg = 0;
        v.col(j).cwiseAbs().maxCoeff(&arg);
        const Scalar p = v(arg, j);
        const double a = std::abs(p);
        if (a == 0.0) continue;
        v.col(j) *= detail::conj_s(p) / a;
        v(arg, j) = Scalar(a);
    }
}

template <class Scalar>
SpectralData<Scalar> eigh(const HermitianMatrix<Scalar>& h) {
    const Index n = h.dim();
    if (n == 0) return {};
    Dense<Scalar> a = h.entries();
    Eigen::VectorXd w;
    Dense<Scalar> z;
    detail::heevr(a, true, 1, static_cast<lapack_int>(n), w, z);
    return from_ascending(w, z, true);
}

template <class Scalar>
Eigen::VectorXd eigvalsh(const HermitianMatrix<Scalar>& h) {
    const Index n = h.dim();
    if (n == 0) return {};
    Dense<Scalar> a = h.entries();
    Eigen::VectorXd w;
    Dense<Scalar> z;
    detail::heevr(a, false, 1, static_cast<lapack_int>(n), w, z);
    return w.reverse();
}

template <class Scalar>
SpectralData<Scalar> eigh_top(const HermitianMatrix<Scalar>& h, Index m, bool vectors) {
    const Index n = h.dim();
    if (m < 1 || m > n) throw std::invalid_argument("eigh_top: m out of range");
    Dense<Scalar> a = h.entries();
    Eigen::VectorXd w;
    Dense<Scalar> z;
    detail::heevr(a, vectors, static_cast<lapack_int>(n - m + 1), static_cast<lapack_int>(n), w, z);
    return from_ascending(w, z, vectors);
}

template <class Scalar>
SpectralData<Scalar> lanczos_top(const HermitianMatrix<Scalar>& h, Index m, Engine& rng, const LanczosOptions& o) {
    const Index n = h.dim();
    if (m < 1 || m > n) throw std::invalid_argument("lanczos_top: m out of range");
    if (n <= o.dense_cutoff) return eigh_top(h, m, true);

    const Index kmax = std::min(o.max_krylov, n);
    const auto& a = h.entries();
    Dense<Scalar> q(n, kmax);
    std::normal_distribution<double> g;
    Vec<Scalar> v(n);
    for (Index i = 0; i < n; ++i) {
        if constexpr (std::is_same_v<Scalar, double>) {
            v(i) = g(rng);
        } else {
            const double re = g(rng);
            v(i) = cplx(re, g(rng));
        }
    }
    q.col(0) = v / v.norm();

    std::vector<double> alpha, beta;
    Vec<Scalar> w(n);
    Eigen::MatrixXd ritz;
    Eigen::VectorXd theta;
    bool converged = false;
    Index used = 0;
    for (Index j = 0; j < kmax; ++j) {
        w.noalias() = a.template selfadjointView<Eigen::Lower>() * q.col(j);
        const double aj = detail::real_s(q.col(j).dot(w));
        alpha.push_back(aj);
        w -= aj * q.col(j);
        if (j > 0) w -= beta[j - 1] * q.col(j - 1);
        for (int pass = 0; pass < 2; ++pass) {
            Vec<Scalar> c = q.leftCols(j + 1).adjoint() * w;
            w.noalias() -= q.leftCols(j + 1) * c;
        }
        const double bj = w.norm();
        used = j + 1;
        const bool breakdown = bj < 1e-13 * std::max(1.0, std::abs(aj));
        const bool due = used >= 2 * m + 4 && (used % o.check_every == 0 || used == kmax || breakdown);
        if (due) {
            Eigen::VectorXd diag = Eigen::Map<Eigen::VectorXd>(alpha.data(), used);
            Eigen::VectorXd sub = Eigen::Map<Eigen::VectorXd>(beta.data(), used - 1);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
            es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
            theta = es.eigenvalues();
            ritz = es.eigenvectors();
            const double scale = std::max(1.0, std::abs(theta(used - 1)));
            bool ok = true;
            for (Index i = 0; i < m && ok; ++i) {
                const Index c = used - 1 - i;
                ok = bj * std::abs(ritz(used - 1, c)) < o.tolerance * scale;
            }
            if (ok || breakdown) {
                converged = ok;
                break;
            }
        }
        if (breakdown) break;
        beta.push_back(bj);
        if (j + 1 < kmax) q.col(j + 1) = w / bj;
    }
    if (!converged || used < m) return eigh_top(h, m, true);

    SpectralData<Scalar> s;
    s.eigenvalues.resize(m);
    Dense<Scalar> y(used, m);
    for (Index i = 0; i < m; ++i) {
        const Index c = used - 1 - i;
        s.eigenvalues(i) = theta(c);
        y.col(i) = ritz.col(c).template cast<Scalar>();
    }
    s.eigenvectors = q.leftCols(used) * y;
    for (Index i = 0; i < m; ++i) s.eigenvectors.col(i).normalize();
    normalize_phases(s.eigenvectors);
    return s;
}

// ---- semicircle ------------------------------------------------------------

double semicircle_density(double x) {
    if (std::abs(x) >= 2.0) return 0.0;
    return std::sqrt(4.0 - x * x) / (2.0 * M_PI);
}

double semicircle_cdf(double x) {
    if (x <= -2.0) return 0.0;
    if (x >= 2.0) return 1.0;
    return 0.5 + x * std::sqrt(4.0 - x * x) / (4.0 * M_PI) + std::asin(x / 2.0) / M_PI;
}

ClassicalLocations semicircle_quantiles(Index n, double scale) {
    if (n < 1) throw std::invalid_argument("semicircle_quantiles: n must be positive");
    if (!(scale > 0.0 && scale <= 1.0)) throw std::invalid_argument("semicircle_quantiles: scale must lie in (0, 1]");
    ClassicalLocations g;
    g.n = n;
    g.scale = scale;
    g.gamma.resize(n);
    for (Index j = 1; j <= n; ++j) {
        const double target = 1.0 - static_cast<double>(j) / static_cast<double>(n);
        double lo = -2.0, hi = 2.0;
        if (j == n) {
            hi = -2.0;
        } else {
            while (hi - lo > 1e-15) {
                const double mid = 0.5 * (lo + hi);
                if (semicircle_cdf(mid) < target) lo = mid; else hi = mid;
                if (mid == lo && mid == hi) break;
            }
        }
        g.gamma(j - 1) = scale * 0.5 * (lo + hi);
    }
    return g;
}

RigidityReport rigidity_report(const Eigen::VectorXd& eigenvalues, const ClassicalLocations& g) {
    if (eigenvalues.size() != g.n) throw std::invalid_argument("rigidity_report: size mismatch");
    RigidityReport r;
    r.profile.resize(g.n);
    const double n = static_cast<double>(g.n);
    for (Index i = 0; i < g.n; ++i) {
        const double idx = static_cast<double>(std::min(i + 1, g.n - i));
        r.profile(i) = std::abs(eigenvalues(i) - g.gamma(i)) * std::cbrt(idx) * std::pow(n, 2.0 / 3.0);
    }
    r.max_scaled = g.n ? r.profile.maxCoeff() : 0.0;
    return r;
}

InterlacingReport check_interlacing(const Eigen::VectorXd& lambda_n, const Eigen::VectorXd& lambda_minor,
                                    double tolerance) {
    if (lambda_minor.size() + 1 != lambda_n.size()) throw std::invalid_argument("check_interlacing: lengths must be n and n-1");
    InterlacingReport r;
    r.margin = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < lambda_minor.size(); ++i) {
        r.margin = std::min(r.margin, lambda_n(i) - lambda_minor(i));
        r.margin = std::min(r.margin, lambda_minor(i) - lambda_n(i + 1));
    }
    if (lambda_minor.size() == 0) r.margin = 0.0;
    r.holds = r.margin >= -tolerance;
    return r;
}

// ---- resolvents ------------------------------------------------------------

ResolventProbe::ResolventProbe(cplx z_) : z(z_) {
    if (z.imag() == 0.0 || !std::isfinite(z.real()) || !std::isfinite(z.imag()))
        throw std::invalid_argument("resolvent probe needs a finite z with Im z != 0");
}

template <class Scalar>
Dense<cplx> resolvent(const HermitianMatrix<Scalar>& h, ResolventProbe probe) {
    Dense<cplx> a = to_complex<Scalar>(h.entries());
    a.diagonal().array() -= probe.z;
    Eigen::PartialPivLU<Dense<cplx>> lu(a);
    return lu.inverse();
}

Dense<cplx> herm_part(const Dense<cplx>& a) { return 0.5 * (a + a.adjoint()); }

Dense<cplx> antiherm_part(const Dense<cplx>& a) { return (a - a.adjoint()) / cplx(0.0, 2.0); }

double ward_residual(const Dense<cplx>& g, double eta) {
    Dense<cplx> lhs = g * g.adjoint();
    return (lhs - antiherm_part(g) / eta).cwiseAbs().maxCoeff();
}

cplx normalized_trace(const Dense<cplx>& a) { return a.trace() / static_cast<double>(a.rows()); }

// ---- Schur deformation -----------------------------------------------------

namespace {

Dense<cplx> psd_sqrt(const Dense<cplx>& s) {
    Eigen::SelfAdjointEigenSolver<Dense<cplx>> es(s);
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

// Eigenvalues of X B X^* that can be nonzero, through the k x k compression.
Eigen::VectorXd compressed_spectrum(const Dense<cplx>& s_half, const Dense<cplx>& b) {
    Dense<cplx> c = s_half * b * s_half;
    c = herm_part(c);
    Eigen::SelfAdjointEigenSolver<Dense<cplx>> es(c, Eigen::EigenvaluesOnly);
    return es.eigenvalues().reverse();
}

template <class Scalar>
Dense<cplx> corner_resolvent(const HermitianMatrix<Scalar>& h, Index k, cplx z) {
    Dense<cplx> a = to_complex<Scalar>(h.entries().topLeftCorner(k, k));
    a.diagonal().array() -= z;
    return Eigen::PartialPivLU<Dense<cplx>>(a).inverse();
}

}  // namespace

template <class Scalar>
DeformationData schur_deformation(const HermitianMatrix<Scalar>& h, Index k, ResolventProbe probe, bool materialize) {
    const Index n = h.dim();
    if (k < 1 || k >= n) throw std::invalid_argument("schur_deformation: k out of range");
    if (probe.eta() <= 0.0) throw std::invalid_argument("schur_deformation: eta must be positive");
    DeformationData d;
    d.N = n;
    d.k = k;
    d.E1 = probe.E();
    d.eta1 = probe.eta();
    const Dense<cplx> x = to_complex<Scalar>(h.entries().bottomLeftCorner(n - k, k));
    const Dense<cplx> a = corner_resolvent(h, k, probe.z);
    d.corner_resolvent = a;
    if (materialize) d.D = x * a * x.adjoint();
    const Dense<cplx> s = x.adjoint() * x;
    d.re_spectrum = compressed_spectrum(psd_sqrt(herm_part(s)), herm_part(a));
    return d;
}

template <class Scalar>
double schur_identity_residual(const HermitianMatrix<Scalar>& h, Index k, cplx z1, cplx z2) {
    const Index n = h.dim();
    const double nn = static_cast<double>(n);
    const auto minor = h.lower_right(n - k);
    const Dense<cplx> g1 = resolvent(h, ResolventProbe(z1));
    const Dense<cplx> gm2 = resolvent(minor, ResolventProbe(z2));
    const Dense<cplx> im_f = antiherm_part(gm2);
    const double lhs = trace_product_real(antiherm_part(g1.bottomRightCorner(n - k, n - k)), im_f) / nn;

    const DeformationData d = schur_deformation(h, k, ResolventProbe(cplx(z1.real(), std::abs(z1.imag()))), true);
    // D(conj z) = D(z)^* because the corner is Hermitian.
    Dense<cplx> a = to_complex<Scalar>(minor.entries()) - (z1.imag() > 0 ? d.D : Dense<cplx>(d.D.adjoint()));
    a.diagonal().array() -= z1;
    const Dense<cplx> deformed = Eigen::PartialPivLU<Dense<cplx>>(a).inverse();
    const double rhs = trace_product_real(antiherm_part(deformed), im_f) / nn;
    return std::abs(lhs - rhs);
}

template <class Scalar>
DeformationReport deformation_diagnostics(const DeformationData& d, const Dense<Scalar>& x_in,
                                          const HermitianMatrix<Scalar>& minor, Engine& rng, int probes) {
    const Index n = d.N - d.k;
    if (x_in.rows() != n || x_in.cols() != d.k || minor.dim() != n)
        throw std::invalid_argument("deformation_diagnostics: inconsistent shapes");
    DeformationReport r;
    const Dense<cplx> x = to_complex<Scalar>(x_in);
    const Dense<cplx> s = herm_part(x.adjoint() * x);
    {
        Dense<cplx> dev = s - Dense<cplx>::Identity(d.k, d.k);
        Eigen::SelfAdjointEigenSolver<Dense<cplx>> es(dev, Eigen::EigenvaluesOnly);
        r.xx_deviation = es.eigenvalues().cwiseAbs().maxCoeff();
    }
    {
        // Im D = X Im(A) X^*: its spectrum is the compression's plus zeros.
        const Eigen::VectorXd im_spec = compressed_spectrum(psd_sqrt(s), antiherm_part(d.corner_resolvent));
        double lo = im_spec.minCoeff();
        if (n > d.k) lo = std::min(lo, 0.0);
        r.im_d_min_eig = lo;
        r.im_d_norm_ratio = im_spec.cwiseAbs().maxCoeff() / (d.eta1 / (d.E1 * d.E1));
    }
    const double nn = static_cast<double>(n);
    const double mean = d.re_spectrum.sum() / nn;
    r.re_d_fluctuation = d.re_spectrum.squaredNorm() / nn - mean * mean;
    r.re_d_fluctuation_ratio = r.re_d_fluctuation / (static_cast<double>(d.k) / static_cast<double>(d.N));
    r.re_d_norm = d.re_spectrum.size() ? d.re_spectrum.cwiseAbs().maxCoeff() : 0.0;

    if (probes > 0) {
        if (d.D.size() == 0) throw std::invalid_argument("deformation_diagnostics: D was not materialised");
        const Dense<cplx> im_d = antiherm_part(d.D);
        Dense<cplx> base = to_complex<Scalar>(minor.entries()) - herm_part(d.D);
        base.diagonal().array() -= d.E1;
        Dense<cplx> plain = base;
        plain.diagonal().array() -= cplx(0.0, d.eta1);
        Dense<cplx> deformed = base - cplx(0.0, 1.0) * im_d;
        deformed.diagonal().array() -= cplx(0.0, d.eta1);
        Eigen::PartialPivLU<Dense<cplx>> lu_plain(plain), lu_def(deformed);
        std::normal_distribution<double> g;
        r.sandwich_min = std::numeric_limits<double>::infinity();
        r.sandwich_max = -std::numeric_limits<double>::infinity();
        for (int p = 0; p < probes; ++p) {
            Vec<cplx> v(n);
            for (Index i = 0; i < n; ++i) {
                const double re = g(rng);
                v(i) = cplx(re, g(rng));
            }
            const double num = v.dot(lu_def.solve(v)).imag();
            const double den = v.dot(lu_plain.solve(v)).imag();
            const double q = num / den;
            r.sandwich_min = std::min(r.sandwich_min, q);
            r.sandwich_max = std::max(r.sandwich_max, q);
        }
    }
    return r;
}

template <class Scalar>
TwoResolventRatio two_resolvent_ratio(const HermitianMatrix<Scalar>& minor, const DeformationData& d, cplx z1, cplx z2) {
    const Index n = minor.dim();
    if (n != d.N - d.k) throw std::invalid_argument("two_resolvent_ratio: inconsistent shapes");
    if (z1.imag() == 0.0 || z2.imag() == 0.0) throw std::invalid_argument("two_resolvent_ratio: Im z must be nonzero");
    if (d.D.size() == 0) throw std::invalid_argument("two_resolvent_ratio: D was not materialised");
    const double nn = static_cast<double>(n);
    Dense<cplx> a1 = to_complex<Scalar>(minor.entries()) - herm_part(d.D);
    a1.diagonal().array() -= z1;
    Dense<cplx> a2 = to_complex<Scalar>(minor.entries());
    a2.diagonal().array() -= z2;
    const Dense<cplx> r1 = Eigen::PartialPivLU<Dense<cplx>>(a1).inverse();
    const Dense<cplx> r2 = Eigen::PartialPivLU<Dense<cplx>>(a2).inverse();
    TwoResolventRatio out;
    out.lhs = trace_product_real(antiherm_part(r1), antiherm_part(r2)) / nn;
    const double mean = d.re_spectrum.sum() / nn;
    out.fluctuation = d.re_spectrum.squaredNorm() / nn - mean * mean;
    out.ratio = out.lhs * out.fluctuation;
    return out;
}

// ---- scalar Dyson equation -------------------------------------------------

namespace {

struct OmegaSystem {
    const Eigen::VectorXd& mu;
    double c;     // (N - k - r) / N
    double invN;

    cplx f(cplx w, cplx z) const {
        cplx s = 0.0;
        for (Index j = 0; j < mu.size(); ++j) s += 1.0 / (mu(j) + w);
        return w + c / w + invN * s - z;
    }
    cplx df(cplx w) const {
        cplx s = 0.0;
        for (Index j = 0; j < mu.size(); ++j) {
            const cplx t = 1.0 / (mu(j) + w);
            s += t * t;
        }
        return 1.0 - c / (w * w) - invN * s;
    }
    double g(double w) const {  // N^{-1} sum over the full spectrum of (mu + w)^{-2}
        double s = c / (w * w);
        for (Index j = 0; j < mu.size(); ++j) s += invN / ((mu(j) + w) * (mu(j) + w));
        return s;
    }
    double dg(double w) const {
        double s = -2.0 * c / (w * w * w);
        for (Index j = 0; j < mu.size(); ++j) s -= 2.0 * invN / std::pow(mu(j) + w, 3);
        return s;
    }
};

OmegaSystem make_system(const Eigen::VectorXd& mu, Index k, Index N) {
    if (N < 1 || k < 0 || k >= N) throw std::invalid_argument("omega equation: need 0 <= k < N");
    const Index r = mu.size();
    if (r > N - k) throw std::invalid_argument("omega equation: more deformation eigenvalues than the minor size");
    return OmegaSystem{mu, static_cast<double>(N - k - r) / static_cast<double>(N), 1.0 / static_cast<double>(N)};
}

// Damped Newton. Keeps Im w >= 0 when keep_upper is set.
bool newton(const OmegaSystem& sys, cplx z, cplx& w, bool keep_upper, int max_iter = 100) {
    cplx fw = sys.f(w, z);
    for (int it = 0; it < max_iter; ++it) {
        if (std::abs(fw) < 1e-15 * std::max(1.0, std::abs(z))) return true;
        const cplx step = fw / sys.df(w);
        double lam = 1.0;
        bool moved = false;
        for (int h = 0; h < 40; ++h, lam *= 0.5) {
            const cplx cand = w - lam * step;
            if (keep_upper && cand.imag() < 0.0) continue;
            const cplx fc = sys.f(cand, z);
            if (std::isfinite(std::abs(fc)) && std::abs(fc) < std::abs(fw)) {
                w = cand;
                fw = fc;
                moved = true;
                break;
            }
        }
        if (!moved) break;
    }
    return std::abs(fw) < 1e-12;
}

}  // namespace

cplx omega_equation(cplx omega, const Eigen::VectorXd& mu, Index k, Index N, cplx z) {
    return make_system(mu, k, N).f(omega, z);
}

cplx solve_omega(const Eigen::VectorXd& mu, Index k, Index N, cplx z) {
    if (z.imag() < 0.0) return std::conj(solve_omega(mu, k, N, std::conj(z)));
    const OmegaSystem sys = make_system(mu, k, N);
    const double mu_span = mu.size() ? mu.cwiseAbs().maxCoeff() : 0.0;
    const double top = std::max({8.0, 4.0 * z.imag(), 2.0 * mu_span + 4.0});
    const double target = z.imag() > 0.0 ? z.imag() : 1e-10;

    cplx w(z.real(), top);
    if (!newton(sys, cplx(z.real(), top), w, true)) throw NumericalError("solve_omega: no convergence at the start of the path");
    const int steps = 80;
    for (int s = 1; s <= steps; ++s) {
        const double eta = top * std::pow(target / top, static_cast<double>(s) / steps);
        if (!newton(sys, cplx(z.real(), eta), w, true))
            throw NumericalError("solve_omega: continuation failed at eta=" + std::to_string(eta));
    }
    if (z.imag() == 0.0) {
        cplx wr = w;
        if (newton(sys, z, wr, false) && std::abs(sys.f(wr, z)) < 1e-12) {
            w = wr;
        } else {
            // Real z beyond the edge: the root lies on the real axis right of omega_+.
            const EdgeLocation e = edge_location(mu, k, N);
            if (z.real() < e.E_plus) throw NumericalError("solve_omega: real z inside the support");
            auto fr = [&](double x) { return sys.f(cplx(x, 0.0), z).real(); };
            double lo = e.omega_plus, hi = std::max(2.0 * lo, z.real() + 1.0);
            while (fr(hi) < 0.0) hi *= 2.0;
            for (int it = 0; it < 200 && hi - lo > 1e-16 * hi; ++it) {
                const double mid = 0.5 * (lo + hi);
                (fr(mid) < 0.0 ? lo : hi) = mid;
            }
            w = cplx(0.5 * (lo + hi), 0.0);
        }
        if (std::abs(w.imag()) < 1e-13 * std::abs(w)) w = cplx(w.real(), 0.0);
    }
    if (!(std::abs(sys.f(w, z)) < 1e-12)) throw NumericalError("solve_omega: residual above 1e-12");
    return w;
}

EdgeLocation edge_location(const Eigen::VectorXd& mu, Index k, Index N) {
    const OmegaSystem sys = make_system(mu, k, N);
    double p = 0.0;
    for (Index j = 0; j < mu.size(); ++j) p = std::max(p, -mu(j));
    auto h = [&](double w) { return sys.g(w) - 1.0; };
    double lo = p + 1e-12 * std::max(1.0, p);
    if (!(h(lo) > 0.0)) {
        throw NumericalError("edge_location: no bracket; mu range [" + std::to_string(mu.size() ? mu.minCoeff() : 0.0) +
                             ", " + std::to_string(mu.size() ? mu.maxCoeff() : 0.0) + "]");
    }
    double hi = std::max(2.0 * lo, p + 1.0);
    for (int i = 0; i < 200 && h(hi) > 0.0; ++i) hi *= 2.0;
    if (h(hi) > 0.0) throw NumericalError("edge_location: no bracket on the right");
    for (int it = 0; it < 200 && hi - lo > 4e-16 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (h(mid) > 0.0 ? lo : hi) = mid;
    }
    double w = 0.5 * (lo + hi);
    for (int it = 0; it < 3; ++it) {
        const double step = h(w) / sys.dg(w);
        if (w - step > lo && w - step < hi) w -= step;
    }
    EdgeLocation e;
    e.omega_plus = w;
    e.E_plus = sys.f(cplx(w, 0.0), cplx(0.0, 0.0)).real();
    e.residual = std::abs(h(w));
    return e;
}

#define MPL_INSTANTIATE(S)                                                                                       \
    template struct SpectralData<S>;                                                                             \
    template void normalize_phases<S>(Dense<S>&);                                                                \
    template SpectralData<S> eigh<S>(const HermitianMatrix<S>&);                                                 \
    template Eigen::VectorXd eigvalsh<S>(const HermitianMatrix<S>&);                                             \
    template SpectralData<S> eigh_top<S>(const HermitianMatrix<S>&, Index, bool);                                \
    template SpectralData<S> lanczos_top<S>(const HermitianMatrix<S>&, Index, Engine&, const LanczosOptions&);   \
    template Dense<cplx> resolvent<S>(const HermitianMatrix<S>&, ResolventProbe);                                \
    template DeformationData schur_deformation<S>(const HermitianMatrix<S>&, Index, ResolventProbe, bool);       \
    template double schur_identity_residual<S>(const HermitianMatrix<S>&, Index, cplx, cplx);                    \
    template DeformationReport deformation_diagnostics<S>(const DeformationData&, const Dense<S>&,               \
                                                          const HermitianMatrix<S>&, Engine&, int);              \
    template TwoResolventRatio two_resolvent_ratio<S>(const HermitianMatrix<S>&, const DeformationData&, cplx,   \
                                                      cplx);

MPL_INSTANTIATE(double)
MPL_INSTANTIATE(cplx)

}  // namespace mpl
