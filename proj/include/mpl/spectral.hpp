#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "mpl/ensembles.hpp"

namespace mpl {

/// Eigenvalues in decreasing order; column j of eigenvectors belongs to
/// eigenvalues(j). Partial decompositions keep only the leading columns.
template <class Scalar>
struct SpectralData {
    Eigen::VectorXd eigenvalues;
    Dense<Scalar> eigenvectors;

    Index dim() const { return eigenvectors.rows() > 0 ? eigenvectors.rows() : eigenvalues.size(); }
    Index count() const { return eigenvalues.size(); }
    /// Smallest gap between consecutive stored eigenvalues (+inf if fewer than two).
    double min_gap() const;
};

/// Rotates every column so that its largest-modulus entry is real and positive.
template <class Scalar>
void normalize_phases(Dense<Scalar>& v);

template <class Scalar>
SpectralData<Scalar> eigh(const HermitianMatrix<Scalar>& h);

/// All eigenvalues, decreasing.
template <class Scalar>
Eigen::VectorXd eigvalsh(const HermitianMatrix<Scalar>& h);

/// Top m eigenpairs by the LAPACK index-range driver.
template <class Scalar>
SpectralData<Scalar> eigh_top(const HermitianMatrix<Scalar>& h, Index m, bool vectors = true);

struct LanczosOptions {
    Index max_krylov = 400;
    double tolerance = 1e-12;  // residual norm relative to max(1, |lambda_1|)
    Index check_every = 8;
    /// Below this dimension the dense driver is used instead.
    Index dense_cutoff = 300;
};

/// Top m eigenpairs by Lanczos with full reorthogonalisation. The start
/// vector is drawn from rng, so the result depends on it only through float
/// rounding.
template <class Scalar>
SpectralData<Scalar> lanczos_top(const HermitianMatrix<Scalar>& h, Index m, Engine& rng,
                                 const LanczosOptions& opts = {});

// ---- semicircle ------------------------------------------------------------

double semicircle_density(double x);
/// P(X <= x) for the standard semicircle law on [-2, 2].
double semicircle_cdf(double x);

struct ClassicalLocations {
    Index n = 0;
    double scale = 1.0;
    Eigen::VectorXd gamma;  // gamma(j-1) = gamma_j, decreasing
};

/// gamma_j with mass j/n of the rescaled semicircle to its right.
ClassicalLocations semicircle_quantiles(Index n, double scale);

struct RigidityReport {
    double max_scaled = 0.0;
    Eigen::VectorXd profile;
};

RigidityReport rigidity_report(const Eigen::VectorXd& eigenvalues, const ClassicalLocations& g);

struct InterlacingReport {
    bool holds = true;
    double margin = 0.0;  // min over all slacks; negative means a violation
};

/// Checks lambda_n(i) >= lambda_minor(i) >= lambda_n(i+1). Lengths must be n and n-1.
InterlacingReport check_interlacing(const Eigen::VectorXd& lambda_n, const Eigen::VectorXd& lambda_minor,
                                    double tolerance = 0.0);

// ---- resolvents ------------------------------------------------------------

struct ResolventProbe {
    cplx z;
    explicit ResolventProbe(cplx z_);
    double E() const { return z.real(); }
    double eta() const { return z.imag(); }
};

template <class Scalar>
Dense<cplx> resolvent(const HermitianMatrix<Scalar>& h, ResolventProbe probe);

/// (A + A^*)/2 and (A - A^*)/(2i).
Dense<cplx> herm_part(const Dense<cplx>& a);
Dense<cplx> antiherm_part(const Dense<cplx>& a);

/// max |(G G^* - Im G / eta)_{ij}|.
double ward_residual(const Dense<cplx>& g, double eta);

/// Normalised trace Tr(A)/dim.
cplx normalized_trace(const Dense<cplx>& a);

// ---- Schur-complement deformation -----------------------------------------

struct DeformationData {
    Index N = 0;
    Index k = 0;
    double E1 = 0.0;
    double eta1 = 0.0;
    Dense<cplx> corner_resolvent;  // (H^[k] - z)^{-1}, k x k
    Dense<cplx> D;               // (N-k) x (N-k); empty if not materialised
    Eigen::VectorXd re_spectrum;  // the k eigenvalues of Re D that can be nonzero, decreasing
};

/// D = X (H^[k] - z)^{-1} X^* for the top-left corner of size k. The
/// spectrum of Re D is taken from the k x k compression S^{1/2} B S^{1/2},
/// S = X^* X, B = Re (H^[k] - z)^{-1}.
template <class Scalar>
DeformationData schur_deformation(const HermitianMatrix<Scalar>& h, Index k, ResolventProbe probe,
                                  bool materialize = true);

/// |N^{-1} Tr[Im G(z1) Im F(z2)] - N^{-1} Tr[Im (H' - D - z1)^{-1} Im (H' - z2)^{-1}]|
/// with F the zero-padded minor resolvent and H' the minor.
template <class Scalar>
double schur_identity_residual(const HermitianMatrix<Scalar>& h, Index k, cplx z1, cplx z2);

struct DeformationReport {
    double xx_deviation = 0.0;      // ||X^* X - I_k||
    double im_d_min_eig = 0.0;
    double im_d_norm_ratio = 0.0;   // ||Im D|| / (eta1 / E1^2)
    double re_d_fluctuation = 0.0;  // <(Re D - <Re D>)^2>
    double re_d_fluctuation_ratio = 0.0;  // divided by k/N
    double re_d_norm = 0.0;
    double sandwich_min = 0.0;
    double sandwich_max = 0.0;
};

template <class Scalar>
DeformationReport deformation_diagnostics(const DeformationData& d, const Dense<Scalar>& x,
                                          const HermitianMatrix<Scalar>& minor, Engine& rng, int probes = 8);

struct TwoResolventRatio {
    double lhs = 0.0;          // <Im (H' - Re D - z1)^{-1} Im (H' - z2)^{-1}>
    double fluctuation = 0.0;  // <(Re D - <Re D>)^2>
    double ratio = 0.0;        // lhs * fluctuation
};

template <class Scalar>
TwoResolventRatio two_resolvent_ratio(const HermitianMatrix<Scalar>& minor, const DeformationData& d, cplx z1,
                                      cplx z2);

// ---- scalar reduction of the deformed Dyson equation -----------------------
//
// With r = len(mu):  omega + N^{-1} [ (N-k-r)/omega + sum_j 1/(mu_j + omega) ] = z.
// Zero entries of mu may be added or dropped without changing the equation.

cplx omega_equation(cplx omega, const Eigen::VectorXd& mu, Index k, Index N, cplx z);

/// Physical root (Im omega >= 0, continued from large Im z).
cplx solve_omega(const Eigen::VectorXd& mu, Index k, Index N, cplx z);

struct EdgeLocation {
    double omega_plus = 0.0;
    double E_plus = 0.0;
    double residual = 0.0;  // |N^{-1} sum |mu + omega_+|^{-2} - 1|
};

EdgeLocation edge_location(const Eigen::VectorXd& mu, Index k, Index N);

}  // namespace mpl
