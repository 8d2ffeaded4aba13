#pragma once

#include <complex>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "mpl/rng.hpp"

namespace mpl {

using Index = Eigen::Index;
using cplx = std::complex<double>;

template <class Scalar>
using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Raised when a computation cannot meet its own accuracy contract.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Symmetry { real, complex };
enum class EntryLaw { gaussian, rademacher, uniform };

std::string to_string(Symmetry s);
std::string to_string(EntryLaw law);
EntryLaw parse_entry_law(const std::string& name);

template <class Scalar>
struct scalar_traits;

template <>
struct scalar_traits<double> {
    static constexpr Symmetry symmetry = Symmetry::real;
    static constexpr int beta = 1;
};

template <>
struct scalar_traits<cplx> {
    static constexpr Symmetry symmetry = Symmetry::complex;
    static constexpr int beta = 2;
};

struct EnsembleSpec {
    Symmetry symmetry = Symmetry::complex;
    EntryLaw entry_law = EntryLaw::gaussian;
    Index dimension = 1;
};

/// Dense Hermitian matrix. The stored array is exactly Hermitian: every
/// constructor path checks entries(i,j) == conj(entries(j,i)) bit for bit.
template <class Scalar>
class HermitianMatrix {
public:
    using scalar_type = Scalar;
    using matrix_type = Dense<Scalar>;

    HermitianMatrix() = default;

    /// Throws std::invalid_argument unless m is square, finite and exactly Hermitian.
    static HermitianMatrix from_dense(matrix_type m);
    static HermitianMatrix zero(Index n);
    static HermitianMatrix diagonal(const Eigen::VectorXd& d);

    Index dim() const { return m_.rows(); }
    const matrix_type& entries() const { return m_; }
    Scalar operator()(Index i, Index j) const { return m_(i, j); }

    /// Lower-right principal block of size n.
    HermitianMatrix lower_right(Index n) const;

    /// a*this + b*other. Real coefficients keep the result exactly Hermitian.
    HermitianMatrix combine(double a, const HermitianMatrix& other, double b) const;

    double max_abs() const;

private:
    explicit HermitianMatrix(matrix_type m) : m_(std::move(m)) {}
    matrix_type m_;
};

/// Blocks of H = [[top_corner, off_block^*], [off_block, minor]].
template <class Scalar>
struct CornerDecomposition {
    HermitianMatrix<Scalar> top_corner;
    Dense<Scalar> off_block;
    HermitianMatrix<Scalar> minor;

    Dense<Scalar> reassemble() const;
};

/// Wigner matrix h = chi / sqrt(N). Throws if spec.symmetry does not match Scalar.
template <class Scalar>
HermitianMatrix<Scalar> sample_wigner(const EnsembleSpec& spec, Engine& rng);

/// GOE (real, diagonal variance 2v) or GUE (complex, diagonal variance v) with
/// off-diagonal E|h|^2 = v.
template <class Scalar>
HermitianMatrix<Scalar> sample_invariant(Index n, double variance, Engine& rng);

template <class Scalar>
CornerDecomposition<Scalar> corner_decompose(const HermitianMatrix<Scalar>& h, Index k);

/// exp(-t/2) H0 + sqrt(1 - exp(-t)) U with U Gaussian of the Wigner variance
/// profile (variance 1/N on every entry), so that the first two entrywise
/// moments of a Wigner H0 are kept along the flow.
template <class Scalar>
HermitianMatrix<Scalar> ou_flow_sample(const HermitianMatrix<Scalar>& h0, double t, Engine& rng);

/// H0 + sqrt(t) U with U GOE/GUE normalised by norm_dim (1/norm_dim off-diagonal
/// variance). norm_dim <= 0 means dim(H0).
template <class Scalar>
HermitianMatrix<Scalar> additive_flow_sample(const HermitianMatrix<Scalar>& h0, double t, Engine& rng,
                                             Index norm_dim = 0);

/// Row-major CSV dump. First line: "mpl-matrix,<dim>,<real|complex>". Complex
/// entries take two columns (re, im).
template <class Scalar>
void write_matrix_csv(std::ostream& os, const HermitianMatrix<Scalar>& h);
template <class Scalar>
HermitianMatrix<Scalar> read_matrix_csv(std::istream& is);

}  // namespace mpl
