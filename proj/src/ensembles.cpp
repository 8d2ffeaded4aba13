#include "mpl/ensembles.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "scalar_util.hpp"

namespace mpl {

using detail::conj_s;

std::string to_string(Symmetry s) { return s == Symmetry::real ? "real" : "complex"; }

std::string to_string(EntryLaw law) {
    switch (law) {
        case EntryLaw::gaussian: return "gaussian";
        case EntryLaw::rademacher: return "rademacher";
        case EntryLaw::uniform: return "uniform";
    }
    return "unknown";
}

EntryLaw parse_entry_law(const std::string& name) {
    if (name == "gaussian") return EntryLaw::gaussian;
    if (name == "rademacher") return EntryLaw::rademacher;
    if (name == "uniform") return EntryLaw::uniform;
    throw std::invalid_argument("unknown entry law: " + name);
}

template <class Scalar>
HermitianMatrix<Scalar> HermitianMatrix<Scalar>::from_dense(matrix_type m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("matrix is not square");
    const Index n = m.rows();
    for (Index j = 0; j < n; ++j) {
        for (Index i = 0; i <= j; ++i) {
            if (!detail::finite_s(m(i, j))) throw std::invalid_argument("matrix has non-finite entries");
            if (m(i, j) != conj_s(m(j, i))) throw std::invalid_argument("matrix is not exactly Hermitian");
        }
    }
    return HermitianMatrix(std::move(m));
}

template <class Scalar>
HermitianMatrix<Scalar> HermitianMatrix<Scalar>::zero(Index n) {
    return HermitianMatrix(matrix_type::Zero(n, n));
}

template <class Scalar>
HermitianMatrix<Scalar> HermitianMatrix<Scalar>::diagonal(const Eigen::VectorXd& d) {
    matrix_type m = matrix_type::Zero(d.size(), d.size());
    for (Index i = 0; i < d.size(); ++i) m(i, i) = d(i);
    return from_dense(std::move(m));
}

template <class Scalar>
HermitianMatrix<Scalar> HermitianMatrix<Scalar>::lower_right(Index n) const {
    if (n < 0 || n > dim()) throw std::invalid_argument("minor size out of range");
    return HermitianMatrix(m_.bottomRightCorner(n, n));
}

template <class Scalar>
HermitianMatrix<Scalar> HermitianMatrix<Scalar>::combine(double a, const HermitianMatrix& other, double b) const {
    if (other.dim() != dim()) throw std::invalid_argument("dimension mismatch");
    return HermitianMatrix(matrix_type(a * m_ + b * other.m_));
}

template <class Scalar>
double HermitianMatrix<Scalar>::max_abs() const {
    return m_.size() == 0 ? 0.0 : m_.cwiseAbs().maxCoeff();
}

template <class Scalar>
Dense<Scalar> CornerDecomposition<Scalar>::reassemble() const {
    const Index k = top_corner.dim();
    const Index n = k + minor.dim();
    Dense<Scalar> m(n, n);
    m.topLeftCorner(k, k) = top_corner.entries();
    m.bottomLeftCorner(n - k, k) = off_block;
    m.topRightCorner(k, n - k) = off_block.adjoint();
    m.bottomRightCorner(n - k, n - k) = minor.entries();
    return m;
}

namespace {

constexpr double kSqrt3 = 1.7320508075688772;

double draw_real(EntryLaw law, Engine& rng) {
    switch (law) {
        case EntryLaw::gaussian: return std::normal_distribution<double>(0.0, 1.0)(rng);
        case EntryLaw::rademacher: return std::bernoulli_distribution(0.5)(rng) ? 1.0 : -1.0;
        case EntryLaw::uniform: return std::uniform_real_distribution<double>(-kSqrt3, kSqrt3)(rng);
    }
    return 0.0;
}

// Off-diagonal laws with E|x|^2 = 1 and E x^2 = 0.
cplx draw_complex(EntryLaw law, Engine& rng) {
    switch (law) {
        case EntryLaw::gaussian:
        case EntryLaw::uniform: {
            const double a = draw_real(law, rng);
            const double b = draw_real(law, rng);
            return cplx(a, b) * M_SQRT1_2;
        }
        case EntryLaw::rademacher: {
            static const cplx units[4] = {cplx(1, 0), cplx(0, 1), cplx(-1, 0), cplx(0, -1)};
            return units[std::uniform_int_distribution<int>(0, 3)(rng)];
        }
    }
    return {};
}

template <class Scalar>
Scalar draw_offdiag(EntryLaw law, Engine& rng) {
    if constexpr (std::is_same_v<Scalar, double>) {
        return draw_real(law, rng);
    } else {
        return draw_complex(law, rng);
    }
}

// Fills the upper triangle column by column and mirrors it.
template <class Scalar, class Diag, class Off>
HermitianMatrix<Scalar> fill_hermitian(Index n, Diag diag, Off off) {
    Dense<Scalar> m(n, n);
    for (Index j = 0; j < n; ++j) {
        for (Index i = 0; i < j; ++i) {
            const Scalar x = off();
            m(i, j) = x;
            m(j, i) = conj_s(x);
        }
        m(j, j) = Scalar(diag());
    }
    return HermitianMatrix<Scalar>::from_dense(std::move(m));
}

template <class Scalar>
HermitianMatrix<Scalar> gaussian_profile(Index n, double diag_var, double off_var, Engine& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    const double sd = std::sqrt(diag_var);
    const double so = std::sqrt(off_var);
    return fill_hermitian<Scalar>(
        n, [&] { return sd * g(rng); },
        [&]() -> Scalar {
            if constexpr (std::is_same_v<Scalar, double>) {
                return so * g(rng);
            } else {
                const double a = g(rng);
                const double b = g(rng);
                return cplx(a, b) * (so * M_SQRT1_2);
            }
        });
}

}  // namespace

template <class Scalar>
HermitianMatrix<Scalar> sample_wigner(const EnsembleSpec& spec, Engine& rng) {
    if (spec.dimension < 1) throw std::invalid_argument("dimension must be positive");
    if (spec.symmetry != scalar_traits<Scalar>::symmetry)
        throw std::invalid_argument("ensemble symmetry does not match scalar type");
    const double s = 1.0 / std::sqrt(static_cast<double>(spec.dimension));
    return fill_hermitian<Scalar>(
        spec.dimension, [&] { return s * draw_real(spec.entry_law, rng); },
        [&] { return Scalar(s * draw_offdiag<Scalar>(spec.entry_law, rng)); });
}

template <class Scalar>
HermitianMatrix<Scalar> sample_invariant(Index n, double variance, Engine& rng) {
    if (n < 0 || !(variance >= 0.0)) throw std::invalid_argument("bad invariant ensemble parameters");
    const double diag_var = scalar_traits<Scalar>::beta == 1 ? 2.0 * variance : variance;
    return gaussian_profile<Scalar>(n, diag_var, variance, rng);
}

template <class Scalar>
CornerDecomposition<Scalar> corner_decompose(const HermitianMatrix<Scalar>& h, Index k) {
    const Index n = h.dim();
    if (k < 0 || k >= n) throw std::invalid_argument("corner size k out of range");
    const auto& m = h.entries();
    return CornerDecomposition<Scalar>{
        HermitianMatrix<Scalar>::from_dense(m.topLeftCorner(k, k)),
        m.bottomLeftCorner(n - k, k),
        h.lower_right(n - k),
    };
}

template <class Scalar>
HermitianMatrix<Scalar> ou_flow_sample(const HermitianMatrix<Scalar>& h0, double t, Engine& rng) {
    if (!(t >= 0.0)) throw std::invalid_argument("flow time must be nonnegative");
    if (t == 0.0) return h0;
    const double n = static_cast<double>(h0.dim());
    auto u = gaussian_profile<Scalar>(h0.dim(), 1.0 / n, 1.0 / n, rng);
    return h0.combine(std::exp(-t / 2.0), u, std::sqrt(-std::expm1(-t)));
}

template <class Scalar>
HermitianMatrix<Scalar> additive_flow_sample(const HermitianMatrix<Scalar>& h0, double t, Engine& rng,
                                             Index norm_dim) {
    if (!(t >= 0.0)) throw std::invalid_argument("flow time must be nonnegative");
    if (t == 0.0) return h0;
    const double n = static_cast<double>(norm_dim > 0 ? norm_dim : h0.dim());
    auto u = sample_invariant<Scalar>(h0.dim(), 1.0 / n, rng);
    return h0.combine(1.0, u, std::sqrt(t));
}

template <class Scalar>
void write_matrix_csv(std::ostream& os, const HermitianMatrix<Scalar>& h) {
    constexpr bool is_real = std::is_same_v<Scalar, double>;
    os << "mpl-matrix," << h.dim() << ',' << (is_real ? "real" : "complex") << '\n';
    os.precision(17);
    for (Index i = 0; i < h.dim(); ++i) {
        for (Index j = 0; j < h.dim(); ++j) {
            if (j) os << ',';
            if constexpr (is_real) {
                os << h(i, j);
            } else {
                os << h(i, j).real() << ',' << h(i, j).imag();
            }
        }
        os << '\n';
    }
}

template <class Scalar>
HermitianMatrix<Scalar> read_matrix_csv(std::istream& is) {
    constexpr bool is_real = std::is_same_v<Scalar, double>;
    std::string line;
    if (!std::getline(is, line)) throw std::invalid_argument("empty matrix dump");
    std::stringstream head(line);
    std::string tag, dim_s, sym;
    std::getline(head, tag, ',');
    std::getline(head, dim_s, ',');
    std::getline(head, sym, ',');
    if (tag != "mpl-matrix") throw std::invalid_argument("not a matrix dump");
    if (sym != (is_real ? "real" : "complex")) throw std::invalid_argument("symmetry mismatch in dump");
    const Index n = std::stol(dim_s);
    Dense<Scalar> m(n, n);
    for (Index i = 0; i < n; ++i) {
        if (!std::getline(is, line)) throw std::invalid_argument("truncated matrix dump");
        std::stringstream row(line);
        std::string cell;
        for (Index j = 0; j < n; ++j) {
            std::getline(row, cell, ',');
            const double re = std::stod(cell);
            if constexpr (is_real) {
                m(i, j) = re;
            } else {
                std::getline(row, cell, ',');
                m(i, j) = cplx(re, std::stod(cell));
            }
        }
    }
    return HermitianMatrix<Scalar>::from_dense(std::move(m));
}

#define MPL_INSTANTIATE(S)                                                                                  \
    template class HermitianMatrix<S>;                                                                      \
    template struct CornerDecomposition<S>;                                                                 \
    template HermitianMatrix<S> sample_wigner<S>(const EnsembleSpec&, Engine&);                             \
    template HermitianMatrix<S> sample_invariant<S>(Index, double, Engine&);                                \
    template CornerDecomposition<S> corner_decompose<S>(const HermitianMatrix<S>&, Index);                  \
    template HermitianMatrix<S> ou_flow_sample<S>(const HermitianMatrix<S>&, double, Engine&);              \
    template HermitianMatrix<S> additive_flow_sample<S>(const HermitianMatrix<S>&, double, Engine&, Index); \
    template void write_matrix_csv<S>(std::ostream&, const HermitianMatrix<S>&);                            \
    template HermitianMatrix<S> read_matrix_csv<S>(std::istream&);

MPL_INSTANTIATE(double)
MPL_INSTANTIATE(cplx)

}  // namespace mpl
