#pragma once

#include <complex>
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mpl::detail {

/// Thin wrapper over ?syevr / ?heevr. Returns ascending eigenvalues of the
/// requested index range [il, iu] (1-based, LAPACK convention) and, if
/// wanted, the matching eigenvectors. The input copy is destroyed.
template <class Scalar>
void heevr(Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& a, bool vectors, lapack_int il, lapack_int iu,
           Eigen::VectorXd& w, Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& z) {
    const lapack_int n = static_cast<lapack_int>(a.rows());
    const bool all = (il == 1 && iu == n);
    const char jobz = vectors ? 'V' : 'N';
    const char range = all ? 'A' : 'I';
    const lapack_int want = iu - il + 1;
    w.resize(n);
    z.resize(n, vectors ? want : 1);
    std::vector<lapack_int> isuppz(2 * static_cast<std::size_t>(std::max<lapack_int>(1, want)));
    lapack_int found = 0;
    lapack_int info = 0;
    const lapack_int ldz = std::max<lapack_int>(1, n);
    if constexpr (std::is_same_v<Scalar, double>) {
        info = LAPACKE_dsyevr(LAPACK_COL_MAJOR, jobz, range, 'L', n, a.data(), std::max<lapack_int>(1, n), 0.0, 0.0,
                              il, iu, 0.0, &found, w.data(), z.data(), ldz, isuppz.data());
    } else {
        info = LAPACKE_zheevr(LAPACK_COL_MAJOR, jobz, range, 'L', n, a.data(), std::max<lapack_int>(1, n), 0.0, 0.0,
                              il, iu, 0.0, &found, w.data(), z.data(), ldz, isuppz.data());
    }
    if (info != 0) throw std::runtime_error("LAPACK eigensolver failed, info=" + std::to_string(info));
    w.conservativeResize(found);
    if (vectors) z.conservativeResize(n, found);
}

}  // namespace mpl::detail
