#pragma once

#include <cmath>
#include <complex>

namespace mpl::detail {

inline double conj_s(double x) { return x; }
inline std::complex<double> conj_s(std::complex<double> x) { return std::conj(x); }

inline double real_s(double x) { return x; }
inline double real_s(std::complex<double> x) { return x.real(); }

inline double abs2(double x) { return x * x; }
inline double abs2(std::complex<double> x) { return std::norm(x); }

inline bool finite_s(double x) { return std::isfinite(x); }
inline bool finite_s(std::complex<double> x) { return std::isfinite(x.real()) && std::isfinite(x.imag()); }

}  // namespace mpl::detail
