#include "mpl/minor_chain.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "mpl/spectral.hpp"
#include "scalar_util.hpp"

namespace mpl {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

double repulsion_threshold(Index N, double delta) {
    return std::pow(static_cast<double>(N), -2.0 / 3.0 - delta);
}

template <class Scalar>
Eigen::VectorXcd to_cvec(const Vec<Scalar>& v) {
    return v.template cast<cplx>();
}

// xi-formula quantities for the tracked index i (0-based).
struct XiSums {
    double s1 = 0.0;  // N^{-1} sum |xi|^2 / (lambda - mu)
    double s2 = 0.0;  // N^{-1} sum |xi|^2 / (lambda - mu)^2
};

// lambda - mu(a) including low-order parts; the leading difference is exact
// whenever the two are close.
long double split_diff(double lam, double lam_lo, const Eigen::VectorXd& mu, const Eigen::VectorXd& mu_lo, Index a) {
    const long double lo = static_cast<long double>(lam_lo) - (mu_lo.size() ? mu_lo(a) : 0.0);
    return static_cast<long double>(lam - mu(a)) + lo;
}

XiSums xi_sums(const Eigen::VectorXcd& xi, const Eigen::VectorXd& mu, const Eigen::VectorXd& mu_lo, double lambda,
               double lambda_lo, Index N) {
    long double s1 = 0.0L, s2 = 0.0L;
    for (Index a = 0; a < xi.size(); ++a) {
        const long double d = split_diff(lambda, lambda_lo, mu, mu_lo, a);
        const long double w = std::norm(xi(a));
        s1 += w / d;
        s2 += w / (d * d);
    }
    return {static_cast<double>(s1 / N), static_cast<double>(s2 / N)};
}

double lo_part(const Eigen::VectorXd& lo, Index i) { return lo.size() > i ? lo(i) : 0.0; }

// Rayleigh quotient of column j in extended precision. Near a pole of the
// secular sum the double eigenvalues are not accurate enough.
template <class Scalar>
long double rayleigh_refined(const Dense<Scalar>& h, const Dense<Scalar>& v, Index j) {
    using C = std::complex<long double>;
    const Index n = h.rows();
    long double num = 0.0L, den = 0.0L;
    for (Index c = 0; c < n; ++c) {
        C acc = 0.0L;
        for (Index r = 0; r < n; ++r) acc += std::conj(C(h(r, c))) * C(v(r, j));
        const C w(v(c, j));
        num += (std::conj(w) * acc).real();
        den += std::norm(w);
    }
    return num / den;
}

void store_split(Eigen::VectorXd& hi, Eigen::VectorXd& lo, Index i, long double v) {
    hi(i) = static_cast<double>(v);
    lo(i) = static_cast<double>(v - hi(i));
}

bool full_level(const LevelRecord& level) {
    return level.xi.size() == level.n - 1 && level.minor_eigenvalues.size() == level.n - 1;
}

}  // namespace

template <class Scalar>
MinorChainRecord run_chain(const HermitianMatrix<Scalar>& h, Index k, const ChainOptions& opts) {
    const Index N = h.dim();
    if (k < 1 || k >= N) throw std::invalid_argument("run_chain: need 1 <= k < N");
    if (opts.m < 1 || opts.m > 10) throw std::invalid_argument("run_chain: need 1 <= m <= 10");
    if (!(opts.delta > 0.0 && opts.delta < 1.0 / 3.0)) throw std::invalid_argument("run_chain: need 0 < delta < 1/3");

    MinorChainRecord rec;
    rec.N = N;
    rec.k = k;
    rec.m = std::min(opts.m, N - k);
    rec.delta = opts.delta;
    rec.solver = opts.solver;
    rec.outside_proven_regime = opts.m > 5;
    const Index m = rec.m;
    const double sqrtN = std::sqrt(static_cast<double>(N));
    const double thr = repulsion_threshold(N, opts.delta);

    Engine rng = make_stream(opts.lanczos_seed, 0, Purpose::lanczos);
    auto solve = [&](const HermitianMatrix<Scalar>& hn) {
        if (opts.solver == ChainSolver::full) return eigh(hn);
        return lanczos_top(hn, std::min<Index>(m + 1, hn.dim()), rng);
    };

    SpectralData<Scalar> cur = solve(h);
    const bool full = opts.solver == ChainSolver::full;
    constexpr double refine_window = 1e-3;
    Eigen::VectorXd cur_lo = Eigen::VectorXd::Zero(cur.count());
    if (full)
        for (Index i = 0; i < m; ++i) store_split(cur.eigenvalues, cur_lo, i, rayleigh_refined(h.entries(), cur.eigenvectors, i));
    const Dense<Scalar> top_vectors = cur.eigenvectors.leftCols(m);
    rec.levels.reserve(static_cast<std::size_t>(k));

    for (Index step = 0; step < k; ++step) {
        const Index n = N - step;
        const HermitianMatrix<Scalar> hn = h.lower_right(n);
        const HermitianMatrix<Scalar> hm = h.lower_right(n - 1);
        SpectralData<Scalar> minor = solve(hm);
        Eigen::VectorXd minor_lo = Eigen::VectorXd::Zero(minor.count());
        if (full) {
            for (Index al = 0; al < minor.count(); ++al) {
                bool near = al < m;
                for (Index i = 0; i < m && !near; ++i)
                    near = std::abs(cur.eigenvalues(i) - minor.eigenvalues(al)) < refine_window;
                if (near)
                    store_split(minor.eigenvalues, minor_lo, al, rayleigh_refined(hm.entries(), minor.eigenvectors, al));
            }
        }

        LevelRecord lv;
        lv.N = N;
        lv.n = n;
        lv.h11 = detail::real_s(hn(0, 0));
        const Vec<Scalar> a = hn.entries().col(0).tail(n - 1);
        const Index xi_len = opts.solver == ChainSolver::full ? n - 1 : m;
        const Vec<Scalar> xi = sqrtN * (minor.eigenvectors.leftCols(xi_len).adjoint() * a);
        lv.xi = to_cvec<Scalar>(xi);
        if (opts.keep_vectors) lv.a_vec = to_cvec<Scalar>(a);
        lv.top_eigenvalues = cur.eigenvalues.head(m);
        lv.minor_eigenvalues = minor.eigenvalues;
        lv.top_eigenvalues_lo = cur_lo.head(m);
        lv.minor_eigenvalues_lo = minor_lo;
        lv.degenerate = a.norm() == 0.0;

        // coincidences between tracked eigenvalues and the minor spectrum,
        // and inside the minor spectrum itself
        double closest = minor.min_gap();
        for (Index i = 0; i < m; ++i)
            for (Index al = 0; al < minor.count(); ++al)
                closest = std::min(closest, std::abs(cur.eigenvalues(i) - minor.eigenvalues(al)));
        lv.coincidence = closest < opts.coincidence_gap;

        if (opts.solver == ChainSolver::full) {
            const double norm_a2 = a.squaredNorm();
            const double total = lv.xi.squaredNorm();
            const double ref = static_cast<double>(N) * norm_a2;
            lv.parseval_error = ref > 0.0 ? std::abs(total - ref) / ref : std::abs(total);
            lv.interlacing_margin = check_interlacing(cur.eigenvalues, minor.eigenvalues).margin;
        } else {
            lv.parseval_error = kNaN;
            double margin = kInf;
            for (Index i = 0; i < m; ++i) {
                margin = std::min(margin, cur.eigenvalues(i) - minor.eigenvalues(i));
                if (i + 1 < cur.count()) margin = std::min(margin, minor.eigenvalues(i) - cur.eigenvalues(i + 1));
            }
            lv.interlacing_margin = margin;
        }

        lv.u_top.setConstant(m, kNaN);
        lv.u_direct.resize(m);
        lv.onestep_diff.resize(m);
        lv.overlap_factor.setConstant(m, kNaN);
        lv.overlap_direct.resize(m);
        lv.gap_next.resize(m);
        lv.repulsion_ok.assign(static_cast<std::size_t>(m), true);
        const bool flagged = lv.coincidence || lv.degenerate;
        for (Index i = 0; i < m; ++i) {
            const double lam = cur.eigenvalues(i);
            lv.onestep_diff(i) = static_cast<double>(N) * (lam - minor.eigenvalues(i));
            lv.gap_next(i) = i + 1 < cur.count() ? lam - cur.eigenvalues(i + 1) : kInf;
            lv.repulsion_ok[static_cast<std::size_t>(i)] = lv.gap_next(i) >= thr;
            lv.u_direct(i) = std::abs(cur.eigenvectors(0, i));
            lv.overlap_direct(i) = std::abs(cur.eigenvectors.col(i).tail(n - 1).dot(minor.eigenvectors.col(i)));
            if (opts.solver == ChainSolver::top) {
                lv.overlap_factor(i) = lv.overlap_direct(i);
            } else if (!flagged) {
                const XiSums s = xi_sums(lv.xi, minor.eigenvalues, minor_lo, lam, cur_lo(i), N);
                const double gap = static_cast<double>(split_diff(lam, cur_lo(i), minor.eigenvalues, minor_lo, i));
                lv.u_top(i) = 1.0 / std::sqrt(1.0 + s.s2);
                lv.overlap_factor(i) = lv.u_top(i) * std::abs(lv.xi(i)) / sqrtN / gap;
            }
        }
        rec.levels.push_back(std::move(lv));
        cur = std::move(minor);
        cur_lo = std::move(minor_lo);
    }

    rec.final_eigenvalues = cur.eigenvalues.head(m);
    rec.cumulative_overlap.setOnes(m);
    rec.cumulative_overlap_direct.resize(m);
    rec.cumulative_flagged.assign(static_cast<std::size_t>(m), false);
    rec.normalized_clt.resize(m);
    const double sk = std::sqrt(static_cast<double>(k));
    for (Index i = 0; i < m; ++i) {
        double telescoped = 0.0;
        for (const auto& lv : rec.levels) {
            telescoped += lv.onestep_diff(i);
            if (std::isnan(lv.overlap_factor(i)))
                rec.cumulative_flagged[static_cast<std::size_t>(i)] = true;
            else
                rec.cumulative_overlap(i) *= lv.overlap_factor(i);
        }
        const double total = static_cast<double>(N) * (rec.levels.front().top_eigenvalues(i) - rec.final_eigenvalues(i));
        rec.telescoping_error = std::max(rec.telescoping_error, std::abs(telescoped - total));
        rec.normalized_clt(i) = (total - static_cast<double>(k)) / sk;
        rec.cumulative_overlap_direct(i) = std::abs(top_vectors.col(i).tail(N - k).dot(cur.eigenvectors.col(i)));
    }
    return rec;
}

IdentityCheck recursion_residual(const LevelRecord& level, const Eigen::VectorXd& prev_spectrum, Index i) {
    if (i < 1 || i > level.top_eigenvalues.size()) throw std::out_of_range("recursion_residual: index");
    if (level.xi.size() != prev_spectrum.size() || prev_spectrum.size() != level.n - 1)
        throw std::invalid_argument("recursion_residual: needs the full xi vector and minor spectrum");
    if (level.degenerate) return {IdentityStatus::degenerate, kNaN};
    if (level.coincidence) return {IdentityStatus::skipped, kNaN};
    const double lam = level.top_eigenvalues(i - 1);
    const double lam_lo = lo_part(level.top_eigenvalues_lo, i - 1);
    const bool own = prev_spectrum.size() == level.minor_eigenvalues.size() &&
                     prev_spectrum == level.minor_eigenvalues &&
                     level.minor_eigenvalues_lo.size() == level.minor_eigenvalues.size();
    const Eigen::VectorXd none;
    const XiSums s = xi_sums(level.xi, prev_spectrum, own ? level.minor_eigenvalues_lo : none, lam, own ? lam_lo : 0.0,
                             level.N);
    const long double r = static_cast<long double>(lam - level.h11) + lam_lo * own - s.s1;
    return {IdentityStatus::ok, static_cast<double>(std::abs(r))};
}

IdentityCheck overlap_onestep(const LevelRecord& level, Index i) {
    if (i < 1 || i > level.top_eigenvalues.size()) throw std::out_of_range("overlap_onestep: index");
    if (!full_level(level)) throw std::invalid_argument("overlap_onestep: needs a full-mode level");
    if (level.degenerate) return {IdentityStatus::degenerate, kNaN};
    const double lam = level.top_eigenvalues(i - 1);
    const double lam_lo = lo_part(level.top_eigenvalues_lo, i - 1);
    const double gap = static_cast<double>(split_diff(lam, lam_lo, level.minor_eigenvalues, level.minor_eigenvalues_lo, i - 1));
    if (level.coincidence || gap == 0.0) return {IdentityStatus::skipped, kNaN};
    const XiSums s = xi_sums(level.xi, level.minor_eigenvalues, level.minor_eigenvalues_lo, lam, lam_lo, level.N);
    const double v = std::abs(level.xi(i - 1)) / std::sqrt(static_cast<double>(level.N)) / gap / std::sqrt(1.0 + s.s2);
    return {IdentityStatus::ok, v};
}

CumulativeOverlap cumulative_overlap(const MinorChainRecord& chain, Index i) {
    if (i < 1 || i > chain.m) throw std::out_of_range("cumulative_overlap: index");
    const auto j = static_cast<std::size_t>(i - 1);
    return {chain.cumulative_overlap(i - 1), chain.cumulative_overlap_direct(i - 1), chain.cumulative_flagged[j]};
}

std::optional<OnestepFluctuation> onestep_fluctuation(const LevelRecord& level, Index i) {
    if (i < 1 || i > level.top_eigenvalues.size()) throw std::out_of_range("onestep_fluctuation: index");
    if (!level.repulsion_ok[static_cast<std::size_t>(i - 1)]) return std::nullopt;
    OnestepFluctuation f;
    f.diff = level.onestep_diff(i - 1);
    f.xi_sq = std::norm(level.xi(i - 1));
    f.residual = f.diff - f.xi_sq;
    return f;
}

MartingaleStats martingale_stats(const MinorChainRecord& chain, Index i) {
    if (i < 1 || i > chain.m) throw std::out_of_range("martingale_stats: index");
    MartingaleStats ms;
    const Index k = chain.k;
    ms.Y.resize(k);
    ms.partial_sums.resize(k);
    double run = 0.0;
    for (Index s = 1; s <= k; ++s) {
        // level n = N-k+s sits at position k-s
        const LevelRecord& lv = chain.levels[static_cast<std::size_t>(k - s)];
        ms.Y(s - 1) = std::norm(lv.xi(i - 1)) - 1.0;
        run += ms.Y(s - 1);
        ms.partial_sums(s - 1) = run;
    }
    ms.normalized_clt = chain.normalized_clt(i - 1);
    return ms;
}

double repulsion_frequency(const std::vector<MinorChainRecord>& chains, Index i, double delta, Index depth) {
    if (chains.size() < 100) throw std::invalid_argument("repulsion_frequency: needs at least 100 chains");
    std::size_t hits = 0;
    for (const auto& c : chains) {
        if (i < 1 || i > c.m) throw std::out_of_range("repulsion_frequency: index");
        const double thr = repulsion_threshold(c.N, delta);
        const std::size_t L = depth > 0 ? std::min<std::size_t>(static_cast<std::size_t>(depth), c.levels.size())
                                        : c.levels.size();
        bool ok = true;
        for (std::size_t l = 0; l < L && ok; ++l) ok = c.levels[l].gap_next(i - 1) >= thr;
        hits += ok;
    }
    return static_cast<double>(hits) / static_cast<double>(chains.size());
}

namespace {

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

nlohmann::json num_array(const Eigen::VectorXd& v) {
    nlohmann::json a = nlohmann::json::array();
    for (Index i = 0; i < v.size(); ++i) {
        if (std::isfinite(v(i)))
            a.push_back(v(i));
        else
            a.push_back(nullptr);
    }
    return a;
}

}  // namespace

nlohmann::json to_json(const MinorChainRecord& chain, std::int64_t replica) {
    nlohmann::json j;
    j["replica"] = replica;
    j["N"] = chain.N;
    j["k"] = chain.k;
    j["m"] = chain.m;
    j["delta"] = chain.delta;
    j["solver"] = chain.solver == ChainSolver::full ? "full" : "top";
    j["outside_proven_regime"] = chain.outside_proven_regime;
    j["final_eigenvalues"] = to_std(chain.final_eigenvalues);
    j["cumulative_overlap"] = num_array(chain.cumulative_overlap);
    j["cumulative_overlap_direct"] = num_array(chain.cumulative_overlap_direct);
    j["cumulative_flagged"] = chain.cumulative_flagged;
    j["normalized_clt"] = num_array(chain.normalized_clt);
    j["telescoping_error"] = chain.telescoping_error;
    nlohmann::json levels = nlohmann::json::array();
    for (const auto& lv : chain.levels) {
        Eigen::VectorXd xi_sq(lv.top_eigenvalues.size());
        for (Index i = 0; i < xi_sq.size(); ++i) xi_sq(i) = std::norm(lv.xi(i));
        nlohmann::json l;
        l["n"] = lv.n;
        l["h11"] = lv.h11;
        l["top_eigenvalues"] = to_std(lv.top_eigenvalues);
        l["xi_sq"] = to_std(xi_sq);
        l["u_top"] = num_array(lv.u_top);
        l["u_direct"] = num_array(lv.u_direct);
        l["onestep_diff"] = num_array(lv.onestep_diff);
        l["overlap_factor"] = num_array(lv.overlap_factor);
        l["overlap_direct"] = num_array(lv.overlap_direct);
        l["gap_next"] = num_array(lv.gap_next);
        l["repulsion_ok"] = lv.repulsion_ok;
        l["coincidence"] = lv.coincidence;
        l["degenerate"] = lv.degenerate;
        l["parseval_error"] = std::isfinite(lv.parseval_error) ? nlohmann::json(lv.parseval_error) : nlohmann::json();
        l["interlacing_margin"] = lv.interlacing_margin;
        levels.push_back(std::move(l));
    }
    j["levels"] = std::move(levels);
    return j;
}

void write_chain_csv_header(std::ostream& os) { os << "replica,n,i,lambda,xi_sq,onestep,overlap,repulsion\n"; }

void write_chain_csv_rows(std::ostream& os, const MinorChainRecord& chain, std::int64_t replica) {
    const auto old = os.precision(17);
    for (const auto& lv : chain.levels)
        for (Index i = 0; i < lv.top_eigenvalues.size(); ++i)
            os << replica << ',' << lv.n << ',' << (i + 1) << ',' << lv.top_eigenvalues(i) << ','
               << std::norm(lv.xi(i)) << ',' << lv.onestep_diff(i) << ',' << lv.overlap_factor(i) << ','
               << (lv.repulsion_ok[static_cast<std::size_t>(i)] ? 1 : 0) << '\n';
    os.precision(old);
}

template MinorChainRecord run_chain<double>(const HermitianMatrix<double>&, Index, const ChainOptions&);
template MinorChainRecord run_chain<cplx>(const HermitianMatrix<cplx>&, Index, const ChainOptions&);

}  // namespace mpl
