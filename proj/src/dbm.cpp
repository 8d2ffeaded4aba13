#include "mpl/dbm.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "mpl/spectral.hpp"

namespace mpl {

DbmConfig DbmConfig::standard(Index N, Index k, int beta, Index grid_points, double omega0) {
    DbmConfig c;
    c.N = N;
    c.k = k;
    c.beta = beta;
    c.omega0 = omega0;
    const double t1 = c.t1();
    for (Index j = 0; j <= grid_points; ++j) c.t_grid.push_back(t1 * static_cast<double>(j) / static_cast<double>(grid_points));
    return c;
}

double DbmConfig::t1() const { return std::pow(static_cast<double>(N), -1.0 / 3.0 + omega0); }

double DbmConfig::effective_step() const { return step > 0.0 ? step : 0.01 / static_cast<double>(N); }

double DbmConfig::effective_guard() const { return guard > 0.0 ? guard : 1e-3 / static_cast<double>(N); }

void DbmConfig::validate() const {
    if (N < 1 || k < 0 || k >= N) throw std::invalid_argument("DbmConfig: need 0 <= k < N");
    if (beta != 1 && beta != 2) throw std::invalid_argument("DbmConfig: beta must be 1 or 2");
    if (m < 1) throw std::invalid_argument("DbmConfig: m must be positive");
    if (t_grid.empty()) throw std::invalid_argument("DbmConfig: empty time grid");
    if (t_grid.front() < 0.0) throw std::invalid_argument("DbmConfig: negative time");
    for (std::size_t i = 1; i < t_grid.size(); ++i)
        if (!(t_grid[i] > t_grid[i - 1])) throw std::invalid_argument("DbmConfig: time grid must increase");
    if (step < 0.0 || step > 1.0 / static_cast<double>(N))
        throw std::invalid_argument("DbmConfig: step must lie in (0, 1/N]");
    if (max_halvings < 0) throw std::invalid_argument("DbmConfig: max_halvings < 0");
}

namespace {

template <class Scalar>
void check_beta(const DbmConfig& cfg) {
    if (cfg.beta != scalar_traits<Scalar>::beta) throw std::invalid_argument("DbmConfig: beta does not match the matrix type");
}

Index block_size(const DbmConfig& cfg, Index available) {
    const Index want = cfg.theta_m > 0 ? cfg.theta_m : cfg.m;
    return std::min(want, available);
}

template <class Scalar>
Eigen::MatrixXd overlap_block(const Dense<Scalar>& w1, const Dense<Scalar>& w2, Index rows, Index cols) {
    const Index n2 = w2.rows();
    const Dense<Scalar> ip = w1.bottomRows(n2).leftCols(rows).adjoint() * w2.leftCols(cols);
    return ip.cwiseAbs2();
}

Eigen::MatrixXd psd_power(const Eigen::MatrixXd& c, double power, double floor = 1e-12) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
    Eigen::VectorXd e = es.eigenvalues();
    for (Index i = 0; i < e.size(); ++i) e(i) = e(i) > floor ? std::pow(e(i), power) : 0.0;
    return es.eigenvectors() * e.asDiagonal() * es.eigenvectors().transpose();
}

// Several interacting particle systems advanced together. Every driver is a
// fixed linear map of one vector of independent Brownian increments, so a
// rejected step can be split by a Brownian bridge on that vector.
class ParticleIntegrator {
public:
    ParticleIntegrator(std::vector<Eigen::VectorXd> levels, Index N, int beta, double guard, int max_halvings,
                       std::uint64_t seed)
        : levels_(std::move(levels)),
          invN_(1.0 / static_cast<double>(N)),
          noise_(std::sqrt(2.0 / (beta * static_cast<double>(N)))),
          guard_(guard),
          max_halvings_(max_halvings),
          tape_(make_stream(seed, 0, Purpose::driver)),
          bridge_(make_stream(seed, 1, Purpose::driver)) {
        for (const auto& l : levels_) {
            for (Index i = 1; i < l.size(); ++i)
                if (!(l(i - 1) > l(i))) throw std::invalid_argument("particle system: spectra must be strictly decreasing");
            total_ += l.size();
        }
    }

    /// Columns of map = independent increments, rows = particles in level order.
    void set_map(Eigen::MatrixXd map) {
        if (map.rows() != total_) throw std::invalid_argument("particle system: driver map has wrong row count");
        map_ = std::move(map);
    }

    void advance(double dt, double step) {
        if (dt <= 0.0) return;
        const auto n = static_cast<long>(std::ceil(dt / step - 1e-9));
        const double h = dt / static_cast<double>(n);
        Eigen::VectorXd dw(map_.cols());
        for (long s = 0; s < n; ++s) {
            for (Index c = 0; c < dw.size(); ++c) dw(c) = std::sqrt(h) * gauss_(tape_);
            attempt(dw, h, 0);
        }
    }

    const std::vector<Eigen::VectorXd>& levels() const { return levels_; }
    int max_halvings_used() const { return max_depth_; }
    long rejected() const { return rejected_; }

private:
    void attempt(const Eigen::VectorXd& dw, double h, int depth) {
        max_depth_ = std::max(max_depth_, depth);
        std::vector<Eigen::VectorXd> next;
        if (propose(dw, h, next)) {
            levels_ = std::move(next);
            return;
        }
        ++rejected_;
        if (depth >= max_halvings_) {
            std::ostringstream msg;
            msg << "particle system: collision guard " << guard_ << " still violated after " << depth
                << " halvings (step " << h << ")";
            throw NumericalError(msg.str());
        }
        Eigen::VectorXd first(dw.size());
        for (Index c = 0; c < dw.size(); ++c) first(c) = 0.5 * dw(c) + std::sqrt(0.25 * h) * gauss_(bridge_);
        attempt(first, 0.5 * h, depth + 1);
        attempt(dw - first, 0.5 * h, depth + 1);
    }

    bool propose(const Eigen::VectorXd& dw, double h, std::vector<Eigen::VectorXd>& next) const {
        const Eigen::VectorXd db = map_.cols() > 0 ? Eigen::VectorXd(map_ * dw) : Eigen::VectorXd::Zero(total_);
        next = levels_;
        Index offset = 0;
        for (std::size_t l = 0; l < levels_.size(); ++l) {
            const Eigen::VectorXd& x = levels_[l];
            Eigen::VectorXd& y = next[l];
            const Index n = x.size();
            for (Index i = 0; i < n; ++i) {
                double drift = 0.0;
                for (Index j = 0; j < n; ++j)
                    if (j != i) drift += 1.0 / (x(i) - x(j));
                y(i) = x(i) + noise_ * db(offset + i) + h * invN_ * drift;
            }
            for (Index i = 1; i < n; ++i) {
                const double gap = y(i - 1) - y(i);
                if (gap <= 0.0) return false;
                if (gap < guard_ && gap < x(i - 1) - x(i)) return false;
            }
            offset += n;
        }
        return true;
    }

    std::vector<Eigen::VectorXd> levels_;
    Index total_ = 0;
    double invN_;
    double noise_;
    double guard_;
    int max_halvings_;
    Engine tape_;
    Engine bridge_;
    std::normal_distribution<double> gauss_;
    Eigen::MatrixXd map_;
    int max_depth_ = 0;
    long rejected_ = 0;
};

Eigen::VectorXd head_or_all(const Eigen::VectorXd& v, Index m) { return v.head(std::min(m, v.size())); }

}  // namespace

template <class Scalar>
CoupledTrajectory evolve_matrix_flow(const HermitianMatrix<Scalar>& h, const DbmConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    check_beta<Scalar>(cfg);
    if (h.dim() != cfg.N) throw std::invalid_argument("evolve_matrix_flow: matrix size differs from N");
    const Index N2 = cfg.N2();
    Engine rng = make_stream(seed, 0, Purpose::flow);
    CoupledTrajectory tr;
    HermitianMatrix<Scalar> ht = h;
    double now = 0.0;
    for (double t : cfg.t_grid) {
        if (t > now) ht = additive_flow_sample(ht, t - now, rng, cfg.N);
        now = t;
        const auto s1 = eigh(ht);
        const auto s2 = eigh(ht.lower_right(N2));
        tr.times.push_back(t);
        tr.lambda1.push_back(head_or_all(s1.eigenvalues, cfg.m));
        tr.lambda2.push_back(head_or_all(s2.eigenvalues, cfg.m));
        tr.theta12.push_back(overlap_block(s1.eigenvectors, s2.eigenvectors, block_size(cfg, cfg.N), block_size(cfg, N2)));
    }
    return tr;
}

Eigen::MatrixXd driver_covariance(const Eigen::MatrixXd& theta) {
    const Index a = theta.rows(), b = theta.cols();
    Eigen::MatrixXd c = Eigen::MatrixXd::Identity(a + b, a + b);
    c.topRightCorner(a, b) = theta;
    c.bottomLeftCorner(b, a) = theta.transpose();
    return c;
}

Eigen::MatrixXd driver_map(const Eigen::MatrixXd& theta) { return psd_power(driver_covariance(theta), 0.5); }

namespace {

const Eigen::MatrixXd& full_theta(const CoupledTrajectory& companion, std::size_t idx, Index N1, Index N2) {
    if (idx >= companion.theta12.size()) throw std::invalid_argument("particle system: companion grid too short");
    const Eigen::MatrixXd& th = companion.theta12[idx];
    if (th.rows() != N1 || th.cols() != N2)
        throw std::invalid_argument("particle system: companion must record the full overlap matrix (theta_m >= N)");
    return th;
}

}  // namespace

CoupledTrajectory evolve_particle_sde(const Eigen::VectorXd& lambda1, const Eigen::VectorXd& lambda2,
                                      const CoupledTrajectory& companion, const DbmConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const Index N1 = cfg.N, N2 = cfg.N2();
    if (lambda1.size() != N1 || lambda2.size() != N2) throw std::invalid_argument("evolve_particle_sde: spectrum sizes");
    if (!cfg.zero_noise && companion.times.size() != cfg.t_grid.size())
        throw std::invalid_argument("evolve_particle_sde: companion grid differs");
    ParticleIntegrator sys({lambda1, lambda2}, cfg.N, cfg.beta, cfg.effective_guard(), cfg.max_halvings, seed);
    CoupledTrajectory tr;
    const Index rec1 = block_size(cfg, N1), rec2 = block_size(cfg, N2);
    auto theta_at = [&](std::size_t g) -> Eigen::MatrixXd {
        return cfg.zero_noise ? Eigen::MatrixXd::Zero(N1, N2) : full_theta(companion, g, N1, N2);
    };
    auto install = [&](const Eigen::MatrixXd& theta) {
        sys.set_map(cfg.zero_noise ? Eigen::MatrixXd(N1 + N2, 0) : driver_map(theta));
    };
    // overlaps from a grid time drive the interval that follows it
    install(theta_at(0));
    double now = 0.0;
    for (std::size_t g = 0; g < cfg.t_grid.size(); ++g) {
        const double t = cfg.t_grid[g];
        sys.advance(t - now, cfg.effective_step());
        now = t;
        const Eigen::MatrixXd theta = theta_at(g);
        install(theta);
        tr.times.push_back(t);
        tr.lambda1.push_back(head_or_all(sys.levels()[0], cfg.m));
        tr.lambda2.push_back(head_or_all(sys.levels()[1], cfg.m));
        tr.theta12.push_back(theta.topLeftCorner(rec1, rec2));
    }
    tr.max_halvings_used = sys.max_halvings_used();
    tr.rejected_steps = sys.rejected();
    return tr;
}

template <class Scalar>
CouplingReport coupling_experiment(const HermitianMatrix<Scalar>& h, const DbmConfig& cfg_in, std::uint64_t seed,
                                   bool with_particles) {
    DbmConfig cfg = cfg_in;
    cfg.validate();
    check_beta<Scalar>(cfg);
    const Index N1 = cfg.N, N2 = cfg.N2();
    const Index m1 = std::min(cfg.m, N2);

    CouplingReport rep;
    rep.N = cfg.N;
    rep.k = cfg.k;
    rep.t1 = cfg.t_grid.back();
    rep.target = std::pow(static_cast<double>(cfg.N), -2.0 / 3.0);

    DbmConfig flow_cfg = cfg;
    flow_cfg.theta_m = with_particles ? N1 : cfg.m;
    const CoupledTrajectory flow = evolve_matrix_flow(h, flow_cfg, seed);
    rep.lambda1_flow = flow.lambda1.back();
    rep.lambda2_flow = flow.lambda2.back();
    rep.theta_sup = Eigen::MatrixXd::Zero(m1, m1);
    for (const auto& th : flow.theta12) rep.theta_sup = rep.theta_sup.cwiseMax(th.topLeftCorner(m1, m1));
    if (!with_particles) return rep;

    // independent starting spectra for the comparison processes
    Engine comp = make_stream(seed, 0, Purpose::companion);
    const double var = 1.0 / static_cast<double>(cfg.N);
    const Eigen::VectorXd mu1 = eigvalsh(sample_invariant<Scalar>(N1, var, comp));
    const Eigen::VectorXd mu2 = eigvalsh(sample_invariant<Scalar>(N2, var, comp));
    const Eigen::VectorXd l1 = eigvalsh(h);
    const Eigen::VectorXd l2 = eigvalsh(h.lower_right(N2));

    const Index nA = std::min(cfg.coupled_indices > 0 ? cfg.coupled_indices : cfg.m, N2);
    const Index nb = N1 + N2;           // correlated tape for the lambdas
    const Index nfree = nb - 2 * nA;    // extra independent tape for the lower mu drivers
    rep.diff1_start = (l1.head(m1) - mu1.head(m1)).cwiseAbs();
    rep.diff2_start = (l2.head(m1) - mu2.head(m1)).cwiseAbs();
    ParticleIntegrator sys({l1, l2, mu1, mu2}, cfg.N, cfg.beta, cfg.effective_guard(), cfg.max_halvings, seed);

    // rows of the top-A block of each level inside the (N1 + N2) driver vector
    std::vector<Index> rowsA;
    for (Index i = 0; i < nA; ++i) rowsA.push_back(i);
    for (Index i = 0; i < nA; ++i) rowsA.push_back(N1 + i);

    auto install = [&](std::size_t g) {
        const Eigen::MatrixXd& theta = full_theta(flow, g, N1, N2);
        const Eigen::MatrixXd root = driver_map(theta);
        Eigen::MatrixXd rootA(2 * nA, nb);
        Eigen::MatrixXd cA(2 * nA, 2 * nA);
        const Eigen::MatrixXd cfull = driver_covariance(theta);
        for (Index r = 0; r < 2 * nA; ++r) {
            rootA.row(r) = root.row(rowsA[static_cast<std::size_t>(r)]);
            for (Index c = 0; c < 2 * nA; ++c)
                cA(r, c) = cfull(rowsA[static_cast<std::size_t>(r)], rowsA[static_cast<std::size_t>(c)]);
        }
        // whitened top drivers beta_A = C_A^{-1/2} b_A
        const Eigen::MatrixXd whiten = psd_power(cA, -0.5, 1e-10) * rootA;

        Eigen::MatrixXd map = Eigen::MatrixXd::Zero(2 * nb, nb + nfree);
        map.topLeftCorner(nb, nb) = root;
        Index free_col = nb;
        for (Index lvl = 0; lvl < 2; ++lvl) {
            const Index size = lvl == 0 ? N1 : N2;
            const Index base = nb + (lvl == 0 ? 0 : N1);
            for (Index i = 0; i < size; ++i) {
                if (i < nA)
                    map.block(base + i, 0, 1, nb) = whiten.row(lvl * nA + i);
                else
                    map(base + i, free_col++) = 1.0;
            }
        }
        sys.set_map(std::move(map));
    };
    install(0);
    double now = 0.0;
    for (std::size_t g = 0; g < cfg.t_grid.size(); ++g) {
        const double t = cfg.t_grid[g];
        sys.advance(t - now, cfg.effective_step());
        now = t;
        install(g);
    }
    const auto& lv = sys.levels();
    rep.lambda1_sde = lv[0].head(m1);
    rep.lambda2_sde = lv[1].head(m1);
    rep.mu1 = lv[2].head(m1);
    rep.mu2 = lv[3].head(m1);
    rep.diff1 = (rep.lambda1_sde - rep.mu1).cwiseAbs();
    rep.diff2 = (rep.lambda2_sde - rep.mu2).cwiseAbs();
    rep.max_halvings_used = sys.max_halvings_used();
    return rep;
}

void write_trajectory_csv(std::ostream& os, const CoupledTrajectory& tr) {
    const auto old = os.precision(17);
    os << "time,level,index,eigenvalue\n";
    for (std::size_t g = 0; g < tr.times.size(); ++g) {
        for (Index i = 0; i < tr.lambda1[g].size(); ++i) os << tr.times[g] << ",1," << (i + 1) << ',' << tr.lambda1[g](i) << '\n';
        for (Index i = 0; i < tr.lambda2[g].size(); ++i) os << tr.times[g] << ",2," << (i + 1) << ',' << tr.lambda2[g](i) << '\n';
    }
    os.precision(old);
}

void write_overlap_csv(std::ostream& os, const CoupledTrajectory& tr) {
    const auto old = os.precision(17);
    os << "time,i,j,theta\n";
    for (std::size_t g = 0; g < tr.times.size(); ++g)
        for (Index i = 0; i < tr.theta12[g].rows(); ++i)
            for (Index j = 0; j < tr.theta12[g].cols(); ++j)
                os << tr.times[g] << ',' << (i + 1) << ',' << (j + 1) << ',' << tr.theta12[g](i, j) << '\n';
    os.precision(old);
}

template CoupledTrajectory evolve_matrix_flow<double>(const HermitianMatrix<double>&, const DbmConfig&, std::uint64_t);
template CoupledTrajectory evolve_matrix_flow<cplx>(const HermitianMatrix<cplx>&, const DbmConfig&, std::uint64_t);
template CouplingReport coupling_experiment<double>(const HermitianMatrix<double>&, const DbmConfig&, std::uint64_t, bool);
template CouplingReport coupling_experiment<cplx>(const HermitianMatrix<cplx>&, const DbmConfig&, std::uint64_t, bool);

}  // namespace mpl
