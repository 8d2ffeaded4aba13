#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "mpl/ensembles.hpp"

namespace mpl {

enum class DbmMode { matrix_flow, particle_sde };

/// Level sizes N1 = N and N2 = N - k; grid times at which the pair is recorded.
struct DbmConfig {
    Index N = 0;
    Index k = 0;
    std::vector<double> t_grid;
    DbmMode mode = DbmMode::matrix_flow;
    double step = 0.0;  // particle base step; 0 means 0.01/N
    int beta = 2;
    Index m = 5;
    double omega0 = 0.1;
    Index theta_m = 0;  // overlap block size to record; 0 means m, >= N means everything
    bool zero_noise = false;
    double guard = 0.0;  // collision guard; 0 means 1e-3/N
    int max_halvings = 20;
    Index coupled_indices = 0;  // top indices sharing drivers in the coupling run; 0 means m

    /// t1 = N^{-1/3 + omega0}, grid uniform on [0, t1] with grid_points intervals.
    static DbmConfig standard(Index N, Index k, int beta, Index grid_points = 10, double omega0 = 0.1);

    double t1() const;
    double effective_step() const;
    double effective_guard() const;
    Index N2() const { return N - k; }
    /// Throws std::invalid_argument on a malformed configuration.
    void validate() const;
};

struct CoupledTrajectory {
    std::vector<double> times;
    std::vector<Eigen::VectorXd> lambda1;  // top m of level 1 at each time
    std::vector<Eigen::VectorXd> lambda2;  // top m of level 2
    std::vector<Eigen::MatrixXd> theta12;  // |<w_i^(1), padded w_j^(2)>|^2
    int max_halvings_used = 0;
    long rejected_steps = 0;
};

/// Exact flow H_t = H + B_t / sqrt(N) on the grid; the minor moves with the
/// restricted increments.
template <class Scalar>
CoupledTrajectory evolve_matrix_flow(const HermitianMatrix<Scalar>& h, const DbmConfig& cfg, std::uint64_t seed);

/// Joint covariance [[I, Theta], [Theta^T, I]] of the two driver families
/// and its square root (columns map independent increments to drivers).
Eigen::MatrixXd driver_covariance(const Eigen::MatrixXd& theta);
Eigen::MatrixXd driver_map(const Eigen::MatrixXd& theta);

/// Euler scheme for the two coupled particle systems
///   d lambda_i = sqrt(2/(beta N)) d b_i + N^{-1} sum_{j != i} dt / (lambda_i - lambda_j).
/// companion supplies the full overlap matrix at each grid time (record it
/// with theta_m >= N); it is held constant until the next grid time.
/// Throws NumericalError after max_halvings rejected halvings in one step.
CoupledTrajectory evolve_particle_sde(const Eigen::VectorXd& lambda1, const Eigen::VectorXd& lambda2,
                                      const CoupledTrajectory& companion, const DbmConfig& cfg, std::uint64_t seed);

struct CouplingReport {
    Index N = 0;
    Index k = 0;
    double t1 = 0.0;
    Eigen::VectorXd lambda1_flow, lambda2_flow;  // exact matrix flow at t1
    Eigen::VectorXd lambda1_sde, lambda2_sde;    // particles with correlated drivers (empty without particles)
    Eigen::VectorXd mu1, mu2;                    // independent comparison processes
    Eigen::VectorXd diff1, diff2;                // |lambda_sde - mu| at t1
    Eigen::VectorXd diff1_start, diff2_start;    // same at time 0
    Eigen::MatrixXd theta_sup;                   // sup over the grid of Theta12, m x m
    double target = 0.0;                         // N^{-2/3}
    int max_halvings_used = 0;
};

/// One replica of the decoupling experiment. The comparison processes start
/// from independent GOE/GUE spectra (variance 1/N, sizes N1 and N2) and share
/// the whitened drivers of the top coupled_indices of each level.
template <class Scalar>
CouplingReport coupling_experiment(const HermitianMatrix<Scalar>& h, const DbmConfig& cfg, std::uint64_t seed,
                                   bool with_particles = true);

/// time,level,index,eigenvalue
void write_trajectory_csv(std::ostream& os, const CoupledTrajectory& tr);
/// time,i,j,theta
void write_overlap_csv(std::ostream& os, const CoupledTrajectory& tr);

}  // namespace mpl
