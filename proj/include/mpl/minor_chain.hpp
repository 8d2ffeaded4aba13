#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mpl/ensembles.hpp"

namespace mpl {

/// How each level of a chain is diagonalised.
///  full: complete eigendecomposition of every minor; all identities available.
///  top:  top m+1 eigenpairs only (Lanczos). xi is kept only for the tracked
///        indices, so the recursion and norm identities are not evaluated and
///        overlap_factor holds the direct inner products.
enum class ChainSolver { full, top };

struct ChainOptions {
    Index m = 5;
    double delta = 0.05;
    ChainSolver solver = ChainSolver::full;
    double coincidence_gap = 1e-12;
    std::uint64_t lanczos_seed = 0;
    bool keep_vectors = true;  // false drops a_vec from the records
};

/// One step H^(n) -> H^(n-1) of the chain. Arrays indexed by i hold the
/// tracked indices 1..m at positions 0..m-1.
struct LevelRecord {
    Index N = 0;  // outer dimension; fixes the sqrt(N) in xi
    Index n = 0;
    Eigen::VectorXd top_eigenvalues;    // lambda_i^(n)
    Eigen::VectorXd minor_eigenvalues;  // lambda^(n-1): all of them (full) or top m+1 (top)
    // Low-order parts of eigenvalues refined in extended precision (zero
    // otherwise), so that differences of nearly equal values stay exact.
    Eigen::VectorXd top_eigenvalues_lo;
    Eigen::VectorXd minor_eigenvalues_lo;
    double h11 = 0.0;
    Eigen::VectorXcd a_vec;             // column below h11, length n-1
    Eigen::VectorXcd xi;                // sqrt(N) w_alpha^* a; length n-1 (full) or tracked only (top)
    Eigen::VectorXd u_top;              // |first component of w_i^(n)| from the norm identity
    Eigen::VectorXd u_direct;           // same, read off the eigenvector
    Eigen::VectorXd onestep_diff;       // N (lambda_i^(n) - lambda_i^(n-1))
    Eigen::VectorXd overlap_factor;     // from the xi formula
    Eigen::VectorXd overlap_direct;     // |<w_i^(n), padded w_i^(n-1)>|
    Eigen::VectorXd gap_next;           // lambda_i^(n) - lambda_{i+1}^(n), +inf past the end
    std::vector<bool> repulsion_ok;
    bool coincidence = false;
    bool degenerate = false;            // a_vec == 0
    double parseval_error = 0.0;        // relative, NaN in top mode
    double interlacing_margin = 0.0;
};

struct MinorChainRecord {
    Index N = 0;
    Index k = 0;
    Index m = 0;  // effective, min(requested m, N-k)
    double delta = 0.05;
    ChainSolver solver = ChainSolver::full;
    bool outside_proven_regime = false;  // requested m > 5
    std::vector<LevelRecord> levels;     // n = N, N-1, ..., N-k+1
    Eigen::VectorXd final_eigenvalues;   // top m of H^(N-k)
    Eigen::VectorXd cumulative_overlap;         // product of overlap_factor
    Eigen::VectorXd cumulative_overlap_direct;  // |<w_i^(N), padded w_i^(N-k)>|
    std::vector<bool> cumulative_flagged;       // some level skipped for index i
    Eigen::VectorXd normalized_clt;
    double telescoping_error = 0.0;
};

/// Walks H^(N) down to H^(N-k). Throws std::invalid_argument unless
/// 1 <= k < N, 1 <= m <= 10 and 0 < delta < 1/3.
template <class Scalar>
MinorChainRecord run_chain(const HermitianMatrix<Scalar>& h, Index k, const ChainOptions& opts = {});

enum class IdentityStatus { ok, degenerate, skipped };

struct IdentityCheck {
    IdentityStatus status = IdentityStatus::ok;
    double value = 0.0;  // residual or overlap; NaN unless ok
};

/// |lambda_i - h11 - N^{-1} sum |xi_a|^2 / (lambda_i - mu_a)| with mu = prev_spectrum.
/// i is 1-based. Needs a full-mode level. The stored low-order parts are used
/// when prev_spectrum is the level's own minor spectrum.
IdentityCheck recursion_residual(const LevelRecord& level, const Eigen::VectorXd& prev_spectrum, Index i);

/// One-step overlap from the xi formula (1-based i).
IdentityCheck overlap_onestep(const LevelRecord& level, Index i);

struct CumulativeOverlap {
    double product = 0.0;
    double direct = 0.0;
    bool partial = false;
};

CumulativeOverlap cumulative_overlap(const MinorChainRecord& chain, Index i);

struct OnestepFluctuation {
    double diff = 0.0;
    double xi_sq = 0.0;
    double residual = 0.0;  // diff - xi_sq
};

/// Empty when the repulsion event fails at this level.
std::optional<OnestepFluctuation> onestep_fluctuation(const LevelRecord& level, Index i);

struct MartingaleStats {
    Eigen::VectorXd Y;             // Y_s = |xi_i^(N-k+s)|^2 - 1, s = 1..k
    Eigen::VectorXd partial_sums;  // sum_{r<=s} Y_r
    double normalized_clt = 0.0;
};

MartingaleStats martingale_stats(const MinorChainRecord& chain, Index i);

/// Fraction of chains whose repulsion event holds at every one of the first
/// depth levels (all levels when depth <= 0). Needs at least 100 chains.
double repulsion_frequency(const std::vector<MinorChainRecord>& chains, Index i, double delta, Index depth = 0);

nlohmann::json to_json(const MinorChainRecord& chain, std::int64_t replica = 0);

/// Flat rows: replica,n,i,lambda,xi_sq,onestep,overlap,repulsion.
void write_chain_csv_header(std::ostream& os);
void write_chain_csv_rows(std::ostream& os, const MinorChainRecord& chain, std::int64_t replica);

}  // namespace mpl
