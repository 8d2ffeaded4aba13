#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mpl/ensembles.hpp"
#include "mpl/stats.hpp"

namespace mpl {

enum class Regime { subcritical, critical, supercritical, identities, dbm };

std::string to_string(Regime r);
/// Accepts the full names and sub, crit, super.
Regime parse_regime(const std::string& name);

struct IdentityTuple {
    Index N = 20;
    Index k = 5;
    EntryLaw law = EntryLaw::gaussian;
    int beta = 2;
    std::uint64_t seed = 1;
};

struct ExperimentConfig {
    Regime regime = Regime::subcritical;
    Index N = 200;
    Index k = 10;
    double alpha = 0.0;  // critical: if > 0, k = floor(alpha N^{2/3})
    int beta = 2;
    EntryLaw law = EntryLaw::gaussian;
    Index replicas = 100;
    std::uint64_t master_seed = 1;
    Index m = 5;
    double delta = 0.05;
    std::string output;
    unsigned threads = 0;  // 0: hardware concurrency

    double ks_level = 0.01;

    // subcritical
    bool full_chain = false;  // walk every level instead of the two endpoints
    double mean_tol = 0.1;
    double var_low = 0.8;   // times 2/beta
    double var_high = 1.2;
    double miss_slack = 0.1;  // median miss <= k N^{-2/3 + slack}

    // supercritical
    double corr_bound = 0.2;
    double overlap_factor = 10.0;  // mean overlap^2 <= factor N^{2/3}/k

    // critical
    double window_low = -4.0;
    double window_high = 1.0;
    Index bins = 3;
    double sigma_mult = 3.0;
    bool relative_check = true;
    double relative_tol = 0.25;
    double relative_floor = 0.005;

    // identities; empty grid means the default sweep
    std::vector<IdentityTuple> identity_grid;
    Index schur_probes = 2;

    // dbm
    Index dbm_grid_points = 10;
    double omega0 = 0.1;

    /// k actually used (from alpha in the critical regime when alpha > 0).
    Index effective_k() const;
    /// Domain warnings: subcritical wants k <= N^{2/3}, supercritical k >= N^{2/3}.
    std::vector<std::string> regime_warnings() const;
    /// Throws std::invalid_argument.
    void validate() const;

    nlohmann::json to_json() const;
    static ExperimentConfig from_json(const nlohmann::json& j);
};

/// Default sweep: N in {20, 60, 150}, every law, both beta, k = N/3.
std::vector<IdentityTuple> default_identity_grid(std::uint64_t master_seed);

struct CheckResult {
    std::string name;
    bool passed = true;
    double value = 0.0;
    double threshold = 0.0;
    std::string detail;
    bool identity = false;  // an exact identity; failure means exit code 2
    bool gating = true;     // false: reported only
};

struct RunArtifact {
    static constexpr int schema_version = 1;

    ExperimentConfig config;
    nlohmann::json fingerprint;
    std::vector<std::string> warnings;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    nlohmann::json summary = nlohmann::json::object();
    std::vector<CheckResult> checks;
    double wall_seconds = 0.0;
    std::string started_at;

    /// 0 all gating checks passed, 1 statistical failure, 2 identity breach.
    int exit_code() const;
    bool passed() const { return exit_code() == 0; }

    nlohmann::json to_json() const;
    void write_csv(std::ostream& os) const;
    /// prefix.json (everything but the rows) and prefix.csv.
    void write(const std::string& prefix) const;
};

nlohmann::json build_fingerprint();

RunArtifact run_experiment(const ExperimentConfig& cfg);
RunArtifact run_subcritical(const ExperimentConfig& cfg);
RunArtifact run_supercritical(const ExperimentConfig& cfg);
RunArtifact run_critical(const ExperimentConfig& cfg);
RunArtifact run_identities(const ExperimentConfig& cfg);
RunArtifact run_dbm(const ExperimentConfig& cfg);

/// Calls body(replica) for every replica on `threads` workers; callers write
/// into per-replica slots so the output does not depend on scheduling.
void for_each_replica(Index replicas, unsigned threads, const std::function<void(Index)>& body);

// ---- estimators -------------------------------------------------------------

/// One-sample KS (D, p); p is NaN below 30 points.
KsResult ks_statistic(const std::vector<double>& sample, const std::function<double(double)>& cdf);

/// Per-replica pair counts on a square grid of X/Y windows.
class IntensityAccumulator {
public:
    IntensityAccumulator(double low, double high, Index bins);

    /// Adds one replica: every pair (X_i, Y_j) with both inside the window.
    void add_replica(const Eigen::VectorXd& X, const Eigen::VectorXd& Y);
    void merge(const IntensityAccumulator& other);

    double low() const { return low_; }
    double high() const { return high_; }
    Index bins() const { return bins_; }
    double width() const { return (high_ - low_) / static_cast<double>(bins_); }
    double center(Index b) const { return low_ + (static_cast<double>(b) + 0.5) * width(); }
    Index replicas() const { return static_cast<Index>(pair_counts_.size()); }

    const std::vector<Eigen::MatrixXd>& pair_counts() const { return pair_counts_; }
    const std::vector<Eigen::VectorXd>& x_counts() const { return x_counts_; }
    const std::vector<Eigen::VectorXd>& y_counts() const { return y_counts_; }

private:
    Index bin_of(double v) const;

    double low_, high_;
    Index bins_;
    std::vector<Eigen::MatrixXd> pair_counts_;
    std::vector<Eigen::VectorXd> x_counts_, y_counts_;
};

struct IntensitySurface {
    Eigen::VectorXd centers;
    Eigen::MatrixXd value;  // mean pair density per unit X-Y area, times scale
    Eigen::MatrixXd sigma;  // Monte Carlo standard error of value
    Eigen::MatrixXd counts; // total pairs per bin
    /// Covariance of the marginal counts in bins a, b and its z-score; zero
    /// covariance means the pair density factorises.
    Eigen::MatrixXd factor_cov;
    Eigen::MatrixXd factor_z;
};

/// Density of pairs in (X,Y) per replica, multiplied by scale.
IntensitySurface binned_intensity(const IntensityAccumulator& acc, double scale = 1.0);

/// Smooth bump of unit width centered at c, exp(-1/(1-(2(x-c))^2)) inside.
double bump(double x, double c);

}  // namespace mpl
