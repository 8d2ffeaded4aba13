#include "mpl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "mpl/dbm.hpp"
#include "mpl/limit_laws.hpp"
#include "mpl/minor_chain.hpp"
#include "mpl/spectral.hpp"

#ifndef MPL_GIT_HASH
#define MPL_GIT_HASH "unknown"
#endif

namespace mpl {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double two_thirds_power(double n) {
    const double c = std::cbrt(n);
    return c * c;
}

std::uint64_t replica_seed(std::uint64_t master, Index replica) {
    return splitmix64(master ^ splitmix64(static_cast<std::uint64_t>(replica) + 0x51ed2701ULL));
}

template <class Scalar>
HermitianMatrix<Scalar> sample_replica(const ExperimentConfig& cfg, Index replica) {
    Engine rng = make_stream(cfg.master_seed, static_cast<std::uint64_t>(replica), Purpose::matrix);
    return sample_wigner<Scalar>({scalar_traits<Scalar>::symmetry, cfg.law, cfg.N}, rng);
}

/// Runs fn.template operator()<Scalar>() with Scalar picked from beta.
template <class F>
decltype(auto) with_scalar(int beta, F&& fn) {
    if (beta == 1) return fn.template operator()<double>();
    return fn.template operator()<cplx>();
}

std::string now_iso() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::vector<double> column(const std::vector<std::vector<double>>& rows, std::size_t c) {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[c]);
    return out;
}

std::vector<double> finite_only(std::vector<double> v) {
    v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return !std::isfinite(x); }), v.end());
    return v;
}

json moments_json(const Moments& m) {
    return {{"n", m.n}, {"mean", m.mean}, {"variance", m.variance}, {"sem", m.sem}, {"variance_se", m.variance_se}};
}

json ks_json(const KsResult& k) { return {{"D", k.statistic}, {"p", k.p_value}, {"n", k.n}}; }

json corr_json(const Correlation& c) {
    return {{"r", c.r}, {"ci_low", c.ci_low}, {"ci_high", c.ci_high}, {"degenerate", c.degenerate}};
}

CheckResult upper_check(std::string name, double value, double threshold, std::string detail = {}) {
    CheckResult c;
    c.name = std::move(name);
    c.value = value;
    c.threshold = threshold;
    c.passed = std::isfinite(value) && value <= threshold;
    c.detail = std::move(detail);
    return c;
}

CheckResult ks_check(std::string name, const KsResult& ks, double level) {
    CheckResult c;
    c.name = std::move(name);
    c.value = ks.p_value;
    c.threshold = level;
    if (!std::isfinite(ks.p_value)) {
        c.gating = false;
        c.passed = false;
        c.detail = "fewer than 30 points, no p-value";
    } else {
        c.passed = ks.p_value > level;
        c.detail = "D=" + std::to_string(ks.statistic) + " p must exceed the level";
    }
    return c;
}

/// Linear interpolation of a tabulated CDF; saves a Fredholm determinant per point.
std::function<double(double)> tabulated_tw_cdf(int beta) {
    const double lo = -10.0, hi = 6.0, h = 0.02;
    const int n = static_cast<int>(std::lround((hi - lo) / h)) + 1;
    auto table = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) (*table)[static_cast<std::size_t>(i)] = tracy_widom_cdf(beta, lo + h * i).cdf;
    return [table, lo, h, n](double s) {
        if (s <= lo) return table->front();
        const double u = (s - lo) / h;
        const int i = static_cast<int>(u);
        if (i >= n - 1) return table->back();
        const double f = u - i;
        return (1 - f) * (*table)[static_cast<std::size_t>(i)] + f * (*table)[static_cast<std::size_t>(i + 1)];
    };
}

RunArtifact start_artifact(const ExperimentConfig& cfg) {
    cfg.validate();
    RunArtifact a;
    a.config = cfg;
    a.fingerprint = build_fingerprint();
    a.warnings = cfg.regime_warnings();
    a.started_at = now_iso();
    return a;
}

json plot_table(std::vector<std::string> cols, const std::vector<std::vector<double>>& rows) {
    return {{"columns", std::move(cols)}, {"rows", rows}};
}

}  // namespace

// ---- config ------------------------------------------------------------------

std::string to_string(Regime r) {
    switch (r) {
        case Regime::subcritical: return "subcritical";
        case Regime::critical: return "critical";
        case Regime::supercritical: return "supercritical";
        case Regime::identities: return "identities";
        case Regime::dbm: return "dbm";
    }
    return "unknown";
}

Regime parse_regime(const std::string& name) {
    if (name == "sub" || name == "subcritical") return Regime::subcritical;
    if (name == "crit" || name == "critical") return Regime::critical;
    if (name == "super" || name == "supercritical") return Regime::supercritical;
    if (name == "identities") return Regime::identities;
    if (name == "dbm") return Regime::dbm;
    throw std::invalid_argument("unknown regime: " + name);
}

Index ExperimentConfig::effective_k() const {
    if (regime == Regime::critical && alpha > 0.0)
        return static_cast<Index>(std::floor(alpha * two_thirds_power(static_cast<double>(N)) + 1e-9));
    return k;
}

std::vector<std::string> ExperimentConfig::regime_warnings() const {
    std::vector<std::string> w;
    // k <= N^{2/3} iff k^3 <= N^2, compared exactly
    const long double k3 = std::pow(static_cast<long double>(effective_k()), 3);
    const long double n2 = static_cast<long double>(N) * static_cast<long double>(N);
    if (regime == Regime::subcritical && k3 > n2)
        w.push_back("k = " + std::to_string(effective_k()) + " exceeds N^(2/3); outside the subcritical domain");
    if (regime == Regime::supercritical && k3 < n2)
        w.push_back("k = " + std::to_string(effective_k()) + " is below N^(2/3); outside the supercritical domain");
    if (m > 5) w.push_back("m > 5 tracks indices beyond the proven range");
    return w;
}

void ExperimentConfig::validate() const {
    auto fail = [](const std::string& s) { throw std::invalid_argument("config: " + s); };
    if (beta != 1 && beta != 2) fail("beta must be 1 or 2");
    if (m < 1 || m > 10) fail("m must lie in [1, 10]");
    if (!(delta > 0.0 && delta < 1.0 / 3.0)) fail("delta must lie in (0, 1/3)");
    if (replicas < 1) fail("replicas must be positive");
    if (regime == Regime::identities) {
        for (const auto& t : identity_grid)
            if (t.N < 2 || t.k < 1 || t.k >= t.N || (t.beta != 1 && t.beta != 2)) fail("bad identity tuple");
        if (schur_probes < 1) fail("schur_probes must be positive");
        return;
    }
    if (N < 2) fail("N must be at least 2");
    if (alpha < 0.0) fail("alpha must be nonnegative");
    const Index kk = effective_k();
    if (kk < 1 || kk >= N) fail("k must satisfy 1 <= k < N (got " + std::to_string(kk) + ")");
    if (bins < 1 || !(window_low < window_high)) fail("bad critical window");
    if (dbm_grid_points < 1) fail("dbm_grid_points must be positive");
}

json ExperimentConfig::to_json() const {
    json grid = json::array();
    for (const auto& t : identity_grid)
        grid.push_back({{"N", t.N}, {"k", t.k}, {"law", to_string(t.law)}, {"beta", t.beta}, {"seed", t.seed}});
    return {{"regime", to_string(regime)},
            {"N", N},
            {"k", k},
            {"effective_k", effective_k()},
            {"alpha", alpha},
            {"beta", beta},
            {"law", to_string(law)},
            {"replicas", replicas},
            {"master_seed", master_seed},
            {"m", m},
            {"delta", delta},
            {"output", output},
            {"threads", threads},
            {"ks_level", ks_level},
            {"full_chain", full_chain},
            {"mean_tol", mean_tol},
            {"var_low", var_low},
            {"var_high", var_high},
            {"miss_slack", miss_slack},
            {"corr_bound", corr_bound},
            {"overlap_factor", overlap_factor},
            {"window_low", window_low},
            {"window_high", window_high},
            {"bins", bins},
            {"sigma_mult", sigma_mult},
            {"relative_check", relative_check},
            {"relative_tol", relative_tol},
            {"relative_floor", relative_floor},
            {"identity_grid", grid},
            {"schur_probes", schur_probes},
            {"dbm_grid_points", dbm_grid_points},
            {"omega0", omega0}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig c;
    c.regime = parse_regime(j.value("regime", to_string(c.regime)));
    c.N = j.value("N", c.N);
    c.k = j.value("k", c.k);
    c.alpha = j.value("alpha", c.alpha);
    c.beta = j.value("beta", c.beta);
    c.law = parse_entry_law(j.value("law", to_string(c.law)));
    c.replicas = j.value("replicas", c.replicas);
    c.master_seed = j.value("master_seed", c.master_seed);
    c.m = j.value("m", c.m);
    c.delta = j.value("delta", c.delta);
    c.output = j.value("output", c.output);
    c.threads = j.value("threads", c.threads);
    c.ks_level = j.value("ks_level", c.ks_level);
    c.full_chain = j.value("full_chain", c.full_chain);
    c.mean_tol = j.value("mean_tol", c.mean_tol);
    c.var_low = j.value("var_low", c.var_low);
    c.var_high = j.value("var_high", c.var_high);
    c.miss_slack = j.value("miss_slack", c.miss_slack);
    c.corr_bound = j.value("corr_bound", c.corr_bound);
    c.overlap_factor = j.value("overlap_factor", c.overlap_factor);
    c.window_low = j.value("window_low", c.window_low);
    c.window_high = j.value("window_high", c.window_high);
    c.bins = j.value("bins", c.bins);
    c.sigma_mult = j.value("sigma_mult", c.sigma_mult);
    c.relative_check = j.value("relative_check", c.relative_check);
    c.relative_tol = j.value("relative_tol", c.relative_tol);
    c.relative_floor = j.value("relative_floor", c.relative_floor);
    c.schur_probes = j.value("schur_probes", c.schur_probes);
    c.dbm_grid_points = j.value("dbm_grid_points", c.dbm_grid_points);
    c.omega0 = j.value("omega0", c.omega0);
    if (j.contains("identity_grid"))
        for (const auto& t : j.at("identity_grid"))
            c.identity_grid.push_back({t.at("N").get<Index>(), t.at("k").get<Index>(),
                                       parse_entry_law(t.at("law").get<std::string>()), t.at("beta").get<int>(),
                                       t.at("seed").get<std::uint64_t>()});
    return c;
}

std::vector<IdentityTuple> default_identity_grid(std::uint64_t master_seed) {
    std::vector<IdentityTuple> g;
    std::uint64_t idx = 0;
    for (Index n : {20, 60, 150})
        for (EntryLaw law : {EntryLaw::gaussian, EntryLaw::rademacher, EntryLaw::uniform})
            for (int beta : {1, 2}) g.push_back({n, std::max<Index>(1, n / 3), law, beta, master_seed * 1000 + idx++});
    return g;
}

// ---- artifact ----------------------------------------------------------------

int RunArtifact::exit_code() const {
    int code = 0;
    for (const auto& c : checks) {
        if (!c.gating || c.passed) continue;
        code = std::max(code, c.identity ? 2 : 1);
    }
    return code;
}

json RunArtifact::to_json() const {
    json cs = json::array();
    for (const auto& c : checks)
        cs.push_back({{"name", c.name},
                      {"passed", c.passed},
                      {"value", c.value},
                      {"threshold", c.threshold},
                      {"detail", c.detail},
                      {"identity", c.identity},
                      {"gating", c.gating}});
    return {{"schema_version", schema_version},
            {"config", config.to_json()},
            {"fingerprint", fingerprint},
            {"warnings", warnings},
            {"columns", columns},
            {"row_count", rows.size()},
            {"summary", summary},
            {"checks", cs},
            {"exit_code", exit_code()},
            {"wall_seconds", wall_seconds},
            {"started_at", started_at}};
}

void RunArtifact::write_csv(std::ostream& os) const {
    os << "# mpl schema " << schema_version << " regime " << to_string(config.regime) << '\n';
    for (std::size_t c = 0; c < columns.size(); ++c) os << (c ? "," : "") << columns[c];
    os << '\n' << std::setprecision(17);
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < r.size(); ++c) os << (c ? "," : "") << r[c];
        os << '\n';
    }
}

void RunArtifact::write(const std::string& prefix) const {
    std::ofstream js(prefix + ".json");
    if (!js) throw std::runtime_error("cannot write " + prefix + ".json");
    json j = to_json();
    j["rows_file"] = prefix + ".csv";
    js << j.dump(2) << '\n';
    std::ofstream csv(prefix + ".csv");
    if (!csv) throw std::runtime_error("cannot write " + prefix + ".csv");
    write_csv(csv);
}

json build_fingerprint() {
    return {{"git", MPL_GIT_HASH},
            {"compiler", __VERSION__},
            {"cplusplus", __cplusplus},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)}};
}

void for_each_replica(Index replicas, unsigned threads, const std::function<void(Index)>& body) {
    unsigned t = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
    t = static_cast<unsigned>(std::min<Index>(t, std::max<Index>(1, replicas)));
    if (t <= 1) {
        for (Index r = 0; r < replicas; ++r) body(r);
        return;
    }
    std::atomic<Index> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < t; ++w)
        pool.emplace_back([&] {
            for (Index r = next++; r < replicas; r = next++) {
                try {
                    body(r);
                } catch (...) {
                    std::lock_guard<std::mutex> lk(err_mu);
                    if (!err) err = std::current_exception();
                    next = replicas;
                }
            }
        });
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

RunArtifact run_experiment(const ExperimentConfig& cfg) {
    switch (cfg.regime) {
        case Regime::subcritical: return run_subcritical(cfg);
        case Regime::critical: return run_critical(cfg);
        case Regime::supercritical: return run_supercritical(cfg);
        case Regime::identities: return run_identities(cfg);
        case Regime::dbm: return run_dbm(cfg);
    }
    throw std::invalid_argument("unknown regime");
}

// ---- subcritical ---------------------------------------------------------------

RunArtifact run_subcritical(const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    RunArtifact a = start_artifact(cfg);
    const Index N = cfg.N, k = cfg.effective_k();
    const Index m = std::min(cfg.m, N - k);
    const double Nd = static_cast<double>(N), sk = std::sqrt(static_cast<double>(k));

    a.columns = {"replica"};
    for (Index i = 1; i <= m; ++i) a.columns.push_back("lambda_" + std::to_string(i));
    for (Index i = 1; i <= m; ++i) a.columns.push_back("minor_lambda_" + std::to_string(i));
    for (Index i = 1; i <= m; ++i) a.columns.push_back("clt_" + std::to_string(i));
    for (Index i = 1; i <= m; ++i) a.columns.push_back("overlap_" + std::to_string(i));

    a.rows.assign(static_cast<std::size_t>(cfg.replicas), {});
    for_each_replica(cfg.replicas, cfg.threads, [&](Index r) {
        with_scalar(cfg.beta, [&]<class S>() {
            const auto h = sample_replica<S>(cfg, r);
            Eigen::VectorXd top, bottom, ov(m);
            if (cfg.full_chain) {
                ChainOptions o;
                o.m = m;
                o.delta = cfg.delta;
                o.solver = ChainSolver::top;
                o.keep_vectors = false;
                o.lanczos_seed = replica_seed(cfg.master_seed, r);
                const auto c = run_chain(h, k, o);
                top = c.levels.front().top_eigenvalues.head(m);
                bottom = c.final_eigenvalues.head(m);
                ov = c.cumulative_overlap_direct.head(m);
            } else {
                // telescoping makes the endpoints enough for the sum and the overlap
                Engine lz = make_stream(cfg.master_seed, static_cast<std::uint64_t>(r), Purpose::lanczos);
                const auto s1 = lanczos_top(h, m, lz);
                const auto s2 = lanczos_top(h.lower_right(N - k), m, lz);
                top = s1.eigenvalues.head(m);
                bottom = s2.eigenvalues.head(m);
                for (Index i = 0; i < m; ++i)
                    ov(i) = std::abs(s1.eigenvectors.col(i).tail(N - k).dot(s2.eigenvectors.col(i)));
            }
            std::vector<double> row{static_cast<double>(r)};
            for (Index i = 0; i < m; ++i) row.push_back(top(i));
            for (Index i = 0; i < m; ++i) row.push_back(bottom(i));
            for (Index i = 0; i < m; ++i) row.push_back((Nd * (top(i) - bottom(i)) - static_cast<double>(k)) / sk);
            for (Index i = 0; i < m; ++i) row.push_back(ov(i));
            a.rows[static_cast<std::size_t>(r)] = std::move(row);
        });
    });

    const std::size_t c_clt = 1 + 2 * static_cast<std::size_t>(m);
    const std::size_t c_ov = 1 + 3 * static_cast<std::size_t>(m);
    const auto ref = gaussian_reference(cfg.beta);
    const double target_var = 2.0 / cfg.beta;

    json per_index = json::array();
    for (Index i = 0; i < m; ++i) {
        const auto x = column(a.rows, c_clt + static_cast<std::size_t>(i));
        const auto mo = moments(x);
        per_index.push_back({{"i", i + 1},
                             {"moments", moments_json(mo)},
                             {"variance_ratio", mo.variance / target_var},
                             {"ks", ks_json(ks_statistic(x, [&](double v) { return ref.cdf(v); }))}});
    }
    a.summary["clt"] = per_index;

    const auto clt = column(a.rows, c_clt);
    const auto mo = moments(clt);
    const auto ks = ks_statistic(clt, [&](double v) { return ref.cdf(v); });

    std::vector<double> miss;
    for (double o : column(a.rows, c_ov)) miss.push_back(1.0 - o);
    const double scale = static_cast<double>(k) / two_thirds_power(Nd);
    const double miss_bound = static_cast<double>(k) * std::pow(Nd, -2.0 / 3.0 + cfg.miss_slack);
    a.summary["alignment"] = {{"miss_p10", quantile(miss, 0.1)},
                              {"miss_median", median(miss)},
                              {"miss_p90", quantile(miss, 0.9)},
                              {"k_over_N23", scale},
                              {"median_over_scale", median(miss) / scale},
                              {"bound", miss_bound}};

    CheckResult cm;
    cm.name = "clt_mean";
    cm.value = mo.mean;
    cm.threshold = cfg.mean_tol;
    cm.passed = std::abs(mo.mean) <= cfg.mean_tol;
    cm.detail = "|mean| of the normalized one-index sum";
    a.checks.push_back(cm);

    CheckResult cv;
    cv.name = "clt_variance";
    cv.value = mo.variance / target_var;
    cv.threshold = cfg.var_high;
    cv.passed = cv.value >= cfg.var_low && cv.value <= cfg.var_high;
    cv.detail = "variance / (2/beta) in [" + std::to_string(cfg.var_low) + ", " + std::to_string(cfg.var_high) + "]";
    a.checks.push_back(cv);

    a.checks.push_back(ks_check("clt_ks_gaussian", ks, cfg.ks_level));
    a.checks.push_back(upper_check("alignment_median_miss", median(miss), miss_bound, "median of 1 - |overlap|"));

    // histogram against the Gaussian density
    std::vector<std::vector<double>> hist;
    const double sd = std::sqrt(target_var), lo = -4 * sd, hi = 4 * sd;
    const int nb = 32;
    std::vector<double> cnt(nb, 0.0);
    for (double v : clt)
        if (v >= lo && v < hi) cnt[static_cast<std::size_t>((v - lo) / (hi - lo) * nb)] += 1;
    const double w = (hi - lo) / nb;
    for (int b = 0; b < nb; ++b) {
        const double c = lo + (b + 0.5) * w;
        hist.push_back({c, cnt[static_cast<std::size_t>(b)] / (static_cast<double>(clt.size()) * w), ref.pdf(c)});
    }
    a.summary["plot"] = plot_table({"x", "empirical_density", "gaussian_density"}, hist);
    a.summary["moments"] = moments_json(mo);
    a.summary["ks"] = ks_json(ks);

    a.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return a;
}

// ---- supercritical -------------------------------------------------------------

RunArtifact run_supercritical(const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    RunArtifact a = start_artifact(cfg);
    const Index N = cfg.N, k = cfg.effective_k(), n2 = N - k;
    const double Nd = static_cast<double>(N), n2d = static_cast<double>(n2);
    const double s = std::sqrt(n2d / Nd);

    a.columns = {"replica", "lambda_1", "minor_lambda_1", "X", "Y", "Y_uncorrected", "overlap_sq"};
    a.rows.assign(static_cast<std::size_t>(cfg.replicas), {});
    for_each_replica(cfg.replicas, cfg.threads, [&](Index r) {
        with_scalar(cfg.beta, [&]<class S>() {
            const auto h = sample_replica<S>(cfg, r);
            Engine lz = make_stream(cfg.master_seed, static_cast<std::uint64_t>(r), Purpose::lanczos);
            const auto s1 = lanczos_top(h, 1, lz);
            const auto s2 = lanczos_top(h.lower_right(n2), 1, lz);
            const double l = s1.eigenvalues(0), mu = s2.eigenvalues(0);
            const double ov = std::norm(s1.eigenvectors.col(0).tail(n2).dot(s2.eigenvectors.col(0)));
            const double X = (l - 2.0) * two_thirds_power(Nd);
            const double Yraw = (mu - 2.0 * s) * two_thirds_power(n2d);
            a.rows[static_cast<std::size_t>(r)] = {static_cast<double>(r), l, mu, X, Yraw / s, Yraw, ov};
        });
    });

    const auto X = column(a.rows, 3), Y = column(a.rows, 4), ov = column(a.rows, 6);
    const auto tw = tabulated_tw_cdf(cfg.beta);
    const auto ksx = ks_statistic(X, tw), ksy = ks_statistic(Y, tw);
    const std::uint64_t boot = splitmix64(cfg.master_seed ^ 0xb007ULL);
    const auto pr = pearson(X, Y, boot);
    const auto sr = spearman(X, Y, boot);
    const auto om = moments(ov);
    const double ov_bound = cfg.overlap_factor * two_thirds_power(Nd) / static_cast<double>(k);

    // factorisation over the bump bank
    const std::vector<double> bank{-2.0, -1.0, 0.0, 1.0};
    json fact = json::array();
    double max_z = 0.0;
    const double R = static_cast<double>(X.size());
    for (double cx : bank)
        for (double cy : bank) {
            std::vector<double> f, g;
            for (std::size_t i = 0; i < X.size(); ++i) {
                f.push_back(bump(X[i], cx));
                g.push_back(bump(Y[i], cy));
            }
            const double mf = moments(f).mean, mg = moments(g).mean;
            std::vector<double> d;
            for (std::size_t i = 0; i < f.size(); ++i) d.push_back((f[i] - mf) * (g[i] - mg));
            const auto md = moments(d);
            const double cov = md.mean * R / std::max(1.0, R - 1.0);
            const double z = md.sem > 0 ? cov / md.sem : 0.0;
            max_z = std::max(max_z, std::abs(z));
            fact.push_back({{"cx", cx}, {"cy", cy}, {"E_fg", md.mean + mf * mg}, {"E_f_E_g", mf * mg}, {"cov", cov},
                            {"z", z}});
        }

    a.summary["ks_top"] = ks_json(ksx);
    a.summary["ks_minor"] = ks_json(ksy);
    a.summary["pearson"] = corr_json(pr);
    a.summary["spearman"] = corr_json(sr);
    a.summary["overlap_sq"] = {{"moments", moments_json(om)}, {"N23_over_k", two_thirds_power(Nd) / k},
                               {"bound", ov_bound}};
    a.summary["factorization"] = fact;
    a.summary["moments_top"] = moments_json(moments(X));
    a.summary["moments_minor"] = moments_json(moments(Y));
    a.summary["tw_reference"] = {{"mean", tracy_widom_moments(cfg.beta).mean},
                                 {"variance", tracy_widom_moments(cfg.beta).variance}};

    a.checks.push_back(upper_check("overlap_bound", om.mean, ov_bound, "mean |<w1, w1 minor>|^2"));
    a.checks.push_back(ks_check("tw_ks_top", ksx, cfg.ks_level));
    a.checks.push_back(ks_check("tw_ks_minor", ksy, cfg.ks_level));
    auto cc = upper_check("decorrelation", std::abs(pr.r), cfg.corr_bound, "|pearson r| of the rescaled top eigenvalues");
    if (pr.degenerate) {
        cc.passed = false;
        cc.detail = "degenerate sample";
    }
    a.checks.push_back(cc);
    auto fz = upper_check("factorization_max_z", max_z, 3.0, "bump bank at -2,-1,0,1");
    fz.gating = false;
    a.checks.push_back(fz);

    // empirical CDFs against the reference
    std::vector<double> xs = X, ys = Y;
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    std::vector<std::vector<double>> plot;
    for (double v = -5.0; v <= 3.0 + 1e-12; v += 0.25) {
        const double ex = static_cast<double>(std::upper_bound(xs.begin(), xs.end(), v) - xs.begin()) / R;
        const double ey = static_cast<double>(std::upper_bound(ys.begin(), ys.end(), v) - ys.begin()) / R;
        plot.push_back({v, ex, ey, tw(v)});
    }
    a.summary["plot"] = plot_table({"s", "ecdf_top", "ecdf_minor", "tracy_widom"}, plot);

    a.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return a;
}

// ---- critical --------------------------------------------------------------------

RunArtifact run_critical(const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    RunArtifact a = start_artifact(cfg);
    const Index N = cfg.N, k = cfg.effective_k(), n2 = N - k;
    const double Nd = static_cast<double>(N), n2d = static_cast<double>(n2);
    const double N23 = two_thirds_power(Nd);
    const double ycenter = 2.0 * std::sqrt(n2d / Nd);
    const double yfactor = std::sqrt(Nd) * std::pow(n2d, 1.0 / 6.0);

    a.columns = {"replica", "x_in_window", "y_in_window", "X_1", "Y_1"};
    std::vector<Eigen::VectorXd> xs(static_cast<std::size_t>(cfg.replicas)), ys(xs.size());
    a.rows.assign(xs.size(), {});
    for_each_replica(cfg.replicas, cfg.threads, [&](Index r) {
        with_scalar(cfg.beta, [&]<class S>() {
            const auto h = sample_replica<S>(cfg, r);
            const Eigen::VectorXd l = eigvalsh(h);
            const Eigen::VectorXd mu = eigvalsh(h.lower_right(n2));
            std::vector<double> X, Y;
            for (Index i = 0; i < l.size(); ++i) {
                const double v = (l(i) - 2.0) * N23;
                if (v < cfg.window_low) break;
                if (v < cfg.window_high) X.push_back(v);
            }
            for (Index i = 0; i < mu.size(); ++i) {
                const double v = (mu(i) - ycenter) * yfactor;
                if (v < cfg.window_low) break;
                if (v < cfg.window_high) Y.push_back(v);
            }
            const auto ri = static_cast<std::size_t>(r);
            xs[ri] = Eigen::Map<Eigen::VectorXd>(X.data(), static_cast<Index>(X.size()));
            ys[ri] = Eigen::Map<Eigen::VectorXd>(Y.data(), static_cast<Index>(Y.size()));
            a.rows[ri] = {static_cast<double>(r), static_cast<double>(X.size()), static_cast<double>(Y.size()),
                          (l(0) - 2.0) * N23, (mu(0) - ycenter) * yfactor};
        });
    });

    IntensityAccumulator acc(cfg.window_low, cfg.window_high, cfg.bins);
    for (std::size_t r = 0; r < xs.size(); ++r) acc.add_replica(xs[r], ys[r]);

    // pairs per unit (X,Y) area, then to N^{2/3} p(x,y) with p normalised by N (N-k)
    const double to_p = std::pow(Nd / n2d, 5.0 / 6.0);
    const IntensitySurface raw = binned_intensity(acc, 1.0);
    const Index B = cfg.bins;
    const double w = acc.width();
    const auto gl = gauss_legendre(4);

    Eigen::MatrixXd pred(B, B);
    for (Index bx = 0; bx < B; ++bx)
        for (Index by = 0; by < B; ++by) {
            double s = 0.0;
            for (std::size_t i = 0; i < gl.x.size(); ++i)
                for (std::size_t j = 0; j < gl.x.size(); ++j) {
                    const double X = acc.center(bx) + 0.5 * w * gl.x[i];
                    const double Y = acc.center(by) + 0.5 * w * gl.x[j];
                    s += gl.w[i] * gl.w[j] * fn_joint_intensity({cfg.alpha > 0 ? cfg.alpha : k / N23, X, Y});
                }
            pred(bx, by) = s / 4.0;
        }

    const bool reference = cfg.beta == 2;
    std::vector<std::vector<double>> plot;
    json bins = json::array();
    double max_det_z = 0.0, max_fact_z = 0.0;
    for (Index bx = 0; bx < B; ++bx)
        for (Index by = 0; by < B; ++by) {
            const double v = raw.value(bx, by) * to_p, sg = raw.sigma(bx, by) * to_p;
            const double p = pred(bx, by);
            const double det_z = raw.sigma(bx, by) > 0 ? (raw.value(bx, by) - p / 4.0) / raw.sigma(bx, by) : 0.0;
            max_det_z = std::max(max_det_z, std::abs(det_z));
            max_fact_z = std::max(max_fact_z, std::abs(raw.factor_z(bx, by)));
            bins.push_back({{"X", acc.center(bx)}, {"Y", acc.center(by)}, {"intensity", v}, {"sigma", sg},
                            {"pairs", raw.counts(bx, by)}, {"predicted", p}, {"pair_density", raw.value(bx, by)},
                            {"det_only", p / 4.0}, {"det_only_z", det_z}, {"factor_cov", raw.factor_cov(bx, by)},
                            {"factor_z", raw.factor_z(bx, by)}});
            plot.push_back({acc.center(bx), acc.center(by), v, sg, reference ? p : kNaN});
            if (!reference) continue;

            const std::string tag = "[" + std::to_string(bx) + "," + std::to_string(by) + "]";
            CheckResult c;
            c.name = "fn_bin_sigma" + tag;
            c.threshold = cfg.sigma_mult;
            if (raw.counts(bx, by) == 0 || sg == 0.0) {
                c.gating = false;
                c.passed = false;
                c.value = kNaN;
                c.detail = "empty bin";
            } else {
                c.value = std::abs(v - p) / sg;
                c.passed = c.value <= cfg.sigma_mult;
                c.detail = "|empirical - predicted| in Monte Carlo sigmas";
            }
            a.checks.push_back(c);
            if (cfg.relative_check && p > cfg.relative_floor) {
                CheckResult rc = upper_check("fn_bin_relative" + tag, std::abs(v / p - 1.0), cfg.relative_tol,
                                             "relative deviation where the prediction exceeds the floor");
                a.checks.push_back(rc);
            }
        }
    if (!reference) a.warnings.push_back("beta = 1: no reference intensity, data only");

    auto dz = upper_check("det_only_max_z", max_det_z, cfg.sigma_mult,
                          "pair density in (X,Y) against the bare determinant");
    dz.gating = false;
    a.checks.push_back(dz);
    auto fz = upper_check("factorization_max_z", max_fact_z, 3.0, "covariance of the marginal bin counts");
    fz.gating = false;
    a.checks.push_back(fz);

    // same data re-binned at B and 2B: the comparison is bin averaged, so both should agree
    const double fn_alpha = cfg.alpha > 0 ? cfg.alpha : k / N23;
    json sensitivity = json::array();
    for (Index nb : {B, 2 * B}) {
        IntensityAccumulator alt(cfg.window_low, cfg.window_high, nb);
        for (std::size_t r = 0; r < xs.size(); ++r) alt.add_replica(xs[r], ys[r]);
        const IntensitySurface s = binned_intensity(alt, 1.0);
        double ratio = 0.0, worst = 0.0;
        int used = 0;
        for (Index bx = 0; bx < nb; ++bx)
            for (Index by = 0; by < nb; ++by) {
                double p = 0.0;
                for (std::size_t i = 0; i < gl.x.size(); ++i)
                    for (std::size_t j = 0; j < gl.x.size(); ++j)
                        p += gl.w[i] * gl.w[j] *
                             fn_joint_intensity({fn_alpha, alt.center(bx) + 0.5 * alt.width() * gl.x[i],
                                                 alt.center(by) + 0.5 * alt.width() * gl.x[j]});
                p /= 4.0;
                if (s.sigma(bx, by) > 0)
                    worst = std::max(worst, std::abs(s.value(bx, by) - p / 4.0) / s.sigma(bx, by));
                if (p > cfg.relative_floor) {
                    ratio += s.value(bx, by) * to_p / p;
                    ++used;
                }
            }
        sensitivity.push_back({{"bins", nb}, {"mean_ratio", used ? ratio / used : kNaN}, {"det_only_max_z", worst}});
    }

    a.summary["k"] = k;
    a.summary["bin_sensitivity"] = sensitivity;
    a.summary["alpha_effective"] = k / N23;
    a.summary["normalization"] = to_p;
    a.summary["bins"] = bins;
    a.summary["plot"] = plot_table({"X", "Y", "intensity", "sigma", "predicted"}, plot);
    a.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return a;
}

// ---- identities ------------------------------------------------------------------

namespace {

struct IdentityRow {
    double recursion = 0.0;  // divided by N
    double overlap = 0.0;
    double parseval = 0.0;
    double interlacing = std::numeric_limits<double>::infinity();
    double telescoping = 0.0;
    double schur = 0.0;
    double ward = 0.0;
    double skipped = 0.0;
};

template <class S>
IdentityRow identity_tuple(const IdentityTuple& t, Index m, double delta, Index probes) {
    Engine rng = make_stream(t.seed, 0, Purpose::matrix);
    const auto h = sample_wigner<S>({scalar_traits<S>::symmetry, t.law, t.N}, rng);
    ChainOptions o;
    o.m = std::min(m, t.N - t.k);
    o.delta = delta;
    const auto c = run_chain(h, t.k, o);
    IdentityRow row;
    row.telescoping = c.telescoping_error;
    for (const auto& lv : c.levels) {
        row.parseval = std::max(row.parseval, lv.parseval_error);
        row.interlacing = std::min(row.interlacing, lv.interlacing_margin);
        for (Index i = 1; i <= c.m; ++i) {
            const auto rr = recursion_residual(lv, lv.minor_eigenvalues, i);
            const auto oo = overlap_onestep(lv, i);
            if (rr.status == IdentityStatus::ok)
                row.recursion = std::max(row.recursion, rr.value / static_cast<double>(t.N));
            else
                row.skipped += 1;
            if (oo.status == IdentityStatus::ok)
                row.overlap = std::max(row.overlap, std::abs(oo.value - lv.overlap_direct(i - 1)));
        }
    }
    Engine pr = make_stream(t.seed, 0, Purpose::probe);
    std::uniform_real_distribution<double> E(-2.5, 2.5), eta(0.05, 1.0);
    for (Index p = 0; p < probes; ++p) {
        const cplx z1(E(pr), eta(pr)), z2(E(pr), eta(pr));
        row.schur = std::max(row.schur, schur_identity_residual(h, t.k, z1, z2));
        row.ward = std::max(row.ward, ward_residual(resolvent(h, ResolventProbe(z1)), z1.imag()));
    }
    return row;
}

}  // namespace

RunArtifact run_identities(const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    RunArtifact a = start_artifact(cfg);
    const auto grid = cfg.identity_grid.empty() ? default_identity_grid(cfg.master_seed) : cfg.identity_grid;
    a.columns = {"tuple", "N", "k", "law", "beta", "seed", "recursion_over_N", "overlap", "parseval",
                 "interlacing_margin", "telescoping", "schur", "ward", "skipped"};
    a.rows.assign(grid.size(), {});
    for_each_replica(static_cast<Index>(grid.size()), cfg.threads, [&](Index r) {
        const auto& t = grid[static_cast<std::size_t>(r)];
        const IdentityRow x = t.beta == 1 ? identity_tuple<double>(t, cfg.m, cfg.delta, cfg.schur_probes)
                                          : identity_tuple<cplx>(t, cfg.m, cfg.delta, cfg.schur_probes);
        a.rows[static_cast<std::size_t>(r)] = {static_cast<double>(r), static_cast<double>(t.N),
                                               static_cast<double>(t.k), static_cast<double>(t.law),
                                               static_cast<double>(t.beta), static_cast<double>(t.seed),
                                               x.recursion, x.overlap, x.parseval, x.interlacing, x.telescoping,
                                               x.schur, x.ward, x.skipped};
    });

    struct Spec {
        const char* name;
        std::size_t col;
        double threshold;
        bool lower;  // the identity needs value >= threshold
    };
    const std::vector<Spec> specs{{"recursion", 6, 1e-8, false},  {"overlap", 7, 1e-8, false},
                                  {"parseval", 8, 1e-10, false},  {"interlacing", 9, -1e-10, true},
                                  {"telescoping", 10, 1e-8, false}, {"schur", 11, 1e-9, false},
                                  {"ward", 12, 1e-8, false}};
    json worst = json::object();
    for (const auto& s : specs) {
        std::size_t wi = 0;
        for (std::size_t r = 1; r < a.rows.size(); ++r) {
            const double v = a.rows[r][s.col], best = a.rows[wi][s.col];
            if (s.lower ? v < best : v > best) wi = r;
        }
        const auto& t = grid[wi];
        const double v = a.rows[wi][s.col];
        const std::string where = "N=" + std::to_string(t.N) + " k=" + std::to_string(t.k) + " law=" +
                                  to_string(t.law) + " beta=" + std::to_string(t.beta) +
                                  " seed=" + std::to_string(t.seed);
        CheckResult c;
        c.name = std::string("identity_") + s.name;
        c.value = v;
        c.threshold = s.threshold;
        c.passed = std::isfinite(v) && (s.lower ? v >= s.threshold : v <= s.threshold);
        c.identity = true;
        c.detail = "worst at " + where;
        a.checks.push_back(c);
        worst[s.name] = {{"value", v}, {"threshold", s.threshold}, {"tuple", wi}, {"N", t.N}, {"k", t.k},
                         {"law", to_string(t.law)}, {"beta", t.beta}, {"seed", t.seed}};
    }
    a.summary["worst"] = worst;
    a.summary["tuples"] = grid.size();

    std::vector<std::vector<double>> plot;
    for (const auto& r : a.rows) plot.push_back({r[1], r[6], r[7], r[8], r[11], r[12]});
    a.summary["plot"] = plot_table({"N", "recursion_over_N", "overlap", "parseval", "schur", "ward"}, plot);
    a.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return a;
}

// ---- dbm ---------------------------------------------------------------------------

RunArtifact run_dbm(const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    RunArtifact a = start_artifact(cfg);
    const Index N = cfg.N, k = cfg.effective_k();
    DbmConfig d = DbmConfig::standard(N, k, cfg.beta, cfg.dbm_grid_points, cfg.omega0);
    d.m = std::min(cfg.m, N - k);

    a.columns = {"replica", "flow_1", "sde_1", "flow_2", "sde_2", "diff1_start", "diff1_end",
                 "diff2_start", "diff2_end", "theta_sup_11", "halvings", "failed"};
    a.rows.assign(static_cast<std::size_t>(cfg.replicas), {});
    for_each_replica(cfg.replicas, cfg.threads, [&](Index r) {
        with_scalar(cfg.beta, [&]<class S>() {
            const auto h = sample_replica<S>(cfg, r);
            std::vector<double> row{static_cast<double>(r)};
            try {
                const auto rep = coupling_experiment(h, d, replica_seed(cfg.master_seed, r));
                row.insert(row.end(), {rep.lambda1_flow(0), rep.lambda1_sde(0), rep.lambda2_flow(0),
                                       rep.lambda2_sde(0), rep.diff1_start(0), rep.diff1(0), rep.diff2_start(0),
                                       rep.diff2(0), rep.theta_sup(0, 0),
                                       static_cast<double>(rep.max_halvings_used), 0.0});
            } catch (const NumericalError&) {
                row.insert(row.end(), 9, kNaN);
                row.insert(row.end(), {kNaN, 1.0});
            }
            a.rows[static_cast<std::size_t>(r)] = std::move(row);
        });
    });

    double failed = 0.0;
    for (const auto& r : a.rows) failed += r.back();
    a.checks.push_back(upper_check("sde_failures", failed, 0.0, "replicas where step halving gave up"));

    json levels = json::array();
    for (int lvl = 0; lvl < 2; ++lvl) {
        const auto f = moments(finite_only(column(a.rows, 1 + 2 * lvl)));
        const auto p = moments(finite_only(column(a.rows, 2 + 2 * lvl)));
        const double zm = std::abs(f.mean - p.mean) / std::sqrt(f.sem * f.sem + p.sem * p.sem);
        const double zv = std::abs(f.variance - p.variance) /
                          std::sqrt(f.variance_se * f.variance_se + p.variance_se * p.variance_se);
        const std::string tag = std::to_string(lvl + 1);
        a.checks.push_back(upper_check("sde_vs_flow_mean_" + tag, zm, 3.0, "mean difference in standard errors"));
        a.checks.push_back(
            upper_check("sde_vs_flow_variance_" + tag, zv, 3.0, "variance difference in standard errors"));
        const auto ds = finite_only(column(a.rows, 5 + 2 * lvl)), de = finite_only(column(a.rows, 6 + 2 * lvl));
        levels.push_back({{"level", lvl + 1}, {"flow", moments_json(f)}, {"sde", moments_json(p)},
                          {"median_diff_start", ds.empty() ? kNaN : median(ds)},
                          {"median_diff_end", de.empty() ? kNaN : median(de)}});
    }
    a.summary["levels"] = levels;
    a.summary["t1"] = d.t1();
    a.summary["target"] = std::pow(static_cast<double>(N), -2.0 / 3.0);
    a.summary["step"] = d.effective_step();

    std::vector<std::vector<double>> plot;
    for (const auto& r : a.rows) plot.push_back({r[0], r[5], r[6], r[7], r[8]});
    a.summary["plot"] = plot_table({"replica", "diff1_start", "diff1_end", "diff2_start", "diff2_end"}, plot);
    a.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return a;
}

// ---- estimators ----------------------------------------------------------------------

KsResult ks_statistic(const std::vector<double>& sample, const std::function<double(double)>& cdf) {
    return ks_test(sample, cdf);
}

IntensityAccumulator::IntensityAccumulator(double low, double high, Index bins) : low_(low), high_(high), bins_(bins) {
    if (!(low < high) || bins < 1) throw std::invalid_argument("IntensityAccumulator: bad window");
}

Index IntensityAccumulator::bin_of(double v) const {
    if (!(v >= low_ && v < high_)) return -1;
    return std::min<Index>(bins_ - 1, static_cast<Index>((v - low_) / width()));
}

void IntensityAccumulator::add_replica(const Eigen::VectorXd& X, const Eigen::VectorXd& Y) {
    Eigen::VectorXd cx = Eigen::VectorXd::Zero(bins_), cy = Eigen::VectorXd::Zero(bins_);
    for (Index i = 0; i < X.size(); ++i)
        if (Index b = bin_of(X(i)); b >= 0) cx(b) += 1;
    for (Index i = 0; i < Y.size(); ++i)
        if (Index b = bin_of(Y(i)); b >= 0) cy(b) += 1;
    pair_counts_.push_back(cx * cy.transpose());
    x_counts_.push_back(cx);
    y_counts_.push_back(cy);
}

void IntensityAccumulator::merge(const IntensityAccumulator& other) {
    if (other.bins_ != bins_ || other.low_ != low_ || other.high_ != high_)
        throw std::invalid_argument("IntensityAccumulator: incompatible windows");
    pair_counts_.insert(pair_counts_.end(), other.pair_counts_.begin(), other.pair_counts_.end());
    x_counts_.insert(x_counts_.end(), other.x_counts_.begin(), other.x_counts_.end());
    y_counts_.insert(y_counts_.end(), other.y_counts_.begin(), other.y_counts_.end());
}

IntensitySurface binned_intensity(const IntensityAccumulator& acc, double scale) {
    const Index B = acc.bins();
    const auto R = static_cast<double>(acc.replicas());
    if (R < 2) throw std::invalid_argument("binned_intensity: need at least two replicas");
    const double area = acc.width() * acc.width();

    IntensitySurface s;
    s.centers.resize(B);
    for (Index b = 0; b < B; ++b) s.centers(b) = acc.center(b);
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(B, B), sq = sum;
    Eigen::VectorXd mx = Eigen::VectorXd::Zero(B), my = mx;
    for (std::size_t r = 0; r < acc.pair_counts().size(); ++r) {
        sum += acc.pair_counts()[r];
        sq += acc.pair_counts()[r].cwiseProduct(acc.pair_counts()[r]);
        mx += acc.x_counts()[r];
        my += acc.y_counts()[r];
    }
    mx /= R;
    my /= R;
    const Eigen::MatrixXd mean = sum / R;
    const Eigen::MatrixXd var = ((sq - R * mean.cwiseProduct(mean)) / (R - 1)).cwiseMax(0.0);
    s.counts = sum;
    s.value = mean * (scale / area);
    s.sigma = (var / R).cwiseSqrt() * (scale / area);

    s.factor_cov = Eigen::MatrixXd::Zero(B, B);
    s.factor_z = Eigen::MatrixXd::Zero(B, B);
    for (Index a = 0; a < B; ++a)
        for (Index b = 0; b < B; ++b) {
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t r = 0; r < acc.x_counts().size(); ++r) {
                const double d = (acc.x_counts()[r](a) - mx(a)) * (acc.y_counts()[r](b) - my(b));
                m1 += d;
                m2 += d * d;
            }
            m1 /= R;
            const double sd = std::sqrt(std::max(0.0, (m2 / R - m1 * m1) * R / (R - 1)));
            s.factor_cov(a, b) = m1 * R / (R - 1);
            s.factor_z(a, b) = sd > 0 ? s.factor_cov(a, b) / (sd / std::sqrt(R)) : 0.0;
        }
    return s;
}

double bump(double x, double c) {
    const double u = 2.0 * (x - c);
    if (std::abs(u) >= 1.0) return 0.0;
    return std::exp(-1.0 / (1.0 - u * u));
}

}  // namespace mpl
