#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "mpl/harness.hpp"
#include "mpl/stats.hpp"

using namespace mpl;

namespace {

std::vector<double> uniforms(std::uint64_t seed, std::uint64_t rep, std::size_t n) {
    auto rng = make_stream(seed, rep, Purpose::probe);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> x(n);
    for (auto& v : x) v = u(rng);
    return x;
}

ExperimentConfig small(Regime r) {
    ExperimentConfig c;
    c.regime = r;
    c.threads = 1;
    return c;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("ks against the sample's own empirical cdf") {
    auto x = uniforms(3, 0, 500);
    std::vector<double> sorted = x;
    std::sort(sorted.begin(), sorted.end());
    const auto ecdf = [&](double v) {
        return static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), v) - sorted.begin()) / 500.0;
    };
    // the one-sided lower statistic is one step at the jumps
    CHECK(ks_statistic(x, ecdf).statistic <= 1.0 / 500.0 + 1e-15);
}

TEST_CASE("ks p-values for uniform draws") {
    int ok = 0;
    for (std::uint64_t s = 0; s < 1000; ++s) {
        const auto r = ks_statistic(uniforms(777, s, 10000), [](double v) { return std::clamp(v, 0.0, 1.0); });
        ok += r.p_value > 0.001;
    }
    CHECK(ok >= 999);
    CHECK(std::isnan(ks_statistic(uniforms(1, 1, 29), [](double v) { return v; }).p_value));
}

TEST_CASE("pearson estimator") {
    const auto x = uniforms(4, 0, 300);
    const auto c = pearson(x, x, 11);
    CHECK(c.r == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_FALSE(c.degenerate);
    CHECK(pearson(x, std::vector<double>(300, 2.0), 11).degenerate);

    // interval width scales like 1/sqrt(n)
    auto width = [](std::size_t n) {
        auto rng = make_stream(5, n, Purpose::probe);
        std::normal_distribution<double> g;
        std::vector<double> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = g(rng);
            b[i] = 0.5 * a[i] + g(rng);
        }
        const auto c = pearson(a, b, 9);
        return c.ci_high - c.ci_low;
    };
    CHECK(width(800) / width(200) == doctest::Approx(0.5).epsilon(0.15));
    CHECK(width(3200) / width(800) == doctest::Approx(0.5).epsilon(0.15));
}

TEST_CASE("binned intensity") {
    IntensityAccumulator acc(-4.0, 1.0, 3);
    Eigen::VectorXd X(3), Y(2);
    X << 0.5, -3.9, 7.0;
    Y << 0.2, -1.0;
    acc.add_replica(X, Y);
    acc.add_replica(Eigen::VectorXd(), Y);
    CHECK(acc.replicas() == 2);
    const auto s = binned_intensity(acc, 2.0);
    const double area = (5.0 / 3.0) * (5.0 / 3.0);
    // replica 1: X bins {0, 2}; Y bins {2, 1}
    CHECK(s.counts(2, 2) == 1.0);
    CHECK(s.counts(0, 1) == 1.0);
    CHECK(s.counts.sum() == 4.0);
    CHECK(s.value(2, 2) == doctest::Approx(0.5 * 2.0 / area));
    CHECK(s.sigma(2, 2) == doctest::Approx(0.5 * 2.0 / area));
    CHECK(s.centers(1) == doctest::Approx(-1.5));
    CHECK_THROWS_AS(IntensityAccumulator(1.0, 1.0, 3), std::invalid_argument);

    // independent marginals factorise, shared ones do not
    IntensityAccumulator ind(0.0, 1.0, 2), dep(0.0, 1.0, 2);
    auto rng = make_stream(8, 0, Purpose::probe);
    std::poisson_distribution<int> P(3.0);
    for (int r = 0; r < 4000; ++r) {
        const int a = P(rng), b = P(rng);
        ind.add_replica(Eigen::VectorXd::Constant(a, 0.25), Eigen::VectorXd::Constant(b, 0.25));
        dep.add_replica(Eigen::VectorXd::Constant(a, 0.25), Eigen::VectorXd::Constant(a, 0.25));
    }
    CHECK(std::abs(binned_intensity(ind).factor_z(0, 0)) < 4.0);
    CHECK(binned_intensity(dep).factor_z(0, 0) > 10.0);
    CHECK(binned_intensity(dep).factor_cov(0, 0) == doctest::Approx(3.0).epsilon(0.1));
}

TEST_CASE("bump bank functions") {
    CHECK(bump(0.0, 0.0) == doctest::Approx(std::exp(-1.0)));
    CHECK(bump(0.5, 0.0) == 0.0);
    CHECK(bump(-0.5, 0.0) == 0.0);
    CHECK(bump(-1.7, -2.0) == doctest::Approx(bump(0.3, 0.0)));
    CHECK(bump(0.499, 0.0) < 1e-100);
}

TEST_CASE("config parsing and k") {
    CHECK(parse_regime("sub") == Regime::subcritical);
    CHECK(parse_regime("crit") == Regime::critical);
    CHECK(parse_regime("supercritical") == Regime::supercritical);
    CHECK_THROWS_AS(parse_regime("hyper"), std::invalid_argument);

    auto c = small(Regime::critical);
    c.N = 300;
    c.alpha = 1.0;
    CHECK(c.effective_k() == 44);
    c.N = 1000;
    CHECK(c.effective_k() == 100);
    c.N = 300;
    c.alpha = 50.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);

    auto d = small(Regime::subcritical);
    d.N = 50;
    d.k = 50;
    CHECK_THROWS_AS(d.validate(), std::invalid_argument);
    d.k = 5;
    d.beta = 3;
    CHECK_THROWS_AS(d.validate(), std::invalid_argument);
    d.beta = 2;
    d.m = 11;
    CHECK_THROWS_AS(d.validate(), std::invalid_argument);
    d.m = 5;
    CHECK_NOTHROW(d.validate());
}

TEST_CASE("regime guards sit on k = N^(2/3)") {
    auto c = small(Regime::subcritical);
    c.N = 1000;
    c.k = 100;
    CHECK(c.regime_warnings().empty());
    c.k = 101;
    CHECK(c.regime_warnings().size() == 1);
    c.regime = Regime::supercritical;
    CHECK(c.regime_warnings().empty());
    c.k = 100;
    CHECK(c.regime_warnings().empty());
    c.k = 99;
    CHECK(c.regime_warnings().size() == 1);
    c.N = 2000;  // N^{2/3} = 158.74
    c.k = 158;
    CHECK(c.regime_warnings().size() == 1);
    c.k = 159;
    CHECK(c.regime_warnings().empty());
}

TEST_CASE("config json round trip") {
    auto c = small(Regime::identities);
    c.identity_grid = {{30, 7, EntryLaw::rademacher, 1, 99}};
    c.master_seed = 12345678901234ULL;
    c.var_low = 0.7;
    const auto back = ExperimentConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
    CHECK(back.identity_grid.at(0).law == EntryLaw::rademacher);
}

TEST_CASE("exit codes") {
    RunArtifact a;
    CHECK(a.exit_code() == 0);
    CheckResult info;
    info.passed = false;
    info.gating = false;
    a.checks.push_back(info);
    CHECK(a.exit_code() == 0);
    CheckResult stat;
    stat.passed = false;
    a.checks.push_back(stat);
    CHECK(a.exit_code() == 1);
    CheckResult id;
    id.passed = false;
    id.identity = true;
    a.checks.push_back(id);
    CHECK(a.exit_code() == 2);
}

TEST_CASE("subcritical run is reproducible and thread independent") {
    auto c = small(Regime::subcritical);
    c.N = 120;
    c.k = 6;
    c.m = 2;
    c.replicas = 40;
    const auto a = run_subcritical(c);
    const auto b = run_subcritical(c);
    c.threads = 3;
    const auto t = run_subcritical(c);
    REQUIRE(a.rows.size() == 40);
    CHECK(a.rows == b.rows);
    CHECK(a.rows == t.rows);
    CHECK(a.columns.size() == 1 + 4 * 2);
    CHECK(a.columns.at(5) == "clt_1");
    for (const auto& r : a.rows) {
        CHECK(r.at(1) >= r.at(3));  // interlacing of the endpoint top eigenvalues
        CHECK(r.at(7) <= 1.0 + 1e-12);
    }
    std::vector<std::string> names;
    for (const auto& ch : a.checks) names.push_back(ch.name);
    CHECK(names == std::vector<std::string>{"clt_mean", "clt_variance", "clt_ks_gaussian", "alignment_median_miss"});
    CHECK(a.summary.contains("plot"));
    CHECK(a.fingerprint.contains("git"));

    // the full chain gives the same values up to rounding
    c.full_chain = true;
    c.threads = 1;
    c.replicas = 5;
    const auto f = run_subcritical(c);
    for (std::size_t r = 0; r < 5; ++r)
        for (std::size_t j = 1; j < a.columns.size(); ++j) CHECK(f.rows[r][j] == doctest::Approx(a.rows[r][j]).epsilon(1e-8));
}

TEST_CASE("subcritical warns outside its domain") {
    auto c = small(Regime::subcritical);
    c.N = 64;
    c.k = 20;
    c.replicas = 3;
    c.m = 1;
    const auto a = run_subcritical(c);
    CHECK(a.warnings.size() == 1);
}

TEST_CASE("identity sweep") {
    auto c = small(Regime::identities);
    const auto a = run_identities(c);
    CHECK(a.rows.size() == 18);
    CHECK(a.exit_code() == 0);
    for (const auto& ch : a.checks) {
        CHECK(ch.identity);
        CHECK_MESSAGE(ch.passed, ch.name << " " << ch.value);
        CHECK(ch.detail.find("seed=") != std::string::npos);
    }
    CHECK(a.summary["worst"].contains("schur"));
    // replaying the worst tuple gives the same value
    const auto w = a.summary["worst"]["recursion"];
    auto r = small(Regime::identities);
    r.identity_grid = {{w["N"].get<Index>(), w["k"].get<Index>(), parse_entry_law(w["law"].get<std::string>()),
                        w["beta"].get<int>(), w["seed"].get<std::uint64_t>()}};
    CHECK(run_identities(r).rows.at(0).at(6) == w["value"].get<double>());
}

TEST_CASE("asymmetric input is rejected at the type boundary") {
    Dense<double> m = Dense<double>::Identity(3, 3);
    m(0, 1) = 0.5;
    CHECK_THROWS_AS(HermitianMatrix<double>::from_dense(m), std::invalid_argument);
}

TEST_CASE("supercritical run") {
    auto c = small(Regime::supercritical);
    c.N = 200;
    c.k = 100;
    c.replicas = 60;
    const auto a = run_supercritical(c);
    REQUIRE(a.rows.size() == 60);
    const double s = std::sqrt(0.5);
    for (const auto& r : a.rows) {
        CHECK(r.at(4) == doctest::Approx(r.at(5) / s));
        CHECK(r.at(6) >= 0.0);
        CHECK(r.at(6) <= 1.0 + 1e-12);
    }
    CHECK(a.summary["factorization"].size() == 16);
    CHECK(a.summary["pearson"]["r"].get<double>() <= 1.0);
    c.k = 10;
    c.replicas = 2;
    CHECK(run_supercritical(c).warnings.size() == 1);
}

TEST_CASE("critical run") {
    auto c = small(Regime::critical);
    c.N = 120;
    c.alpha = 1.0;
    c.replicas = 150;
    const auto a = run_critical(c);
    CHECK(a.config.effective_k() == 24);
    CHECK(a.summary["bins"].size() == 9);
    int sigma_checks = 0;
    for (const auto& ch : a.checks) sigma_checks += ch.name.rfind("fn_bin_sigma", 0) == 0;
    CHECK(sigma_checks == 9);
    double total = 0.0;
    for (const auto& b : a.summary["bins"]) {
        CHECK(b["predicted"].get<double>() > 0.0);
        CHECK(b["det_only"].get<double>() == doctest::Approx(b["predicted"].get<double>() / 4.0));
        total += b["pairs"].get<double>();
    }
    CHECK(total > 0.0);
    const auto& sens = a.summary["bin_sensitivity"];
    REQUIRE(sens.size() == 2);
    CHECK(sens[0]["bins"] == 3);
    CHECK(sens[1]["bins"] == 6);
    // the coarse entry repeats the main table
    double coarse = 0.0;
    for (const auto& b : a.summary["bins"]) coarse = std::max(coarse, std::abs(b["det_only_z"].get<double>()));
    CHECK(sens[0]["det_only_max_z"].get<double>() == doctest::Approx(coarse));

    c.beta = 1;
    c.replicas = 20;
    const auto r = run_critical(c);
    CHECK(r.warnings.size() == 1);
    for (const auto& ch : r.checks) CHECK_FALSE(ch.gating);
}

TEST_CASE("dbm run") {
    auto c = small(Regime::dbm);
    c.N = 16;
    c.k = 4;
    c.m = 2;
    c.replicas = 20;
    c.dbm_grid_points = 4;
    const auto a = run_dbm(c);
    REQUIRE(a.rows.size() == 20);
    for (const auto& r : a.rows) CHECK(r.back() == 0.0);
    CHECK(a.summary["levels"].size() == 2);
    CHECK(run_dbm(c).rows == a.rows);
}

TEST_CASE("artifact files") {
    auto c = small(Regime::subcritical);
    c.N = 40;
    c.k = 3;
    c.m = 1;
    c.replicas = 5;
    const auto a = run_experiment(c);
    const auto dir = std::filesystem::temp_directory_path() / "mpl_harness_test";
    std::filesystem::create_directories(dir);
    const std::string prefix = (dir / "run").string();
    a.write(prefix);
    std::ifstream js(prefix + ".json");
    const auto j = nlohmann::json::parse(js);
    CHECK(j["schema_version"] == RunArtifact::schema_version);
    CHECK(j["config"]["N"] == 40);
    CHECK(j["row_count"] == 5);
    std::ifstream csv(prefix + ".csv");
    std::string line;
    int lines = 0;
    while (std::getline(csv, line)) ++lines;
    CHECK(lines == 2 + 5);

    // rows survive the text round trip exactly
    std::ifstream again(prefix + ".csv");
    std::getline(again, line);
    std::getline(again, line);
    std::getline(again, line);
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    CHECK(row == a.rows.at(0));
    std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
