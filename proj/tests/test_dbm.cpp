#include <cmath>
#include <sstream>

#include "doctest.h"
#include "mpl/dbm.hpp"
#include "mpl/spectral.hpp"
#include "mpl/stats.hpp"
#include "test_util.hpp"

using namespace mpl;

namespace {

bool strictly_decreasing(const Eigen::VectorXd& v) {
    for (Index i = 1; i < v.size(); ++i)
        if (!(v(i - 1) > v(i))) return false;
    return true;
}

}  // namespace

TEST_SUITE("dbm") {

TEST_CASE("configuration") {
    const auto c = DbmConfig::standard(30, 5, 2, 4);
    CHECK(c.t_grid.size() == 5);
    CHECK(c.t_grid.front() == 0.0);
    CHECK(c.t_grid.back() == doctest::Approx(std::pow(30.0, -1.0 / 3.0 + 0.1)));
    CHECK(c.effective_step() == doctest::Approx(0.01 / 30));
    CHECK(c.effective_guard() == doctest::Approx(1e-3 / 30));
    CHECK_NOTHROW(c.validate());
    auto bad = c;
    bad.t_grid = {0.0, 0.2, 0.2};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = c;
    bad.k = 30;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = c;
    bad.step = 0.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = c;
    bad.beta = 3;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    CHECK_THROWS_AS(evolve_matrix_flow(testutil::wigner<double>(30, 1), c, 1), std::invalid_argument);
}

TEST_CASE("matrix flow at time zero and overlaps") {
    const auto h = testutil::wigner<cplx>(40, 11);
    auto cfg = DbmConfig::standard(40, 12, 2, 3);
    cfg.theta_m = 20;
    const auto tr = evolve_matrix_flow(h, cfg, 7);
    REQUIRE(tr.times.size() == 4);
    const auto s1 = eigh(h);
    const auto s2 = eigh(h.lower_right(28));
    CHECK((tr.lambda1[0] - s1.eigenvalues.head(5)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((tr.lambda2[0] - s2.eigenvalues.head(5)).cwiseAbs().maxCoeff() == 0.0);
    const double static_overlap = std::norm(s1.eigenvectors.col(0).tail(28).dot(s2.eigenvectors.col(0)));
    CHECK(tr.theta12[0](0, 0) == doctest::Approx(static_overlap).epsilon(1e-12));
    CHECK(tr.theta12[0](0, 0) <= 1.0);
    for (const auto& th : tr.theta12) {
        REQUIRE(th.rows() == 20);
        REQUIRE(th.cols() == 20);
        CHECK(th.minCoeff() >= 0.0);
        CHECK(th.maxCoeff() <= 1.0 + 1e-12);
        CHECK(th.rowwise().sum().maxCoeff() <= 1.0 + 1e-8);
        CHECK(th.colwise().sum().maxCoeff() <= 1.0 + 1e-8);
    }
    // all level-1 vectors against one padded level-2 vector: a full expansion
    cfg.theta_m = 40;
    const auto full = evolve_matrix_flow(h, cfg, 7);
    for (const auto& th : full.theta12) {
        CHECK(th.cols() == 28);
        CHECK((th.colwise().sum().array() - 1.0).abs().maxCoeff() < 1e-8);
        CHECK(th.rowwise().sum().maxCoeff() <= 1.0 + 1e-8);
    }
    CHECK(full.lambda1.back() == tr.lambda1.back());
}

TEST_CASE("matrix flow is reproducible") {
    const auto h = testutil::wigner<double>(25, 4);
    const auto cfg = DbmConfig::standard(25, 5, 1, 4);
    const auto a = evolve_matrix_flow(h, cfg, 99);
    const auto b = evolve_matrix_flow(h, cfg, 99);
    const auto c = evolve_matrix_flow(h, cfg, 100);
    for (std::size_t g = 0; g < a.times.size(); ++g) {
        CHECK(a.lambda1[g] == b.lambda1[g]);
        CHECK(a.theta12[g] == b.theta12[g]);
    }
    CHECK(a.lambda1.back() != c.lambda1.back());
}

TEST_CASE("matrix flow marginal matches the additive identity") {
    const Index N = 60;
    const auto h = testutil::wigner<cplx>(N, 21);
    const auto cfg = DbmConfig::standard(N, 10, 2, 5);
    const double t = cfg.t_grid.back();
    std::vector<double> flow, direct;
    for (std::uint64_t r = 0; r < 400; ++r) {
        flow.push_back(evolve_matrix_flow(h, cfg, 1000 + r).lambda1.back()(0));
        Engine rng = make_stream(5000 + r, 0, Purpose::comparison);
        direct.push_back(eigvalsh(additive_flow_sample(h, t, rng, N))(0));
    }
    CHECK(ks_two_sample(flow, direct).p_value > 0.01);
}

TEST_CASE("driver covariance") {
    Eigen::MatrixXd theta(2, 3);
    theta << 0.3, 0.1, 0.0, 0.05, 0.4, 0.2;
    const auto c = driver_covariance(theta);
    CHECK(c.topLeftCorner(2, 2).isIdentity());
    CHECK(c.bottomRightCorner(3, 3).isIdentity());
    const auto m = driver_map(theta);
    CHECK((m * m.transpose() - c).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(driver_map(Eigen::MatrixXd::Zero(2, 3)).isIdentity(1e-14));
}

TEST_CASE("zero-noise pair repels") {
    DbmConfig cfg;
    cfg.N = 2;
    cfg.k = 1;
    cfg.zero_noise = true;
    cfg.m = 2;
    for (int j = 0; j <= 20; ++j) cfg.t_grid.push_back(0.05 * j);
    Eigen::VectorXd l1(2), l2(1);
    l1 << 0.1, -0.1;
    l2 << 0.0;
    const auto tr = evolve_particle_sde(l1, l2, CoupledTrajectory{}, cfg, 1);
    double prev = 0.0;
    for (const auto& l : tr.lambda1) {
        const double gap = l(0) - l(1);
        CHECK(gap > prev);
        prev = gap;
    }
    // d(gap^2)/dt = 2 for two particles with drift 1/(N gap) each, N = 2
    CHECK(prev * prev == doctest::Approx(0.04 + 2.0).epsilon(1e-2));
    CHECK(tr.lambda2.back()(0) == 0.0);
}

TEST_CASE("particle system keeps its order and honours the guard limit") {
    const Index N = 12;
    auto cfg = DbmConfig::standard(N, 3, 2, 4);
    cfg.theta_m = N;
    cfg.step = 1.0 / N;
    const auto h = testutil::wigner<cplx>(N, 31);
    const auto comp = evolve_matrix_flow(h, cfg, 2);
    const auto tr = evolve_particle_sde(eigvalsh(h), eigvalsh(h.lower_right(9)), comp, cfg, 3);
    for (const auto& l : tr.lambda1) CHECK(strictly_decreasing(l));
    for (const auto& l : tr.lambda2) CHECK(strictly_decreasing(l));
    CHECK(tr.max_halvings_used <= 20);

    cfg.guard = 10.0;
    cfg.max_halvings = 0;
    CHECK_THROWS_AS(evolve_particle_sde(eigvalsh(h), eigvalsh(h.lower_right(9)), comp, cfg, 3), NumericalError);

    auto partial = cfg;
    partial.theta_m = 0;
    partial.guard = 0.0;
    partial.max_halvings = 20;
    const auto small = evolve_matrix_flow(h, partial, 2);
    CHECK_THROWS_AS(evolve_particle_sde(eigvalsh(h), eigvalsh(h.lower_right(9)), small, partial, 3),
                    std::invalid_argument);
    Eigen::VectorXd bad = eigvalsh(h);
    bad(1) = bad(0);
    CHECK_THROWS_AS(evolve_particle_sde(bad, eigvalsh(h.lower_right(9)), comp, cfg, 3), std::invalid_argument);
}

TEST_CASE("particle system against the matrix flow") {
    const Index N = 30, k = 6;
    auto cfg = DbmConfig::standard(N, k, 2, 6);
    cfg.theta_m = N;
    std::vector<double> sde1, sde2, mf1, mf2;
    for (std::uint64_t r = 0; r < 300; ++r) {
        const auto h = testutil::wigner<cplx>(N, 700 + r);
        const auto comp = evolve_matrix_flow(h, cfg, 10000 + r);
        const auto tr = evolve_particle_sde(eigvalsh(h), eigvalsh(h.lower_right(N - k)), comp, cfg, 20000 + r);
        sde1.push_back(tr.lambda1.back()(0));
        sde2.push_back(tr.lambda2.back()(0));
        const auto ref = evolve_matrix_flow(h, cfg, 30000 + r);
        mf1.push_back(ref.lambda1.back()(0));
        mf2.push_back(ref.lambda2.back()(0));
    }
    auto agree = [](const std::vector<double>& a, const std::vector<double>& b) {
        const auto ma = moments(a), mb = moments(b);
        CHECK(std::abs(ma.mean - mb.mean) < 3.0 * std::hypot(ma.sem, mb.sem));
        CHECK(std::abs(ma.variance - mb.variance) < 3.0 * std::hypot(ma.variance_se, mb.variance_se));
    };
    agree(sde1, mf1);
    agree(sde2, mf2);
}

TEST_CASE("coupling experiment") {
    SUBCASE("k = 0 gives identical levels") {
        const auto h = testutil::wigner<double>(20, 3);
        auto cfg = DbmConfig::standard(20, 0, 1, 3);
        const auto rep = coupling_experiment(h, cfg, 5, false);
        CHECK(rep.lambda1_flow == rep.lambda2_flow);
        CHECK(rep.theta_sup(0, 0) == doctest::Approx(1.0));
        CHECK(rep.lambda1_sde.size() == 0);
    }
    SUBCASE("shared drivers pull the comparison processes in") {
        const Index N = 40;
        auto cfg = DbmConfig::standard(N, 20, 2, 5, 0.2);
        std::vector<double> start, end;
        for (std::uint64_t r = 0; r < 40; ++r) {
            const auto rep = coupling_experiment(testutil::wigner<cplx>(N, 50 + r), cfg, 400 + r);
            REQUIRE(rep.diff1.size() == 5);
            CHECK(rep.theta_sup.maxCoeff() <= 1.0 + 1e-12);
            start.push_back(rep.diff1_start(0));
            start.push_back(rep.diff2_start(0));
            end.push_back(rep.diff1(0));
            end.push_back(rep.diff2(0));
            CHECK(rep.target == doctest::Approx(std::pow(40.0, -2.0 / 3.0)));
        }
        CHECK(median(end) < median(start));
    }
    SUBCASE("overlap input shrinks with k") {
        const Index N = 400;
        double prev = 2.0;
        for (Index k : {50, 100, 200}) {
            auto cfg = DbmConfig::standard(N, k, 2, 2);
            std::vector<double> sup;
            for (std::uint64_t r = 0; r < 10; ++r)
                sup.push_back(coupling_experiment(testutil::wigner<cplx>(N, 900 + r), cfg, r, false).theta_sup(0, 0));
            const double mean = moments(sup).mean;
            CHECK(mean < prev);
            prev = mean;
        }
    }
}

TEST_CASE("trajectory files") {
    const auto h = testutil::wigner<double>(10, 2);
    auto cfg = DbmConfig::standard(10, 2, 1, 2);
    cfg.m = 2;
    const auto tr = evolve_matrix_flow(h, cfg, 1);
    std::ostringstream a, b;
    write_trajectory_csv(a, tr);
    write_overlap_csv(b, tr);
    std::istringstream ia(a.str()), ib(b.str());
    std::string line;
    std::getline(ia, line);
    CHECK(line == "time,level,index,eigenvalue");
    int n = 0;
    while (std::getline(ia, line)) ++n;
    CHECK(n == 3 * 4);
    std::getline(ib, line);
    CHECK(line == "time,i,j,theta");
    n = 0;
    while (std::getline(ib, line)) ++n;
    CHECK(n == 3 * 4);
}

}  // TEST_SUITE
