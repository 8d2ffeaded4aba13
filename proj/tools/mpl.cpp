#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <stdexcept>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mpl/dbm.hpp"
#include "mpl/harness.hpp"
#include "mpl/limit_laws.hpp"

using namespace mpl;
using nlohmann::json;

namespace {

constexpr int kUsage = 3;

struct Grid {
    double a = 0.0, b = 0.0;
    int n = 1;
    double at(int i) const { return n == 1 ? a : a + (b - a) * i / (n - 1); }
};

Grid parse_grid(const std::string& s) {
    Grid g;
    char c1 = 0, c2 = 0;
    std::istringstream is(s);
    if (!(is >> g.a >> c1 >> g.b >> c2 >> g.n) || c1 != ':' || c2 != ':' || g.n < 1 || !is.eof())
        throw std::invalid_argument("grid must look like a:b:n, got " + s);
    return g;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << std::setprecision(17);
    return os;
}

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

void print_checks(const json& checks) {
    for (const auto& c : checks) {
        const bool gating = c.value("gating", true);
        const char* tag = c["passed"].get<bool>() ? "PASS" : (gating ? "FAIL" : "info");
        std::printf("  [%s] %-28s value=%-12s threshold=%-12s %s\n", tag, c["name"].get<std::string>().c_str(),
                    fmt(c["value"].is_null() ? NAN : c["value"].get<double>()).c_str(),
                    fmt(c["threshold"].is_null() ? NAN : c["threshold"].get<double>()).c_str(),
                    c["detail"].get<std::string>().c_str());
    }
}

int report(const std::string& path, const std::string& plot_out) {
    std::string json_path = path;
    if (!std::filesystem::exists(json_path)) json_path = path + ".json";
    std::ifstream is(json_path);
    if (!is) throw std::invalid_argument("cannot read " + path);
    const json j = json::parse(is);
    const auto& c = j.at("config");
    std::printf("regime %s  N=%s k=%s beta=%s law=%s replicas=%s seed=%s\n", c["regime"].get<std::string>().c_str(),
                c["N"].dump().c_str(), c["effective_k"].dump().c_str(), c["beta"].dump().c_str(),
                c["law"].get<std::string>().c_str(), c["replicas"].dump().c_str(), c["master_seed"].dump().c_str());
    std::printf("build %s  %s  wall %.2fs  started %s\n", j["fingerprint"]["git"].get<std::string>().c_str(),
                j["fingerprint"]["compiler"].get<std::string>().c_str(), j["wall_seconds"].get<double>(),
                j["started_at"].get<std::string>().c_str());
    for (const auto& w : j["warnings"]) std::printf("warning: %s\n", w.get<std::string>().c_str());
    std::printf("checks:\n");
    print_checks(j["checks"]);
    std::printf("exit code %d\n", j["exit_code"].get<int>());

    const auto& s = j["summary"];
    for (const char* key : {"moments", "ks", "alignment", "pearson", "spearman", "ks_top", "ks_minor", "overlap_sq",
                            "worst", "levels", "bin_sensitivity"})
        if (s.contains(key)) std::printf("%s: %s\n", key, s[key].dump().c_str());

    if (s.contains("plot")) {
        std::string out = plot_out;
        if (out.empty()) {
            out = json_path;
            if (out.size() > 5 && out.substr(out.size() - 5) == ".json") out.resize(out.size() - 5);
            out += ".plot.csv";
        }
        auto os = open_out(out);
        const auto& cols = s["plot"]["columns"];
        for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i].get<std::string>();
        os << '\n';
        for (const auto& r : s["plot"]["rows"]) {
            for (std::size_t i = 0; i < r.size(); ++i) {
                if (i) os << ',';
                if (r[i].is_null())
                    os << "nan";
                else
                    os << r[i].get<double>();
            }
            os << '\n';
        }
        std::printf("plot table written to %s\n", out.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Minor-process laboratory: eigenvalues of nested Wigner minors"};
    app.require_subcommand(1);

    ExperimentConfig cfg;
    std::string regime = "sub", law = "gaussian", out, config_file;
    Index k = -1;
    auto* sim = app.add_subcommand("simulate", "Run a Monte Carlo campaign and write <out>.json and <out>.csv");
    sim->add_option("--regime", regime, "sub|crit|super|identities|dbm")
        ->check(CLI::IsMember({"sub", "crit", "super", "identities", "dbm", "subcritical", "critical",
                               "supercritical"}));
    sim->add_option("--N", cfg.N, "outer dimension");
    auto* kopt = sim->add_option("--k", k, "number of removed rows");
    auto* aopt = sim->add_option("--alpha", cfg.alpha, "critical regime: k = floor(alpha N^(2/3))");
    kopt->excludes(aopt);
    sim->add_option("--beta", cfg.beta, "1 real, 2 complex")->check(CLI::IsMember({1, 2}));
    sim->add_option("--law", law, "entry law")->check(CLI::IsMember({"gaussian", "rademacher", "uniform"}));
    sim->add_option("--replicas", cfg.replicas);
    sim->add_option("--seed", cfg.master_seed);
    sim->add_option("--m", cfg.m, "tracked indices");
    sim->add_option("--threads", cfg.threads, "0 uses every core");
    sim->add_flag("--full-chain", cfg.full_chain, "subcritical: walk every level");
    sim->add_option("--config", config_file, "JSON config (an artifact's config block); flags override it");
    sim->add_option("--out", out, "output prefix")->required();

    double fn_alpha = 1.0;
    std::string xgrid = "-4:1:11", ygrid = "-4:1:11", fn_out;
    auto* fn = app.add_subcommand("fn-kernel", "Tabulate the critical joint intensity");
    fn->add_option("--alpha", fn_alpha)->check(CLI::PositiveNumber);
    fn->add_option("--xgrid", xgrid, "a:b:n");
    fn->add_option("--ygrid", ygrid, "a:b:n");
    fn->add_option("--out", fn_out)->required();

    int tw_beta = 2;
    std::string tw_grid = "-6:4:101", tw_out;
    auto* tw = app.add_subcommand("tw", "Tabulate the Tracy-Widom CDF");
    tw->add_option("--beta", tw_beta)->check(CLI::IsMember({1, 2}));
    tw->add_option("--grid", tw_grid, "a:b:n");
    tw->add_option("--out", tw_out)->required();

    std::string artifact, plot_out;
    auto* rep = app.add_subcommand("report", "Summarise an artifact and write its plot table");
    rep->add_option("artifact", artifact, "artifact prefix or .json")->required();
    rep->add_option("--plot-out", plot_out);

    Index dN = 30, dk = 6, dgrid = 10;
    int dbeta = 2;
    std::uint64_t dseed = 1;
    double omega0 = 0.1;
    std::string dout;
    auto* dbm = app.add_subcommand("dbm", "Write one matrix-flow trajectory of a matrix and its minor");
    dbm->add_option("--N", dN);
    dbm->add_option("--k", dk);
    dbm->add_option("--beta", dbeta)->check(CLI::IsMember({1, 2}));
    dbm->add_option("--seed", dseed);
    dbm->add_option("--grid-points", dgrid);
    dbm->add_option("--omega0", omega0);
    dbm->add_option("--out", dout, "prefix for <out>.trajectory.csv and <out>.overlap.csv")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*sim) {
            if (!config_file.empty()) {
                std::ifstream is(config_file);
                if (!is) throw std::invalid_argument("cannot read " + config_file);
                json j = json::parse(is);
                if (j.contains("config")) j = j["config"];
                ExperimentConfig base = ExperimentConfig::from_json(j);
                // explicit flags win
                if (sim->count("--N")) base.N = cfg.N;
                if (sim->count("--alpha")) base.alpha = cfg.alpha;
                if (sim->count("--beta")) base.beta = cfg.beta;
                if (sim->count("--replicas")) base.replicas = cfg.replicas;
                if (sim->count("--seed")) base.master_seed = cfg.master_seed;
                if (sim->count("--m")) base.m = cfg.m;
                if (sim->count("--threads")) base.threads = cfg.threads;
                if (sim->count("--full-chain")) base.full_chain = cfg.full_chain;
                if (sim->count("--regime")) base.regime = parse_regime(regime);
                if (sim->count("--law")) base.law = parse_entry_law(law);
                if (k >= 0) base.k = k;
                cfg = base;
            } else {
                cfg.regime = parse_regime(regime);
                cfg.law = parse_entry_law(law);
                if (k >= 0) cfg.k = k;
            }
            cfg.output = out;
            try {
                cfg.validate();
            } catch (const std::invalid_argument& e) {
                std::fprintf(stderr, "usage error: %s\n", e.what());
                return kUsage;
            }
            for (const auto& w : cfg.regime_warnings()) std::fprintf(stderr, "warning: %s\n", w.c_str());
            const RunArtifact a = run_experiment(cfg);
            if (auto parent = std::filesystem::path(out).parent_path(); !parent.empty())
                std::filesystem::create_directories(parent);
            a.write(out);
            std::printf("%s: %zu rows, %.2fs\n", to_string(cfg.regime).c_str(), a.rows.size(), a.wall_seconds);
            print_checks(a.to_json()["checks"]);
            return a.exit_code();
        }
        if (*fn) {
            const Grid gx = parse_grid(xgrid), gy = parse_grid(ygrid);
            auto os = open_out(fn_out);
            os << "X,Y,intensity,determinant,decoupled\n";
            for (int i = 0; i < gx.n; ++i)
                for (int j = 0; j < gy.n; ++j) {
                    const double X = gx.at(i), Y = gy.at(j);
                    const double d = fn_determinant({fn_alpha, X, Y});
                    os << X << ',' << Y << ',' << 4.0 * d << ',' << d << ','
                       << 4.0 * airy_kernel(X, X) * airy_kernel(Y, Y) << '\n';
                }
            return 0;
        }
        if (*tw) {
            const Grid g = parse_grid(tw_grid);
            auto os = open_out(tw_out);
            os << "s,cdf,clamped\n";
            for (int i = 0; i < g.n; ++i) {
                const auto v = tracy_widom_cdf(tw_beta, g.at(i));
                os << g.at(i) << ',' << v.cdf << ',' << (v.clamped ? 1 : 0) << '\n';
            }
            return 0;
        }
        if (*rep) return report(artifact, plot_out);
        if (*dbm) {
            DbmConfig d = DbmConfig::standard(dN, dk, dbeta, dgrid, omega0);
            d.validate();
            Engine rng = make_stream(dseed, 0, Purpose::matrix);
            auto write = [&](const CoupledTrajectory& tr) {
                auto t = open_out(dout + ".trajectory.csv");
                write_trajectory_csv(t, tr);
                auto o = open_out(dout + ".overlap.csv");
                write_overlap_csv(o, tr);
            };
            if (dbeta == 1)
                write(evolve_matrix_flow(sample_wigner<double>({Symmetry::real, EntryLaw::gaussian, dN}, rng), d, dseed));
            else
                write(evolve_matrix_flow(sample_wigner<cplx>({Symmetry::complex, EntryLaw::gaussian, dN}, rng), d, dseed));
            return 0;
        }
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return kUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    }
    return kUsage;
}
