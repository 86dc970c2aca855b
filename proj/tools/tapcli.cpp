// Batch driver: runs named computations from a JSON config and writes CSV
// artifacts with full provenance (config hash, seed, tolerances).
#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "tap/ac_sde.hpp"
#include "tap/csvio.hpp"
#include "tap/field_mc.hpp"
#include "tap/freeprob.hpp"
#include "tap/functionals.hpp"
#include "tap/gaussian_geometry.hpp"
#include "tap/measures.hpp"
#include "tap/mixture.hpp"
#include "tap/parisi.hpp"
#include "tap/rng.hpp"
#include "tap/variational.hpp"

using nlohmann::json;

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void reject_unknown(const json& j, const std::set<std::string>& allowed,
                    const std::string& path) {
    if (!j.is_object()) return;
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("unknown config key: " + path + "." + it.key());
}

tap::Mixture parse_mixture(const json& cfg) {
    if (!cfg.contains("xi")) throw ConfigError("config missing: xi");
    reject_unknown(cfg.at("xi"), {"coeffs"}, "xi");
    std::vector<std::pair<int, double>> coeffs;
    for (const auto& pair : cfg.at("xi").at("coeffs"))
        coeffs.emplace_back(pair.at(0).get<int>(), pair.at(1).get<double>());
    return tap::Mixture(coeffs);
}

tap::AtomicMeasure parse_measure(const json& cfg) {
    if (!cfg.contains("measure")) throw ConfigError("config missing: measure");
    const json& m = cfg.at("measure");
    reject_unknown(m, {"atoms", "prefix"}, "measure");
    if (m.contains("atoms")) {
        std::vector<tap::Atom> atoms;
        for (const auto& a : m.at("atoms"))
            atoms.push_back({a.at(0).get<double>(), a.at(1).get<double>()});
        return tap::AtomicMeasure(atoms);
    }
    if (m.contains("prefix")) {
        const json& p = m.at("prefix");
        reject_unknown(p, {"u", "q", "tail"}, "measure.prefix");
        tap::PrefixSpec spec;
        spec.u = p.at("u").get<std::vector<double>>();
        spec.q = p.at("q").get<std::vector<double>>();
        for (const auto& a : p.at("tail"))
            spec.tail.push_back({a.at(0).get<double>(), a.at(1).get<double>()});
        return tap::assemble_prefix(spec);
    }
    throw ConfigError("measure: need atoms or prefix");
}

tap::GridSpec parse_grid(const json& cfg) {
    tap::GridSpec g;
    if (cfg.contains("grid")) {
        reject_unknown(cfg.at("grid"), {"L", "points", "quad_nodes"}, "grid");
        const json& gj = cfg.at("grid");
        if (gj.contains("L")) g.half_width = gj.at("L").get<double>();
        if (gj.contains("points")) g.points = gj.at("points").get<int>();
        if (gj.contains("quad_nodes")) g.quad_nodes = gj.at("quad_nodes").get<int>();
    }
    return g;
}

struct McSettings {
    std::size_t paths = 100000;
    double dt = 5e-4;
    std::uint64_t seed = 1;
};

McSettings parse_mc(const json& cfg) {
    McSettings mc;
    if (cfg.contains("mc")) {
        reject_unknown(cfg.at("mc"), {"paths", "dt", "seed"}, "mc");
        const json& mj = cfg.at("mc");
        if (mj.contains("paths")) mc.paths = mj.at("paths").get<std::size_t>();
        if (mj.contains("dt")) mc.dt = mj.at("dt").get<double>();
        if (mj.contains("seed")) mc.seed = mj.at("seed").get<std::uint64_t>();
    }
    return mc;
}

std::string provenance(const json& cfg, const std::string& task, std::uint64_t seed) {
    json hdr;
    hdr["task"] = task;
    hdr["seed"] = seed;
    hdr["config_hash"] = tap::fnv1a(cfg.dump());
    hdr["tolerances"] = {{"legendre_residual", 1e-12},
                         {"stationarity", 1e-3},
                         {"quadrature_mass", 1e-8}};
    return hdr.dump();
}

std::string fmt(double v) { return tap::CsvWriter::num(v); }

std::string spec_json(const tap::PrefixSpec& s) {
    json j;
    j["u"] = s.u;
    j["q"] = s.q;
    json tail = json::array();
    for (const auto& a : s.tail) tail.push_back({a.t, a.w});
    j["tail"] = tail;
    return j.dump();
}

// ---- verify-suite ----------------------------------------------------------

struct CheckTable {
    std::vector<std::array<std::string, 5>> rows;
    bool all_pass = true;
    void add(const std::string& name, double value, double target, double tol) {
        bool pass = std::abs(value - target) <= tol;
        all_pass = all_pass && pass;
        rows.push_back({name, fmt(value), fmt(target), fmt(tol), pass ? "1" : "0"});
    }
    void add_bound(const std::string& name, double value, double bound) {
        bool pass = value <= bound;
        all_pass = all_pass && pass;
        rows.push_back({name, fmt(value), fmt(bound), fmt(bound), pass ? "1" : "0"});
    }
};

void verify_suite(CheckTable& tab, std::uint64_t seed) {
    using namespace tap;
    const GridSpec light{0.0, 1201, 48};

    // mixture: discriminant closed forms and derivative consistency
    Mixture mix24({{2, 1.0}, {4, 1.0}});
    tab.add("mixture.discriminant_forms", mix24.discriminant(0.37),
            mix24.discriminant_sum(0.37), 1e-14);
    double fd = (mix24.xi(0.30001, 1) - mix24.xi(0.29999, 1)) / 2e-5;
    tab.add("mixture.derivative_fd", fd / mix24.xi(0.3, 2), 1.0, 1e-6);

    // measures: metric + projection
    AtomicMeasure za({{0.0, 0.3}, {0.5, 0.7}});
    AtomicMeasure zb({{0.2, 1.0}});
    tab.add("measures.dist_symmetry", dist(za, zb), dist(zb, za), 0.0);
    tab.add("measures.project_cdf", za.project_at(0.5).cdf(0.7), za.cdf(0.7), 0.0);

    // parisi: RS closed form and terminal condition
    Mixture sk = Mixture::sk(0.5);
    ParisiSolution sol = solve(AtomicMeasure::dirac(0.0), sk, light);
    tab.add("parisi.rs_value", parisi_value(sol), std::log(2.0) + 0.125, 1e-8);
    int last = static_cast<int>(sol.boundaries().size()) - 1;
    tab.add("parisi.terminal", sol.phi(last, 0.7), std::log(2.0 * std::cosh(0.7)), 1e-12);

    // prefix-2 layer identity
    PrefixSpec ps;
    ps.u = {0.4};
    ps.q = {0.5};
    ps.tail = {{0.5, 0.6}};
    AtomicMeasure zp = assemble_prefix(ps);
    ParisiSolution solp = solve(zp, sk, light);
    {
        GaussHermite gh(64);
        double sig = std::sqrt(sk.xi(0.5, 1));
        int bq = solp.boundary_index(0.5);
        double acc = 0.0, mx = -1e300;
        std::vector<double> vals(gh.nodes.size());
        for (std::size_t i = 0; i < gh.nodes.size(); ++i) {
            vals[i] = solp.phi(bq, sig * M_SQRT2 * gh.nodes[i]);
            mx = std::max(mx, vals[i]);
        }
        for (std::size_t i = 0; i < gh.nodes.size(); ++i)
            acc += gh.weights[i] * std::exp(0.4 * (vals[i] - mx));
        double lhs = mx + std::log(acc / std::sqrt(M_PI)) / 0.4;
        tab.add("parisi.prefix2_layer", solp.phi(0, 0.0), lhs, 1e-6);
    }

    // functionals: Parisi = TAP(delta_0)
    EmpiricalMu mu0{{0.0}};
    tab.add("functionals.pari_eq_tap0", tap_value(mu0, solp), parisi_value(solp), 1e-9);
    {
        int bq = solp.boundary_index(0.5);
        LegendreResult lr = solp.legendre_h(bq, 0.37);
        tab.add("functionals.fenchel", lr.h + solp.phi(bq, lr.dh) - 0.37 * lr.dh, 0.0, 1e-10);
    }

    // SDE: martingale flatness and increment identity at smaller path count
    {
        ACEnsemble ens = simulate(solp, Scheme::PlateauExact, 20000, seed);
        int bq = solp.boundary_index(0.5);
        int last_p = static_cast<int>(solp.boundaries().size()) - 1;
        MomentTable tabm = moments(ens, solp);
        double flat = tabm.flat[1].value, flatse = tabm.flat[1].se;
        tab.add_bound("ac_sde.martingale_flat", std::abs(flat), 3.0 * flatse);
        PairMoments pm = pair_moments(ens, solp, bq, last_p);
        auto ms = m_paths(ens, solp, bq);
        double m2 = 0.0;
        for (double v : ms) m2 += v * v;
        m2 /= ms.size();
        double target = m2 * zp.cdf(0.5) *
                        (solp.mixture().xi(1.0, 1) - solp.mixture().xi(0.5, 1));
        tab.add_bound("ac_sde.deltaX_M", std::abs(pm.dx_ms.value - target),
                      3.0 * pm.dx_ms.se + 1e-4);
        tab.add_bound("ac_sde.deltaM_X", std::abs(pm.dm_xs.value), 3.0 * pm.dm_xs.se);
    }

    // freeprob closed forms
    {
        SpectralMeasure d0 = SpectralMeasure::dirac(0.0);
        SubordinationResult sr = subordinate(d0, 0.7, -3.0);
        tab.add("freeprob.edge", sr.edge_left, -2.0 * std::sqrt(0.7), 1e-10);
        tab.add("freeprob.logpot_semicircle", log_potential(d0, 1.0, 0.0), -0.5, 1e-8);
        tab.add_bound("freeprob.residual", sr.residual, 1e-10);
    }

    // gaussian geometry vs dense oracle
    {
        Rng rng(seed, 7);
        int N = 12;
        VectorXd m(N);
        for (int i = 0; i < N; ++i) m(i) = 0.4 * rng.normal();
        GammaBlocks gb(mix24, m);
        MatrixXd dense = gb.dense();
        double ld = std::log(dense.llt().matrixL().determinant()) * 2.0;
        tab.add("gauss.logdet", gb.logdet() / ld, 1.0, 1e-9);
        VectorXd z(N);
        for (int i = 0; i < N; ++i) z(i) = rng.normal();
        double zv = rng.normal();
        VectorXd full(N + 1);
        full.head(N) = z;
        full(N) = zv;
        double exact_dense = -full.dot(dense.llt().solve(full));
        tab.add("gauss.dual_exact", gb.dual_exact(z, zv) / exact_dense, 1.0, 1e-9);
    }

    // field MC: Euler identity (exact per sample)
    {
        Mixture pure4 = Mixture::pure(4, 0.8);
        FieldSample fs(pure4, 6, seed);
        VectorXd m(6);
        Rng rng(seed, 9);
        for (int i = 0; i < 6; ++i) m(i) = 0.5 * rng.uniform() - 0.25;
        double H;
        VectorXd g;
        MatrixXd h;
        fs.eval(m, H, g, h);
        tab.add("field.euler_identity", m.dot(g) / 4.0, H, 1e-12 * std::max(1.0, std::abs(H)));
    }

    // legendre transform tangency on a synthetic convex curve
    {
        ComplexityCurve c;
        for (int k = 0; k <= 20; ++k) {
            CurvePoint pt;
            pt.axis = 0.05 + 0.9 * k / 20.0;
            pt.value = pt.axis * pt.axis;  // Lambda(theta) = theta^2
            pt.converged = true;
            c.points.push_back(pt);
        }
        auto lt = legendre_transform(c, {2.0 * 0.5});  // slope at theta=0.5
        tab.add("variational.tangency", lt.points[0].argmin, 0.5, 1e-6);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"TAP complexity laboratory batch driver"};
    std::string config_path, task, out_path = "out.csv";
    std::int64_t seed_flag = -1, paths_flag = -1;
    int grid_points = 0, quad_nodes = 0;
    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--task", task, "task name")->required();
    app.add_option("--out", out_path, "output CSV path");
    app.add_option("--seed", seed_flag, "override mc.seed");
    app.add_option("--paths", paths_flag, "override mc.paths");
    app.add_option("--grid-points", grid_points, "override grid.points");
    app.add_option("--quad-nodes", quad_nodes, "override grid.quad_nodes");
    CLI11_PARSE(app, argc, argv);

    json cfg = json::object();
    try {
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw ConfigError("cannot open config: " + config_path);
            in >> cfg;
        }
        reject_unknown(cfg, {"xi", "measure", "grid", "mc", "task"}, "");

        McSettings mc = parse_mc(cfg);
        if (seed_flag >= 0) mc.seed = static_cast<std::uint64_t>(seed_flag);
        if (paths_flag > 0) mc.paths = static_cast<std::size_t>(paths_flag);
        json tcfg = cfg.contains("task") ? cfg.at("task") : json::object();

        auto grid = [&]() {
            tap::GridSpec g = parse_grid(cfg);
            if (grid_points > 0) g.points = grid_points;
            if (quad_nodes > 0) g.quad_nodes = quad_nodes;
            return g;
        };

        if (task == "parisi-solve") {
            reject_unknown(tcfg, {}, "task");
            tap::Mixture mix = parse_mixture(cfg);
            tap::AtomicMeasure z = parse_measure(cfg);
            tap::ParisiSolution sol = tap::solve(z, mix, grid());
            tap::CsvWriter w(out_path, provenance(cfg, task, mc.seed));
            w.columns({"quantity", "value"});
            w.row({"parisi_value", fmt(tap::parisi_value(sol))});
            w.row({"phi_0_0", fmt(sol.phi(0, 0.0))});
            w.row({"onsager_integral", fmt(tap::weighted_txi2(z, mix, 0.0, 1.0))});
            w.row({"asymptote_residual", fmt(sol.asymptote_residual())});
        } else if (task == "tap-eval") {
            reject_unknown(tcfg, {"mu"}, "task");
            tap::Mixture mix = parse_mixture(cfg);
            tap::EmpiricalMu mu{tcfg.at("mu").get<std::vector<double>>()};
            tap::AtomicMeasure z = parse_measure(cfg).project_at(mu.q());
            tap::ParisiSolution sol = tap::solve(z, mix, grid(), {mu.q()});
            tap::CsvWriter w(out_path, provenance(cfg, task, mc.seed));
            w.columns({"quantity", "value"});
            w.row({"q_mu", fmt(mu.q())});
            w.row({"tap_value", fmt(tap::tap_value(mu, sol))});
            w.row({"defect", fmt(tap::defect_quadrature(mu, sol))});
            auto dmc = tap::defect_mc(sol, mu.points, mc.paths, mc.seed);
            w.row({"defect_mc", fmt(dmc.value)});
            w.row({"defect_mc_se", fmt(dmc.se)});
            auto grads = tap::tap_gradient_all(mu, sol);
            for (std::size_t i = 0; i < grads.size(); ++i)
                w.row({"grad_" + std::to_string(i), fmt(grads[i])});
        } else if (task == "optimize-prefix") {
            reject_unknown(tcfg, {"n", "tail_atoms", "u", "q", "multistarts"}, "task");
            tap::Mixture mix = parse_mixture(cfg);
            tap::OptimizeOptions opt;
            opt.grid = grid();
            opt.seed = mc.seed;
            int n = tcfg.value("n", 1);
            opt.tail_atoms = tcfg.value("tail_atoms", 1);
            opt.multistarts = tcfg.value("multistarts", 8);
            std::vector<double> u_fixed, q_fixed;
            if (tcfg.contains("u")) u_fixed = tcfg.at("u").get<std::vector<double>>();
            if (tcfg.contains("q")) q_fixed = tcfg.at("q").get<std::vector<double>>();
            auto res = tap::minimize_parisi_prefix(mix, n, u_fixed, q_fixed, opt);
            tap::CsvWriter w(out_path, provenance(cfg, task, mc.seed));
            w.columns({"quantity", "value"});
            w.row({"value", fmt(res.value)});
            w.row({"converged", res.converged ? "1" : "0"});
            w.row({"h_support_gap", fmt(res.h_support_gap)});
            w.row({"spec", tap::CsvWriter::quote(spec_json(res.spec))});
            if (!res.converged) return 3;
        } else if (task == "stationary-uq") {
            reject_unknown(tcfg, {"f", "n", "tail_atoms", "u0", "q0"}, "task");
            tap::Mixture mix = parse_mixture(cfg);
            tap::OptimizeOptions opt;
            opt.grid = grid();
            opt.seed = mc.seed;
            opt.tail_atoms = tcfg.value("tail_atoms", 1);
            int n = tcfg.value("n", 1);
            double f = tcfg.at("f").get<double>();
            auto u0 = tcfg.at("u0").get<std::vector<double>>();
            auto q0 = tcfg.at("q0").get<std::vector<double>>();
            auto res = tap::stationary_uq(mix, f, n, u0, q0, opt);
            tap::CsvWriter w(out_path, provenance(cfg, task, mc.seed));
            w.columns({"quantity", "value"});
            for (int k = 0; k < n; ++k) w.row({"u_" + std::to_string(k + 1), fmt(res.u[k])});
            for (int k = 0; k < n; ++k) w.row({"q_" + std::to_string(k + 1), fmt(res.q[k])});
            w.row({"parisi", fmt(res.parisi)});
            w.row({"c_value", fmt(res.c_value)});
            w.row({"residual_norm", fmt(res.residual_norm)});
            w.row({"converged", res.converged ? "1" : "0"});
            if (!res.converged) return 3;
        } else if (task == "lambda-curve" || task == "legendre") {
            reject_unknown(tcfg, {"thetas", "variant", "tail_atoms", "fs", "multistarts"},
                           "task");
            tap::Mixture mix = parse_mixture(cfg);
            tap::OptimizeOptions opt;
            opt.grid = grid();
            opt.seed = mc.seed;
            opt.tail_atoms = tcfg.value("tail_atoms", 1);
            opt.multistarts = tcfg.value("multistarts", 2);
            auto thetas = tcfg.at("thetas").get<std::vector<double>>();
            auto variant = tcfg.value("variant", std::string("annealed")) == "quenched"
                               ? tap::LambdaVariant::Quenched
                               : tap::LambdaVariant::Annealed;
            tap::ComplexityCurve curve = tap::lambda_curve(mix, thetas, variant, opt);
            tap::CsvWriter w(out_path, provenance(cfg, task, mc.seed));
            bool nonconv = false;
            if (task == "lambda-curve") {
                w.columns({"axis", "value", "converged", "residual_max", "spec"});
                for (const auto& pt : curve.points) {
                    w.row({fmt(pt.axis), fmt(pt.value), pt.converged ? "1" : "0",
                           fmt(pt.residual_max), tap::CsvWriter::quote(spec_json(pt.spec))});
                    nonconv = nonconv || !pt.converged;
                }
            } else {
                auto fs = tcfg.at("fs").get<std::vector<double>>();
                tap::ComplexityCurve lt = tap::legendre_transform(curve, fs);
                w.columns({"axis", "value", "argmin_theta", "extrapolated"});
                for (const auto& pt : lt.points)
                    w.row({fmt(pt.axis), fmt(pt.value), fmt(pt.argmin),
                           pt.extrapolated ? "1" : "0"});
            }
            if (nonconv) return 3;
        } else if (task == "sde-sim") {
            reject_unknown(tcfg, {"scheme"}, "task");
            tap::Mixture mix = parse_mixture(cfg);
            tap::AtomicMeasure z = parse_measure(cfg);
            tap::ParisiSolution sol = tap::solve(z, mix, grid());
            tap::Scheme scheme = tcfg.value("scheme", std::string("plateau_exact")) == "euler"
                                     ? tap::Scheme::Euler
                                     : tap::Scheme::PlateauExact;
            tap::EulerOpts eo;
            eo.dt = mc.dt;
            tap::ACEnsemble ens = tap::simulate(sol, scheme, mc.paths, mc.seed, eo);
            tap::MomentTable tabm = tap::moments(ens, sol);
            tap::CsvWriter w(out_path, provenance(cfg, task, mc.seed));
            w.columns({"t", "E_M", "se_M", "E_M2", "se_M2", "E_XM", "se_XM", "E_phi",
                       "se_phi"});
            for (std::size_t i = 0; i < tabm.t.size(); ++i)
                w.row({fmt(tabm.t[i]), fmt(tabm.m[i].value), fmt(tabm.m[i].se),
                       fmt(tabm.m2[i].value), fmt(tabm.m2[i].se), fmt(tabm.xm[i].value),
                       fmt(tabm.xm[i].se), fmt(tabm.phi[i].value), fmt(tabm.phi[i].se)});
        } else if (task == "freeconv") {
            reject_unknown(tcfg, {"atoms", "t", "grid_min", "grid_max", "grid_n"}, "task");
            std::vector<double> locs, ws;
            for (const auto& a : tcfg.at("atoms")) {
                locs.push_back(a.at(0).get<double>());
                ws.push_back(a.at(1).get<double>());
            }
            tap::SpectralMeasure mu(locs, ws);
            double t = tcfg.at("t").get<double>();
            double lo = tcfg.value("grid_min", mu.min() - 3.0 * std::sqrt(t));
            double hi = tcfg.value("grid_max", mu.max() + 3.0 * std::sqrt(t));
            int n = tcfg.value("grid_n", 512);
            std::vector<double> grid_pts(n);
            for (int i = 0; i < n; ++i) grid_pts[i] = lo + (hi - lo) * i / (n - 1);
            auto dens = tap::freeconv_density(mu, t, grid_pts);
            tap::CsvWriter w(out_path, provenance(cfg, task, mc.seed));
            w.columns({"x", "density"});
            for (int i = 0; i < n; ++i) w.row({fmt(grid_pts[i]), fmt(dens[i])});
        } else if (task == "rmt-verify") {
            reject_unknown(tcfg, {"N", "samples", "t"}, "task");
            int N = tcfg.value("N", 400);
            int samples = tcfg.value("samples", 20);
            double t = tcfg.value("t", 1.0);
            tap::DeformedGOE d;
            d.N = N;
            d.t = t;
            d.seed = mc.seed;
            auto res = tap::goe_logdet(d, samples);
            double oracle = tap::log_potential(tap::SpectralMeasure::dirac(0.0), t, 0.0);
            tap::CsvWriter w(out_path, provenance(cfg, task, mc.seed));
            w.columns({"quantity", "estimate", "se", "target", "pass"});
            bool pass = std::abs(res.mean - oracle) < 0.02;
            w.row({"goe_logdet_vs_semicircle", fmt(res.mean), fmt(res.se), fmt(oracle),
                   pass ? "1" : "0"});
            if (!pass) return 1;
        } else if (task == "verify-suite") {
            reject_unknown(tcfg, {}, "task");
            CheckTable tab;
            verify_suite(tab, mc.seed);
            tap::CsvWriter w(out_path, provenance(cfg, task, mc.seed));
            w.columns({"check", "value", "target", "tol", "pass"});
            for (const auto& r : tab.rows) w.row({r[0], r[1], r[2], r[3], r[4]});
            std::cout << (tab.all_pass ? "verify-suite: all checks passed\n"
                                       : "verify-suite: FAILURES\n");
            if (!tab.all_pass) return 1;
        } else {
            throw ConfigError("unknown task: " + task);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
