#include "tap/ac_sde.hpp"

#include <cmath>
#include <stdexcept>

#include "tap/rng.hpp"

namespace tap {

namespace {

// exact sample of X_{t_right} | X_{t_left} = x on a plateau with mass alpha:
// target density ~ exp(alpha Phi_right(y) - (y-x)^2/(2 sig2)).  Rejection
// from a two-sided shifted Gaussian; the envelope
//   exp(alpha Phi(y)) <= exp(alpha Phi(0)) (e^{alpha y} + e^{-alpha y})
// holds because Phi(y) - |y| peaks at 0.
double sample_plateau(const ParisiSolution& sol, const Slice& right, double alpha, double sig2,
                      double x, Rng& rng) {
    const double sig = std::sqrt(sig2);
    if (alpha <= 0.0) return x + sig * rng.normal();
    const double phi0 = sol.eval_phi(right, 0.0);
    const double lw_plus = alpha * x, lw_minus = -alpha * x;
    const double lw_max = std::max(lw_plus, lw_minus);
    const double p_plus = std::exp(lw_plus - lw_max) /
                          (std::exp(lw_plus - lw_max) + std::exp(lw_minus - lw_max));
    for (int it = 0; it < 100000; ++it) {
        double side = (rng.uniform() < p_plus) ? 1.0 : -1.0;
        double y = x + side * alpha * sig2 + sig * rng.normal();
        double d = y - x;
        double log_target = alpha * sol.eval_phi(right, y) - 0.5 * d * d / sig2;
        double ep = lw_plus - 0.5 * (d - alpha * sig2) * (d - alpha * sig2) / sig2;
        double em = lw_minus - 0.5 * (d + alpha * sig2) * (d + alpha * sig2) / sig2;
        double mx = std::max(ep, em);
        double log_env = alpha * phi0 + 0.5 * alpha * alpha * sig2 + mx +
                         std::log(std::exp(ep - mx) + std::exp(em - mx));
        if (std::log(rng.uniform()) < log_target - log_env) return y;
    }
    throw std::runtime_error("sample_plateau: rejection sampler stalled");
}

}  // namespace

ACEnsemble simulate_from(const ParisiSolution& sol, Scheme scheme, std::size_t paths,
                         std::uint64_t seed, const EulerOpts& opts, int bi_start,
                         const std::vector<double>& start_points) {
    const auto& times = sol.boundaries();
    const int B = static_cast<int>(times.size());
    ACEnsemble e;
    e.seed = seed;
    e.paths = paths;
    e.scheme = scheme;
    e.bi_start = bi_start;
    e.boundary_samples.assign(B - bi_start, std::vector<double>(paths));

    const Mixture& mx = sol.mixture();

    if (scheme == Scheme::PlateauExact) {
#pragma omp parallel for schedule(static)
        for (long long p = 0; p < static_cast<long long>(paths); ++p) {
            Rng rng(seed, static_cast<std::uint64_t>(p));
            double x;
            if (start_points.empty())
                x = 0.0;
            else {
                std::size_t k = static_cast<std::size_t>(rng.uniform() * start_points.size());
                if (k >= start_points.size()) k = start_points.size() - 1;
                x = start_points[k];
            }
            e.boundary_samples[0][p] = x;
            for (int b = bi_start; b + 1 < B; ++b) {
                double alpha = sol.plateau_mass(b);
                double sig2 = mx.xi(times[b + 1], 1) - mx.xi(times[b], 1);
                if (sig2 > 0.0)
                    x = sample_plateau(sol, sol.slice(b + 1), alpha, sig2, x, rng);
                e.boundary_samples[b - bi_start + 1][p] = x;
            }
        }
        return e;
    }

    // Euler-Maruyama, step-synchronous so each drift row is built once.
    // Antithetic pairs (2k, 2k+1) share one substream with flipped Gaussians.
    if (opts.dt > 1e-3) throw std::invalid_argument("simulate: euler needs dt <= 1e-3");
    const std::size_t npair = opts.antithetic ? (paths + 1) / 2 : paths;
    std::vector<Rng> engines;
    engines.reserve(npair);
    for (std::size_t k = 0; k < npair; ++k) engines.emplace_back(seed, k);

    std::vector<double> X(paths);
    if (start_points.empty())
        std::fill(X.begin(), X.end(), 0.0);
    else {
        for (std::size_t p = 0; p < paths; ++p) {
            // start draw from the pair engine, once per path
            Rng pick(seed ^ 0x5851f42d4c957f2dULL, p);
            std::size_t k = static_cast<std::size_t>(pick.uniform() * start_points.size());
            if (k >= start_points.size()) k = start_points.size() - 1;
            X[p] = start_points[k];
        }
    }
    e.boundary_samples[0] = X;
    if (opts.track_ito_residual) e.ito_residual.assign(paths, 0.0);

    std::vector<double> prev_g(paths), prev_m(paths), resid;
    if (opts.track_ito_residual) resid.assign(paths, 0.0);

    for (int b = bi_start; b + 1 < B; ++b) {
        const double a = times[b], bt = times[b + 1];
        const double alpha = sol.plateau_mass(b);
        int nsteps = std::max(1, static_cast<int>(std::ceil((bt - a) / opts.dt)));
        double tau = (bt - a) / nsteps;
        Slice cur = sol.slice(b);
        for (int k = 0; k < nsteps; ++k) {
            double t0 = a + k * tau, t1 = a + (k + 1) * tau;
            Slice next = (k + 1 == nsteps) ? sol.slice(b + 1) : sol.interior_slice(t1);
            double xi2_t0 = mx.xi(t0, 2);
            double svar = mx.xi(t1, 1) - mx.xi(t0, 1);  // Var of the Brownian part
            double sstd = std::sqrt(std::max(svar, 0.0));
#pragma omp parallel for schedule(static)
            for (long long pr = 0; pr < static_cast<long long>(npair); ++pr) {
                double z = engines[pr].normal();
                for (int parity = 0; parity < (opts.antithetic ? 2 : 1); ++parity) {
                    std::size_t p = opts.antithetic ? 2 * pr + parity : pr;
                    if (p >= paths) continue;
                    double zz = parity == 0 ? z : -z;
                    double x = X[p];
                    double m0 = sol.eval_u(cur, x);
                    double g0 = 0.5 * alpha * xi2_t0 * m0 * m0;
                    double phi0v = 0.0, v0 = 0.0;
                    if (opts.track_ito_residual) {
                        phi0v = sol.eval_phi(cur, x);
                        v0 = sol.eval_v(cur, x);
                    }
                    double xn = x + alpha * xi2_t0 * m0 * tau + sstd * zz;
                    X[p] = xn;
                    if (opts.track_ito_residual) {
                        // trapezoid rule turns the stochastic integral into a
                        // Stratonovich one; the Ito correction (1/2) xi'' dxxPhi
                        // is restored explicitly
                        double m1 = sol.eval_u(next, xn);
                        double v1 = sol.eval_v(next, xn);
                        double g1 = 0.5 * alpha * mx.xi(t1, 2) * m1 * m1;
                        double phi1v = sol.eval_phi(next, xn);
                        resid[p] += phi1v - phi0v - 0.5 * (g0 + g1) * tau -
                                    0.5 * (m0 + m1) * sstd * zz +
                                    0.25 * (v0 * xi2_t0 + v1 * mx.xi(t1, 2)) * tau;
                    }
                }
            }
            cur = std::move(next);
        }
        e.boundary_samples[b - bi_start + 1] = X;
    }
    if (opts.track_ito_residual) e.ito_residual = std::move(resid);
    return e;
}

ACEnsemble simulate(const ParisiSolution& sol, Scheme scheme, std::size_t paths,
                    std::uint64_t seed, const EulerOpts& opts) {
    return simulate_from(sol, scheme, paths, seed, opts, 0, {});
}

ACEnsemble law_match_start(const ParisiSolution& sol, const std::vector<double>& mu_points,
                           std::size_t paths, std::uint64_t seed, Scheme scheme,
                           const EulerOpts& opts) {
    double q = 0.0;
    for (double m : mu_points) q += m * m;
    q /= mu_points.size();
    int bi = sol.boundary_index(q, 1e-9);
    std::vector<double> xs;
    xs.reserve(mu_points.size());
    for (double m : mu_points) xs.push_back(sol.legendre_h(bi, m).dh);
    return simulate_from(sol, scheme, paths, seed, opts, bi, xs);
}

MomentEstimate mc_mean(const std::vector<double>& vals) {
    // fixed-chunk deterministic reduction
    const std::size_t chunk = 1024;
    double total = 0.0, total2 = 0.0;
    for (std::size_t c = 0; c < vals.size(); c += chunk) {
        double s = 0.0, s2 = 0.0;
        std::size_t end = std::min(vals.size(), c + chunk);
        for (std::size_t i = c; i < end; ++i) {
            s += vals[i];
            s2 += vals[i] * vals[i];
        }
        total += s;
        total2 += s2;
    }
    double n = static_cast<double>(vals.size());
    double mean = total / n;
    double var = std::max(0.0, total2 / n - mean * mean);
    return {mean, std::sqrt(var / n)};
}

std::vector<double> x_paths(const ACEnsemble& e, int bi) {
    return e.boundary_samples.at(bi - e.bi_start);
}

std::vector<double> m_paths(const ACEnsemble& e, const ParisiSolution& sol, int bi) {
    const auto& xs = e.boundary_samples.at(bi - e.bi_start);
    std::vector<double> out(xs.size());
    const Slice& s = sol.slice(bi);
    for (std::size_t p = 0; p < xs.size(); ++p) out[p] = sol.eval_u(s, xs[p]);
    return out;
}

std::vector<double> phi_paths(const ACEnsemble& e, const ParisiSolution& sol, int bi) {
    const auto& xs = e.boundary_samples.at(bi - e.bi_start);
    std::vector<double> out(xs.size());
    const Slice& s = sol.slice(bi);
    for (std::size_t p = 0; p < xs.size(); ++p) out[p] = sol.eval_phi(s, xs[p]);
    return out;
}

MomentTable moments(const ACEnsemble& e, const ParisiSolution& sol) {
    MomentTable tab;
    const auto& times = sol.boundaries();
    const int B = static_cast<int>(times.size());
    std::vector<double> m_last = m_paths(e, sol, B - 1);
    for (int b = e.bi_start; b < B; ++b) {
        auto xs = x_paths(e, b);
        auto ms = m_paths(e, sol, b);
        auto ps = phi_paths(e, sol, b);
        std::vector<double> m2(ms.size()), xm(ms.size()), fl(ms.size());
        for (std::size_t p = 0; p < ms.size(); ++p) {
            m2[p] = ms[p] * ms[p];
            xm[p] = xs[p] * ms[p];
            fl[p] = ms[p] - m_last[p];
        }
        tab.t.push_back(times[b]);
        tab.m.push_back(mc_mean(ms));
        tab.m2.push_back(mc_mean(m2));
        tab.xm.push_back(mc_mean(xm));
        tab.phi.push_back(mc_mean(ps));
        tab.flat.push_back(mc_mean(fl));
    }
    return tab;
}

PairMoments pair_moments(const ACEnsemble& e, const ParisiSolution& sol, int bi_s, int bi_t) {
    auto xs = x_paths(e, bi_s);
    auto xt = x_paths(e, bi_t);
    auto ms = m_paths(e, sol, bi_s);
    auto mt = m_paths(e, sol, bi_t);
    std::vector<double> a(xs.size()), b(xs.size()), c(xs.size());
    for (std::size_t p = 0; p < xs.size(); ++p) {
        a[p] = (xt[p] - xs[p]) * ms[p];
        b[p] = (mt[p] - ms[p]) * xs[p];
        c[p] = (mt[p] - ms[p]) * (xt[p] - xs[p]);
    }
    return {mc_mean(a), mc_mean(b), mc_mean(c)};
}

MomentEstimate defect_mc(const ParisiSolution& sol, const std::vector<double>& mu_points,
                         std::size_t paths, std::uint64_t seed) {
    ACEnsemble ens = law_match_start(sol, mu_points, paths, seed);
    double q = sol.boundaries()[ens.bi_start];
    const AtomicMeasure& z = sol.measure();
    double value = 0.0, var = 0.0;
    for (const Atom& a : z.atoms()) {
        if (a.t < q - 1e-12 || a.w <= 0.0) continue;
        int bi = sol.boundary_index(a.t, 1e-9);
        auto ms = m_paths(ens, sol, bi);
        for (double& v : ms) v = v * v;
        MomentEstimate est = mc_mean(ms);
        value += a.w * (est.value - a.t);
        var += a.w * a.w * est.se * est.se;
    }
    return {value, std::sqrt(var)};
}

}  // namespace tap
