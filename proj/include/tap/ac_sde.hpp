#pragma once

#include <cstdint>
#include <vector>

#include "tap/parisi.hpp"

namespace tap {

struct EulerOpts {
    double dt = 5e-4;
    bool antithetic = true;
    bool track_ito_residual = false;  // pathwise Y_t residual, trapezoid rule
};

enum class Scheme { Euler, PlateauExact };

// Monte Carlo ensemble of the Auffinger-Chen SDE
//   dX_t = zeta([0,t]) xi''(t) dxPhi(t,X_t) dt + sqrt(xi''(t)) dB_t.
// Paths are driven by per-path substreams keyed by (seed, path); reductions
// run in fixed order so results do not depend on thread count.
struct ACEnsemble {
    std::uint64_t seed = 0;
    std::size_t paths = 0;
    Scheme scheme = Scheme::PlateauExact;
    int bi_start = 0;
    // boundary_samples[b][p] = X at boundary (bi_start + b) of path p
    std::vector<std::vector<double>> boundary_samples;
    std::vector<double> ito_residual;  // per path, only for Euler with tracking
};

ACEnsemble simulate(const ParisiSolution& sol, Scheme scheme, std::size_t paths,
                    std::uint64_t seed, const EulerOpts& opts = {});

// restart from boundary bi_start; each path draws its start uniformly from
// start_points (empty = X = 0 at bi_start)
ACEnsemble simulate_from(const ParisiSolution& sol, Scheme scheme, std::size_t paths,
                         std::uint64_t seed, const EulerOpts& opts, int bi_start,
                         const std::vector<double>& start_points);

// law-matched start: X_q = (dxPhi(q,.))^{-1}(m_i) with m_i drawn uniformly
// from mu_points, continued on [q,1]
ACEnsemble law_match_start(const ParisiSolution& sol, const std::vector<double>& mu_points,
                           std::size_t paths, std::uint64_t seed,
                           Scheme scheme = Scheme::PlateauExact, const EulerOpts& opts = {});

struct MomentEstimate {
    double value = 0.0;
    double se = 0.0;
};

// mean and standard error of per-path values
MomentEstimate mc_mean(const std::vector<double>& vals);

// per-path building blocks at a stored boundary (bi is the absolute boundary
// index of the solution; must be >= e.bi_start)
std::vector<double> x_paths(const ACEnsemble& e, int bi);
std::vector<double> m_paths(const ACEnsemble& e, const ParisiSolution& sol, int bi);
std::vector<double> phi_paths(const ACEnsemble& e, const ParisiSolution& sol, int bi);

struct MomentTable {
    std::vector<double> t;              // boundary times covered
    std::vector<MomentEstimate> m;      // E[M_t]
    std::vector<MomentEstimate> m2;     // E[M_t^2]
    std::vector<MomentEstimate> xm;     // E[X_t M_t]
    std::vector<MomentEstimate> phi;    // E[Phi(t,X_t)]
    std::vector<MomentEstimate> flat;   // E[M_t - M_1] (paired)
};

MomentTable moments(const ACEnsemble& e, const ParisiSolution& sol);

struct PairMoments {
    MomentEstimate dx_ms;  // E[(X_t - X_s) M_s]
    MomentEstimate dm_xs;  // E[(M_t - M_s) X_s]
    MomentEstimate dm_dx;  // E[(M_t - M_s)(X_t - X_s)]
};

PairMoments pair_moments(const ACEnsemble& e, const ParisiSolution& sol, int bi_s, int bi_t);

// Monte Carlo defect estimator: Delta = sum over atoms t >= q of
// w_t (E[M_t^2] - t) from a law-matched ensemble; pairs with the quadrature
// estimator in functionals
MomentEstimate defect_mc(const ParisiSolution& sol, const std::vector<double>& mu_points,
                         std::size_t paths, std::uint64_t seed);

}  // namespace tap
