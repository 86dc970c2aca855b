#pragma once

#include <optional>
#include <vector>

#include "tap/measures.hpp"
#include "tap/mixture.hpp"
#include "tap/parisi.hpp"

namespace tap {

// Empirical measure of magnetization coordinates, mu = (1/N) sum delta_{m_i}.
struct EmpiricalMu {
    std::vector<double> points;
    double q() const {
        double s = 0.0;
        for (double m : points) s += m * m;
        return s / points.size();
    }
};

// exact integral of t xi''(t) zeta([0,t]) dt over [a,b] (polynomial
// antiderivative per plateau)
double weighted_txi2(const AtomicMeasure& z, const Mixture& m, double a, double b);

// U_zeta(q) = (1/2) int_q^1 t xi''(t) zeta([0,t]) dt
inline double u_correction(const AtomicMeasure& z, const Mixture& m, double q) {
    return 0.5 * weighted_txi2(z, m, q, 1.0);
}

// Parisi(zeta) = Phi(0,0) - (1/2) int_0^1 t xi''(t) zeta([0,t]) dt
double parisi_value(const ParisiSolution& sol);
double parisi_value(const AtomicMeasure& z, const Mixture& m, const GridSpec& g = {});

// TAP(mu, zeta) = -int Phi*(q_mu, m) dmu - U_zeta(q_mu); zeta supported in
// [q_mu, 1].  The precomputed solution must have a boundary at q_mu.
double tap_value(const EmpiricalMu& mu, const ParisiSolution& sol);
double tap_value(const EmpiricalMu& mu, const AtomicMeasure& z, const Mixture& m,
                 const GridSpec& g = {});

// k(q,m) = dm h(q,m) + m xi''(q) int_q^1 zeta([0,t]) dt
double k_field(const ParisiSolution& sol, int bi, double mval);

// defect Delta_zeta^mu = int_{[q,1]} (E[u(t,X_t)^2] - t) zeta(dt), X law-matched
// at q = q_mu; deterministic plateau-kernel quadrature
double defect_quadrature(const EmpiricalMu& mu, const ParisiSolution& sol);

// d/dm_i TAP(mu_N, zeta) = -(1/N)[k(q,m_i) - m_i xi''(q) Delta]
double tap_gradient(const EmpiricalMu& mu, const ParisiSolution& sol, std::size_t i);
std::vector<double> tap_gradient_all(const EmpiricalMu& mu, const ParisiSolution& sol);

struct Profile {
    std::vector<double> s;
    std::vector<double> value;
    double at(double x) const;  // linear interpolation
};

// H^mu(s) = (1/2) int_s^1 xi''(r)(E[u(r,X_r)^2] - r) dr on [q,1], extended
// constant on [0,q); sampled on s_grid (subdivided per plateau internally)
Profile h_profile(const EmpiricalMu& mu, const ParisiSolution& sol,
                  const std::vector<double>& s_grid, int per_plateau = 48);

// E[M_t^2] along the flow started law-matched at q (or from X_0 = 0 when
// mu is empty), sampled at r_grid in [start, 1]
Profile second_moment_profile(const ParisiSolution& sol, const std::vector<double>& points,
                              int bi_start, const std::vector<double>& r_grid);

struct OptimalityReport {
    std::vector<double> support;       // atoms of zeta in (0,1]
    std::vector<double> first_order;   // E[M_s^2] - s per atom
    std::vector<double> second_order;  // xi''(s) E[(dxxPhi)^2] - 1 per atom
    std::vector<double> energy;        // eq. residuals at prefix atoms; last entry uses f
    Profile h_curve;                   // H_zeta on [qn, 1]
    double h_support_gap = 0.0;        // max over support of H - min over [qn,1]
    double max_first_order() const;
    double max_energy() const;
};

// Stationarity residuals for a prefix measure at level f; qn defaults to the
// largest atom in (0,1).
OptimalityReport optimality_report(const AtomicMeasure& z, const Mixture& m, double f,
                                   const GridSpec& g = {},
                                   std::optional<double> qn = std::nullopt);

}  // namespace tap
