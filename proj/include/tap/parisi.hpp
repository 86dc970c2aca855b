#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "tap/grid.hpp"
#include "tap/measures.hpp"
#include "tap/mixture.hpp"

namespace tap {

struct GridSpec {
    double half_width = 0.0;  // 0 = auto: 10 + 6 sqrt(xi'(1))
    int points = 4001;        // odd
    int quad_nodes = 64;
    void validate() const {
        if (points < 257 || points % 2 == 0)
            throw std::invalid_argument("GridSpec: points must be odd and >= 257");
        if (quad_nodes < 32) throw std::invalid_argument("GridSpec: quad_nodes must be >= 32");
    }
};

// Thrown when the spatial grid cannot hold the required Gaussian mass.
struct GridTooNarrow : std::runtime_error {
    double required_L;
    GridTooNarrow(const std::string& msg, double L) : std::runtime_error(msg), required_L(L) {}
};

// One time slice of the solution: Phi, dxPhi (u), dxxPhi (v) on the grid,
// with slope-1 asymptote constants for |x| > L.
struct Slice {
    double t = 0.0;
    std::vector<double> phi, u, v;
    std::vector<double> dv;  // finite-difference slope of v, for interpolation
    double c_plus = 0.0, c_minus = 0.0;
};

struct LegendreResult {
    double h;    // Phi*(q, m)
    double dh;   // x with dxPhi(q,x) = m
    double ddh;  // 1 / dxxPhi(q, x)
};

// Layered solution of the backward Parisi PDE for an atomic measure.
// Values are stored at plateau boundaries (atoms of zeta plus {0,1} plus any
// requested extra split times); Hopf-Cole layer steps are exact per plateau
// up to quadrature and interpolation error.
class ParisiSolution {
public:
    const Grid& grid() const { return grid_; }
    const AtomicMeasure& measure() const { return *measure_; }
    const Mixture& mixture() const { return *mixture_; }
    const GaussHermite& quad() const { return *quad_; }

    const std::vector<double>& boundaries() const { return times_; }
    // index of a stored boundary; throws if t is not stored
    int boundary_index(double t, double tol = 1e-12) const;
    const Slice& slice(int bi) const { return slices_[bi]; }
    // zeta([0, t_bi]) (the plateau mass to the right of the boundary)
    double plateau_mass(int bi) const { return mass_[bi]; }

    double phi(int bi, double x) const { return eval_phi(slices_[bi], x); }
    double dx_phi(int bi, double x) const { return eval_u(slices_[bi], x); }
    double dxx_phi(int bi, double x) const { return eval_v(slices_[bi], x); }

    double phi(double t, double x) const { return eval_phi(slices_[boundary_index(t)], x); }
    double dx_phi(double t, double x) const { return eval_u(slices_[boundary_index(t)], x); }
    double dxx_phi(double t, double x) const { return eval_v(slices_[boundary_index(t)], x); }

    // Legendre transform h(q,.) = Phi*(q,.) and its m-derivatives at a
    // stored boundary; |mval| < 1 required.
    LegendreResult legendre_h(int bi, double mval) const;
    // right q-derivative of h at a boundary:
    // (xi''(q)/2)(dxxPhi(q,x(m)) + zeta([0,q]) m^2)
    double dq_h(int bi, double mval) const;

    // solution at an interior time t of a plateau, via a partial Hopf-Cole
    // step from the plateau's right boundary
    Slice interior_slice(double t) const;

    // largest |Phi - (|x|+c)| mismatch seen when fitting the asymptotes
    double asymptote_residual() const { return asym_residual_; }

    // evaluation on an arbitrary slice (shared grid)
    double eval_phi(const Slice& s, double x) const;
    double eval_u(const Slice& s, double x) const;
    double eval_v(const Slice& s, double x) const;

private:
    friend ParisiSolution solve(const AtomicMeasure&, const Mixture&, const GridSpec&,
                                const std::vector<double>&);
    Grid grid_;
    std::shared_ptr<const AtomicMeasure> measure_;
    std::shared_ptr<const Mixture> mixture_;
    std::shared_ptr<const GaussHermite> quad_;
    std::vector<double> times_;   // boundaries, increasing, [0 ... 1]
    std::vector<double> mass_;    // zeta([0, t_i]) per boundary
    std::vector<Slice> slices_;   // aligned with times_
    double asym_residual_ = 0.0;

    Slice step_from(const Slice& right, double t_left, double mbar) const;
};

ParisiSolution solve(const AtomicMeasure& z, const Mixture& m, const GridSpec& g = {},
                     const std::vector<double>& extra_splits = {});

// ---- Plateau transition-kernel machinery -------------------------------
//
// Law(X_t | X_s = x) on a plateau [s,t] with mass alpha = zeta([0,s]) has
// density proportional to exp(-(y-x)^2 / (2(xi'(t)-xi'(s))) + alpha Phi(t,y)).
// DensityFlow pushes a density (or point mass) forward across boundaries by
// the exact kernels, evaluated on the solver grid.
class DensityFlow {
public:
    // start at time t = boundaries()[bi] from a point mass at x0
    DensityFlow(const ParisiSolution& sol, int bi, double x0);
    // start from an average of point masses (equal weights)
    DensityFlow(const ParisiSolution& sol, int bi, const std::vector<double>& points);

    // advance to the next stored boundary
    void step();
    // advance through boundaries until time t (must be a stored boundary)
    void advance_to(int bi);

    int boundary() const { return bi_; }
    // density on the grid (empty while still a point mass)
    const std::vector<double>& density() const { return rho_; }

    // E[g(X_t)] at the current time
    double expect(const std::vector<double>& g_on_grid) const;
    double expect_u2() const;   // E[(dxPhi(t,X_t))^2]
    double expect_v2() const;   // E[(dxxPhi(t,X_t))^2]
    double expect_phi() const;  // E[Phi(t,X_t)]
    double total_mass() const;  // should stay 1 (diagnostic)

    // density at an interior time t in the current plateau (does not move
    // the flow); pairs with ParisiSolution::interior_slice(t)
    std::vector<double> density_at_interior(const Slice& target) const;

private:
    const ParisiSolution* sol_;
    int bi_;
    std::vector<double> rho_;      // density on grid once spread
    std::vector<double> points_;   // point representation before first step
    std::vector<double> push(const Slice& from, const Slice& to, double mbar) const;
    double expect_of(const std::vector<double>& vals) const;
};

// Transition density Law(X_t | X_s = x0) on the grid, normalized; s,t stored
// boundaries with no atoms strictly between.
std::vector<double> plateau_kernel_density(const ParisiSolution& sol, int bi_from, int bi_to,
                                           double x0);

}  // namespace tap
