#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tap/functionals.hpp"
#include "tap/measures.hpp"
#include "tap/mixture.hpp"
#include "tap/parisi.hpp"

namespace tap {

struct OptimizeOptions {
    GridSpec grid{0.0, 1601, 48};  // lighter grid for inner evaluations
    int tail_atoms = 1;
    int multistarts = 8;
    int max_iter = 4000;
    int stall_limit = 200;
    double tol = 1e-11;
    std::uint64_t seed = 1;
    bool stick_breaking = true;  // weight parameterization (false: softmax)
};

struct PrefixOptimum {
    PrefixSpec spec;
    double value = 0.0;
    bool converged = false;
    int evaluations = 0;
    double h_support_gap = 0.0;  // first-order flatness of H on the support
    std::vector<double> all_start_values;
};

// minimize Parisi over Prefix_{n+1}(u;q) with a tail of <= tail_atoms atoms;
// fixed components are held, empty vectors mean "free"
PrefixOptimum minimize_parisi_prefix(const Mixture& mix, int n, std::vector<double> u_fixed,
                                     std::vector<double> q_fixed, const OptimizeOptions& opt);

struct StationaryResult {
    std::vector<double> u, q;
    PrefixSpec spec;
    double parisi = 0.0;
    double c_value = 0.0;  // u_n (P - f)
    bool converged = false;
    double residual_norm = 0.0;
    OptimalityReport report;
};

// critical point of (u,q) -> u_n (P^{(n)}(u;q) - f) by damped Newton on the
// stationarity residuals, bisection-style fallback on failure
StationaryResult stationary_uq(const Mixture& mix, double f, int n,
                               const std::vector<double>& u0, const std::vector<double>& q0,
                               const OptimizeOptions& opt);

struct CurvePoint {
    double axis = 0.0;   // theta or f
    double value = 0.0;  // Lambda(theta) or -Lambda*(f)
    PrefixSpec spec;
    bool converged = false;
    double residual_max = 0.0;
    double argmin = 0.0;       // for Legendre points: optimal theta
    bool extrapolated = false; // argmin pinned to the curve boundary
};

enum class LambdaVariant { Annealed, Quenched };

struct ComplexityCurve {
    LambdaVariant variant = LambdaVariant::Annealed;
    std::vector<CurvePoint> points;
};

// Lambda(theta) = theta inf{Parisi(zeta) : zeta({0}) = theta} (annealed) or
// the quenched variant constraining zeta([0, sup supp)) = theta
ComplexityCurve lambda_curve(const Mixture& mix, const std::vector<double>& thetas,
                             LambdaVariant variant, const OptimizeOptions& opt);

// -Lambda*(f) = inf_theta (Lambda(theta) - theta f) from a tabulated curve
ComplexityCurve legendre_transform(const ComplexityCurve& curve, const std::vector<double>& fs);

// generic Nelder-Mead on R^d (used by the optimizers above; exposed for the
// reparameterization-invariance test)
struct SimplexResult {
    std::vector<double> x;
    double value = 0.0;
    bool converged = false;
    int evaluations = 0;
};
SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& fn,
                          std::vector<double> x0, double step, int max_iter, double tol,
                          int stall_limit);

}  // namespace tap
