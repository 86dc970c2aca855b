#pragma once

#include <complex>
#include <vector>

namespace tap {

// Atomic probability measure on the real line (spectral data).
struct SpectralMeasure {
    std::vector<double> x;  // sorted, deduplicated locations
    std::vector<double> w;  // positive weights summing to 1
    SpectralMeasure(std::vector<double> locs, std::vector<double> weights);
    static SpectralMeasure dirac(double a) { return SpectralMeasure({a}, {1.0}); }
    static SpectralMeasure uniform(std::vector<double> locs);
    double min() const { return x.front(); }
    double max() const { return x.back(); }
};

using cplx = std::complex<double>;

// G_mu(z) = sum w_i / (z - x_i); z must stay off the atoms
cplx stieltjes(const SpectralMeasure& mu, cplx z);
cplx stieltjes_deriv(const SpectralMeasure& mu, cplx z);

struct SubordinationResult {
    cplx omega;          // subordination point omega_{mu,t}(x)
    double edge_left;    // left edge of mu boxplus sigma_t
    double domain_check; // max(0, sum w/((x_i-u)^2+v^2) - 1/t), should be <= 1e-10
    double residual;     // |H_t(omega) - x|
    double t;
};

// solve H_t(z) = z + t G_mu(z) = x; real branch outside the support of the
// free convolution, complex branch (upper half-plane) inside
SubordinationResult subordinate(const SpectralMeasure& mu, double t, double x);

// int log|lambda - x| d(mu boxplus sigma_t)(lambda), via the subordination
// representation
double log_potential(const SpectralMeasure& mu, double t, double x);

// density of mu boxplus sigma_t at the given points (0 outside the support)
std::vector<double> freeconv_density(const SpectralMeasure& mu, double t,
                                     const std::vector<double>& grid);

// support bands [a_j, b_j] of mu boxplus sigma_t, in increasing order
std::vector<std::pair<double, double>> support_bands(const SpectralMeasure& mu, double t);

// Stieltjes transform of mu boxplus sigma_t evaluated by integrating the
// density band-by-band (cosine substitution resolves the sqrt edges); used as
// an independent route for the subordination identity
cplx stieltjes_from_density(const SpectralMeasure& mu, double t, cplx z,
                            int nodes_per_band = 4000);

}  // namespace tap
