#include "tap/freeprob.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace tap {

namespace {

// sum w_i / (x_i - u)^2 for real u (the shock functional)
double shock_sum(const SpectralMeasure& mu, double u) {
    double s = 0.0;
    for (std::size_t i = 0; i < mu.x.size(); ++i) {
        double d = mu.x[i] - u;
        s += mu.w[i] / (d * d);
    }
    return s;
}

double H_real(const SpectralMeasure& mu, double t, double u) {
    double g = 0.0;
    for (std::size_t i = 0; i < mu.x.size(); ++i) g += mu.w[i] / (u - mu.x[i]);
    return u + t * g;
}

// leftmost root of shock_sum = 1/t below min support
double left_shock(const SpectralMeasure& mu, double t) {
    double hi = mu.min() - 1e-14;
    double lo = mu.min() - std::max(1.0, 2.0 * std::sqrt(t));
    while (shock_sum(mu, lo) > 1.0 / t) lo -= (mu.min() - lo);
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (shock_sum(mu, mid) > 1.0 / t)
            hi = mid;
        else
            lo = mid;
    }
    return lo;
}

double right_shock(const SpectralMeasure& mu, double t) {
    double lo = mu.max() + 1e-14;
    double hi = mu.max() + std::max(1.0, 2.0 * std::sqrt(t));
    while (shock_sum(mu, hi) > 1.0 / t) hi += (hi - mu.max());
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (shock_sum(mu, mid) > 1.0 / t)
            lo = mid;
        else
            hi = mid;
    }
    return hi;
}

// real bracketed Newton for H_t(u) = x on an interval where H_t is monotone
double solve_real(const SpectralMeasure& mu, double t, double x, double lo, double hi,
                  bool increasing) {
    double u = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        double r = H_real(mu, t, u) - x;
        if (std::abs(r) < 1e-14 * (1.0 + std::abs(x))) break;
        bool high = increasing ? (r > 0) : (r < 0);
        if (high)
            hi = u;
        else
            lo = u;
        double dH = 1.0 - t * shock_sum(mu, u);
        double un = u - r / dH;
        u = (un > lo && un < hi) ? un : 0.5 * (lo + hi);
    }
    return u;
}

}  // namespace

SpectralMeasure::SpectralMeasure(std::vector<double> locs, std::vector<double> weights) {
    if (locs.empty() || locs.size() != weights.size())
        throw std::invalid_argument("SpectralMeasure: bad sizes");
    std::vector<std::size_t> idx(locs.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return locs[a] < locs[b]; });
    double total = 0.0;
    for (std::size_t k : idx) {
        if (weights[k] < 0.0) throw std::invalid_argument("SpectralMeasure: negative weight");
        if (weights[k] == 0.0) continue;
        if (!x.empty() && locs[k] - x.back() < 1e-12)
            w.back() += weights[k];
        else {
            x.push_back(locs[k]);
            w.push_back(weights[k]);
        }
        total += weights[k];
    }
    if (x.empty()) throw std::invalid_argument("SpectralMeasure: empty");
    if (std::abs(total - 1.0) > 1e-8)
        throw std::invalid_argument("SpectralMeasure: weights must sum to 1");
    for (double& ww : w) ww /= total;
}

SpectralMeasure SpectralMeasure::uniform(std::vector<double> locs) {
    std::vector<double> ws(locs.size(), 1.0 / locs.size());
    return SpectralMeasure(std::move(locs), std::move(ws));
}

cplx stieltjes(const SpectralMeasure& mu, cplx z) {
    if (z.imag() == 0.0) {
        for (double xi : mu.x)
            if (std::abs(z.real() - xi) < 1e-12)
                throw std::domain_error("stieltjes: z on an atom of the measure");
    }
    cplx s = 0.0;
    for (std::size_t i = 0; i < mu.x.size(); ++i) s += mu.w[i] / (z - mu.x[i]);
    return s;
}

cplx stieltjes_deriv(const SpectralMeasure& mu, cplx z) {
    cplx s = 0.0;
    for (std::size_t i = 0; i < mu.x.size(); ++i) {
        cplx d = z - mu.x[i];
        s -= mu.w[i] / (d * d);
    }
    return s;
}

SubordinationResult subordinate(const SpectralMeasure& mu, double t, double x) {
    if (t <= 0.0) throw std::domain_error("subordinate: t must be > 0");
    SubordinationResult res;
    res.t = t;
    const double wl = left_shock(mu, t);
    const double wr = right_shock(mu, t);
    const double ell = H_real(mu, t, wl);
    const double rgt = H_real(mu, t, wr);
    res.edge_left = ell;

    cplx omega;
    if (x <= ell) {
        double lo = wl;
        while (H_real(mu, t, lo) > x) lo -= std::max(1.0, wl - lo);
        omega = solve_real(mu, t, x, lo, wl, true);
    } else if (x >= rgt) {
        double hi = wr;
        while (H_real(mu, t, hi) < x) hi += std::max(1.0, hi - wr);
        omega = solve_real(mu, t, x, wr, hi, true);
    } else {
        // complex Newton from x + i sqrt(t); H_t is conformal on Omega_{mu,t}
        omega = cplx(x, std::sqrt(t));
        for (int it = 0; it < 300; ++it) {
            cplx r = omega + t * stieltjes(mu, omega) - x;
            if (std::abs(r) < 1e-14 * (1.0 + std::abs(x))) break;
            cplx dH = 1.0 + t * stieltjes_deriv(mu, omega);
            cplx step = r / dH;
            cplx on = omega - step;
            int halvings = 0;
            while (on.imag() <= 0.0 && halvings < 60) {
                step *= 0.5;
                on = omega - step;
                ++halvings;
            }
            omega = on;
        }
        // a gap query converges to the real axis; snap once close
        if (std::abs(omega.imag()) < 1e-12) omega = cplx(omega.real(), 0.0);
    }
    res.omega = omega;
    res.residual = std::abs(omega + t * stieltjes(mu, omega) - x);
    if (omega.imag() == 0.0)
        res.domain_check = std::max(0.0, shock_sum(mu, omega.real()) - 1.0 / t);
    else {
        double s = 0.0;
        for (std::size_t i = 0; i < mu.x.size(); ++i) {
            double dr = mu.x[i] - omega.real();
            s += mu.w[i] / (dr * dr + omega.imag() * omega.imag());
        }
        res.domain_check = std::max(0.0, s - 1.0 / t);
    }
    return res;
}

double log_potential(const SpectralMeasure& mu, double t, double x) {
    SubordinationResult sr = subordinate(mu, t, x);
    double s = 0.0;
    for (std::size_t i = 0; i < mu.x.size(); ++i)
        s += mu.w[i] * std::log(std::abs(cplx(mu.x[i], 0.0) - sr.omega));
    double re = sr.omega.real() - x, im = sr.omega.imag();
    return s + (re * re - im * im) / (2.0 * t);
}

std::vector<double> freeconv_density(const SpectralMeasure& mu, double t,
                                     const std::vector<double>& grid) {
    std::vector<double> out(grid.size(), 0.0);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        SubordinationResult sr = subordinate(mu, t, grid[k]);
        if (sr.omega.imag() > 0.0)
            out[k] = -stieltjes(mu, sr.omega).imag() / M_PI;
    }
    return out;
}

std::vector<std::pair<double, double>> support_bands(const SpectralMeasure& mu, double t) {
    std::vector<double> shocks;  // ordered real boundary points of Omega
    shocks.push_back(left_shock(mu, t));
    // interior gaps: shock_sum is U-shaped between consecutive atoms
    for (std::size_t i = 0; i + 1 < mu.x.size(); ++i) {
        double a = mu.x[i] + 1e-13, b = mu.x[i + 1] - 1e-13;
        if (b <= a) continue;
        // ternary search for the minimum
        double lo = a, hi = b;
        for (int it = 0; it < 200; ++it) {
            double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
            if (shock_sum(mu, m1) < shock_sum(mu, m2))
                hi = m2;
            else
                lo = m1;
        }
        double umin = 0.5 * (lo + hi);
        if (shock_sum(mu, umin) >= 1.0 / t) continue;  // gap closed by smoothing
        // two roots of shock_sum = 1/t around umin
        double l1 = a, r1 = umin;
        for (int it = 0; it < 200; ++it) {
            double m = 0.5 * (l1 + r1);
            if (shock_sum(mu, m) > 1.0 / t)
                l1 = m;
            else
                r1 = m;
        }
        shocks.push_back(0.5 * (l1 + r1));
        double l2 = umin, r2 = b;
        for (int it = 0; it < 200; ++it) {
            double m = 0.5 * (l2 + r2);
            if (shock_sum(mu, m) > 1.0 / t)
                r2 = m;
            else
                l2 = m;
        }
        shocks.push_back(0.5 * (l2 + r2));
    }
    shocks.push_back(right_shock(mu, t));
    std::vector<std::pair<double, double>> bands;
    for (std::size_t k = 0; k + 1 < shocks.size(); k += 2)
        bands.emplace_back(H_real(mu, t, shocks[k]), H_real(mu, t, shocks[k + 1]));
    return bands;
}

cplx stieltjes_from_density(const SpectralMeasure& mu, double t, cplx z, int nodes_per_band) {
    auto bands = support_bands(mu, t);
    cplx total = 0.0;
    for (auto [a, b] : bands) {
        const double c = 0.5 * (a + b), r = 0.5 * (b - a);
        // midpoint rule in theta; integrand vanishes like sin^2 at the edges
        cplx s = 0.0;
        for (int k = 0; k < nodes_per_band; ++k) {
            double th = M_PI * (k + 0.5) / nodes_per_band;
            double lam = c + r * std::cos(th);
            SubordinationResult sr = subordinate(mu, t, lam);
            double rho = (sr.omega.imag() > 0.0) ? -stieltjes(mu, sr.omega).imag() / M_PI : 0.0;
            s += rho * r * std::sin(th) / (z - lam);
        }
        total += s * (M_PI / nodes_per_band);
    }
    return total;
}

}  // namespace tap
