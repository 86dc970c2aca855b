#include "tap/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tap {

namespace {
// antiderivative of t xi''(t): t xi'(t) - xi(t)
double txi2_anti(const Mixture& m, double t) { return t * m.xi(t, 1) - m.xi(t); }
}  // namespace

double weighted_txi2(const AtomicMeasure& z, const Mixture& m, double a, double b) {
    if (b < a) throw std::domain_error("weighted_txi2: b < a");
    std::vector<double> brk{a, b};
    for (const Atom& at : z.atoms())
        if (at.t > a && at.t < b) brk.push_back(at.t);
    std::sort(brk.begin(), brk.end());
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < brk.size(); ++i)
        s += z.cdf(brk[i]) * (txi2_anti(m, brk[i + 1]) - txi2_anti(m, brk[i]));
    return s;
}

double parisi_value(const ParisiSolution& sol) {
    double phi00 = sol.phi(0, 0.0);
    return phi00 - 0.5 * weighted_txi2(sol.measure(), sol.mixture(), 0.0, 1.0);
}

double parisi_value(const AtomicMeasure& z, const Mixture& m, const GridSpec& g) {
    return parisi_value(solve(z, m, g));
}

double tap_value(const EmpiricalMu& mu, const ParisiSolution& sol) {
    const double q = mu.q();
    for (double p : mu.points)
        if (std::abs(p) >= 1.0) throw std::domain_error("tap_value: |m_i| must be < 1");
    if (sol.measure().min_support() < q - 1e-9)
        throw std::invalid_argument("tap_value: zeta must be supported in [q_mu, 1]");
    int bi = sol.boundary_index(q, 1e-9);
    double s = 0.0;
    for (double p : mu.points) s += sol.legendre_h(bi, p).h;
    s /= mu.points.size();
    return -s - u_correction(sol.measure(), sol.mixture(), q);
}

double tap_value(const EmpiricalMu& mu, const AtomicMeasure& z, const Mixture& m,
                 const GridSpec& g) {
    return tap_value(mu, solve(z, m, g, {mu.q()}));
}

double k_field(const ParisiSolution& sol, int bi, double mval) {
    double q = sol.boundaries()[bi];
    double tail = sol.measure().integral_cdf(q, 1.0);
    return sol.legendre_h(bi, mval).dh + mval * sol.mixture().xi(q, 2) * tail;
}

namespace {

// starting x-points of the law-matched flow: x_i = (dxPhi(q,.))^{-1}(m_i)
std::vector<double> law_match_points(const EmpiricalMu& mu, const ParisiSolution& sol, int bi) {
    std::vector<double> xs;
    xs.reserve(mu.points.size());
    for (double p : mu.points) xs.push_back(sol.legendre_h(bi, p).dh);
    return xs;
}

}  // namespace

double defect_quadrature(const EmpiricalMu& mu, const ParisiSolution& sol) {
    const double q = mu.q();
    int bi = sol.boundary_index(q, 1e-9);
    DensityFlow flow(sol, bi, law_match_points(mu, sol, bi));
    const auto& times = sol.boundaries();
    double delta = 0.0;
    for (int b = bi; b < static_cast<int>(times.size()); ++b) {
        flow.advance_to(b);
        double w = sol.measure().mass_at(times[b]);
        if (w > 0.0) delta += w * (flow.expect_u2() - times[b]);
    }
    return delta;
}

double tap_gradient(const EmpiricalMu& mu, const ParisiSolution& sol, std::size_t i) {
    return tap_gradient_all(mu, sol)[i];
}

std::vector<double> tap_gradient_all(const EmpiricalMu& mu, const ParisiSolution& sol) {
    const double q = mu.q();
    const double n = static_cast<double>(mu.points.size());
    int bi = sol.boundary_index(q, 1e-9);
    double delta = defect_quadrature(mu, sol);
    double xi2 = sol.mixture().xi(q, 2);
    std::vector<double> out;
    out.reserve(mu.points.size());
    for (double p : mu.points)
        out.push_back(-(k_field(sol, bi, p) - p * xi2 * delta) / n);
    return out;
}

double Profile::at(double x) const {
    if (s.empty()) throw std::logic_error("Profile: empty");
    if (x <= s.front()) return value.front();
    if (x >= s.back()) return value.back();
    auto it = std::upper_bound(s.begin(), s.end(), x);
    std::size_t k = it - s.begin();
    double w = (x - s[k - 1]) / (s[k] - s[k - 1]);
    return (1.0 - w) * value[k - 1] + w * value[k];
}

Profile second_moment_profile(const ParisiSolution& sol, const std::vector<double>& points,
                              int bi_start, const std::vector<double>& r_grid) {
    Profile out;
    const auto& times = sol.boundaries();
    const int B = static_cast<int>(times.size());
    DensityFlow flow(sol, bi_start, points);
    for (double r : r_grid) {
        if (r < times[bi_start] - 1e-12) continue;
        while (flow.boundary() + 1 < B && times[flow.boundary() + 1] <= r + 1e-12) flow.step();
        int b = flow.boundary();
        out.s.push_back(r);
        if (std::abs(r - times[b]) <= 1e-12) {
            out.value.push_back(flow.expect_u2());
        } else {
            Slice sl = sol.interior_slice(r);
            std::vector<double> rho = flow.density_at_interior(sl);
            double num = 0.0, den = 0.0;
            for (int j = 0; j < sol.grid().n; ++j) {
                num += rho[j] * sl.u[j] * sl.u[j];
                den += rho[j];
            }
            out.value.push_back(num / den);
        }
    }
    return out;
}

Profile h_profile(const EmpiricalMu& mu, const ParisiSolution& sol,
                  const std::vector<double>& s_grid, int per_plateau) {
    const double q = mu.q();
    int bi = sol.boundary_index(q, 1e-9);
    const auto& times = sol.boundaries();

    // refined grid: per_plateau points per plateau in [q,1]
    std::vector<double> rg;
    for (int b = bi; b + 1 < static_cast<int>(times.size()); ++b)
        for (int k = 0; k < per_plateau; ++k)
            rg.push_back(times[b] + (times[b + 1] - times[b]) * k / per_plateau);
    rg.push_back(1.0);

    Profile m2 = second_moment_profile(sol, law_match_points(mu, sol, bi), bi, rg);

    // H(s) = (1/2) int_s^1 xi''(r)(E[M_r^2] - r) dr, trapezoid on the refined grid
    const Mixture& mx = sol.mixture();
    std::vector<double> integrand(m2.s.size());
    for (std::size_t i = 0; i < m2.s.size(); ++i)
        integrand[i] = mx.xi(m2.s[i], 2) * (m2.value[i] - m2.s[i]);
    std::vector<double> H(m2.s.size(), 0.0);
    for (int i = static_cast<int>(m2.s.size()) - 2; i >= 0; --i)
        H[i] = H[i + 1] + 0.25 * (integrand[i] + integrand[i + 1]) * (m2.s[i + 1] - m2.s[i]);

    Profile dense{m2.s, H};
    Profile out;
    for (double s : s_grid) {
        out.s.push_back(s);
        out.value.push_back(s < q ? dense.value.front() : dense.at(s));
    }
    return out;
}

double OptimalityReport::max_first_order() const {
    double m = 0.0;
    for (double r : first_order) m = std::max(m, std::abs(r));
    return m;
}

double OptimalityReport::max_energy() const {
    double m = 0.0;
    for (double r : energy) m = std::max(m, std::abs(r));
    return m;
}

OptimalityReport optimality_report(const AtomicMeasure& z, const Mixture& m, double f,
                                   const GridSpec& g, std::optional<double> qn_opt) {
    ParisiSolution sol = solve(z, m, g);
    const auto& times = sol.boundaries();
    OptimalityReport rep;

    double qn = 0.0;
    if (qn_opt)
        qn = *qn_opt;
    else
        for (const Atom& a : z.atoms())
            if (a.t > 1e-13 && a.t < 1.0 - 1e-13) qn = std::max(qn, a.t);
    if (qn <= 0.0) throw std::invalid_argument("optimality_report: measure has no prefix atom");

    // flow from X_0 = 0
    DensityFlow flow(sol, 0, 0.0);
    double pv = parisi_value(sol);
    for (int b = 1; b < static_cast<int>(times.size()); ++b) {
        flow.advance_to(b);
        double t = times[b];
        double w = z.mass_at(t);
        if (w <= 0.0) continue;
        rep.support.push_back(t);
        rep.first_order.push_back(flow.expect_u2() - t);
        rep.second_order.push_back(m.xi(t, 2) * flow.expect_v2() - 1.0);
        if (t <= qn + 1e-12) {
            // energy condition: -E[Phi(t,X_t)] + int_0^t s xi'' zeta ds
            //                   + (1/2) int_t^1 s xi'' zeta ds = -target
            double target = (std::abs(t - qn) <= 1e-12) ? f : pv;
            double lhs = -flow.expect_phi() + weighted_txi2(z, m, 0.0, t) +
                         0.5 * weighted_txi2(z, m, t, 1.0);
            rep.energy.push_back(lhs + target);
        }
    }

    // H profile over [qn, 1], from the X_0 = 0 flow
    std::vector<double> rg;
    int bqn = sol.boundary_index(qn, 1e-9);
    for (int b = bqn; b + 1 < static_cast<int>(times.size()); ++b)
        for (int k = 0; k < 48; ++k)
            rg.push_back(times[b] + (times[b + 1] - times[b]) * k / 48.0);
    rg.push_back(1.0);
    Profile m2 = second_moment_profile(sol, {0.0}, 0, rg);
    std::vector<double> H(m2.s.size(), 0.0);
    for (int i = static_cast<int>(m2.s.size()) - 2; i >= 0; --i) {
        double f0 = m.xi(m2.s[i], 2) * (m2.value[i] - m2.s[i]);
        double f1 = m.xi(m2.s[i + 1], 2) * (m2.value[i + 1] - m2.s[i + 1]);
        H[i] = H[i + 1] + 0.25 * (f0 + f1) * (m2.s[i + 1] - m2.s[i]);
    }
    rep.h_curve = Profile{m2.s, H};
    double hmin = *std::min_element(H.begin(), H.end());
    double gap = 0.0;
    for (const Atom& a : z.atoms())
        if (a.t >= qn - 1e-12) gap = std::max(gap, rep.h_curve.at(a.t) - hmin);
    rep.h_support_gap = gap;
    return rep;
}

}  // namespace tap
