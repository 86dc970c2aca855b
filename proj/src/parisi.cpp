#include "tap/parisi.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace tap {

GaussHermite::GaussHermite(int n) {
    // Golub-Welsch: Jacobi matrix for Hermite polynomials (weight e^{-y^2})
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        double b = std::sqrt(k / 2.0);
        J(k, k - 1) = J(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    nodes.resize(n);
    weights.resize(n);
    const double mu0 = std::sqrt(M_PI);
    for (int i = 0; i < n; ++i) {
        nodes[i] = es.eigenvalues()(i);
        double v0 = es.eigenvectors()(0, i);
        weights[i] = mu0 * v0 * v0;
    }
}

namespace {

inline double log_2cosh(double x) {
    double a = std::abs(x);
    return a + std::log1p(std::exp(-2.0 * a));
}

std::vector<double> fd_slopes(const Grid& g, const std::vector<double>& y) {
    const int n = g.n;
    std::vector<double> d(n);
    d[0] = (y[1] - y[0]) / g.h;
    d[n - 1] = (y[n - 1] - y[n - 2]) / g.h;
    for (int i = 1; i < n - 1; ++i) d[i] = (y[i + 1] - y[i - 1]) / (2.0 * g.h);
    return d;
}

}  // namespace

// ---- slice evaluation ----------------------------------------------------

double ParisiSolution::eval_phi(const Slice& s, double x) const {
    const Grid& g = grid_;
    if (x > g.L) return x + s.c_plus;
    if (x < -g.L) return -x + s.c_minus;
    int k = g.cell(x);
    double sloc = (x - g.x(k)) / g.h;
    return hermite5(sloc, s.phi[k], s.phi[k + 1], s.u[k], s.u[k + 1], s.v[k], s.v[k + 1], g.h);
}

double ParisiSolution::eval_u(const Slice& s, double x) const {
    const Grid& g = grid_;
    if (x > g.L) {
        double edge = s.u[g.n - 1];
        return 1.0 - (1.0 - edge) * std::exp(-2.0 * (x - g.L));
    }
    if (x < -g.L) {
        double edge = s.u[0];
        return -1.0 + (1.0 + edge) * std::exp(-2.0 * (-x - g.L));
    }
    int k = g.cell(x);
    double sloc = (x - g.x(k)) / g.h;
    return hermite3(sloc, s.u[k], s.u[k + 1], s.v[k], s.v[k + 1], g.h);
}

double ParisiSolution::eval_v(const Slice& s, double x) const {
    const Grid& g = grid_;
    if (x > g.L) return s.v[g.n - 1] * std::exp(-2.0 * (x - g.L));
    if (x < -g.L) return s.v[0] * std::exp(-2.0 * (-x - g.L));
    int k = g.cell(x);
    double sloc = (x - g.x(k)) / g.h;
    return hermite3(sloc, s.v[k], s.v[k + 1], s.dv[k], s.dv[k + 1], g.h);
}

// ---- layer step ----------------------------------------------------------

Slice ParisiSolution::step_from(const Slice& right, double t_left, double mbar) const {
    const Grid& g = grid_;
    const GaussHermite& gh = *quad_;
    const double sig2 = mixture_->xi(right.t, 1) - mixture_->xi(t_left, 1);
    Slice out;
    out.t = t_left;
    out.phi.resize(g.n);
    out.u.resize(g.n);
    out.v.resize(g.n);
    if (sig2 <= 0.0) {  // degenerate plateau (xi'' vanishing there): frozen
        out.phi = right.phi;
        out.u = right.u;
        out.v = right.v;
        out.dv = right.dv;
        out.c_plus = right.c_plus;
        out.c_minus = right.c_minus;
        return out;
    }
    const double sig = std::sqrt(sig2);
    const int nq = static_cast<int>(gh.nodes.size());
    std::vector<double> fphi(nq), fu(nq), fv(nq);

#pragma omp parallel for schedule(static) firstprivate(fphi, fu, fv)
    for (int j = 0; j < g.n; ++j) {
        const double xj = g.x(j);
        double phimax = -1e300;
        for (int i = 0; i < nq; ++i) {
            double z = xj + sig * M_SQRT2 * gh.nodes[i];
            fphi[i] = eval_phi(right, z);
            fu[i] = eval_u(right, z);
            fv[i] = eval_v(right, z);
            if (fphi[i] > phimax) phimax = fphi[i];
        }
        if (mbar > 0.0) {
            double s0 = 0.0, su = 0.0, su2 = 0.0, sv = 0.0;
            for (int i = 0; i < nq; ++i) {
                double w = gh.weights[i] * std::exp(mbar * (fphi[i] - phimax));
                s0 += w;
                su += w * fu[i];
                su2 += w * fu[i] * fu[i];
                sv += w * fv[i];
            }
            double mu = su / s0, mu2 = su2 / s0, mv = sv / s0;
            out.phi[j] = phimax + std::log(s0 / std::sqrt(M_PI)) / mbar;
            out.u[j] = mu;
            out.v[j] = mv + mbar * (mu2 - mu * mu);
        } else {  // heat step
            double s0 = 0.0, sp = 0.0, su = 0.0, sv = 0.0;
            for (int i = 0; i < nq; ++i) {
                double w = gh.weights[i];
                s0 += w;
                sp += w * fphi[i];
                su += w * fu[i];
                sv += w * fv[i];
            }
            out.phi[j] = sp / s0;
            out.u[j] = su / s0;
            out.v[j] = sv / s0;
        }
    }
    out.dv = fd_slopes(g, out.v);
    out.c_plus = out.phi[g.n - 1] - g.L;
    out.c_minus = out.phi[0] - g.L;
    return out;
}

int ParisiSolution::boundary_index(double t, double tol) const {
    for (std::size_t i = 0; i < times_.size(); ++i)
        if (std::abs(times_[i] - t) <= tol) return static_cast<int>(i);
    std::ostringstream os;
    os << "ParisiSolution: time " << t
       << " is not a stored boundary (re-solve with it as an extra split point)";
    throw std::invalid_argument(os.str());
}

Slice ParisiSolution::interior_slice(double t) const {
    // locate the plateau containing t
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    if (it == times_.begin() || it == times_.end()) {
        if (std::abs(t - times_.back()) <= 1e-12) return slices_.back();
        throw std::invalid_argument("interior_slice: t outside [0,1]");
    }
    int right = static_cast<int>(it - times_.begin());
    int left = right - 1;
    if (std::abs(t - times_[left]) <= 1e-13) return slices_[left];
    return step_from(slices_[right], t, mass_[left]);
}

LegendreResult ParisiSolution::legendre_h(int bi, double mval) const {
    if (std::abs(mval) >= 1.0)
        throw std::domain_error("legendre_h: |m| must be < 1 (Legendre derivative diverges)");
    const Slice& s = slices_[bi];
    const Grid& g = grid_;
    double x;
    if (mval <= s.u.front() || mval >= s.u.back()) {
        // invert the asymptotic tail u(z) = sign(z)(1 - (1-|u_edge|) e^{-2(|z|-L)})
        double edge = (mval > 0) ? s.u.back() : -s.u.front();
        double ratio = (1.0 - std::abs(mval)) / (1.0 - edge);
        if (ratio <= 0.0)
            throw GridTooNarrow("legendre_h: |m| beyond representable range", g.L + 5.0);
        double z = g.L - 0.5 * std::log(ratio);
        x = (mval > 0) ? z : -z;
        double hval = x * mval - eval_phi(s, x);
        return {hval, x, 1.0 / std::max(eval_v(s, x), 1e-300)};
    }
    // bracket by binary search on the grid values (u increasing)
    int lo = 0, hi = g.n - 1;
    while (hi - lo > 1) {
        int mid = (lo + hi) / 2;
        if (s.u[mid] <= mval)
            lo = mid;
        else
            hi = mid;
    }
    double a = g.x(lo), b = g.x(hi);
    x = 0.5 * (a + b);
    for (int it = 0; it < 100; ++it) {
        double r = eval_u(s, x) - mval;
        if (std::abs(r) < 1e-13) break;
        double dx = r / std::max(eval_v(s, x), 1e-14);
        double xn = x - dx;
        if (xn <= a || xn >= b) {  // bisection safeguard
            if (r > 0)
                b = x;
            else
                a = x;
            xn = 0.5 * (a + b);
        } else {
            if (r > 0)
                b = x;
            else
                a = x;
        }
        x = xn;
    }
    double hval = x * mval - eval_phi(s, x);
    return {hval, x, 1.0 / eval_v(s, x)};
}

double ParisiSolution::dq_h(int bi, double mval) const {
    LegendreResult lr = legendre_h(bi, mval);
    double q = times_[bi];
    double xi2 = mixture_->xi(q, 2);
    return 0.5 * xi2 * (eval_v(slices_[bi], lr.dh) + mass_[bi] * mval * mval);
}

// ---- solve ----------------------------------------------------------------

ParisiSolution solve(const AtomicMeasure& z, const Mixture& m, const GridSpec& g,
                     const std::vector<double>& extra_splits) {
    GridSpec gs = g;
    gs.validate();
    double xi1 = m.xi(1.0, 1);
    double L = gs.half_width > 0.0 ? gs.half_width : 10.0 + 6.0 * std::sqrt(xi1);

    ParisiSolution sol;
    sol.grid_ = Grid(L, gs.points);
    sol.measure_ = std::make_shared<AtomicMeasure>(z);
    sol.mixture_ = std::make_shared<Mixture>(m);
    sol.quad_ = std::make_shared<GaussHermite>(gs.quad_nodes);

    // boundaries: {0,1} + atoms in (0,1) + extra splits
    std::vector<double> times{0.0, 1.0};
    for (const Atom& a : z.atoms())
        if (a.t > 1e-13 && a.t < 1.0 - 1e-13) times.push_back(a.t);
    for (double t : extra_splits)
        if (t > 1e-13 && t < 1.0 - 1e-13) times.push_back(t);
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end(),
                            [](double a, double b) { return std::abs(a - b) < 1e-13; }),
                times.end());
    sol.times_ = times;
    sol.mass_.resize(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) sol.mass_[i] = z.cdf(times[i]);

    // Grid-width diagnostic.  Beyond +-L the solution is continued by its
    // slope-1 asymptote, whose deviation from Phi is O(e^{-2L}); that error
    // only enters weighted by the tilted Gaussian mass beyond the grid,
    // Q((L - xi'(1))/sqrt(xi'(1))) at worst (tilt mbar <= 1).  Require the
    // product below 1e-10.
    {
        auto log_err = [xi1](double Lw) {
            double sig = std::sqrt(xi1);
            double a = std::max((Lw - xi1) / sig, 0.0);
            return -2.0 * Lw - 0.5 * a * a;
        };
        if (log_err(L) > std::log(1e-10)) {
            double need = L;
            while (log_err(need) > std::log(1e-10)) need += 0.5;
            std::ostringstream os;
            os << "solve: grid half-width " << L << " too narrow for xi'(1)=" << xi1
               << "; need at least L=" << need;
            throw GridTooNarrow(os.str(), need);
        }
    }

    const int B = static_cast<int>(times.size());
    sol.slices_.resize(B);
    // terminal condition
    Slice& term = sol.slices_[B - 1];
    term.t = 1.0;
    term.phi.resize(sol.grid_.n);
    term.u.resize(sol.grid_.n);
    term.v.resize(sol.grid_.n);
    term.dv.resize(sol.grid_.n);
    for (int j = 0; j < sol.grid_.n; ++j) {
        double x = sol.grid_.x(j);
        double th = std::tanh(x);
        term.phi[j] = log_2cosh(x);
        term.u[j] = th;
        term.v[j] = 1.0 - th * th;
        term.dv[j] = -2.0 * th * (1.0 - th * th);
    }
    term.c_plus = term.phi[sol.grid_.n - 1] - L;
    term.c_minus = term.phi[0] - L;

    for (int b = B - 2; b >= 0; --b)
        sol.slices_[b] = sol.step_from(sol.slices_[b + 1], times[b], sol.mass_[b]);

    // asymptote-fit residual: deviation of Phi from |x|+c at the
    // second-outermost point, worst over boundaries
    double worst = 0.0;
    for (const Slice& s : sol.slices_) {
        double x1 = sol.grid_.x(sol.grid_.n - 2);
        worst = std::max(worst, std::abs(s.phi[sol.grid_.n - 2] - (x1 + s.c_plus)));
        worst = std::max(worst, std::abs(s.phi[1] - (sol.grid_.x(1) * -1.0 + s.c_minus)));
    }
    sol.asym_residual_ = worst;
    return sol;
}

// ---- density flow ----------------------------------------------------------

DensityFlow::DensityFlow(const ParisiSolution& sol, int bi, double x0)
    : sol_(&sol), bi_(bi), points_{x0} {}

DensityFlow::DensityFlow(const ParisiSolution& sol, int bi, const std::vector<double>& points)
    : sol_(&sol), bi_(bi), points_(points) {
    if (points.empty()) throw std::invalid_argument("DensityFlow: empty start");
}

std::vector<double> DensityFlow::push(const Slice& from, const Slice& to, double mbar) const {
    const Grid& g = sol_->grid();
    const GaussHermite& gh = sol_->quad();
    const double sig2 = sol_->mixture().xi(to.t, 1) - sol_->mixture().xi(from.t, 1);
    std::vector<double> out(g.n, 0.0);
    if (sig2 <= 0.0) {  // no motion
        if (!rho_.empty()) return rho_;
        throw std::logic_error("DensityFlow: degenerate first step from point mass");
    }
    const double sig = std::sqrt(sig2);
    if (rho_.empty()) {
        // point starts: rho_to(y) = mean_i e^{m Phi_to(y)} e^{-m Phi_from(x_i)} phi_sig(y - x_i)
        const double norm = 1.0 / (std::sqrt(2.0 * M_PI) * sig * points_.size());
        for (int j = 0; j < g.n; ++j) {
            double y = g.x(j), acc = 0.0;
            for (double x0 : points_) {
                double d = (y - x0) / sig;
                acc += std::exp(-0.5 * d * d - mbar * sol_->eval_phi(from, x0));
            }
            out[j] = acc * norm * std::exp(mbar * sol_->eval_phi(to, y));
        }
        return out;
    }
    // q(x) = rho(x) e^{-m Phi_from(x)}, spline-interpolated; then
    // rho_to(y) = e^{m Phi_to(y)} E_Z[q(y + sig sqrt2 Z')]
    std::vector<double> qv(g.n);
    for (int j = 0; j < g.n; ++j)
        qv[j] = rho_[j] * std::exp(-mbar * sol_->eval_phi(from, g.x(j)));
    CubicSpline qs(g, qv);
    const int nq = static_cast<int>(gh.nodes.size());
#pragma omp parallel for schedule(static)
    for (int j = 0; j < g.n; ++j) {
        double y = g.x(j), acc = 0.0;
        for (int i = 0; i < nq; ++i) acc += gh.weights[i] * qs(y + sig * M_SQRT2 * gh.nodes[i]);
        out[j] = std::max(0.0, acc / std::sqrt(M_PI)) *
                 std::exp(mbar * sol_->eval_phi(to, y));
    }
    return out;
}

void DensityFlow::step() {
    const auto& times = sol_->boundaries();
    if (bi_ + 1 >= static_cast<int>(times.size()))
        throw std::logic_error("DensityFlow: already at t=1");
    double mbar = sol_->plateau_mass(bi_);
    rho_ = push(sol_->slice(bi_), sol_->slice(bi_ + 1), mbar);
    ++bi_;
    points_.clear();
}

void DensityFlow::advance_to(int bi) {
    while (bi_ < bi) step();
}

std::vector<double> DensityFlow::density_at_interior(const Slice& target) const {
    DensityFlow tmp(*this);
    double mbar = sol_->plateau_mass(bi_);
    return tmp.push(sol_->slice(bi_), target, mbar);
}

double DensityFlow::expect_of(const std::vector<double>& vals) const {
    const Grid& g = sol_->grid();
    if (!rho_.empty()) {
        double s = 0.0;
        for (int j = 0; j < g.n; ++j) s += rho_[j] * vals[j];
        // trapezoid endpoints (density ~0 there anyway)
        s -= 0.5 * (rho_[0] * vals[0] + rho_[g.n - 1] * vals[g.n - 1]);
        return s * g.h;
    }
    throw std::logic_error("DensityFlow: point stage, use slice evaluators directly");
}

double DensityFlow::expect(const std::vector<double>& g_on_grid) const {
    if (rho_.empty()) throw std::logic_error("DensityFlow: no density yet");
    return expect_of(g_on_grid);
}

double DensityFlow::expect_u2() const {
    const Slice& s = sol_->slice(bi_);
    if (rho_.empty()) {
        double acc = 0.0;
        for (double x : points_) {
            double u = sol_->eval_u(s, x);
            acc += u * u;
        }
        return acc / points_.size();
    }
    std::vector<double> g(s.u.size());
    for (std::size_t j = 0; j < g.size(); ++j) g[j] = s.u[j] * s.u[j];
    return expect_of(g);
}

double DensityFlow::expect_v2() const {
    const Slice& s = sol_->slice(bi_);
    if (rho_.empty()) {
        double acc = 0.0;
        for (double x : points_) {
            double v = sol_->eval_v(s, x);
            acc += v * v;
        }
        return acc / points_.size();
    }
    std::vector<double> g(s.v.size());
    for (std::size_t j = 0; j < g.size(); ++j) g[j] = s.v[j] * s.v[j];
    return expect_of(g);
}

double DensityFlow::expect_phi() const {
    const Slice& s = sol_->slice(bi_);
    if (rho_.empty()) {
        double acc = 0.0;
        for (double x : points_) acc += sol_->eval_phi(s, x);
        return acc / points_.size();
    }
    return expect_of(s.phi);
}

double DensityFlow::total_mass() const {
    if (rho_.empty()) return 1.0;
    const Grid& g = sol_->grid();
    double s = 0.0;
    for (double r : rho_) s += r;
    s -= 0.5 * (rho_.front() + rho_.back());
    return s * g.h;
}

std::vector<double> plateau_kernel_density(const ParisiSolution& sol, int bi_from, int bi_to,
                                           double x0) {
    DensityFlow flow(sol, bi_from, x0);
    flow.advance_to(bi_to);
    std::vector<double> rho = flow.density();
    // normalize exactly (kernel is normalized analytically; quadrature leaves
    // ~1e-10 slack)
    double m = flow.total_mass();
    for (double& r : rho) r /= m;
    return rho;
}

}  // namespace tap
