#include "tap/gaussian_geometry.hpp"

#include <cmath>
#include <stdexcept>

#include "tap/rng.hpp"

namespace tap {

GammaBlocks::GammaBlocks(const Mixture& mix, VectorXd m, double q)
    : mix_(mix), m_(std::move(m)) {
    const int N = dim();
    q_ = (q >= 0.0) ? q : m_.squaredNorm() / N;
    double qm = m_.squaredNorm() / N;  // rank-one magnitude
    double xp = mix_.xi(q_, 1), xpp = mix_.xi(q_, 2);
    a_inv_b_ = m_ * (xp / (xp + qm * xpp));
    schur_ = N * mix_.xi(q_) - xp * m_.dot(a_inv_b_);
}

double GammaBlocks::logdet_grad_block() const {
    const int N = dim();
    double qm = m_.squaredNorm() / N;
    double xp = mix_.xi(q_, 1), xpp = mix_.xi(q_, 2);
    return (N - 1) * std::log(xp) + std::log(xp + qm * xpp);
}

double GammaBlocks::logdet() const {
    if (schur_ <= 0.0)
        throw std::domain_error(
            "GammaBlocks::logdet: degenerate Schur complement (pure model, D(q)=0)");
    return logdet_grad_block() + std::log(schur_);
}

void GammaBlocks::apply(const VectorXd& x, double v, VectorXd& out_x, double& out_v) const {
    const int N = dim();
    double xp = mix_.xi(q_, 1), xpp = mix_.xi(q_, 2);
    out_x = xp * x + (xpp / N) * m_ * m_.dot(x) + xp * m_ * v;
    out_v = xp * m_.dot(x) + N * mix_.xi(q_) * v;
}

void GammaBlocks::solve(const VectorXd& z, double zv, VectorXd& y, double& s) const {
    if (schur_ <= 0.0) throw std::domain_error("GammaBlocks::solve: degenerate covariance");
    const int N = dim();
    double qm = m_.squaredNorm() / N;
    double xp = mix_.xi(q_, 1), xpp = mix_.xi(q_, 2);
    // A^{-1} z via Sherman-Morrison
    VectorXd ainv_z = (z - (xpp / N) * m_ * (m_.dot(z) / (xp + qm * xpp))) / xp;
    s = (zv - xp * m_.dot(ainv_z)) / schur_;
    y = ainv_z - a_inv_b_ * s;
}

double GammaBlocks::dual_exact(const VectorXd& z, double zv) const {
    VectorXd y;
    double s;
    solve(z, zv, y, s);
    return -(z.dot(y) + zv * s);
}

double GammaBlocks::dual_bound(const VectorXd& z, double zv, const VectorXd& w,
                               double wv) const {
    VectorXd gw;
    double gv;
    apply(w, wv, gw, gv);
    return w.dot(gw) + wv * gv - 2.0 * (w.dot(z) + wv * zv);
}

MatrixXd GammaBlocks::dense() const {
    const int N = dim();
    double xp = mix_.xi(q_, 1), xpp = mix_.xi(q_, 2);
    MatrixXd G(N + 1, N + 1);
    G.topLeftCorner(N, N) = xp * MatrixXd::Identity(N, N) + (xpp / N) * m_ * m_.transpose();
    G.topRightCorner(N, 1) = xp * m_;
    G.bottomLeftCorner(1, N) = xp * m_.transpose();
    G(N, N) = N * mix_.xi(q_);
    return G;
}

namespace {

struct SusyTerms {
    double sum_h = 0.0;
    double sum_pen = 0.0;   // sum (dm h - u xi' m)^2
    double sum_mdh = 0.0;   // sum m_i dm h_i
    std::vector<double> dh;
};

SusyTerms susy_terms(const ParisiSolution& sol, const EmpiricalMu& mu, double u, double q) {
    int bi = sol.boundary_index(q, 1e-9);
    double xp = sol.mixture().xi(q, 1);
    SusyTerms t;
    for (double m : mu.points) {
        LegendreResult lr = sol.legendre_h(bi, m);
        t.sum_h += lr.h;
        double d = lr.dh - u * xp * m;
        t.sum_pen += d * d;
        t.sum_mdh += m * lr.dh;
        t.dh.push_back(lr.dh);
    }
    return t;
}

}  // namespace

double susy_logdensity_mixed(const ParisiSolution& sol, const EmpiricalMu& mu, double u,
                             double q, double f) {
    if (sol.mixture().is_pure())
        throw std::domain_error("susy_logdensity_mixed: mixture required");
    const double N = static_cast<double>(mu.points.size());
    const Mixture& mx = sol.mixture();
    double I = sol.measure().integral_cdf(q, 1.0);
    double U = u_correction(sol.measure(), mx, q);
    SusyTerms t = susy_terms(sol, mu, u, q);
    return 0.5 * mx.xi(q) * u * u - 0.5 * mx.xi(q, 2) * I * I -
           t.sum_pen / (2.0 * N * mx.xi(q, 1)) - 0.5 * std::log(2.0 * M_PI * mx.xi(q, 1)) -
           u * (t.sum_h / N + U + f);
}

double susy_logdensity_pure(const ParisiSolution& sol, const EmpiricalMu& mu, double u,
                            double q, double f, int p) {
    if (!sol.mixture().is_pure() || sol.mixture().pure_p() != p)
        throw std::domain_error("susy_logdensity_pure: pure p-spin model required");
    const double N = static_cast<double>(mu.points.size());
    const Mixture& mx = sol.mixture();
    double I = sol.measure().integral_cdf(q, 1.0);
    double J = sol.measure().integral_cdf(0.0, 1.0);
    double U = u_correction(sol.measure(), mx, q);
    SusyTerms t = susy_terms(sol, mu, u, q);
    double xp = mx.xi(q, 1);
    double sq = t.sum_mdh / N - xp * J;
    return 0.5 * mx.xi(q) * u * u - 0.5 * mx.xi(q, 2) * I * I - t.sum_pen / (2.0 * N * xp) -
           0.5 * std::log(2.0 * M_PI * xp) +
           (p - 1) / (2.0 * p * xp * q) * sq * sq - u * (t.sum_h / N + U + f);
}

double exact_logdensity(const ParisiSolution& sol, const EmpiricalMu& mu, double f) {
    const int N = static_cast<int>(mu.points.size());
    const double q = mu.q();
    int bi = sol.boundary_index(q, 1e-9);
    VectorXd m(N), z(N);
    double sum_h = 0.0;
    for (int i = 0; i < N; ++i) {
        m(i) = mu.points[i];
        z(i) = k_field(sol, bi, mu.points[i]);
        sum_h += sol.legendre_h(bi, mu.points[i]).h;
    }
    double zv = N * f + sum_h + N * u_correction(sol.measure(), sol.mixture(), q);
    GammaBlocks g(sol.mixture(), m);
    return 0.5 * g.dual_exact(z, zv) - 0.5 * (g.logdet() + (N + 1) * std::log(2.0 * M_PI));
}

double exact_remainder_per_spin(const ParisiSolution& sol, const EmpiricalMu& mu, int p) {
    const double N = static_cast<double>(mu.points.size());
    const double q = mu.q();
    const Mixture& mx = sol.mixture();
    int bi = sol.boundary_index(q, 1e-9);
    double sum_h = 0.0, sum_mdh = 0.0, sum_dqh = 0.0;
    for (double m : mu.points) {
        LegendreResult lr = sol.legendre_h(bi, m);
        sum_h += lr.h;
        sum_mdh += m * lr.dh;
        sum_dqh += sol.dq_h(bi, m);
    }
    double dqU = -0.5 * q * mx.xi(q, 2) * sol.measure().cdf(q);
    double U = u_correction(sol.measure(), mx, q);
    double m_dot_gradS = sum_mdh / N + 2.0 * q * (sum_dqh / N + dqU);
    return m_dot_gradS / p - (sum_h / N + U);
}

// ---- hierarchy -------------------------------------------------------------

namespace {

std::vector<double> prefix_locations(const AtomicMeasure& zeta) {
    std::vector<double> q;
    for (const Atom& a : zeta.atoms())
        if (a.t > 1e-13 && a.t < 1.0 - 1e-13) q.push_back(a.t);
    return q;
}

std::vector<double> hier_deltas(const AtomicMeasure& zeta, const std::vector<double>& q,
                                int levels) {
    std::vector<double> d(levels);
    for (int k = 0; k < levels - 1; ++k) d[k] = -zeta.mass_at(q[k]);
    d[levels - 1] = zeta.cdf_left(q[levels - 1]);
    return d;
}

// y^{(k)} = grad_h^{(k)} - sum_j xi'(q_{kj}) Delta_j m^{(j)}, then the z/x ladder
void ladder(const HierData& h, const Mixture& mix, const std::vector<double>& deltas,
            int levels, MatrixXd& y, MatrixXd& z, MatrixXd& x) {
    const int N = h.N;
    y = MatrixXd::Zero(N, levels);
    for (int k = 0; k < levels; ++k) {
        VectorXd acc = h.grad_h.col(k);
        for (int j = 0; j < levels; ++j) {
            double qkj = h.q[std::min(k, j)];
            acc -= mix.xi(qkj, 1) * deltas[j] * h.m.col(j);
        }
        y.col(k) = acc;
    }
    z = MatrixXd::Zero(N, levels);
    for (int k = 0; k < levels; ++k) {
        double denom = mix.xi(h.q[k], 1) - (k > 0 ? mix.xi(h.q[k - 1], 1) : 0.0);
        VectorXd prev = (k > 0) ? y.col(k - 1) : VectorXd::Zero(N).eval();
        z.col(k) = (y.col(k) - prev) / denom;
    }
    x = MatrixXd::Zero(N, levels);
    for (int k = 0; k < levels; ++k)
        x.col(k) = z.col(k) - ((k + 1 < levels) ? z.col(k + 1) : VectorXd::Zero(N).eval());
}

}  // namespace

HierData make_synthetic_hier(const Mixture& mix, const AtomicMeasure& zeta, int N,
                             const std::vector<double>& f, std::uint64_t seed) {
    HierData h;
    h.N = N;
    h.q = prefix_locations(zeta);
    const int n = static_cast<int>(h.q.size());
    if (n == 0) throw std::invalid_argument("make_synthetic_hier: no prefix atoms");
    if (static_cast<int>(f.size()) != n)
        throw std::invalid_argument("make_synthetic_hier: need one f per level");
    h.f = f;
    h.delta = hier_deltas(zeta, h.q, n);

    Rng rng(seed);
    auto randn = [&](int len) {
        VectorXd v(len);
        for (int i = 0; i < len; ++i) v(i) = rng.normal();
        return v;
    };

    // hierarchy with <m^i, m^j> = N q_{min(i,j)} exactly; the increments
    // m^(1), m^(2)-m^(1), ... form an orthogonal spanning set to project on
    h.m = MatrixXd::Zero(N, n);
    {
        MatrixXd basis(N, n);
        VectorXd v = randn(N);
        h.m.col(0) = v * std::sqrt(N * h.q[0] / v.squaredNorm());
        basis.col(0) = h.m.col(0);
        for (int k = 1; k < n; ++k) {
            VectorXd w = randn(N);
            for (int j = 0; j < k; ++j) {
                VectorXd bj = basis.col(j);
                w -= bj * (bj.dot(w) / bj.squaredNorm());
            }
            w *= std::sqrt(N * (h.q[k] - h.q[k - 1]) / w.squaredNorm());
            h.m.col(k) = h.m.col(k - 1) + w;
            basis.col(k) = w;
        }
    }

    // gradient arrays: <g^k, m^i> = c_{ki} with
    // c_{ki} = N xi'(q_{ki}) I_i + N sum_j xi'(q_{kj}) Delta_j q_{ji}
    MatrixXd gram = h.m.transpose() * h.m;  // = N q_{min(i,j)} up to rounding
    Eigen::LDLT<MatrixXd> gram_ldlt(gram);
    h.grad_h = MatrixXd::Zero(N, n);
    for (int k = 0; k < n; ++k) {
        VectorXd c(n);
        for (int i = 0; i < n; ++i) {
            double I_i = zeta.integral_cdf(h.q[i], 1.0);
            double acc = N * mix.xi(h.q[std::min(k, i)], 1) * I_i;
            for (int j = 0; j < n; ++j)
                acc += N * mix.xi(h.q[std::min(k, j)], 1) * h.delta[j] * h.q[std::min(j, i)];
            c(i) = acc;
        }
        VectorXd alpha = gram_ldlt.solve(c);
        VectorXd g = h.m * alpha;
        VectorXd r = randn(N);
        r -= h.m * gram_ldlt.solve(h.m.transpose() * r);
        h.grad_h.col(k) = g + 0.3 * r;
    }

    // scalar sums fixed by the energy conditioning
    h.sum_h.resize(n);
    for (int k = 0; k < n; ++k) {
        double I_k = zeta.integral_cdf(h.q[k], 1.0);
        double acc = N * mix.xi(h.q[k], 1) * I_k;
        for (int j = 0; j < n; ++j) acc += N * mix.xi(h.q[std::min(k, j)]) * h.delta[j];
        acc -= N * u_correction(zeta, mix, h.q[k]);
        h.sum_h[k] = acc - N * f[k];
    }
    return h;
}

HierReport hier_forms(const HierData& h, const Mixture& mix, const AtomicMeasure& zeta) {
    const int n = static_cast<int>(h.q.size());
    const int N = h.N;
    HierReport rep;

    // telescoping identity
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            rep.telescope_lhs += mix.xi(h.q[std::min(i, j)]) * h.delta[i] * h.delta[j];
    for (int i = 0; i < n; ++i) {
        double prev = (i > 0) ? mix.xi(h.q[i - 1]) : 0.0;
        double zl = zeta.cdf_left(h.q[i]);
        rep.telescope_rhs += (mix.xi(h.q[i]) - prev) * zl * zl;
    }

    // det xi'(Q) factorization
    MatrixXd Q(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) Q(i, j) = mix.xi(h.q[std::min(i, j)], 1);
    rep.detq_dense = Q.determinant();
    rep.detq_closed = 1.0;
    for (int i = 0; i < n; ++i)
        rep.detq_closed *= mix.xi(h.q[i], 1) - (i > 0 ? mix.xi(h.q[i - 1], 1) : 0.0);

    // compression targets and the y/z/x ladder
    MatrixXd y, z, x;
    ladder(h, mix, h.delta, n, y, z, x);
    rep.y = y;
    rep.xn = x;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double target = N * mix.xi(h.q[std::min(i, j)], 1) * zeta.integral_cdf(h.q[j], 1.0);
            rep.compression_max_err =
                std::max(rep.compression_max_err, std::abs(y.col(i).dot(h.m.col(j)) - target));
        }
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j) {
            double target = (j == k) ? N * zeta.integral_cdf(h.q[k], 1.0) : 0.0;
            rep.ladder_max_err =
                std::max(rep.ladder_max_err, std::abs(x.col(k).dot(h.m.col(j)) - target));
        }
    return rep;
}

MatrixXd skel_covariance(const HierData& h, const Mixture& mix, int levels) {
    const int N = h.N;
    const int d = N + 1;
    MatrixXd G = MatrixXd::Zero(levels * d, levels * d);
    for (int i = 0; i < levels; ++i)
        for (int j = 0; j < levels; ++j) {
            double qij = h.q[std::min(i, j)];
            double xp = mix.xi(qij, 1), xpp = mix.xi(qij, 2);
            // Cov(grad_a H(m^i), grad_b H(m^j)) = xi' d_ab + xi''/N m^j_a m^i_b
            G.block(i * d, j * d, N, N) =
                xp * MatrixXd::Identity(N, N) + (xpp / N) * h.m.col(j) * h.m.col(i).transpose();
            // Cov(grad_a H(m^i), H(m^j)) = xi'(q_ij) m^j_a
            G.block(i * d, j * d + N, N, 1) = xp * h.m.col(j);
            G.block(i * d + N, j * d, 1, N) = xp * h.m.col(i).transpose();
            G(i * d + N, j * d + N) = N * mix.xi(qij);
        }
    return G;
}

VectorXd skel_a_vector(const HierData& h, const Mixture& mix, const AtomicMeasure& zeta,
                       int levels) {
    const int N = h.N;
    const int d = N + 1;
    VectorXd a = VectorXd::Zero(levels * d);
    for (int k = 0; k < levels; ++k) {
        double I_k = zeta.integral_cdf(h.q[k], 1.0);
        a.segment(k * d, N) = h.grad_h.col(k) + mix.xi(h.q[k], 2) * I_k * h.m.col(k);
        a(k * d + N) = N * h.f[k] + h.sum_h[k] + N * u_correction(zeta, mix, h.q[k]);
    }
    return a;
}

VectorXd skel_w_vector(const HierData& h, const Mixture& mix, const AtomicMeasure& zeta,
                       int levels) {
    const int N = h.N;
    const int d = N + 1;
    std::vector<double> deltas = hier_deltas(zeta, h.q, levels);
    MatrixXd y, z, x;
    ladder(h, mix, deltas, levels, y, z, x);
    VectorXd w = VectorXd::Zero(levels * d);
    for (int k = 0; k < levels; ++k) {
        w.segment(k * d, N) = x.col(k);
        w(k * d + N) = deltas[k];
    }
    return w;
}

}  // namespace tap
