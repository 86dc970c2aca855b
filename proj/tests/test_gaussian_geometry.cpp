#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "tap/gaussian_geometry.hpp"
#include "tap/rng.hpp"

using namespace tap;

namespace {

VectorXd random_m(Rng& rng, int N, double q) {
    VectorXd m(N);
    for (int i = 0; i < N; ++i) m(i) = rng.normal();
    return m * std::sqrt(N * q / m.squaredNorm());
}

AtomicMeasure three_atom_prefix() {
    PrefixSpec s;
    s.u = {0.25, 0.55};
    s.q = {0.3, 0.6};
    s.tail = {{0.6, 0.25}, {0.85, 0.2}};
    return assemble_prefix(s);
}

}  // namespace

TEST_CASE("gamma_logdet vs dense factorization, N <= 50") {
    Mixture mix({{2, 1.0}, {4, 1.0}});
    Rng rng(3);
    for (int N : {10, 31, 50}) {
        VectorXd m = random_m(rng, N, 0.5);
        GammaBlocks g(mix, m);
        MatrixXd dense = g.dense();
        Eigen::LLT<MatrixXd> llt(dense);
        double logdet = 0.0;
        for (int i = 0; i <= N; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
        CHECK(g.logdet() == doctest::Approx(logdet).epsilon(1e-10));
    }
}

TEST_CASE("gamma block edge cases") {
    Mixture mix({{2, 1.0}, {4, 1.0}});
    Rng rng(5);
    int N = 10;
    // m = 0 at fixed overlap q: the rank-one term vanishes, A = xi'(q) I
    GammaBlocks g(mix, VectorXd::Zero(N), 0.5);
    CHECK(g.logdet_grad_block() == doctest::Approx(N * std::log(mix.xi(0.5, 1))).epsilon(1e-12));

    // pure model: full logdet degenerate, A-block eigenvalues {xi', p xi'}
    Mixture pure = Mixture::pure(4, 1.0);
    VectorXd mp = random_m(rng, N, 0.49);
    GammaBlocks gp(pure, mp);
    CHECK_THROWS_AS(gp.logdet(), std::domain_error);
    double q = mp.squaredNorm() / N;
    double expected =
        (N - 1) * std::log(pure.xi(q, 1)) + std::log(4.0 * pure.xi(q, 1));
    CHECK(gp.logdet_grad_block() == doctest::Approx(expected).epsilon(1e-12));
    // eq:Ginv-pure: inverse has eigenvalue 1/xi' on m-perp, 1/(p xi') on m
    VectorXd y;
    double s_unused;
    (void)s_unused;
    // apply the gradient block to m: A m = (xi' + q xi'') m = p xi'(q) m
    VectorXd am;
    double av;
    gp.apply(mp, 0.0, am, av);
    am -= pure.xi(q, 1) * mp * 0.0;
    CHECK((am - 4.0 * pure.xi(q, 1) * mp).norm() < 1e-10 * am.norm());
}

TEST_CASE("block inverse matches dense inverse entrywise") {
    Mixture mix({{2, 0.49}, {4, 0.25}});
    Rng rng(7);
    int N = 50;
    VectorXd m = random_m(rng, N, 0.4);
    GammaBlocks g(mix, m);
    MatrixXd dense_inv = g.dense().inverse();
    // probe columns of the inverse via solve
    for (int c : {0, 17, N}) {
        VectorXd e = VectorXd::Zero(N), y;
        double ev = (c == N) ? 1.0 : 0.0, s;
        if (c < N) e(c) = 1.0;
        g.solve(e, ev, y, s);
        VectorXd col(N + 1);
        col.head(N) = y;
        col(N) = s;
        CHECK((col - dense_inv.col(c)).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("dual bound: equality at the optimum, quadratic gap otherwise") {
    Mixture mix({{2, 0.49}, {4, 0.25}});
    Rng rng(11);
    int N = 24;
    VectorXd m = random_m(rng, N, 0.45);
    GammaBlocks g(mix, m);
    VectorXd z(N);
    for (int i = 0; i < N; ++i) z(i) = rng.normal();
    double zv = rng.normal() * std::sqrt(static_cast<double>(N));

    VectorXd wopt;
    double wv;
    g.solve(z, zv, wopt, wv);
    double exact = g.dual_exact(z, zv);
    CHECK(g.dual_bound(z, zv, wopt, wv) == doctest::Approx(exact).epsilon(1e-10));

    for (int trial = 0; trial < 10; ++trial) {
        VectorXd w(N);
        for (int i = 0; i < N; ++i) w(i) = rng.normal();
        double wvr = rng.normal();
        CHECK(g.dual_bound(z, zv, w, wvr) >= exact - 1e-10);
    }
    // w scaled by 2 from the optimum: gap = <z, Gamma^{-1} z>
    CHECK(g.dual_bound(z, zv, 2.0 * wopt, 2.0 * wv) - exact ==
          doctest::Approx(-exact).epsilon(1e-9));
}

TEST_CASE("constrained quadratic optimum (Lagrange) equals the closed form") {
    // inf over <x,m> = c of xi' |x|^2 - 2 <g - u xi' m, x>
    //   = -|g - u xi' m|^2/xi' + (N/(xi' q))((1/N)<g,m> - xi'(u q + c/N))^2
    Mixture mix({{2, 0.49}, {4, 0.25}});
    Rng rng(13);
    const int N = 40;
    VectorXd m = random_m(rng, N, 0.55);
    double q = 0.55, u = 0.37, xp = mix.xi(q, 1);
    VectorXd grad(N);
    for (int i = 0; i < N; ++i) grad(i) = rng.normal();
    double c = 0.8 * N * 0.1;  // N int_q^1 zeta, any positive scale
    VectorXd v = grad - u * xp * m;
    // direct Lagrange solution
    double lam = (c * xp - v.dot(m)) / m.squaredNorm();
    VectorXd xstar = (v + lam * m) / xp;
    CHECK(xstar.dot(m) == doctest::Approx(c).epsilon(1e-12));
    double direct = xp * xstar.squaredNorm() - 2.0 * v.dot(xstar);
    double closed = -v.squaredNorm() / xp +
                    (N / (xp * q)) * std::pow(grad.dot(m) / N - xp * (u * q + c / N), 2);
    CHECK(direct == doctest::Approx(closed).epsilon(1e-9));
}

TEST_CASE("susy log-density: exact Gaussian density gap shrinks along LLN witnesses") {
    Mixture mix({{2, 1.0}, {4, 1.0}});
    const double q = 0.45;
    GridSpec g{0.0, 2401, 64};
    // SUSY witnesses need the breaking-point condition E[M_q^2] = q; tune the
    // prefix mass u by bisection on the quadrature residual
    auto m2_resid = [&](double uu) {
        PrefixSpec s;
        s.u = {uu};
        s.q = {q};
        s.tail = {{q, 1.0 - uu}};
        ParisiSolution psol = solve(assemble_prefix(s), mix, {0.0, 1201, 48});
        DensityFlow fl(psol, 0, 0.0);
        fl.advance_to(psol.boundary_index(q));
        return fl.expect_u2() - q;
    };
    double ulo = 0.05, uhi = 0.95;
    double rlo = m2_resid(ulo), rhi = m2_resid(uhi);
    REQUIRE(rlo * rhi < 0.0);
    for (int it = 0; it < 50; ++it) {
        double mid = 0.5 * (ulo + uhi);
        double rm = m2_resid(mid);
        if ((rm > 0) == (rhi > 0)) {
            uhi = mid;
            rhi = rm;
        } else {
            ulo = mid;
            rlo = rm;
        }
    }
    const double u = 0.5 * (ulo + uhi);
    PrefixSpec s;
    s.u = {u};
    s.q = {q};
    s.tail = {{q, 1.0 - u}};
    AtomicMeasure z = assemble_prefix(s);
    ParisiSolution sol = solve(z, mix, g);
    int bq = sol.boundary_index(q);

    // draw mu from the law-matched density Law(dxPhi(q, X_q)) by quantiles
    DensityFlow flow(sol, 0, 0.0);
    flow.advance_to(bq);
    const Grid& gr = sol.grid();
    std::vector<double> cdf(gr.n, 0.0);
    for (int j = 1; j < gr.n; ++j)
        cdf[j] = cdf[j - 1] + 0.5 * (flow.density()[j] + flow.density()[j - 1]) * gr.h;
    auto quantile_mu = [&](int N) {
        std::vector<double> pts;
        for (int i = 0; i < N; ++i) {
            double uu = (i + 0.5) / N * cdf[gr.n - 1];
            int j = 0;
            while (cdf[j] < uu) ++j;
            double x = gr.x(j - 1) + gr.h * (uu - cdf[j - 1]) / (cdf[j] - cdf[j - 1]);
            pts.push_back(sol.dx_phi(bq, x));
        }
        return EmpiricalMu{pts};
    };

    double prev_gap = 1e300;
    for (int N : {200, 800, 3200}) {
        EmpiricalMu mu = quantile_mu(N);
        // the witness's own overlap q_mu -> q as N grows; give it a boundary
        ParisiSolution solN = solve(z, mix, g, {mu.q()});
        int bN = solN.boundary_index(mu.q(), 1e-9);
        // the energy constraint pins the admissible level f for this witness
        double sum_leg = 0.0;
        for (double p : mu.points) {
            LegendreResult lr = solN.legendre_h(bN, p);
            sum_leg += lr.h - lr.dh * p;
        }
        double fN = -(sum_leg / N + weighted_txi2(z, mix, 0.0, mu.q()) +
                      0.5 * weighted_txi2(z, mix, mu.q(), 1.0));
        double exact = exact_logdensity(solN, mu, fN) / N;
        double susy = susy_logdensity_mixed(solN, mu, u, q, fN);
        double gap = std::abs(exact - susy);
        CHECK(gap < prev_gap + 1e-12);
        prev_gap = gap;
    }
    CHECK(prev_gap < 5e-3);

    // u = 0 reduces to the pure gradient density with no tilt (f drops out)
    EmpiricalMu mu = quantile_mu(100);
    double no_tilt = susy_logdensity_mixed(sol, mu, 0.0, q, 123.456);
    double pen = 0.0;
    for (double p : mu.points) {
        LegendreResult lr = sol.legendre_h(bq, p);
        pen += lr.dh * lr.dh;
    }
    double expect = -0.5 * mix.xi(q, 2) * std::pow(z.integral_cdf(q, 1.0), 2) -
                    pen / (2.0 * 100 * mix.xi(q, 1)) -
                    0.5 * std::log(2.0 * M_PI * mix.xi(q, 1));
    CHECK(no_tilt == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("pure-case density pieces: G inverse, Euler remainder, p -> infty") {
    Mixture pure = Mixture::pure(4, 0.7);
    Rng rng(17);
    const int N = 10;
    VectorXd m = random_m(rng, N, 0.5);
    GammaBlocks g(pure, m);
    double q = 0.5, xp = pure.xi(q, 1);
    // eq:Ginv-pure vs dense inverse of the gradient block
    MatrixXd A = xp * MatrixXd::Identity(N, N) + (pure.xi(q, 2) / N) * m * m.transpose();
    MatrixXd Ainv_closed =
        MatrixXd::Identity(N, N) / xp - (3.0 / (4.0 * xp * q)) * m * m.transpose() / N;
    CHECK((A.inverse() - Ainv_closed).cwiseAbs().maxCoeff() < 1e-10);

    // (p-1)/p -> 1 recovers the mixed-case penalty coefficient shape
    for (int p : {4, 16, 256})
        CHECK(std::abs((p - 1.0) / p - 1.0) == doctest::Approx(1.0 / p));
}

TEST_CASE("pure-case susy log-density is an exact algebraic identity") {
    // at q = q_mu the completed square equals the tilted gradient density for
    // ANY empirical measure (homogeneity makes it pure algebra, no epsilon)
    const int p = 4, N = 12;
    Mixture pure = Mixture::pure(p, 0.7);
    PrefixSpec s;
    s.u = {0.35};
    s.q = {0.5};
    s.tail = {{0.5, 0.4}, {0.8, 0.25}};
    AtomicMeasure z = assemble_prefix(s);
    Rng rng(101);
    std::vector<double> pts;
    for (int i = 0; i < N; ++i) pts.push_back(1.4 * rng.uniform() - 0.7);
    EmpiricalMu mu{pts};
    const double q = mu.q(), u = 0.35, f = 0.83;
    ParisiSolution sol = solve(z, pure, {0.0, 1601, 48}, {q});
    int bq = sol.boundary_index(q, 1e-9);

    const double xp = pure.xi(q, 1), xpp = pure.xi(q, 2);
    const double I = z.integral_cdf(q, 1.0);
    VectorXd m(N), k(N);
    double sum_h = 0.0;
    for (int i = 0; i < N; ++i) {
        m(i) = pts[i];
        LegendreResult lr = sol.legendre_h(bq, pts[i]);
        k(i) = lr.dh + xpp * I * pts[i];
        sum_h += lr.h;
    }
    MatrixXd G = xp * MatrixXd::Identity(N, N) + (xpp / N) * m * m.transpose();
    double U = u_correction(z, pure, q);
    double lhs = (-0.5 * k.dot(G.llt().solve(k)) + (u / p) * m.dot(k) -
                  0.5 * N * std::log(2.0 * M_PI * xp) - u * (sum_h + N * U + N * f)) /
                 N;
    double rhs = susy_logdensity_pure(sol, mu, u, q, f, p);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));

    // companion exact remainder: F_TAP = (1/p)<m, grad F> + R^ex reduces to
    // Euler's identity for H, so R^ex = (1/p)<m, grad S> - S
    double rex = exact_remainder_per_spin(sol, mu, p);
    CHECK(std::isfinite(rex));
    CHECK_THROWS_AS(susy_logdensity_pure(sol, mu, u, q, f, 6), std::domain_error);
}

TEST_CASE("hierarchical algebra on synthetic witnesses, n <= 6") {
    Mixture mix({{2, 0.49}, {4, 0.25}});
    for (int n : {2, 4, 6}) {
        PrefixSpec s;
        for (int k = 0; k < n; ++k) {
            s.u.push_back(0.1 + 0.7 * (k + 1.0) / (n + 1.0));
            s.q.push_back(0.1 + 0.75 * (k + 1.0) / n);
        }
        s.tail = {{s.q.back(), 1.0 - s.u.back()}};
        AtomicMeasure z = assemble_prefix(s);
        std::vector<double> f(n, 0.6);
        HierData h = make_synthetic_hier(mix, z, 40, f, 123 + n);
        HierReport rep = hier_forms(h, mix, z);
        CHECK(std::abs(rep.telescope_lhs - rep.telescope_rhs) < 1e-12);
        CHECK(rep.detq_dense == doctest::Approx(rep.detq_closed).epsilon(1e-12));
        CHECK(rep.compression_max_err < 1e-9);
        CHECK(rep.ladder_max_err < 1e-9);
    }
}

TEST_CASE("conditional log-density decomposition via the dual pathway") {
    Mixture mix({{2, 0.49}, {4, 0.25}});
    const int n = 3, N = 30;
    PrefixSpec s;
    s.u = {0.2, 0.4, 0.6};
    s.q = {0.25, 0.5, 0.7};
    s.tail = {{0.7, 0.4}};
    AtomicMeasure z = assemble_prefix(s);
    std::vector<double> f{0.55, 0.55, 0.62};
    HierData h = make_synthetic_hier(mix, z, N, f, 77);

    // the optimal w satisfies Gamma' w = a at both levels
    for (int levels : {n, n - 1}) {
        MatrixXd G = skel_covariance(h, mix, levels);
        VectorXd a = skel_a_vector(h, mix, z, levels);
        VectorXd w = skel_w_vector(h, mix, z, levels);
        CHECK((G * w - a).cwiseAbs().maxCoeff() < 1e-7 * a.cwiseAbs().maxCoeff());
    }

    // dense conditional quadratic difference equals the closed form of the
    // hierarchical compression
    auto quad = [&](int levels) {
        MatrixXd G = skel_covariance(h, mix, levels);
        VectorXd a = skel_a_vector(h, mix, z, levels);
        return -a.dot(G.llt().solve(a));
    };
    double dense_diff = 0.5 * (quad(n) - quad(n - 1));

    // closed form, conditional given the first n-1 levels
    double qn = h.q[n - 1], qn1 = h.q[n - 2];
    double dn = h.delta[n - 1];
    double I_n = z.integral_cdf(qn, 1.0);
    VectorXd gdiff = h.grad_h.col(n - 1) - h.grad_h.col(n - 2);
    double sum_legendre_n = h.sum_h[n - 1], sum_legendre_n1 = h.sum_h[n - 2];
    double mdh_n = h.grad_h.col(n - 1).dot(h.m.col(n - 1));
    double mdh_n1 = h.grad_h.col(n - 2).dot(h.m.col(n - 2));
    double closed = -0.5 * N * mix.xi(qn, 2) * I_n * I_n -
                    gdiff.squaredNorm() / (2.0 * (mix.xi(qn, 1) - mix.xi(qn1, 1))) -
                    dn * (sum_legendre_n - mdh_n) + dn * (sum_legendre_n1 - mdh_n1) -
                    N * dn * (f[n - 1] - f[n - 2]);
    CHECK(dense_diff == doctest::Approx(closed).epsilon(1e-8));

    // full conditional log-density difference with dense determinants
    auto dense_lp = [&](int levels) {
        MatrixXd G = skel_covariance(h, mix, levels);
        VectorXd a = skel_a_vector(h, mix, z, levels);
        Eigen::LLT<MatrixXd> llt(G);
        double logdet = 0.0;
        for (int i = 0; i < G.rows(); ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
        return -0.5 * a.dot(llt.solve(a)) - 0.5 * logdet -
               0.5 * G.rows() * std::log(2.0 * M_PI);
    };
    double cond = dense_lp(n) - dense_lp(n - 1);
    // dual pathway: quadratic via <w,Gw> - 2<w,a> at the optimal w, dense dets
    auto dual_quad = [&](int levels) {
        MatrixXd G = skel_covariance(h, mix, levels);
        VectorXd a = skel_a_vector(h, mix, z, levels);
        VectorXd w = skel_w_vector(h, mix, z, levels);
        return 0.5 * (w.dot(G * w) - 2.0 * w.dot(a));
    };
    auto dense_det = [&](int levels) {
        MatrixXd G = skel_covariance(h, mix, levels);
        Eigen::LLT<MatrixXd> llt(G);
        double logdet = 0.0;
        for (int i = 0; i < G.rows(); ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
        return logdet + G.rows() * std::log(2.0 * M_PI);
    };
    double dual_path = (dual_quad(n) - dual_quad(n - 1)) -
                       0.5 * (dense_det(n) - dense_det(n - 1));
    CHECK(cond == doctest::Approx(dual_path).epsilon(1e-8));
}
