#include "tap/field_mc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "tap/freeprob.hpp"
#include "tap/rng.hpp"

namespace tap {

FieldSample::FieldSample(const Mixture& mix, int N, std::uint64_t seed)
    : mix_(mix), N_(N), seed_(seed) {
    if (N < 1 || N > 64) throw std::invalid_argument("FieldSample: N must be in [1,64]");
    for (const auto& [p, b2] : mix.coeffs()) {
        double count = std::pow(static_cast<double>(N), p);
        if (p <= 4) {
            if (count > (1u << 27))
                throw std::invalid_argument("FieldSample: dense tensor p=" + std::to_string(p) +
                                            " needs " + std::to_string(count * 8.0 / 1e6) +
                                            " MB, over budget");
            std::vector<double> J(static_cast<std::size_t>(count));
            for (std::size_t idx = 0; idx < J.size(); ++idx)
                J[idx] = counter_normal(seed_, p, idx);
            dense_.emplace_back(p, std::move(J));
        } else {
            if (count > 2e8)
                throw std::invalid_argument(
                    "FieldSample: streamed tensor p=" + std::to_string(p) + " needs " +
                    std::to_string(count) + " coupling draws per eval, over budget");
            streamed_.push_back(p);
        }
    }
}

double FieldSample::coupling(int p, std::uint64_t index) const {
    for (const auto& [dp, J] : dense_)
        if (dp == p) return J[index];
    return counter_normal(seed_, p, index);
}

// Iterate all tuples (i_1..i_p) with an odometer, maintaining prefix products
// of m; per_tuple(J, idx[], prod[]) sees prod[k] = m_{i_1}...m_{i_k}.
template <typename F>
void FieldSample::scan_p(int p, double scale, const Eigen::VectorXd& m, F&& per_tuple) const {
    std::vector<int> idx(p, 0);
    std::vector<double> prod(p + 1);
    prod[0] = scale;
    for (int k = 0; k < p; ++k) prod[k + 1] = prod[k] * m(0);
    std::uint64_t linear = 0;
    const bool is_dense = std::any_of(dense_.begin(), dense_.end(),
                                      [p](const auto& pr) { return pr.first == p; });
    const std::vector<double>* J = nullptr;
    if (is_dense)
        for (const auto& pr : dense_)
            if (pr.first == p) J = &pr.second;
    while (true) {
        double Jv = J ? (*J)[linear] : counter_normal(seed_, p, linear);
        per_tuple(Jv, idx, prod);
        // odometer increment (last index fastest)
        int k = p - 1;
        while (k >= 0) {
            if (++idx[k] < N_) break;
            idx[k] = 0;
            --k;
        }
        ++linear;
        if (k < 0) break;
        for (int j = k; j < p; ++j) prod[j + 1] = prod[j] * m(idx[j]);
    }
}

void FieldSample::eval(const Eigen::VectorXd& m, double& H, Eigen::VectorXd& grad,
                       Eigen::MatrixXd& hess) const {
    H = 0.0;
    grad = Eigen::VectorXd::Zero(N_);
    hess = Eigen::MatrixXd::Zero(N_, N_);
    for (const auto& [p, b2] : mix_.coeffs()) {
        double scale = std::sqrt(b2) * std::pow(static_cast<double>(N_), -(p - 1) / 2.0);
        std::vector<double> suf(p + 1);
        scan_p(p, scale, m, [&](double J, const std::vector<int>& idx,
                                const std::vector<double>& prod) {
            suf[p] = 1.0;
            for (int k = p - 1; k >= 0; --k) suf[k] = m(idx[k]) * suf[k + 1];
            H += J * prod[p];
            for (int a = 0; a < p; ++a) {
                grad(idx[a]) += J * prod[a] * suf[a + 1];
                double mid = 1.0;  // prod of m over positions strictly between a and b
                for (int b = a + 1; b < p; ++b) {
                    double without_ab = prod[a] * mid * suf[b + 1];
                    hess(idx[a], idx[b]) += J * without_ab;
                    hess(idx[b], idx[a]) += J * without_ab;
                    mid *= m(idx[b]);
                }
            }
        });
    }
}

double FieldSample::value(const Eigen::VectorXd& m) const {
    double H = 0.0;
    for (const auto& [p, b2] : mix_.coeffs()) {
        double scale = std::sqrt(b2) * std::pow(static_cast<double>(N_), -(p - 1) / 2.0);
        scan_p(p, scale, m,
               [&](double J, const std::vector<int>&, const std::vector<double>& prod) {
                   H += J * prod[p];
               });
    }
    return H;
}

Eigen::VectorXd FieldSample::gradient(const Eigen::VectorXd& m) const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(N_);
    for (const auto& [p, b2] : mix_.coeffs()) {
        double scale = std::sqrt(b2) * std::pow(static_cast<double>(N_), -(p - 1) / 2.0);
        scan_p(p, scale, m,
               [&](double J, const std::vector<int>& idx, const std::vector<double>& prod) {
                   double suffix = 1.0;
                   for (int a = p - 1; a >= 0; --a) {
                       g(idx[a]) += J * prod[a] * suffix;
                       suffix *= m(idx[a]);
                   }
               });
    }
    return g;
}

Eigen::MatrixXd FieldSample::hessian(const Eigen::VectorXd& m) const {
    double H;
    Eigen::VectorXd g;
    Eigen::MatrixXd h;
    eval(m, H, g, h);
    return h;
}

GOELogdetResult goe_logdet(const DeformedGOE& d, int samples) {
    if (d.N < 1 || d.N > 2000) throw std::invalid_argument("goe_logdet: N must be in [1,2000]");
    if (!d.diagonal.empty() && static_cast<int>(d.diagonal.size()) != d.N)
        throw std::invalid_argument("goe_logdet: diagonal size mismatch");
    GOELogdetResult res;
    res.per_sample.resize(samples);
    std::vector<double> min_abs(samples);
    const double od_sd = std::sqrt(d.t / d.N);
    const double di_sd = std::sqrt(2.0 * d.t / d.N);
#pragma omp parallel for schedule(dynamic)
    for (int s = 0; s < samples; ++s) {
        Rng rng(d.seed, static_cast<std::uint64_t>(s));
        Eigen::MatrixXd W(d.N, d.N);
        for (int i = 0; i < d.N; ++i) {
            W(i, i) = di_sd * rng.normal() + (d.diagonal.empty() ? 0.0 : d.diagonal[i]);
            for (int j = i + 1; j < d.N; ++j) W(i, j) = W(j, i) = od_sd * rng.normal();
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(W, Eigen::EigenvaluesOnly);
        double acc = 0.0, mn = 1e300;
        for (int i = 0; i < d.N; ++i) {
            double a = std::abs(es.eigenvalues()(i));
            acc += std::log(std::max(a, 1e-300));
            mn = std::min(mn, a);
        }
        res.per_sample[s] = acc / d.N;
        min_abs[s] = mn;
    }
    double sum = 0.0, sum2 = 0.0;
    int above = 0;
    for (int s = 0; s < samples; ++s) {
        sum += res.per_sample[s];
        sum2 += res.per_sample[s] * res.per_sample[s];
        if (min_abs[s] > 1e-3) ++above;
    }
    res.mean = sum / samples;
    res.se = samples > 1 ? std::sqrt(std::max(0.0, sum2 / samples - res.mean * res.mean) /
                                     (samples - 1))
                         : 0.0;
    std::sort(min_abs.begin(), min_abs.end());
    res.min_abs_eig_q01 = min_abs[static_cast<std::size_t>(0.01 * (samples - 1))];
    res.frac_min_above = static_cast<double>(above) / samples;
    return res;
}

double HessianBlockReport::max_z() const {
    double m = 0.0;
    for (const CheckRow& r : rows) m = std::max(m, r.z());
    return m;
}

namespace {

struct RunningMoment {
    double n = 0, mean = 0, m2 = 0;
    void add(double x) {
        n += 1;
        double d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }
    double se() const { return std::sqrt(m2 / (n - 1) / n); }
};

}  // namespace

HessianBlockReport hessian_blocks_check(const Mixture& mix, const Eigen::VectorXd& m,
                                        int samples, std::uint64_t seed) {
    const int N = static_cast<int>(m.size());
    const double q = m.squaredNorm() / N;
    Eigen::MatrixXd basis = Eigen::MatrixXd::Identity(N, N);
    basis.col(0) = m / m.norm();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(basis);
    Eigen::MatrixXd U = qr.householderQ();
    if (U.col(0).dot(m) < 0) U = -U;

    const double xp = mix.xi(q, 1), xpp = mix.xi(q, 2), x3 = mix.xi(q, 3), x4 = mix.xi(q, 4);
    Eigen::Matrix2d SX;
    SX << N * mix.xi(q), xp * std::sqrt(N * q), xp * std::sqrt(N * q), xp + q * xpp;
    Eigen::RowVector2d SAX;
    SAX << xpp * q, (x3 * q + 2.0 * xpp) * std::sqrt(q / N);
    Eigen::RowVector2d beta = SAX * SX.inverse();
    const double cB = xpp / xp * std::sqrt(q / N);

    RunningMoment varC_off, varC_diag, covCH, covCg, vB, vA, vA_cond, partAB;
    for (int s = 0; s < samples; ++s) {
        FieldSample fs(mix, N, seed + static_cast<std::uint64_t>(s));
        double H;
        Eigen::VectorXd g;
        Eigen::MatrixXd hess;
        fs.eval(m, H, g, hess);
        Eigen::MatrixXd W = U.transpose() * hess * U;
        Eigen::VectorXd gb = U.transpose() * g;
        varC_off.add(W(1, 2) * W(1, 2));
        varC_diag.add(W(1, 1) * W(1, 1));
        covCH.add(W(1, 2) * H);
        covCg.add(W(1, 2) * gb(1));
        double rB = W(1, 0) - cB * gb(1);
        vB.add(rB * rB);
        vA.add(W(0, 0) * W(0, 0));
        double rA = W(0, 0) - beta(0) * H - beta(1) * gb(0);
        vA_cond.add(rA * rA);
        partAB.add(rA * (W(2, 0) - cB * gb(2)));
    }
    HessianBlockReport rep;
    rep.rows.push_back({"tangent_var_offdiag", varC_off.mean, varC_off.se(), xpp / N});
    rep.rows.push_back({"tangent_var_diag", varC_diag.mean, varC_diag.se(), 2.0 * xpp / N});
    rep.rows.push_back({"tangent_decorr_H", covCH.mean, covCH.se(), 0.0});
    rep.rows.push_back({"tangent_decorr_grad", covCg.mean, covCg.se(), 0.0});
    rep.rows.push_back(
        {"mixed_cond_var", vB.mean, vB.se(), (xpp + q * x3 - xpp * xpp * q / xp) / N});
    rep.rows.push_back(
        {"longitudinal_var", vA.mean, vA.se(), (2.0 * xpp + 4.0 * x3 * q + x4 * q * q) / N});
    double vca = (2.0 * xpp + 4.0 * x3 * q + x4 * q * q) / N -
                 (SAX * SX.inverse() * SAX.transpose())(0);
    // guard the degenerate case where A is a.s. linear in (H, g_par)
    if (std::abs(vca) > 1e-10 || vA_cond.se() > 1e-12)
        rep.rows.push_back({"longitudinal_cond_var", vA_cond.mean, vA_cond.se() + 1e-13, vca});
    rep.rows.push_back({"partial_corr_AB", partAB.mean, partAB.se() + 1e-13, 0.0});
    return rep;
}

DetAsympReport det_asymp_check(const ParisiSolution& sol, int bi,
                               const std::vector<double>& mu_points, int goe_samples,
                               std::uint64_t seed) {
    const double q = sol.boundaries()[bi];
    const double t = sol.mixture().xi(q, 2);
    const double I = sol.measure().integral_cdf(q, 1.0);
    const int N = static_cast<int>(mu_points.size());
    DetAsympReport rep;

    std::vector<double> dmmh(N), tvals(N);
    double omega_p = t * I;
    double sum_log = 0.0, sum_inv = 0.0, sum_inv2 = 0.0;
    for (int i = 0; i < N; ++i) {
        dmmh[i] = sol.legendre_h(bi, mu_points[i]).ddh;
        tvals[i] = dmmh[i] + omega_p;
        sum_log += std::log(dmmh[i]);
        sum_inv += 1.0 / dmmh[i];
        sum_inv2 += 1.0 / (dmmh[i] * dmmh[i]);
    }
    rep.closed_form = sum_log / N + 0.5 * t * I * I;
    // omega' + t G_{T#mu}(omega') = omega' - t (1/N) sum 1/dmmh
    rep.fixed_point_residual = omega_p - t * (sum_inv / N);
    rep.domain_slack = std::max(0.0, sum_inv2 / N - 1.0 / t);
    rep.second_order_ok = sum_inv2 / N <= 1.0 / t + 1e-10;

    SpectralMeasure tm = SpectralMeasure::uniform(tvals);
    rep.free_convolution = log_potential(tm, t, 0.0);

    if (goe_samples > 0) {
        DeformedGOE d;
        d.N = N;
        d.t = t;
        d.diagonal = tvals;
        d.seed = seed;
        GOELogdetResult goe = goe_logdet(d, goe_samples);
        rep.goe_mean = goe.mean;
        rep.goe_se = goe.se;
    }
    return rep;
}

}  // namespace tap
