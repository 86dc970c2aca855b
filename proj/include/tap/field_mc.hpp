#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "tap/mixture.hpp"
#include "tap/parisi.hpp"

namespace tap {

// One realization of the mixed p-spin Gaussian field
//   H(m) = sum_p beta_p N^{-(p-1)/2} sum_{i_1..i_p} J_{i_1..i_p} m_{i_1}...m_{i_p}
// with i.i.d. standard normal couplings.  Tensors are stored dense for
// p <= 4 and streamed from counter-based substreams for p = 6.
class FieldSample {
public:
    FieldSample(const Mixture& mix, int N, std::uint64_t seed);

    int size() const { return N_; }

    double value(const Eigen::VectorXd& m) const;
    Eigen::VectorXd gradient(const Eigen::VectorXd& m) const;
    Eigen::MatrixXd hessian(const Eigen::VectorXd& m) const;
    // single pass filling all three
    void eval(const Eigen::VectorXd& m, double& H, Eigen::VectorXd& grad,
              Eigen::MatrixXd& hess) const;

private:
    Mixture mix_;
    int N_;
    std::uint64_t seed_;
    std::vector<std::pair<int, std::vector<double>>> dense_;  // (p, row-major tensor), p <= 4
    std::vector<int> streamed_;                               // p values evaluated on the fly

    template <typename F>
    void scan_p(int p, double scale, const Eigen::VectorXd& m, F&& per_tuple) const;
    double coupling(int p, std::uint64_t index) const;
};

struct DeformedGOE {
    int N = 0;
    double t = 1.0;                // semicircle variance = GOE scale^2
    std::vector<double> diagonal;  // D entries (size N; empty = zero)
    std::uint64_t seed = 0;
};

struct GOELogdetResult {
    double mean = 0.0;      // mean of (1/N) sum log|lambda_i|
    double se = 0.0;
    double min_abs_eig_q01 = 0.0;  // 1% quantile of min |lambda| over samples
    double frac_min_above = 0.0;   // fraction of samples with min |lambda| > 1e-3
    std::vector<double> per_sample;
};

// sample sqrt(t) GOE_N / sqrt(N) + diag(D) and average (1/N) log|det|
GOELogdetResult goe_logdet(const DeformedGOE& d, int samples);

// One row of a statistical check: estimate against a target with its MC
// standard error.
struct CheckRow {
    std::string name;
    double estimate = 0.0;
    double se = 0.0;
    double target = 0.0;
    double z() const { return std::abs(estimate - target) / se; }
};

struct HessianBlockReport {
    std::vector<CheckRow> rows;
    double max_z() const;
};

// Conditional law of the Hessian in the basis (m/|m|, basis of m-perp):
// tangent-block variances and decorrelation, mixed-block regression
// residual variance, longitudinal regression, conditional independence.
HessianBlockReport hessian_blocks_check(const Mixture& mix, const Eigen::VectorXd& m,
                                        int samples, std::uint64_t seed);

struct DetAsympReport {
    double closed_form = 0.0;       // (1/N) sum log dmm h + (1/2) xi''(q) I^2
    double free_convolution = 0.0;  // int log|x| d(T#mu boxplus sigma_{xi''(q)})
    double goe_mean = 0.0;          // (a) Monte Carlo estimate
    double goe_se = 0.0;
    double fixed_point_residual = 0.0;  // omega' + xi''(q) G_{T#mu}(omega')
    double domain_slack = 0.0;          // max(0, sum (dmm h)^-2 / N - 1/xi''(q))
    bool second_order_ok = true;
};

// Three-way determinant comparison at a converged minimizer: deformed-GOE
// Monte Carlo vs free-convolution integral vs the Legendre closed form;
// goe_samples = 0 skips the Monte Carlo leg.
DetAsympReport det_asymp_check(const ParisiSolution& sol, int bi,
                               const std::vector<double>& mu_points, int goe_samples,
                               std::uint64_t seed);

}  // namespace tap
