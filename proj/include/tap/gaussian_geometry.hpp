#pragma once

#include <Eigen/Dense>
#include <vector>

#include "tap/functionals.hpp"
#include "tap/measures.hpp"
#include "tap/mixture.hpp"
#include "tap/parisi.hpp"

namespace tap {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Covariance of (grad H(m), H(m)) in matrix-free block form:
//   A = xi'(q) I + (xi''(q)/N) m m^T,  b = xi'(q) m,  c = N xi(q),
// with q = |m|^2/N.
class GammaBlocks {
public:
    // q defaults to |m|^2/N; an explicit q decouples the overlap argument of
    // xi from the rank-one direction (m = 0 edge cases)
    GammaBlocks(const Mixture& mix, VectorXd m, double q = -1.0);

    int dim() const { return static_cast<int>(m_.size()); }
    double q() const { return q_; }

    // log det of the full (N+1)x(N+1) covariance; throws for pure mixtures
    // (degenerate Schur complement, see the discriminant D(q))
    double logdet() const;
    double logdet_grad_block() const;  // log det A only

    // apply Gamma to (x, v)
    void apply(const VectorXd& x, double v, VectorXd& out_x, double& out_v) const;
    // solve Gamma (y, s) = (z, zv) matrix-free (Sherman-Morrison + Schur)
    void solve(const VectorXd& z, double zv, VectorXd& y, double& s) const;

    // -<z, Gamma^{-1} z>
    double dual_exact(const VectorXd& z, double zv) const;
    // <w, Gamma w> - 2 <w, z>; always >= dual_exact, equality iff Gamma w = z
    double dual_bound(const VectorXd& z, double zv, const VectorXd& w, double wv) const;

    MatrixXd dense() const;  // test oracle, N <= a few hundred

private:
    Mixture mix_;
    VectorXd m_;
    double q_;
    VectorXd a_inv_b_;  // A^{-1} b cached
    double schur_;      // c - b^T A^{-1} b
};

// per-spin log-density value of Z(m) = (grad F, F) at (0, Nf) under the SUSY
// reduction (mixed-model closed form)
double susy_logdensity_mixed(const ParisiSolution& sol, const EmpiricalMu& mu, double u,
                             double q, double f);
// pure p-spin analogue, including the (p-1)/p square term
double susy_logdensity_pure(const ParisiSolution& sol, const EmpiricalMu& mu, double u,
                            double q, double f, int p);
// exact Gaussian log-density of Z(m) at (0, Nf) via GammaBlocks (total, not
// per spin); gradient mean from k_zeta
double exact_logdensity(const ParisiSolution& sol, const EmpiricalMu& mu, double f);

// (1/N) R^ex: deterministic remainder of the pure-case Euler reduction
double exact_remainder_per_spin(const ParisiSolution& sol, const EmpiricalMu& mu, int p);

// ---- hierarchical algebra ---------------------------------------------

struct HierData {
    int N = 0;
    std::vector<double> q;      // q_1 < ... < q_n
    std::vector<double> delta;  // Delta_k: -zeta({q_k}) for k<n, zeta([0,q_n)) for k=n
    MatrixXd m;                 // N x n, column k = m^(k); <m^i,m^j> = N q_{min(i,j)}
    MatrixXd grad_h;            // N x n, column k = dm h(q_k, m^(k)) witness values
    std::vector<double> f;      // f_1..f_n
    std::vector<double> sum_h;  // sum_i h(q_k, m_i^(k)) witness scalars
};

// Witness construction: hierarchy built by Gram-Schmidt within bands, and
// gradient arrays solving the inner-product constraint system exactly
// (minimal-norm solution plus a random orthogonal component).
HierData make_synthetic_hier(const Mixture& mix, const AtomicMeasure& zeta, int N,
                             const std::vector<double>& f, std::uint64_t seed);

struct HierReport {
    double telescope_lhs = 0.0, telescope_rhs = 0.0;  // sum xi(q_ij) D_i D_j identity
    double detq_closed = 0.0, detq_dense = 0.0;       // det xi'(Q) factorization
    double compression_max_err = 0.0;  // <z^i + grad_h^i, m^j> vs N xi'(q_ij) int
    double ladder_max_err = 0.0;       // <x_n^k, m^j> vs N 1_{j=k} int
    MatrixXd y;                        // y_n^{(k)} columns
    MatrixXd xn;                       // x_n^{(k)} columns
};

HierReport hier_forms(const HierData& h, const Mixture& mix, const AtomicMeasure& zeta);

// dense covariance of Skel_n = (grad F(m^1), F(m^1), ..., grad F(m^n), F(m^n))
MatrixXd skel_covariance(const HierData& h, const Mixture& mix, int levels);
// a_n vector (negated mean of Skel under the critical-point conditioning)
VectorXd skel_a_vector(const HierData& h, const Mixture& mix, const AtomicMeasure& zeta,
                       int levels);
// optimal dual point w = (x_n^{(1)}, Delta_1, ..., x_n^{(n)}, Delta_n)
VectorXd skel_w_vector(const HierData& h, const Mixture& mix, const AtomicMeasure& zeta,
                       int levels);

}  // namespace tap
