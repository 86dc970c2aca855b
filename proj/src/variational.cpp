#include "tap/variational.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tap/rng.hpp"

namespace tap {

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }
double expit(double a) { return 1.0 / (1.0 + std::exp(-a)); }

// ordered sequence in (0,1) from unconstrained coordinates:
// v_1 = expit(a_1), v_{k+1} = v_k + (1 - v_k) expit(a_{k+1})
std::vector<double> ordered_from(const double* a, int n) {
    std::vector<double> v(n);
    double prev = 0.0;
    for (int k = 0; k < n; ++k) {
        prev = prev + (1.0 - prev) * expit(a[k]);
        v[k] = prev;
    }
    return v;
}

std::vector<double> ordered_to(const std::vector<double>& v) {
    std::vector<double> a(v.size());
    double prev = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) {
        a[k] = logit((v[k] - prev) / (1.0 - prev));
        prev = v[k];
    }
    return a;
}

// weights of total mass `mass` over K atoms from K-1 unconstrained coords
std::vector<double> weights_from(const double* a, int K, double mass, bool stick) {
    std::vector<double> w(K);
    if (K == 1) {
        w[0] = mass;
        return w;
    }
    if (stick) {
        double rem = mass;
        for (int k = 0; k < K - 1; ++k) {
            w[k] = rem * expit(a[k]);
            rem -= w[k];
        }
        w[K - 1] = rem;
    } else {  // softmax with last logit pinned at 0
        double mx = 0.0;
        for (int k = 0; k < K - 1; ++k) mx = std::max(mx, a[k]);
        double z = std::exp(0.0 - mx);
        for (int k = 0; k < K - 1; ++k) z += std::exp(a[k] - mx);
        for (int k = 0; k < K - 1; ++k) w[k] = mass * std::exp(a[k] - mx) / z;
        w[K - 1] = mass * std::exp(0.0 - mx) / z;
    }
    return w;
}

}  // namespace

SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& fn,
                          std::vector<double> x0, double step, int max_iter, double tol,
                          int stall_limit) {
    const int d = static_cast<int>(x0.size());
    SimplexResult res;
    if (d == 0) {
        res.x = x0;
        res.value = fn(x0);
        res.converged = true;
        res.evaluations = 1;
        return res;
    }
    std::vector<std::vector<double>> pts(d + 1, x0);
    std::vector<double> val(d + 1);
    for (int i = 1; i <= d; ++i) pts[i][i - 1] += step;
    int evals = 0;
    for (int i = 0; i <= d; ++i) val[i] = (++evals, fn(pts[i]));

    auto order = [&]() {
        std::vector<int> idx(d + 1);
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](int a, int b) { return val[a] < val[b]; });
        std::vector<std::vector<double>> np(d + 1);
        std::vector<double> nv(d + 1);
        for (int i = 0; i <= d; ++i) {
            np[i] = pts[idx[i]];
            nv[i] = val[idx[i]];
        }
        pts = std::move(np);
        val = std::move(nv);
    };
    order();

    double best_seen = val[0];
    int stall = 0;
    for (int it = 0; it < max_iter; ++it) {
        if (val[d] - val[0] < tol * (1.0 + std::abs(val[0]))) break;
        if (stall > stall_limit) break;
        std::vector<double> cen(d, 0.0);
        for (int i = 0; i < d; ++i)
            for (int k = 0; k < d; ++k) cen[k] += pts[i][k] / d;
        auto mix_pt = [&](double c) {
            std::vector<double> p(d);
            for (int k = 0; k < d; ++k) p[k] = cen[k] + c * (pts[d][k] - cen[k]);
            return p;
        };
        auto xr = mix_pt(-1.0);
        double fr = (++evals, fn(xr));
        if (fr < val[0]) {
            auto xe = mix_pt(-2.0);
            double fe = (++evals, fn(xe));
            if (fe < fr) {
                pts[d] = xe;
                val[d] = fe;
            } else {
                pts[d] = xr;
                val[d] = fr;
            }
        } else if (fr < val[d - 1]) {
            pts[d] = xr;
            val[d] = fr;
        } else {
            auto xc = mix_pt(fr < val[d] ? -0.5 : 0.5);
            double fc = (++evals, fn(xc));
            if (fc < std::min(fr, val[d])) {
                pts[d] = xc;
                val[d] = fc;
            } else {  // shrink
                for (int i = 1; i <= d; ++i) {
                    for (int k = 0; k < d; ++k) pts[i][k] = pts[0][k] + 0.5 * (pts[i][k] - pts[0][k]);
                    val[i] = (++evals, fn(pts[i]));
                }
            }
        }
        order();
        if (val[0] < best_seen - 1e-13) {
            best_seen = val[0];
            stall = 0;
        } else {
            ++stall;
        }
    }
    res.x = pts[0];
    res.value = val[0];
    res.converged = (val[d] - val[0] < tol * (1.0 + std::abs(val[0])));
    res.evaluations = evals;
    return res;
}

namespace {

// decision vector layout for the prefix optimization:
//   [u coords (n, if free)] [q coords (n, if free)]
//   [tail extra locations (K-1)] [tail weight coords (K-1)]
struct PrefixParam {
    int n = 1;
    int K = 1;
    bool u_free = true, q_free = true;
    std::vector<double> u_fixed, q_fixed;
    bool stick = true;

    int dim() const {
        return (u_free ? n : 0) + (q_free ? n : 0) + 2 * (K - 1);
    }

    PrefixSpec decode(const std::vector<double>& x) const {
        int off = 0;
        PrefixSpec s;
        if (u_free) {
            s.u = ordered_from(x.data() + off, n);
            off += n;
        } else
            s.u = u_fixed;
        if (q_free) {
            s.q = ordered_from(x.data() + off, n);
            off += n;
        } else
            s.q = q_fixed;
        double qn = s.q.back();
        std::vector<double> locs{qn};
        for (int k = 0; k < K - 1; ++k) {
            double prev = locs.back();
            locs.push_back(prev + (1.0 - prev) * expit(x[off + k]));
        }
        off += K - 1;
        std::vector<double> ws = weights_from(x.data() + off, K, 1.0 - s.u.back(), stick);
        for (int k = 0; k < K; ++k) s.tail.push_back({locs[k], ws[k]});
        return s;
    }

    std::vector<double> encode(const PrefixSpec& s) const {
        std::vector<double> x;
        if (u_free)
            for (double a : ordered_to(s.u)) x.push_back(a);
        if (q_free)
            for (double a : ordered_to(s.q)) x.push_back(a);
        double prev = s.q.back();
        for (int k = 1; k < K; ++k) {
            x.push_back(logit((s.tail[k].t - prev) / (1.0 - prev)));
            prev = s.tail[k].t;
        }
        if (K > 1) {
            double rem = 1.0 - s.u.back();
            for (int k = 0; k < K - 1; ++k) {
                x.push_back(logit(s.tail[k].w / rem));
                rem -= s.tail[k].w;
            }
        }
        return x;
    }
};

constexpr double kBadValue = 1e9;

double safe_parisi(const PrefixSpec& s, const Mixture& mix, const GridSpec& g) {
    try {
        return parisi_value(assemble_prefix(s), mix, g);
    } catch (const std::exception&) {
        return kBadValue;
    }
}

}  // namespace

PrefixOptimum minimize_parisi_prefix(const Mixture& mix, int n, std::vector<double> u_fixed,
                                     std::vector<double> q_fixed, const OptimizeOptions& opt) {
    PrefixParam par;
    par.n = n;
    par.K = opt.tail_atoms;
    par.u_free = u_fixed.empty();
    par.q_free = q_fixed.empty();
    par.u_fixed = std::move(u_fixed);
    par.q_fixed = std::move(q_fixed);
    par.stick = opt.stick_breaking;

    auto objective = [&](const std::vector<double>& x) {
        return safe_parisi(par.decode(x), mix, opt.grid);
    };

    PrefixOptimum best;
    best.value = kBadValue;
    for (int s = 0; s < opt.multistarts; ++s) {
        Rng rng(opt.seed, static_cast<std::uint64_t>(s));
        std::vector<double> x0(par.dim());
        for (double& xi : x0) xi = 1.2 * rng.normal();
        SimplexResult r =
            nelder_mead(objective, x0, 0.7, opt.max_iter, opt.tol, opt.stall_limit);
        best.all_start_values.push_back(r.value);
        best.evaluations += r.evaluations;
        if (r.value < best.value) {
            best.value = r.value;
            best.spec = par.decode(r.x);
            best.converged = r.converged;
        }
    }
    // first-order flatness of H over the support
    try {
        OptimalityReport rep = optimality_report(assemble_prefix(best.spec), mix, best.value,
                                                 opt.grid, best.spec.q.back());
        best.h_support_gap = rep.h_support_gap;
    } catch (const std::exception&) {
        best.h_support_gap = kBadValue;
    }
    return best;
}

namespace {

// stationarity residuals for the (u,q) system at level f:
//   E[M_{q_k}^2] - q_k            (k = 1..n)
//   energy(q_k) + Parisi          (k = 1..n-1)
//   energy(q_n) + f
std::vector<double> stationarity_residuals(const Mixture& mix, double f, int n,
                                           const std::vector<double>& u,
                                           const std::vector<double>& q,
                                           const OptimizeOptions& opt, double* parisi_out,
                                           PrefixSpec* spec_out) {
    PrefixSpec spec;
    if (opt.tail_atoms == 1) {
        spec.u = u;
        spec.q = q;
        spec.tail = {{q.back(), 1.0 - u.back()}};
    } else {
        OptimizeOptions inner = opt;
        inner.multistarts = 1;
        PrefixOptimum po = minimize_parisi_prefix(mix, n, u, q, inner);
        spec = po.spec;
    }
    AtomicMeasure z = assemble_prefix(spec);
    ParisiSolution sol = solve(z, mix, opt.grid);
    double pv = parisi_value(sol);
    if (parisi_out) *parisi_out = pv;
    if (spec_out) *spec_out = spec;

    std::vector<double> r;
    DensityFlow flow(sol, 0, 0.0);
    for (int k = 0; k < n; ++k) {
        int bi = sol.boundary_index(q[k], 1e-11);
        flow.advance_to(bi);
        r.push_back(flow.expect_u2() - q[k]);
    }
    DensityFlow flow2(sol, 0, 0.0);
    for (int k = 0; k < n; ++k) {
        int bi = sol.boundary_index(q[k], 1e-11);
        flow2.advance_to(bi);
        double lhs = -flow2.expect_phi() + weighted_txi2(z, mix, 0.0, q[k]) +
                     0.5 * weighted_txi2(z, mix, q[k], 1.0);
        r.push_back(lhs + (k + 1 < n ? pv : f));
    }
    return r;
}

double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

StationaryResult stationary_uq(const Mixture& mix, double f, int n,
                               const std::vector<double>& u0, const std::vector<double>& q0,
                               const OptimizeOptions& opt) {
    StationaryResult out;
    std::vector<double> y;  // unconstrained coords: [u coords, q coords]
    for (double a : ordered_to(u0)) y.push_back(a);
    for (double a : ordered_to(q0)) y.push_back(a);
    const int d = 2 * n;

    auto resid = [&](const std::vector<double>& yy, double* pv = nullptr,
                     PrefixSpec* sp = nullptr) {
        std::vector<double> u = ordered_from(yy.data(), n);
        std::vector<double> q = ordered_from(yy.data() + n, n);
        return stationarity_residuals(mix, f, n, u, q, opt, pv, sp);
    };

    std::vector<double> r = resid(y);
    double rn = norm2(r);
    bool ok = false;
    for (int it = 0; it < 120 && !ok; ++it) {
        if (rn < 1e-9) {
            ok = true;
            break;
        }
        // central finite-difference Jacobian (one-sided slopes mislead the
        // Newton direction along the nearly flat u-direction)
        std::vector<std::vector<double>> J(d, std::vector<double>(d));
        const double hstep = 1e-4;
        for (int k = 0; k < d; ++k) {
            std::vector<double> yp = y, ym = y;
            yp[k] += hstep;
            ym[k] -= hstep;
            std::vector<double> rp = resid(yp);
            std::vector<double> rm = resid(ym);
            for (int i = 0; i < d; ++i) J[i][k] = (rp[i] - rm[i]) / (2.0 * hstep);
        }
        // solve J dy = -r (Gaussian elimination with partial pivoting)
        std::vector<std::vector<double>> A = J;
        std::vector<double> b(d);
        for (int i = 0; i < d; ++i) b[i] = -r[i];
        for (int c = 0; c < d; ++c) {
            int piv = c;
            for (int i = c + 1; i < d; ++i)
                if (std::abs(A[i][c]) > std::abs(A[piv][c])) piv = i;
            std::swap(A[c], A[piv]);
            std::swap(b[c], b[piv]);
            if (std::abs(A[c][c]) < 1e-14) break;
            for (int i = c + 1; i < d; ++i) {
                double fpiv = A[i][c] / A[c][c];
                for (int k = c; k < d; ++k) A[i][k] -= fpiv * A[c][k];
                b[i] -= fpiv * b[c];
            }
        }
        std::vector<double> dy(d, 0.0);
        for (int i = d - 1; i >= 0; --i) {
            double s = b[i];
            for (int k = i + 1; k < d; ++k) s -= A[i][k] * dy[k];
            dy[i] = (std::abs(A[i][i]) > 1e-14) ? s / A[i][i] : 0.0;
        }
        // trust-region cap (the 1RSB landscape can be nearly flat in u, making
        // the stationary point ultra-sensitive to f) plus damped line search
        double dn = norm2(dy);
        if (dn > 1.5)
            for (double& v : dy) v *= 1.5 / dn;
        double lam = 1.0;
        bool improved = false;
        for (int ls = 0; ls < 20; ++ls) {
            std::vector<double> yn = y;
            for (int k = 0; k < d; ++k) yn[k] += lam * dy[k];
            std::vector<double> rnw = resid(yn);
            if (norm2(rnw) < rn * (1.0 - 1e-4 * lam)) {
                y = yn;
                r = rnw;
                rn = norm2(r);
                improved = true;
                break;
            }
            lam *= 0.5;
        }
        if (!improved) break;
    }
    if (!ok && rn < 1e-6) ok = true;  // near-stationary after stalled line search

    double pv = 0.0;
    PrefixSpec spec;
    r = resid(y, &pv, &spec);
    rn = norm2(r);
    out.u = ordered_from(y.data(), n);
    out.q = ordered_from(y.data() + n, n);
    out.spec = spec;
    out.parisi = pv;
    out.c_value = out.u.back() * (pv - f);
    out.converged = ok && rn < 1e-6;
    out.residual_norm = rn;
    out.report =
        optimality_report(assemble_prefix(spec), mix, f, opt.grid, out.q.back());
    return out;
}

ComplexityCurve lambda_curve(const Mixture& mix, const std::vector<double>& thetas,
                             LambdaVariant variant, const OptimizeOptions& opt) {
    ComplexityCurve curve;
    curve.variant = variant;
    for (std::size_t pi = 0; pi < thetas.size(); ++pi) {
        double theta = thetas[pi];
        CurvePoint pt;
        pt.axis = theta;
        if (variant == LambdaVariant::Annealed && theta >= 1.0 - 1e-12) {
            // zeta({0}) = 1 forces zeta = delta_0
            pt.value = parisi_value(AtomicMeasure::dirac(0.0), mix, opt.grid);
            pt.converged = true;
            pt.spec.u = {1.0 - 1e-12};
            pt.spec.q = {0.5};
            curve.points.push_back(pt);
            continue;
        }
        OptimizeOptions o = opt;
        o.seed = opt.seed + 1000 * pi;
        if (variant == LambdaVariant::Annealed) {
            PrefixOptimum po = minimize_parisi_prefix(mix, 1, {theta}, {}, o);
            pt.value = theta * po.value;
            pt.spec = po.spec;
            pt.converged = po.converged;
            pt.residual_max = po.h_support_gap;
        } else {
            // top atom mass 1-theta at a free location; lower mass theta at 0
            // plus (tail_atoms - 1) free atoms below the top
            auto objective = [&](const std::vector<double>& x) {
                // x = [logit(top), lower locations..., lower weight coords...]
                int L = o.tail_atoms;  // lower atoms including the one at 0
                double top = expit(x[0]);
                std::vector<Atom> atoms;
                std::vector<double> locs{0.0};
                double prev = 0.0;
                for (int k = 1; k < L; ++k) {
                    prev = prev + (top - prev) * expit(x[k]);
                    locs.push_back(prev);
                }
                std::vector<double> ws = weights_from(x.data() + L, L, theta, o.stick_breaking);
                for (int k = 0; k < L; ++k) atoms.push_back({locs[k], ws[k]});
                atoms.push_back({top, 1.0 - theta});
                try {
                    return parisi_value(AtomicMeasure(atoms), mix, o.grid);
                } catch (const std::exception&) {
                    return kBadValue;
                }
            };
            double best = kBadValue;
            std::vector<double> bestx;
            for (int s = 0; s < o.multistarts; ++s) {
                Rng rng(o.seed, s);
                std::vector<double> x0(2 * o.tail_atoms);
                for (double& xi : x0) xi = 1.2 * rng.normal();
                SimplexResult r = nelder_mead(objective, x0, 0.7, o.max_iter, o.tol, o.stall_limit);
                if (r.value < best) {
                    best = r.value;
                    bestx = r.x;
                    pt.converged = r.converged;
                }
            }
            pt.value = theta * best;
            // record the top atom as q_1 for reporting
            pt.spec.u = {theta};
            pt.spec.q = {expit(bestx[0])};
            pt.spec.tail = {{expit(bestx[0]), 1.0 - theta}};
        }
        curve.points.push_back(pt);
    }
    return curve;
}

ComplexityCurve legendre_transform(const ComplexityCurve& curve, const std::vector<double>& fs) {
    ComplexityCurve out;
    out.variant = curve.variant;
    const auto& pts = curve.points;
    if (pts.size() < 2) throw std::invalid_argument("legendre_transform: need >= 2 points");
    for (double f : fs) {
        CurvePoint pt;
        pt.axis = f;
        std::size_t kmin = 0;
        double vmin = 1e300;
        for (std::size_t k = 0; k < pts.size(); ++k) {
            double v = pts[k].value - pts[k].axis * f;
            if (v < vmin) {
                vmin = v;
                kmin = k;
            }
        }
        pt.extrapolated = (kmin == 0 || kmin + 1 == pts.size());
        double th = pts[kmin].axis;
        if (!pt.extrapolated) {
            // parabolic refinement through the three bracketing points
            double x0 = pts[kmin - 1].axis, x1 = pts[kmin].axis, x2 = pts[kmin + 1].axis;
            double y0 = pts[kmin - 1].value - x0 * f;
            double y1 = pts[kmin].value - x1 * f;
            double y2 = pts[kmin + 1].value - x2 * f;
            double denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
            if (std::abs(denom) > 1e-300) {
                double aa = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
                double bb =
                    (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
                if (aa > 0) {
                    double xv = -bb / (2 * aa);
                    if (xv > x0 && xv < x2) {
                        th = xv;
                        vmin = aa * xv * xv + bb * xv +
                               (y0 - aa * x0 * x0 - bb * x0);
                    }
                }
            }
        }
        pt.value = vmin;
        pt.argmin = th;
        pt.converged = true;
        out.points.push_back(pt);
    }
    return out;
}

}  // namespace tap
