#include "tap/measures.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tap {

namespace {
constexpr double kMergeTol = 1e-12;
constexpr double kDropTol = 1e-14;
constexpr double kMassTol = 1e-14;
}  // namespace

AtomicMeasure::AtomicMeasure(std::vector<Atom> atoms) {
    if (atoms.empty()) throw std::invalid_argument("AtomicMeasure: no atoms");
    std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.t < b.t; });
    for (const Atom& a : atoms) {
        if (a.t < 0.0 || a.t > 1.0)
            throw std::invalid_argument("AtomicMeasure: location outside [0,1]");
        if (a.w < 0.0) throw std::invalid_argument("AtomicMeasure: negative weight");
    }
    // merge near-duplicate locations, drop negligible weights
    for (const Atom& a : atoms) {
        if (!atoms_.empty() && a.t - atoms_.back().t < kMergeTol)
            atoms_.back().w += a.w;
        else
            atoms_.push_back(a);
    }
    double total = 0.0;
    std::vector<Atom> kept;
    for (const Atom& a : atoms_)
        if (a.w >= kDropTol) {
            kept.push_back(a);
            total += a.w;
        }
    if (kept.empty()) throw std::invalid_argument("AtomicMeasure: all weights negligible");
    if (std::abs(total - 1.0) > 1e-8)
        throw std::invalid_argument("AtomicMeasure: weights sum to " + std::to_string(total));
    if (std::abs(total - 1.0) > kMassTol)
        for (Atom& a : kept) a.w /= total;
    atoms_ = std::move(kept);
}

double AtomicMeasure::cdf(double t) const {
    double s = 0.0;
    for (const Atom& a : atoms_) {
        if (a.t > t) break;
        s += a.w;
    }
    return s;
}

double AtomicMeasure::cdf_left(double t) const {
    double s = 0.0;
    for (const Atom& a : atoms_) {
        if (a.t >= t) break;
        s += a.w;
    }
    return s;
}

double AtomicMeasure::mass_at(double t, double tol) const {
    double s = 0.0;
    for (const Atom& a : atoms_)
        if (std::abs(a.t - t) <= tol) s += a.w;
    return s;
}

AtomicMeasure AtomicMeasure::project_at(double q) const {
    if (q < 0.0 || q > 1.0) throw std::domain_error("project_at: q outside [0,1]");
    std::vector<Atom> out;
    double below = 0.0;
    for (const Atom& a : atoms_) {
        if (a.t <= q)
            below += a.w;
        else
            out.push_back(a);
    }
    if (below > 0.0) out.insert(out.begin(), {q, below});
    return AtomicMeasure(std::move(out));
}

double AtomicMeasure::integral_cdf(double a, double b) const {
    if (b < a) throw std::domain_error("integral_cdf: b < a");
    // breakpoints: atom locations inside (a,b)
    double s = 0.0, prev = a;
    for (const Atom& at : atoms_) {
        if (at.t <= a) continue;
        if (at.t >= b) break;
        s += cdf(prev) * (at.t - prev);
        prev = at.t;
    }
    s += cdf(prev) * (b - prev);
    return s;
}

double dist(const AtomicMeasure& a, const AtomicMeasure& b) {
    std::vector<double> brk;
    brk.reserve(a.size() + b.size() + 2);
    brk.push_back(0.0);
    for (const Atom& x : a.atoms()) brk.push_back(x.t);
    for (const Atom& x : b.atoms()) brk.push_back(x.t);
    brk.push_back(1.0);
    std::sort(brk.begin(), brk.end());
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < brk.size(); ++i) {
        double len = brk[i + 1] - brk[i];
        if (len <= 0.0) continue;
        s += std::abs(a.cdf(brk[i]) - b.cdf(brk[i])) * len;
    }
    return s;
}

AtomicMeasure assemble_prefix(const PrefixSpec& spec) {
    const std::size_t n = spec.u.size();
    if (n == 0 || spec.q.size() != n)
        throw std::invalid_argument("assemble_prefix: u and q must be nonempty, equal length");
    for (std::size_t i = 0; i < n; ++i) {
        if (spec.u[i] <= 0.0 || spec.u[i] >= 1.0 || spec.q[i] <= 0.0 || spec.q[i] >= 1.0)
            throw std::invalid_argument("assemble_prefix: u,q must lie in (0,1)");
        if (i > 0 && (spec.u[i] <= spec.u[i - 1] || spec.q[i] <= spec.q[i - 1]))
            throw std::invalid_argument("assemble_prefix: u,q must be strictly increasing");
    }
    std::vector<Atom> atoms;
    atoms.push_back({0.0, spec.u[0]});
    for (std::size_t i = 1; i < n; ++i) atoms.push_back({spec.q[i - 1], spec.u[i] - spec.u[i - 1]});
    double tail_mass = 0.0;
    bool have_qn = false;
    for (const Atom& a : spec.tail) {
        if (a.t < spec.q[n - 1] - 1e-12 || a.t > 1.0)
            throw std::invalid_argument("assemble_prefix: tail atom outside [q_n,1]");
        if (std::abs(a.t - spec.q[n - 1]) <= 1e-12 && a.w > 0.0) have_qn = true;
        atoms.push_back(a);
        tail_mass += a.w;
    }
    if (!have_qn)
        throw std::invalid_argument("assemble_prefix: tail must place positive mass at q_n");
    if (std::abs(tail_mass - (1.0 - spec.u[n - 1])) > 1e-10)
        throw std::invalid_argument("assemble_prefix: tail mass inconsistent with u_n");
    return AtomicMeasure(std::move(atoms));
}

}  // namespace tap
