#pragma once

#include <stdexcept>
#include <vector>

namespace tap {

struct Atom {
    double t;  // location in [0,1]
    double w;  // weight > 0
};

// Finitely-atomic probability measure on [0,1].  Atom locations are kept
// strictly increasing (locations closer than 1e-12 are merged); weights
// below 1e-14 are dropped and the mass renormalized.
class AtomicMeasure {
public:
    explicit AtomicMeasure(std::vector<Atom> atoms);

    static AtomicMeasure dirac(double t) { return AtomicMeasure({{t, 1.0}}); }

    const std::vector<Atom>& atoms() const { return atoms_; }
    std::size_t size() const { return atoms_.size(); }

    // Right-continuous CDF: zeta([0,t]).
    double cdf(double t) const;
    // zeta([0,t)), the left limit of the CDF at t.
    double cdf_left(double t) const;
    double mass_at(double t, double tol = 1e-12) const;

    double min_support() const { return atoms_.front().t; }
    double max_support() const { return atoms_.back().t; }

    // zeta|_(q,1] + zeta([0,q]) delta_q.
    AtomicMeasure project_at(double q) const;

    // integral of zeta([0,t]) dt over [a,b]; exact (CDF piecewise constant).
    double integral_cdf(double a, double b) const;

private:
    std::vector<Atom> atoms_;
};

// L1 distance between CDFs, exact over breakpoints; equals the 1-Wasserstein
// distance on [0,1].
double dist(const AtomicMeasure& a, const AtomicMeasure& b);

// An (n+1)-atom prefix: supp cap [0,q_n] = {0,q_1,...,q_n} with
// zeta([0,q_{i-1}]) = u_i, plus a tail on [q_n,1] carrying mass 1-u_n whose
// first atom sits at q_n.
struct PrefixSpec {
    std::vector<double> u;   // strictly increasing in (0,1)
    std::vector<double> q;   // strictly increasing in (0,1)
    std::vector<Atom> tail;  // on [q_n,1], first atom at q_n, total mass 1-u_n
};

AtomicMeasure assemble_prefix(const PrefixSpec& spec);

}  // namespace tap
