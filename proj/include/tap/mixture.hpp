#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace tap {

// Mixed p-spin covariance structure xi(t) = sum_p beta_p^2 t^p with even
// exponents p >= 2.  Derivatives up to order 4 are evaluated analytically
// from the coefficients.
class Mixture {
public:
    // pairs (p, beta_p^2); throws std::invalid_argument on odd p, p < 2,
    // negative weight, or an all-zero coefficient list.
    explicit Mixture(const std::vector<std::pair<int, double>>& coeffs);

    static Mixture sk(double beta) { return Mixture({{2, beta * beta}}); }
    static Mixture pure(int p, double beta2 = 1.0) { return Mixture({{p, beta2}}); }

    // d^order xi / dt^order at t, order in 0..4, t in [-1,1].
    double xi(double t, int order = 0) const;

    // D(q) = xi(q)(xi'(q) + q xi''(q)) - q xi'(q)^2, q in (0,1).
    double discriminant(double q) const;
    // Same quantity through the double-sum form
    // (1/2) sum_{a,b} beta_a^2 beta_b^2 (a-b)^2 q^{a+b-1}.
    double discriminant_sum(double q) const;

    bool is_pure() const { return coeffs_.size() == 1; }
    int pure_p() const;

    const std::map<int, double>& coeffs() const { return coeffs_; }
    std::string to_string() const;

private:
    std::map<int, double> coeffs_;  // p -> beta_p^2, all > 0
};

}  // namespace tap
