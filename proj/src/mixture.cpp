#include "tap/mixture.hpp"

#include <cmath>
#include <sstream>

namespace tap {

Mixture::Mixture(const std::vector<std::pair<int, double>>& coeffs) {
    for (const auto& [p, b2] : coeffs) {
        if (p < 2 || p % 2 != 0)
            throw std::invalid_argument("Mixture: exponent " + std::to_string(p) +
                                        " must be even and >= 2");
        if (b2 < 0.0)
            throw std::invalid_argument("Mixture: negative coefficient at p=" + std::to_string(p));
        if (b2 > 0.0) coeffs_[p] += b2;
    }
    if (coeffs_.empty())
        throw std::invalid_argument("Mixture: at least one coefficient must be positive");
}

double Mixture::xi(double t, int order) const {
    if (order < 0 || order > 4)
        throw std::domain_error("Mixture::xi: order must be in 0..4");
    if (t < -1.0 || t > 1.0)
        throw std::domain_error("Mixture::xi: t outside [-1,1]");
    double s = 0.0;
    for (const auto& [p, b2] : coeffs_) {
        if (p < order) continue;
        double fac = 1.0;
        for (int k = 0; k < order; ++k) fac *= static_cast<double>(p - k);
        s += b2 * fac * std::pow(t, p - order);
    }
    return s;
}

double Mixture::discriminant(double q) const {
    if (q <= 0.0 || q >= 1.0)
        throw std::domain_error("Mixture::discriminant: q must lie in (0,1)");
    return xi(q) * (xi(q, 1) + q * xi(q, 2)) - q * xi(q, 1) * xi(q, 1);
}

double Mixture::discriminant_sum(double q) const {
    if (q <= 0.0 || q >= 1.0)
        throw std::domain_error("Mixture::discriminant_sum: q must lie in (0,1)");
    double s = 0.0;
    for (const auto& [a, ba] : coeffs_)
        for (const auto& [b, bb] : coeffs_) {
            double d = static_cast<double>(a - b);
            s += ba * bb * d * d * std::pow(q, a + b - 1);
        }
    return 0.5 * s;
}

int Mixture::pure_p() const {
    if (!is_pure()) throw std::logic_error("Mixture::pure_p: mixture is not pure");
    return coeffs_.begin()->first;
}

std::string Mixture::to_string() const {
    std::ostringstream os;
    bool first = true;
    for (const auto& [p, b2] : coeffs_) {
        if (!first) os << " + ";
        os << b2 << "*t^" << p;
        first = false;
    }
    return os.str();
}

}  // namespace tap
