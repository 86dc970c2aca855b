#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace tap {

// Uniform grid on [-L, L] with an odd point count (so x=0 is a node).
struct Grid {
    double L = 0.0;
    int n = 0;
    double h = 0.0;

    Grid() = default;
    Grid(double half_width, int points) : L(half_width), n(points) {
        if (points < 3 || points % 2 == 0) throw std::invalid_argument("Grid: points must be odd >= 3");
        h = 2.0 * L / (points - 1);
    }
    double x(int i) const { return -L + h * i; }
    int center() const { return (n - 1) / 2; }
    // index of the cell containing z, clamped to [0, n-2]
    int cell(double z) const {
        int k = static_cast<int>(std::floor((z + L) / h));
        if (k < 0) k = 0;
        if (k > n - 2) k = n - 2;
        return k;
    }
};

// Cubic Hermite on one cell: values f0,f1 and slopes d0,d1, local coordinate
// s in [0,1], cell width h.
inline double hermite3(double s, double f0, double f1, double d0, double d1, double h) {
    double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * f0 + (s3 - 2 * s2 + s) * h * d0 +
           (-2 * s3 + 3 * s2) * f1 + (s3 - s2) * h * d1;
}

inline double hermite3_deriv(double s, double f0, double f1, double d0, double d1, double h) {
    double s2 = s * s;
    return ((6 * s2 - 6 * s) * f0 + (3 * s2 - 4 * s + 1) * h * d0 +
            (-6 * s2 + 6 * s) * f1 + (3 * s2 - 2 * s) * h * d1) / h;
}

// Quintic Hermite on one cell from values, first and second derivatives.
inline double hermite5(double s, double f0, double f1, double d0, double d1,
                       double c0, double c1, double h) {
    double s2 = s * s, s3 = s2 * s, s4 = s3 * s, s5 = s4 * s;
    double H0 = 1 - 10 * s3 + 15 * s4 - 6 * s5;
    double H1 = s - 6 * s3 + 8 * s4 - 3 * s5;
    double H2 = 0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5;
    double H3 = 0.5 * s3 - s4 + 0.5 * s5;
    double H4 = -4 * s3 + 7 * s4 - 3 * s5;
    double H5 = 10 * s3 - 15 * s4 + 6 * s5;
    return H0 * f0 + H1 * h * d0 + H2 * h * h * c0 + H3 * h * h * c1 + H4 * h * d1 + H5 * f1;
}

// Natural cubic spline; used for smooth density-like data on the grid.
class CubicSpline {
public:
    CubicSpline() = default;
    CubicSpline(const Grid& g, std::vector<double> y) : grid_(g), y_(std::move(y)) {
        const int n = grid_.n;
        m_.assign(n, 0.0);
        if (n < 3) return;
        // m_{i-1} + 4 m_i + m_{i+1} = 6 (y_{i+1} - 2 y_i + y_{i-1}) / h^2,
        // natural BCs m_0 = m_{n-1} = 0; Thomas algorithm on [1 4 1].
        const double h = grid_.h;
        std::vector<double> cp(n, 0.0), dp(n, 0.0);
        double denom = 4.0;
        cp[1] = 1.0 / denom;
        dp[1] = 6.0 * (y_[2] - 2.0 * y_[1] + y_[0]) / (h * h) / denom;
        for (int i = 2; i < n - 1; ++i) {
            denom = 4.0 - cp[i - 1];
            cp[i] = 1.0 / denom;
            dp[i] = (6.0 * (y_[i + 1] - 2.0 * y_[i] + y_[i - 1]) / (h * h) - dp[i - 1]) / denom;
        }
        for (int i = n - 2; i >= 1; --i) m_[i] = dp[i] - cp[i] * m_[i + 1];
    }

    double operator()(double z) const {
        if (z <= -grid_.L || z >= grid_.L) return 0.0;  // density-style decay
        int k = grid_.cell(z);
        double h = grid_.h;
        double a = (grid_.x(k + 1) - z) / h, b = (z - grid_.x(k)) / h;
        return a * y_[k] + b * y_[k + 1] +
               ((a * a * a - a) * m_[k] + (b * b * b - b) * m_[k + 1]) * h * h / 6.0;
    }

private:
    Grid grid_;
    std::vector<double> y_;
    std::vector<double> m_;
};

// Gauss-Hermite nodes/weights for integrals against exp(-y^2) dy.
struct GaussHermite {
    std::vector<double> nodes;
    std::vector<double> weights;  // sum = sqrt(pi)
    explicit GaussHermite(int n);
};

}  // namespace tap
