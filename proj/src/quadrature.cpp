#include "lmoamp/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace lmoamp {

GaussHermite::GaussHermite(int n) {
    if (n < 1) throw std::invalid_argument("GaussHermite: order must be >= 1");
    // Jacobi matrix of the (physicists') Hermite polynomials: zero diagonal,
    // off-diagonal sqrt(k/2).
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        const double b = std::sqrt(k / 2.0);
        jacobi(k, k - 1) = b;
        jacobi(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
    nodes = es.eigenvalues();
    weights.resize(n);
    const double mu0 = std::sqrt(std::numbers::pi);
    for (int i = 0; i < n; ++i) {
        const double q0 = es.eigenvectors()(0, i);
        weights[i] = mu0 * q0 * q0;
    }
}

const GaussHermite& gh63() {
    static const GaussHermite rule(63);
    return rule;
}

GaussLegendre::GaussLegendre(int n) {
    if (n < 1) throw std::invalid_argument("GaussLegendre: order must be >= 1");
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        const double b = k / std::sqrt(4.0 * k * k - 1.0);
        jacobi(k, k - 1) = b;
        jacobi(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
    nodes = es.eigenvalues();
    weights.resize(n);
    for (int i = 0; i < n; ++i) {
        const double q0 = es.eigenvectors()(0, i);
        weights[i] = 2.0 * q0 * q0;
    }
}

const GaussLegendre& gl20() {
    static const GaussLegendre rule(20);
    return rule;
}

std::vector<double> adaptive_segments(double mu, double sd,
                                      const std::vector<FeatureHint>& features) {
    const double lo = mu - 9.0 * sd;
    const double hi = mu + 9.0 * sd;
    std::vector<double> pts{lo, hi};
    // Quarter the Gaussian bulk so the coarse pass sees its shape.
    for (int k = -3; k <= 3; ++k) pts.push_back(mu + 2.25 * k * sd);
    for (const auto& fh : features) {
        if (!(fh.width > 0.0) || !std::isfinite(fh.width)) continue;
        const double m = 45.0 * fh.width;
        for (double edge : {fh.center - m, fh.center - 6.0 * fh.width, fh.center,
                            fh.center + 6.0 * fh.width, fh.center + m}) {
            if (edge > lo && edge < hi) pts.push_back(edge);
        }
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [&](double a, double b) { return b - a < 1e-14 * sd; }),
              pts.end());
    if (pts.back() < hi) pts.push_back(hi);
    return pts;
}

std::vector<double> graded_panels(double sd, double center, double width) {
    const double upper = 9.0 * sd;
    const double cap = 0.75 * sd;  // Gaussian-weight resolution
    std::vector<double> breaks{0.0};
    auto push_until = [&](double from, double to, double first_width) {
        double pos = from;
        double w = std::min(first_width, cap);
        while (pos < to) {
            pos = std::min(pos + w, to);
            breaks.push_back(pos);
            w = std::min(2.0 * w, cap);
        }
    };

    if (!(width > 0.0) || width >= sd) {
        push_until(0.0, upper, cap);
        return breaks;
    }

    const double margin = 45.0 * width;
    const double lo = std::max(0.0, center - margin);
    const double hi = std::min(upper, center + margin);

    if (lo > 0.0) {
        // Geometric panels shrinking toward the feature boundary.
        std::vector<double> down;
        double pos = lo;
        double w = std::min(6.0 * width, cap);
        while (pos > 0.0) {
            pos = std::max(pos - w, 0.0);
            down.push_back(pos);
            w = std::min(2.0 * w, cap);
        }
        for (auto it = down.rbegin(); it != down.rend(); ++it)
            if (*it > 0.0) breaks.push_back(*it);
        breaks.push_back(lo);
    }
    if (hi > lo) {
        const int n_feature = std::max(1, static_cast<int>(std::ceil((hi - lo) / (6.0 * width))));
        const double step = (hi - lo) / n_feature;
        for (int i = 1; i <= n_feature; ++i) breaks.push_back(lo + i * step);
    }
    if (hi < upper) push_until(hi, upper, 6.0 * width);
    return breaks;
}

}  // namespace lmoamp
