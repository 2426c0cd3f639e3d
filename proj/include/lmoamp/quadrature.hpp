#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <vector>

namespace lmoamp {

// Gauss-Hermite rule for integrals of the form int exp(-u^2) f(u) du.
// Nodes/weights come from the Golub-Welsch eigendecomposition of the Jacobi
// matrix, computed once at first use.
struct GaussHermite {
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights;

    explicit GaussHermite(int n);

    // E[f(Z)] for Z ~ N(0,1): sum_i w_i f(sqrt(2) u_i) / sqrt(pi).
    template <class F>
    double normal_expectation(F&& f) const {
        double acc = 0.0;
        for (int i = 0; i < nodes.size(); ++i) {
            acc += weights[i] * f(std::numbers::sqrt2 * nodes[i]);
        }
        return acc * inv_sqrt_pi;
    }

    static constexpr double inv_sqrt_pi = 0.5641895835477562869;
};

// Shared 63-point rule, used for the smooth 2-D expectations.
const GaussHermite& gh63();

// Gauss-Legendre rule on [-1, 1].
struct GaussLegendre {
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights;

    explicit GaussLegendre(int n);
};

const GaussLegendre& gl20();

// Panel breakpoints on [0, 9 sd] graded to resolve an even interior feature
// at |s| = center with exponential width `width` (posterior responsibility
// switches are far narrower than the Gaussian scale at low noise, which a
// fixed Hermite rule cannot resolve).
std::vector<double> graded_panels(double sd, double center, double width);

// Interior structure of an integrand: an exponential transition at an
// absolute position (pass both signs explicitly when symmetric).
struct FeatureHint {
    double center;
    double width;
};

// Integration segments for E[h(Y)], Y ~ N(mu, sd^2): [mu - 9 sd, mu + 9 sd]
// split at every feature window so adaptive refinement cannot step over a
// narrow transition.
std::vector<double> adaptive_segments(double mu, double sd,
                                      const std::vector<FeatureHint>& features);

namespace detail {

template <class F>
double adaptive_simpson(F& f, double a, double fa, double b, double fb, double m, double fm,
                        double whole, double eps, int depth) {
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * eps) return left + right + delta / 15.0;
    return adaptive_simpson(f, a, fa, m, fm, lm, flm, left, 0.5 * eps, depth - 1) +
           adaptive_simpson(f, m, fm, b, fb, rm, frm, right, 0.5 * eps, depth - 1);
}

}  // namespace detail

// E[h(Y)], Y ~ N(mu, sd^2), by feature-aware piecewise-adaptive Simpson.
template <class F>
double gauss_expectation_adaptive(F&& h, double mu, double sd,
                                  const std::vector<FeatureHint>& features,
                                  double rel_tol = 1e-7) {
    const std::vector<double> seg = adaptive_segments(mu, sd, features);
    const double norm = 1.0 / (sd * 2.5066282746310005024);
    auto f = [&](double y) {
        const double z = (y - mu) / sd;
        return norm * std::exp(-0.5 * z * z) * h(y);
    };
    // Coarse pass to scale the per-segment tolerance.
    std::vector<double> fa(seg.size()), fm(seg.size() - 1), coarse(seg.size() - 1);
    for (std::size_t i = 0; i < seg.size(); ++i) fa[i] = f(seg[i]);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < seg.size(); ++i) {
        const double m = 0.5 * (seg[i] + seg[i + 1]);
        fm[i] = f(m);
        coarse[i] = (seg[i + 1] - seg[i]) / 6.0 * (fa[i] + 4.0 * fm[i] + fa[i + 1]);
        total += std::abs(coarse[i]);
    }
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < seg.size(); ++i) {
        const double eps = rel_tol * (std::abs(coarse[i]) + 1e-3 * total) + 1e-300;
        const double m = 0.5 * (seg[i] + seg[i + 1]);
        acc += detail::adaptive_simpson(f, seg[i], fa[i], seg[i + 1], fa[i + 1], m, fm[i],
                                        coarse[i], eps, 26);
    }
    return acc;
}

// E[h(S)] for S ~ N(0, sd^2) and even h, by composite Gauss-Legendre over
// graded panels.
template <class F>
double normal_expectation_even(F&& h, double sd, double feature_center, double feature_width) {
    const std::vector<double> breaks = graded_panels(sd, feature_center, feature_width);
    const auto& gl = gl20();
    const double inv_norm = 1.0 / (sd * 2.5066282746310005024);  // sd sqrt(2 pi)
    double acc = 0.0;
    for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
        const double a = breaks[p];
        const double b = breaks[p + 1];
        const double half = 0.5 * (b - a);
        const double mid = 0.5 * (a + b);
        double panel = 0.0;
        for (int i = 0; i < gl.nodes.size(); ++i) {
            const double s = mid + half * gl.nodes[i];
            const double z = s / sd;
            panel += gl.weights[i] * std::exp(-0.5 * z * z) * h(s);
        }
        acc += panel * half;
    }
    return 2.0 * acc * inv_norm;
}

}  // namespace lmoamp
