#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace lmoamp {

// Bernoulli-Gaussian prior: x = 0 w.p. 1-rho, x ~ N(0, 1/rho) w.p. rho,
// so the prior variance is exactly 1.
struct BgPrior {
    double rho;
    double component_variance;

    explicit BgPrior(double rho_);
};

// Closed-form pieces of the two-component posterior at noise level v, shared
// by the scalar entry points and the batch loops.
struct BgKernel {
    double rho;
    double sx2;     // component variance 1/rho
    double g;       // sx2 + v
    double c;       // sx2 / g, slope of the nonzero-component shrinkage
    double a;       // 1/v - 1/g > 0
    double tau;     // sx2 v / g, nonzero-component posterior variance
    double log_r0;  // log prior-odds of the zero component at s = 0

    BgKernel(double v, const BgPrior& prior);

    // P(x != 0 | s), log-sum-exp formulation so small rho and large |s| do
    // not underflow.
    double responsibility(double s) const {
        if (rho >= 1.0) return 1.0;
        const double log_r = log_r0 - 0.5 * a * s * s;
        if (log_r > 0.0) {
            const double e = std::exp(-log_r);
            return e / (1.0 + e);
        }
        return 1.0 / (1.0 + std::exp(log_r));
    }

    double mean(double s) const { return responsibility(s) * c * s; }

    double mean_derivative(double s) const {
        const double pi = responsibility(s);
        return c * (pi + a * s * s * pi * (1.0 - pi));
    }

    double second_moment(double s) const {
        const double pi = responsibility(s);
        return pi * (tau + c * c * s * s);
    }

    double variance(double s) const {
        const double pi = responsibility(s);
        return pi * tau + c * c * s * s * pi * (1.0 - pi);
    }
};

// Posterior mean f(s) = E[x | x + z = s], z ~ N(0, v). Odd, Lipschitz, and
// an MMSE shrinkage (|f(s)| < |s| asymptotically).
double bg_posterior_mean(double s, double v, const BgPrior& prior);
Eigen::VectorXd bg_posterior_mean(const Eigen::VectorXd& s, double v, const BgPrior& prior);

// Exact analytic derivative of bg_posterior_mean in s.
double bg_posterior_mean_derivative(double s, double v, const BgPrior& prior);
Eigen::VectorXd bg_posterior_mean_derivative(const Eigen::VectorXd& s, double v,
                                             const BgPrior& prior);

// Posterior variance C(s, s) = Var(x | s). Satisfies C(s, s) = v f'(s).
double bg_posterior_variance(double s, double v, const BgPrior& prior);

// Posterior second moment E[x^2 | s].
double bg_posterior_second_moment(double s, double v, const BgPrior& prior);

// E[(x - f(x + z))^2] for z ~ N(0, v), by quadrature over the two-component
// marginal of s. Strictly increasing in v; in (0, 1).
double bg_mmse(double v, const BgPrior& prior);

// Location and exponential width of the posterior responsibility switch at
// noise level v; quadrature panels are graded around it.
struct BgFeature {
    double center;
    double width;
};
BgFeature bg_switch_feature(double v, const BgPrior& prior);

// Bivariate posterior covariance
//   C(s1, s2) = E[{x - f_1(s1)}{x - f_2(s2)} | s1, s2]
// for observations s_i = x + w_i with noise covariance `v` (2x2 symmetric,
// PSD, positive diagonal), where f_i is the marginal posterior mean at noise
// variance v(i,i). The pair is reduced to its scalar sufficient statistic and
// the bivariate posterior is evaluated in closed form. When the noise is
// nested (v(0,1) = v(1,1)) the identity C(s1, s2) = C(s2, s2) is used.
// A singular `v` with non-nested structure is rejected.
double bg_posterior_covariance(double s1, double s2, const Eigen::Matrix2d& v,
                               const BgPrior& prior);

// Batch form of bg_posterior_covariance with the noise structure factored
// out once.
class BgPairKernel {
public:
    BgPairKernel(const Eigen::Matrix2d& v, const BgPrior& prior);
    double operator()(double s1, double s2) const;

private:
    bool nested_ = false;
    double q1_ = 0.0, q2_ = 0.0, qsum_ = 1.0;
    BgKernel k1_, k2_, k_star_;
};

// Scalar denoiser interface for the covariance estimator; only the BG
// posterior mean ships, tests plug in identity/zero denoisers.
struct ScalarDenoiser {
    std::function<double(double)> f;
    std::function<double(double)> df;
};

ScalarDenoiser bg_denoiser(double v, const BgPrior& prior);

// Consistent estimator of E[{X - f1(S1)}{X - f2(S2)}] from N paired samples
// (S1_n, S2_n) with known noise covariance w_cov = E[W1 W2], for a signal
// with E[X^2] = 1:
//   1 + f1 f2 + w_cov f2' - S1 f2 + w_cov f1' - S2 f1, averaged over samples.
// Rejects an empty sample set.
double consistent_cov_estimate(const std::vector<std::pair<double, double>>& samples,
                               double w_cov, const ScalarDenoiser& f1,
                               const ScalarDenoiser& f2);

}  // namespace lmoamp
