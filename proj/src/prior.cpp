#include "lmoamp/prior.hpp"

#include <cmath>
#include <stdexcept>

#include "lmoamp/quadrature.hpp"

namespace lmoamp {

namespace {

void check_noise(double v) {
    if (!(v > 0.0)) throw std::invalid_argument("bg prior: noise variance must be positive");
}

}  // namespace

BgKernel::BgKernel(double v, const BgPrior& prior)
    : rho(prior.rho),
      sx2(prior.component_variance),
      g(sx2 + v),
      c(sx2 / g),
      a(1.0 / v - 1.0 / g),
      tau(sx2 * v / g),
      log_r0(rho < 1.0 ? std::log((1.0 - rho) / rho) + 0.5 * std::log(g / v)
                       : -std::numeric_limits<double>::infinity()) {
    check_noise(v);
}

BgPrior::BgPrior(double rho_) : rho(rho_), component_variance(1.0 / rho_) {
    if (!(rho_ > 0.0) || rho_ > 1.0)
        throw std::invalid_argument("BgPrior: rho must be in (0, 1]");
}

double bg_posterior_mean(double s, double v, const BgPrior& prior) {
    check_noise(v);
    return BgKernel(v, prior).mean(s);
}

Eigen::VectorXd bg_posterior_mean(const Eigen::VectorXd& s, double v, const BgPrior& prior) {
    check_noise(v);
    const BgKernel k(v, prior);
    Eigen::VectorXd out(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) out[i] = k.mean(s[i]);
    return out;
}

double bg_posterior_mean_derivative(double s, double v, const BgPrior& prior) {
    check_noise(v);
    return BgKernel(v, prior).mean_derivative(s);
}

Eigen::VectorXd bg_posterior_mean_derivative(const Eigen::VectorXd& s, double v,
                                             const BgPrior& prior) {
    check_noise(v);
    const BgKernel k(v, prior);
    Eigen::VectorXd out(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) out[i] = k.mean_derivative(s[i]);
    return out;
}

double bg_posterior_variance(double s, double v, const BgPrior& prior) {
    check_noise(v);
    return BgKernel(v, prior).variance(s);
}

double bg_posterior_second_moment(double s, double v, const BgPrior& prior) {
    check_noise(v);
    return BgKernel(v, prior).second_moment(s);
}

BgFeature bg_switch_feature(double v, const BgPrior& prior) {
    if (prior.rho >= 1.0) return {0.0, std::numeric_limits<double>::infinity()};
    const BgKernel k(v, prior);
    if (k.log_r0 > 0.0) {
        const double center = std::sqrt(2.0 * k.log_r0 / k.a);
        return {center, 1.0 / (k.a * center)};
    }
    return {0.0, std::sqrt(2.0 / k.a)};
}

double bg_mmse(double v, const BgPrior& prior) {
    check_noise(v);
    if (prior.rho >= 1.0) return v / (1.0 + v);
    const BgKernel k(v, prior);
    const BgFeature feat = bg_switch_feature(v, prior);
    const auto h = [&](double s) { return k.variance(s); };
    const double m_zero = normal_expectation_even(h, std::sqrt(v), feat.center, feat.width);
    const double m_spike = normal_expectation_even(h, std::sqrt(k.g), feat.center, feat.width);
    return (1.0 - prior.rho) * m_zero + prior.rho * m_spike;
}

BgPairKernel::BgPairKernel(const Eigen::Matrix2d& v, const BgPrior& prior)
    : k1_(v(0, 0), prior), k2_(v(1, 1), prior), k_star_(v(1, 1), prior) {
    const double v11 = v(0, 0), v22 = v(1, 1);
    const double v12 = 0.5 * (v(0, 1) + v(1, 0));
    if (std::abs(v(0, 1) - v(1, 0)) > 1e-12 * (std::abs(v11) + std::abs(v22)))
        throw std::invalid_argument("bg_posterior_covariance: noise covariance not symmetric");
    if (!(v11 > 0.0) || !(v22 > 0.0))
        throw std::invalid_argument("bg_posterior_covariance: nonpositive noise variance");

    // Nested noise E[W1 W2] = E[W2^2]: the later observation is a sufficient
    // statistic and C(s1, s2) = C(s2, s2).
    if (std::abs(v12 - v22) <= 1e-9 * v22) {
        nested_ = true;
        return;
    }
    const double det = v11 * v22 - v12 * v12;
    if (det <= 1e-12 * v11 * v22)
        throw std::invalid_argument(
            "bg_posterior_covariance: singular non-nested noise covariance");

    // Reduce the pair to its scalar sufficient statistic S* = Y Sigma^{-1} 1 /
    // (1^T Sigma^{-1} 1) with noise variance 1 / (1^T Sigma^{-1} 1).
    q1_ = v22 - v12;
    q2_ = v11 - v12;
    qsum_ = q1_ + q2_;
    k_star_ = BgKernel(det / qsum_, prior);
}

double BgPairKernel::operator()(double s1, double s2) const {
    if (nested_) return k2_.variance(s2);
    const double s_star = (q1_ * s1 + q2_ * s2) / qsum_;
    const double f1 = k1_.mean(s1);
    const double f2 = k2_.mean(s2);
    const double mu = k_star_.mean(s_star);
    return k_star_.second_moment(s_star) - (f1 + f2) * mu + f1 * f2;
}

double bg_posterior_covariance(double s1, double s2, const Eigen::Matrix2d& v,
                               const BgPrior& prior) {
    return BgPairKernel(v, prior)(s1, s2);
}

ScalarDenoiser bg_denoiser(double v, const BgPrior& prior) {
    check_noise(v);
    return ScalarDenoiser{
        [v, prior](double s) { return bg_posterior_mean(s, v, prior); },
        [v, prior](double s) { return bg_posterior_mean_derivative(s, v, prior); }};
}

double consistent_cov_estimate(const std::vector<std::pair<double, double>>& samples,
                               double w_cov, const ScalarDenoiser& f1,
                               const ScalarDenoiser& f2) {
    if (samples.empty())
        throw std::invalid_argument("consistent_cov_estimate: empty sample set");
    double acc = 0.0;
    for (const auto& [s1, s2] : samples) {
        const double a = f1.f(s1);
        const double b = f2.f(s2);
        acc += 1.0 + a * b + w_cov * f2.df(s2) - s1 * b + w_cov * f1.df(s1) - s2 * a;
    }
    return acc / static_cast<double>(samples.size());
}

}  // namespace lmoamp
