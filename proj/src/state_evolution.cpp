#include "lmoamp/state_evolution.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "lmoamp/gaussian_stat.hpp"
#include "lmoamp/quadrature.hpp"

namespace lmoamp {

namespace {

void require_finite(double x, const char* stage, int t) {
    if (!std::isfinite(x))
        throw std::runtime_error(std::string("state evolution: non-finite value at ") + stage +
                                 ", iteration " + std::to_string(t));
}

}  // namespace

double eta_geometric(double x, double delta, double kappa) {
    if (!(x >= 0.0)) throw std::invalid_argument("eta_geometric: x must be >= 0");
    if (!(delta > 0.0) || delta > 1.0)
        throw std::invalid_argument("eta_geometric: delta must be in (0, 1]");
    if (!(kappa >= 1.0)) throw std::invalid_argument("eta_geometric: kappa must be >= 1");
    if (kappa == 1.0) {
        // Single-atom limit: one squared singular value s2 = 1/delta.
        const double xs = x / delta;
        return 1.0 - delta * xs / (1.0 + xs);
    }
    const double k2 = kappa * kappa;
    const double C = 2.0 * std::log(kappa) / delta;
    return 1.0 - std::log((k2 - 1.0 + k2 * C * x) / (k2 - 1.0 + C * x)) / C;
}

double eta_geometric_derivative(double x, double delta, double kappa) {
    if (!(x >= 0.0)) throw std::invalid_argument("eta_geometric_derivative: x must be >= 0");
    if (kappa == 1.0) {
        const double s2 = 1.0 / delta;
        const double d = 1.0 + x * s2;
        return -1.0 / (d * d);
    }
    const double k2 = kappa * kappa;
    const double C = 2.0 * std::log(kappa) / delta;
    return -(k2 / (k2 - 1.0 + k2 * C * x) - 1.0 / (k2 - 1.0 + C * x));
}

SpectrumModel SpectrumModel::geometric(double delta, double kappa) {
    if (!(delta > 0.0) || delta > 1.0)
        throw std::invalid_argument("SpectrumModel: delta must be in (0, 1]");
    if (!(kappa >= 1.0)) throw std::invalid_argument("SpectrumModel: kappa must be >= 1");
    SpectrumModel m;
    m.empirical_ = false;
    m.delta_ = delta;
    m.kappa_ = kappa;
    return m;
}

SpectrumModel SpectrumModel::empirical(const SpectralProfile& profile) {
    SpectrumModel m;
    m.empirical_ = true;
    m.delta_ = profile.delta();
    m.kappa_ = profile.kappa;
    m.n_ = profile.N;
    m.sv2_ = profile.singular_values.array().square();
    return m;
}

double SpectrumModel::eta(double x) const {
    if (!empirical_) return eta_geometric(x, delta_, kappa_);
    double acc = static_cast<double>(n_) - static_cast<double>(sv2_.size());
    for (Eigen::Index m = 0; m < sv2_.size(); ++m) acc += 1.0 / (1.0 + x * sv2_[m]);
    return acc / n_;
}

double SpectrumModel::eta_derivative(double x) const {
    if (!empirical_) return eta_geometric_derivative(x, delta_, kappa_);
    double acc = 0.0;
    for (Eigen::Index m = 0; m < sv2_.size(); ++m) {
        const double d = 1.0 + x * sv2_[m];
        acc -= sv2_[m] / (d * d);
    }
    return acc / n_;
}

double SpectrumModel::post_cross(double v_left, double v_right, double c, double sigma2) const {
    const double eta_r = eta(v_right / sigma2);
    double gamma;
    if (std::abs(v_left - v_right) <= 1e-6 * std::max(v_left, v_right)) {
        gamma = eta_r + (v_right / sigma2) * eta_derivative(v_right / sigma2);
    } else {
        const double eta_l = eta(v_left / sigma2);
        gamma = (v_left * eta_l - v_right * eta_r) / (v_left - v_right);
    }
    // gamma c + sigma^2/N Tr(W_l W_r^T), rearranged around the exact value at
    // c = v_right to avoid cancellation between the two terms.
    return v_right * eta_r + gamma * (c - v_right);
}

namespace se_detail {

double xi_b_expectation(double v, const BgPrior& prior) {
    if (prior.rho >= 1.0) return 1.0 / (1.0 + v);
    const BgKernel k(v, prior);
    const BgFeature feat = bg_switch_feature(v, prior);
    const auto h = [&](double s) { return k.mean_derivative(s); };
    const double e0 = normal_expectation_even(h, std::sqrt(v), feat.center, feat.width);
    const double e1 = normal_expectation_even(h, std::sqrt(k.g), feat.center, feat.width);
    return (1.0 - prior.rho) * e0 + prior.rho * e1;
}

namespace {

// E[X f(X + W)], W ~ N(0, v). Only the nonzero component contributes, and
// conditioning the Gaussian pair (X, S) on S = X + W gives
//   E[X f(S)] = rho (sx2 / g) E_{S ~ N(0, g)}[S f(S)],  g = sx2 + v,
// which keeps the quadrature one-dimensional.
double x_times_f(double v, const BgPrior& prior) {
    const BgKernel k(v, prior);
    const BgFeature feat = bg_switch_feature(v, prior);
    const double e = normal_expectation_even([&](double s) { return s * k.mean(s); },
                                             std::sqrt(k.g), feat.center, feat.width);
    return prior.rho * (prior.component_variance / k.g) * e;
}

// E[f_l(S1) f_r(S2)] over one bivariate Gaussian branch of (S1, S2), by
// iterated adaptive quadrature. The responsibility switches are narrow and
// axis-aligned, so the outer level is seeded with f_l's switch plus the
// correlation image of f_r's switch, the inner level with f_r's own.
double ff_branch(double s11, double s12, double s22, double vl, double vr,
                 const BgPrior& prior) {
    const double sd1 = std::sqrt(s11);
    const double slope = s12 / s11;
    const double tau2 = std::max(s22 - s12 * slope, 0.0);
    const double tau = std::sqrt(tau2);
    const BgKernel kl(vl, prior);
    const BgKernel kr(vr, prior);

    const BgFeature fl_sw = bg_switch_feature(vl, prior);
    const BgFeature fr_sw = bg_switch_feature(vr, prior);
    std::vector<FeatureHint> inner_features{{fr_sw.center, fr_sw.width},
                                            {-fr_sw.center, fr_sw.width}};
    std::vector<FeatureHint> outer_features{{fl_sw.center, fl_sw.width},
                                            {-fl_sw.center, fl_sw.width}};
    if (std::abs(slope) > 1e-12) {
        const double image = fr_sw.center / slope;
        const double image_width = (fr_sw.width + tau) / std::abs(slope);
        outer_features.push_back({image, image_width});
        outer_features.push_back({-image, image_width});
    }

    auto inner = [&](double s1) {
        const double mu = slope * s1;
        if (tau < 1e-9 * std::sqrt(s22)) return kr.mean(mu);
        return gauss_expectation_adaptive([&](double s2) { return kr.mean(s2); }, mu, tau,
                                          inner_features, 1e-7);
    };
    return gauss_expectation_adaptive([&](double s1) { return kl.mean(s1) * inner(s1); },
                                      0.0, sd1, outer_features, 3e-7);
}

}  // namespace

double pair_error_covariance(double v_left, double v_right, double c, const BgPrior& prior) {
    if (!(v_left > 0.0) || !(v_right > 0.0))
        throw std::invalid_argument("pair_error_covariance: nonpositive variance");
    // Nested noise: the later statistic is sufficient (C(S1,S2) = C(S2,S2)).
    if (std::abs(c - v_right) <= 1e-9 * v_right) return bg_mmse(v_right, prior);
    // Heavily damped recursions push correlations to 1; clamp rounding
    // excursions past the Cauchy-Schwarz boundary to the degenerate limit.
    const double bound = std::sqrt(v_left * v_right);
    if (std::abs(c) > bound) {
        if (std::abs(c) > bound * (1.0 + 1e-6))
            throw std::invalid_argument("pair_error_covariance: covariance exceeds its bound");
        c = std::copysign(bound, c);
    }

    // Literal evaluation of E[{f_l(x+z_l) - x}{f_r(x+z_r) - x}]:
    //   1 + E[f_l f_r] - E[x f_r] - E[x f_l].
    const double sx2 = prior.component_variance;
    double ff = 0.0;
    if (prior.rho < 1.0)
        ff += (1.0 - prior.rho) * ff_branch(v_left, c, v_right, v_left, v_right, prior);
    ff += prior.rho *
          ff_branch(v_left + sx2, c + sx2, v_right + sx2, v_left, v_right, prior);
    return 1.0 + ff - x_times_f(v_right, prior) - x_times_f(v_left, prior);
}

double zero_cross(double v, const BgPrior& prior) {
    if (!(v > 0.0)) throw std::invalid_argument("zero_cross: nonpositive variance");
    return 1.0 - x_times_f(v, prior);
}

}  // namespace se_detail

SeBayesState se_bayes_step(const SeBayesState& state, const SpectrumModel& spectrum,
                           double sigma2, const BgPrior& prior) {
    if (!(state.v_ba > 0.0))
        throw std::runtime_error("se_bayes_step: nonpositive input variance");
    SeBayesState next;
    next.xi_a = spectrum.xi_a(state.v_ba, sigma2);
    require_finite(next.xi_a, "xi_A", -1);
    if (!(next.xi_a > 0.0) || !(next.xi_a < 1.0))
        throw std::runtime_error("se_bayes_step: xi_A outside (0,1)");
    next.v_ab = state.v_ba * next.xi_a / (1.0 - next.xi_a);
    require_finite(next.v_ab, "v_AB", -1);
    next.mse = bg_mmse(next.v_ab, prior);
    require_finite(next.mse, "mmse", -1);
    next.v_ba = 1.0 / (1.0 / next.mse - 1.0 / next.v_ab);
    require_finite(next.v_ba, "v_BA", -1);
    return next;
}

SeTrajectory se_bayes(const SpectrumModel& spectrum, double sigma2, const BgPrior& prior,
                      int T) {
    if (T < 1) throw std::invalid_argument("se_bayes: T must be >= 1");
    SeTrajectory out;
    SeBayesState state;
    for (int t = 0; t < T; ++t) {
        state = se_bayes_step(state, spectrum, sigma2, prior);
        out.xi_a.push_back(state.xi_a);
        out.xi_b.push_back(state.mse / state.v_ab);
        out.v_ab.push_back(state.v_ab);
        out.mse.push_back(state.mse);
        out.v_ba.push_back(state.v_ba);
    }
    return out;
}

SeTrajectory se_general(const SePolicy& policy, int T, const SpectrumModel& spectrum,
                        double sigma2, const BgPrior& prior) {
    if (T < 1) throw std::invalid_argument("se_general: T must be >= 1");
    const bool full = policy.full_memory;

    Eigen::MatrixXd v_ba = Eigen::MatrixXd::Zero(T + 1, T + 1);
    Eigen::MatrixXd v_ab = Eigen::MatrixXd::Zero(T, T);
    Eigen::MatrixXd ext_a = Eigen::MatrixXd::Zero(T, T);
    Eigen::MatrixXd ext_b = Eigen::MatrixXd::Zero(T, T);  // (t', t) <-> message (t'+1, t+1)
    v_ba(0, 0) = 1.0;

    std::vector<double> xi_a(T), xi_b(T), suf_a_diag(T), suf_b_diag(T), h0(T);
    std::vector<Eigen::VectorXd> a_cache(T), b_cache(T);  // V^{-1} 1 per iteration
    std::vector<Eigen::VectorXd> theta_a_vec(T), theta_b_vec(T);

    SeTrajectory out;
    for (int t = 0; t < T; ++t) {
        theta_a_vec[t] = geometric_damping(full ? 1.0 : policy.theta_a, t);
        theta_b_vec[t] = geometric_damping(full ? 1.0 : policy.theta_b, t);

        // Module A.
        std::vector<double> suf_a_cross(t + 1);
        if (full) {
            a_cache[t] = solve_ones(v_ba.topLeftCorner(t + 1, t + 1));
            const double g = a_cache[t].sum();
            if (!(g > 0.0))
                throw std::runtime_error("se_general: covariance inversion failure, iteration " +
                                         std::to_string(t));
            suf_a_diag[t] = 1.0 / g;
            for (int tp = 0; tp < t; ++tp)
                suf_a_cross[tp] = cross_covariance(v_ba.block(0, 0, tp + 1, t + 1), a_cache[tp],
                                                   a_cache[t]);
        } else {
            suf_a_diag[t] = v_ba(t, t);
            for (int tp = 0; tp < t; ++tp) suf_a_cross[tp] = v_ba(tp, t);
        }
        suf_a_cross[t] = suf_a_diag[t];

        xi_a[t] = spectrum.xi_a(suf_a_diag[t], sigma2);
        require_finite(xi_a[t], "xi_A", t);
        if (!(xi_a[t] < 1.0)) throw std::runtime_error("se_general: degenerate filter");
        for (int tp = 0; tp <= t; ++tp) {
            const double post =
                spectrum.post_cross(suf_a_diag[tp], suf_a_diag[t], suf_a_cross[tp], sigma2);
            const double e = (post - xi_a[tp] * xi_a[t] * suf_a_cross[tp]) /
                             ((1.0 - xi_a[tp]) * (1.0 - xi_a[t]));
            require_finite(e, "ext_A", t);
            ext_a(tp, t) = e;
            ext_a(t, tp) = e;
        }

        for (int tp = 0; tp <= t; ++tp) {
            double acc = 0.0;
            if (full) {
                acc = ext_a(tp, t);
            } else {
                for (int taup = 0; taup <= tp; ++taup)
                    for (int tau = 0; tau <= t; ++tau)
                        acc += theta_a_vec[tp][taup] * theta_a_vec[t][tau] * ext_a(taup, tau);
            }
            v_ab(tp, t) = acc;
            v_ab(t, tp) = acc;
        }

        // Module B.
        std::vector<double> suf_b_cross(t + 1);
        if (full) {
            b_cache[t] = solve_ones(v_ab.topLeftCorner(t + 1, t + 1));
            const double g = b_cache[t].sum();
            if (!(g > 0.0))
                throw std::runtime_error("se_general: covariance inversion failure, iteration " +
                                         std::to_string(t));
            suf_b_diag[t] = 1.0 / g;
            for (int tp = 0; tp < t; ++tp)
                suf_b_cross[tp] = cross_covariance(v_ab.block(0, 0, tp + 1, t + 1), b_cache[tp],
                                                   b_cache[t]);
        } else {
            suf_b_diag[t] = v_ab(t, t);
            for (int tp = 0; tp < t; ++tp) suf_b_cross[tp] = v_ab(tp, t);
        }
        suf_b_cross[t] = suf_b_diag[t];

        xi_b[t] = se_detail::xi_b_expectation(suf_b_diag[t], prior);
        require_finite(xi_b[t], "xi_B", t);
        if (!(xi_b[t] < 1.0)) throw std::runtime_error("se_general: degenerate denoiser");

        double mse_t = 0.0;
        for (int tp = 0; tp <= t; ++tp) {
            const double post = se_detail::pair_error_covariance(suf_b_diag[tp], suf_b_diag[t],
                                                                 suf_b_cross[tp], prior);
            if (tp == t) mse_t = post;
            const double e = (post - xi_b[tp] * xi_b[t] * suf_b_cross[tp]) /
                             ((1.0 - xi_b[tp]) * (1.0 - xi_b[t]));
            require_finite(e, "ext_B", t);
            ext_b(tp, t) = e;
            ext_b(t, tp) = e;
        }
        h0[t] = se_detail::zero_cross(suf_b_diag[t], prior) / (1.0 - xi_b[t]);

        double v0 = 0.0;
        for (int tau = 0; tau <= t; ++tau) v0 += theta_b_vec[t][tau] * h0[tau];
        v_ba(0, t + 1) = v0;
        v_ba(t + 1, 0) = v0;
        for (int tp = 0; tp <= t; ++tp) {
            double acc = 0.0;
            if (full) {
                acc = ext_b(tp, t);
            } else {
                for (int taup = 0; taup <= tp; ++taup)
                    for (int tau = 0; tau <= t; ++tau)
                        acc += theta_b_vec[tp][taup] * theta_b_vec[t][tau] * ext_b(taup, tau);
            }
            v_ba(tp + 1, t + 1) = acc;
            v_ba(t + 1, tp + 1) = acc;
        }

        out.xi_a.push_back(xi_a[t]);
        out.xi_b.push_back(xi_b[t]);
        out.v_ab.push_back(v_ab(t, t));
        out.mse.push_back(mse_t);
        out.v_ba.push_back(v_ba(t + 1, t + 1));
    }
    out.v_ab_full = v_ab;
    out.v_ba_full = v_ba;
    return out;
}

SeTrajectory se_damped_oamp(double theta_a, double theta_b, int T,
                            const SpectrumModel& spectrum, double sigma2,
                            const BgPrior& prior) {
    if (T < 1) throw std::invalid_argument("se_damped_oamp: T must be >= 1");
    if (!(theta_a > 0.0) || theta_a > 1.0 || !(theta_b > 0.0) || theta_b > 1.0)
        throw std::invalid_argument("se_damped_oamp: damping factors must be in (0, 1]");

    Eigen::MatrixXd v_ba = Eigen::MatrixXd::Zero(T + 1, T + 1);
    Eigen::MatrixXd v_ab = Eigen::MatrixXd::Zero(T, T);
    Eigen::MatrixXd ext_a = Eigen::MatrixXd::Zero(T, T);
    Eigen::MatrixXd ext_b = Eigen::MatrixXd::Zero(T, T);  // (t', t) <-> (t'+1, t+1)
    Eigen::MatrixXd c_a = Eigen::MatrixXd::Zero(T, T);    // (ext index, message index)
    Eigen::MatrixXd c_b = Eigen::MatrixXd::Zero(T + 1, T + 1);  // message indices >= 1
    v_ba(0, 0) = 1.0;

    std::vector<double> xi_a(T), xi_b(T), ext_b0(T);
    SeTrajectory out;

    for (int t = 0; t < T; ++t) {
        // Module A: T_t = {t}, so the sufficient statistic is the message
        // itself and the covariances enter the extrinsic step directly.
        xi_a[t] = spectrum.xi_a(v_ba(t, t), sigma2);
        require_finite(xi_a[t], "xi_A", t);
        if (!(xi_a[t] < 1.0)) throw std::runtime_error("se_damped_oamp: degenerate filter");
        for (int tp = 0; tp <= t; ++tp) {
            const double post = spectrum.post_cross(v_ba(tp, tp), v_ba(t, t), v_ba(tp, t), sigma2);
            const double e = (post - xi_a[tp] * xi_a[t] * v_ba(tp, t)) /
                             ((1.0 - xi_a[tp]) * (1.0 - xi_a[t]));
            require_finite(e, "ext_A", t);
            ext_a(tp, t) = e;
            ext_a(t, tp) = e;
        }

        if (t == 0) {
            v_ab(0, 0) = ext_a(0, 0);
            c_a(0, 0) = ext_a(0, 0);
        } else {
            for (int tp = 0; tp < t; ++tp)
                c_a(tp, t) = theta_a * ext_a(tp, t) + (1.0 - theta_a) * c_a(tp, t - 1);
            c_a(t, 0) = ext_a(t, 0);
            for (int tau = 1; tau <= t; ++tau)
                c_a(t, tau) = theta_a * ext_a(t, tau) + (1.0 - theta_a) * c_a(t, tau - 1);

            v_ab(0, t) = theta_a * ext_a(0, t) + (1.0 - theta_a) * c_a(0, t - 1);
            v_ab(t, 0) = v_ab(0, t);
            for (int tp = 1; tp <= t; ++tp) {
                v_ab(tp, t) = theta_a * c_a(tp, t) + (1.0 - theta_a) * v_ab(tp - 1, t);
                v_ab(t, tp) = v_ab(tp, t);
            }
        }

        // Module B.
        xi_b[t] = se_detail::xi_b_expectation(v_ab(t, t), prior);
        require_finite(xi_b[t], "xi_B", t);
        if (!(xi_b[t] < 1.0)) throw std::runtime_error("se_damped_oamp: degenerate denoiser");
        const double mse_t = bg_mmse(v_ab(t, t), prior);
        ext_b0[t] = se_detail::zero_cross(v_ab(t, t), prior) / (1.0 - xi_b[t]);
        for (int tp = 0; tp <= t; ++tp) {
            const double post = se_detail::pair_error_covariance(v_ab(tp, tp), v_ab(t, t),
                                                                 v_ab(tp, t), prior);
            const double e = (post - xi_b[tp] * xi_b[t] * v_ab(tp, t)) /
                             ((1.0 - xi_b[tp]) * (1.0 - xi_b[t]));
            require_finite(e, "ext_B", t);
            ext_b(tp, t) = e;
            ext_b(t, tp) = e;
        }

        if (t == 0) {
            v_ba(0, 1) = ext_b0[0];
            v_ba(1, 0) = ext_b0[0];
            v_ba(1, 1) = ext_b(0, 0);
            c_b(1, 1) = ext_b(0, 0);
        } else {
            // c_b(m, t+1) for old messages m = 1..t, then the new row m = t+1.
            for (int m = 1; m <= t; ++m)
                c_b(m, t + 1) = theta_b * ext_b(m - 1, t) + (1.0 - theta_b) * c_b(m, t);
            c_b(t + 1, 1) = ext_b(t, 0);
            for (int tau = 2; tau <= t + 1; ++tau)
                c_b(t + 1, tau) =
                    theta_b * ext_b(t, tau - 1) + (1.0 - theta_b) * c_b(t + 1, tau - 1);

            v_ba(0, t + 1) = theta_b * ext_b0[t] + (1.0 - theta_b) * v_ba(0, t);
            v_ba(t + 1, 0) = v_ba(0, t + 1);
            v_ba(1, t + 1) = theta_b * ext_b(0, t) + (1.0 - theta_b) * c_b(1, t);
            v_ba(t + 1, 1) = v_ba(1, t + 1);
            for (int tp = 1; tp <= t; ++tp) {
                v_ba(tp + 1, t + 1) =
                    theta_b * c_b(tp + 1, t + 1) + (1.0 - theta_b) * v_ba(tp, t + 1);
                v_ba(t + 1, tp + 1) = v_ba(tp + 1, t + 1);
            }
        }

        out.xi_a.push_back(xi_a[t]);
        out.xi_b.push_back(xi_b[t]);
        out.v_ab.push_back(v_ab(t, t));
        out.mse.push_back(mse_t);
        out.v_ba.push_back(v_ba(t + 1, t + 1));
    }
    out.v_ab_full = v_ab;
    out.v_ba_full = v_ba;
    return out;
}

SeTrajectory se_heuristic_damped(double theta_a, double theta_b, int T,
                                 const SpectrumModel& spectrum, double sigma2,
                                 const BgPrior& prior, HeuristicDomain domain) {
    if (T < 1) throw std::invalid_argument("se_heuristic_damped: T must be >= 1");
    SeTrajectory out;
    double v_ba = 1.0;
    double v_ab_prev = 0.0;
    for (int t = 0; t < T; ++t) {
        const double xa = spectrum.xi_a(v_ba, sigma2);
        require_finite(xa, "xi_A", t);
        const double v_post_a = xa * v_ba;
        const double prec_ext_a = 1.0 / v_post_a - 1.0 / v_ba;
        double v_ab;
        if (t == 0) {
            v_ab = 1.0 / prec_ext_a;
        } else if (domain == HeuristicDomain::precision) {
            v_ab = 1.0 / (theta_a * prec_ext_a + (1.0 - theta_a) / v_ab_prev);
        } else {
            v_ab = theta_a / prec_ext_a + (1.0 - theta_a) * v_ab_prev;
        }
        require_finite(v_ab, "v_AB", t);

        const double mse_t = bg_mmse(v_ab, prior);
        const double v_post_b = mse_t;
        double v_ba_next;
        if (t == 0) {
            v_ba_next = 1.0 / (1.0 / v_post_b - 1.0 / v_ab);
        } else if (domain == HeuristicDomain::precision) {
            v_ba_next = 1.0 / (theta_b * (1.0 / v_post_b - 1.0 / v_ab) + (1.0 - theta_b) / v_ba);
        } else {
            v_ba_next =
                theta_b / (1.0 / v_post_b - 1.0 / v_ba) + (1.0 - theta_b) * v_ab;
        }
        require_finite(v_ba_next, "v_BA", t);

        out.xi_a.push_back(xa);
        out.xi_b.push_back(mse_t / v_ab);
        out.v_ab.push_back(v_ab);
        out.mse.push_back(mse_t);
        out.v_ba.push_back(v_ba_next);
        v_ab_prev = v_ab;
        v_ba = v_ba_next;
    }
    return out;
}

FixedPoint fixed_point(const SpectrumModel& spectrum, double sigma2, const BgPrior& prior,
                       double tol, int max_iter) {
    if (!(tol > 0.0)) throw std::invalid_argument("fixed_point: tol must be positive");
    if (max_iter < 1) throw std::invalid_argument("fixed_point: max_iter must be >= 1");
    FixedPoint fp;
    SeBayesState state;
    for (int it = 0; it < max_iter; ++it) {
        const SeBayesState next = se_bayes_step(state, spectrum, sigma2, prior);
        if (next.v_ba > state.v_ba * (1.0 + 1e-12) + 1e-300)
            throw std::runtime_error("fixed_point: variance increased, sequence not monotone");
        const double delta = std::abs(next.v_ba - state.v_ba);
        fp.iterations = it + 1;
        fp.v_ba = next.v_ba;
        fp.v_ab = next.v_ab;
        fp.mse = next.mse;
        state = next;
        if (delta < tol) {
            fp.converged = true;
            return fp;
        }
    }
    fp.converged = false;
    return fp;
}

}  // namespace lmoamp
