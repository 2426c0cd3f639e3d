#include "lmoamp/solver.hpp"

#include <cmath>
#include <stdexcept>

namespace lmoamp {

void MemoryPolicy::validate() const {
    if (mode == MemoryMode::full && damping != DampingStyle::none)
        throw std::invalid_argument("MemoryPolicy: full memory requires no damping");
    if (!(theta_a > 0.0) || theta_a > 1.0 || !(theta_b > 0.0) || theta_b > 1.0)
        throw std::invalid_argument("MemoryPolicy: damping factors must be in (0, 1]");
    if (!(psd_eps > 0.0)) throw std::invalid_argument("MemoryPolicy: psd_eps must be positive");
    if (t_cap < 1) throw std::invalid_argument("MemoryPolicy: t_cap must be >= 1");
}

MemoryPolicy MemoryPolicy::lm_full() { return MemoryPolicy{}; }

MemoryPolicy MemoryPolicy::oamp() {
    MemoryPolicy p;
    p.mode = MemoryMode::latest;
    p.damping = DampingStyle::none;
    return p;
}

MemoryPolicy MemoryPolicy::damped(DampingStyle style, double theta_a, double theta_b) {
    MemoryPolicy p;
    p.mode = MemoryMode::latest;
    p.damping = style;
    p.theta_a = theta_a;
    p.theta_b = theta_b;
    return p;
}

Eigen::VectorXd lmmse_filter_diag(double v_suf, const SpectralProfile& profile, double sigma2) {
    if (!(v_suf > 0.0)) throw std::invalid_argument("lmmse_filter_diag: v_suf must be positive");
    Eigen::VectorXd w(profile.M);
    for (int m = 0; m < profile.M; ++m) {
        const double s = profile.singular_values[m];
        w[m] = v_suf * s / (sigma2 + v_suf * s * s);
    }
    return w;
}

double xi_a_from_diag(const Eigen::VectorXd& w_diag, const SpectralProfile& profile) {
    double acc = static_cast<double>(profile.N - profile.M);
    for (int m = 0; m < profile.M; ++m)
        acc += 1.0 - w_diag[m] * profile.singular_values[m];
    return acc / profile.N;
}

double gamma_cross(const Eigen::VectorXd& w_left, const Eigen::VectorXd& w_right,
                   const SpectralProfile& profile) {
    double acc = static_cast<double>(profile.N - profile.M);
    for (int m = 0; m < profile.M; ++m) {
        const double s = profile.singular_values[m];
        acc += (1.0 - w_left[m] * s) * (1.0 - w_right[m] * s);
    }
    return acc / profile.N;
}

namespace {

// The geometric-damping column theta_{.,t} applied to an extrinsic ledger:
// v_{t',t} = sum_{tau'<=t'} sum_{tau<=t} theta_{tau',t'} theta_{tau,t} e_{tau',tau}.
double damped_entry(const CovarianceLedger& ext, const std::vector<Eigen::VectorXd>& theta,
                    int tp, int t) {
    double acc = 0.0;
    for (int taup = 0; taup <= tp; ++taup) {
        double inner = 0.0;
        for (int tau = 0; tau <= t; ++tau) inner += theta[t][tau] * ext(taup, tau);
        acc += theta[tp][taup] * inner;
    }
    return acc;
}

}  // namespace

SolverResult run_solver(const ProblemInstance& problem, const MemoryPolicy& policy,
                        const BgPrior& prior, int t_max, double stop_tol) {
    policy.validate();
    if (t_max < 1) throw std::invalid_argument("run_solver: t_max must be >= 1");
    if (t_max > policy.t_cap)
        throw std::invalid_argument("run_solver: t_max exceeds the memory cap");

    const SpectralProfile& profile = problem.op.profile;
    const int N = profile.N;
    const double sigma2 = problem.sigma2;
    const bool full = policy.mode == MemoryMode::full;
    const bool heuristic = policy.damping == DampingStyle::heuristic_precision ||
                           policy.damping == DampingStyle::heuristic_variance;
    const bool track_cov = !heuristic;

    SolverResult res;
    Eigen::MatrixXd x_ba(N, t_max + 1);
    x_ba.col(0).setZero();
    Eigen::MatrixXd x_ab(N, t_max);
    Eigen::MatrixXd suf_b_hist(N, t_max);
    Eigen::MatrixXd fpost_hist(N, t_max);

    CovarianceLedger v_ba(1.0);  // v_{B->A,0,0} = E||x||^2 / N = 1
    CovarianceLedger v_ab;
    CovarianceLedger ext_a;
    CovarianceLedger ext_b;

    std::vector<Eigen::VectorXd> w_diags;
    std::vector<Eigen::VectorXd> a_cache, b_cache;
    std::vector<Eigen::VectorXd> theta_a_vec, theta_b_vec;
    std::vector<double> h0;  // v^post_{B,0,tau+1} / (1 - xi_{B,tau})
    double v_ab_scalar = 0.0, v_ba_scalar = 1.0;  // heuristic variance tracking

    for (int t = 0; t < t_max; ++t) {
      try {
        theta_a_vec.push_back(geometric_damping(full ? 1.0 : policy.theta_a, t));
        theta_b_vec.push_back(geometric_damping(full ? 1.0 : policy.theta_b, t));

        // ---------- Module A ----------
        Eigen::VectorXd x_suf_a;
        double v_suf_a;
        std::vector<double> suf_a_cross(t + 1, 0.0);
        if (full) {
            Eigen::VectorXd a;
            try {
                a = solve_ones(v_ba.matrix());
            } catch (const std::exception& e) {
                throw SolverError(std::string("module A sufficient statistic: ") + e.what(), t);
            }
            const double g = a.sum();
            if (!(g > 0.0))
                throw SolverError("module A: 1^T V^{-1} 1 <= 0, covariance tracking corrupt", t);
            v_suf_a = 1.0 / g;
            x_suf_a = x_ba.leftCols(t + 1) * (a / g);
            a_cache.push_back(a);
            for (int tp = 0; tp < t; ++tp)
                suf_a_cross[tp] = cross_covariance(v_ba.matrix().topLeftCorner(tp + 1, t + 1),
                                                   a_cache[tp], a);
        } else {
            x_suf_a = x_ba.col(t);
            v_suf_a = track_cov ? v_ba(t, t) : v_ba_scalar;
            if (track_cov)
                for (int tp = 0; tp < t; ++tp) suf_a_cross[tp] = v_ba(tp, t);
        }
        suf_a_cross[t] = v_suf_a;
        if (!(v_suf_a > 0.0)) throw SolverError("module A: nonpositive statistic variance", t);

        Eigen::VectorXd w =
            policy.filter == FilterKind::lmmse
                ? lmmse_filter_diag(v_suf_a, profile, sigma2)
                : Eigen::VectorXd(profile.singular_values);  // matched filter W = A
        const double xi_a = xi_a_from_diag(w, profile);
        if (std::abs(1.0 - xi_a) < 1e-12)
            throw SolverError("module A: degenerate filter, xi_A = 1", t);
        w_diags.push_back(w);
        res.xi_a.push_back(xi_a);

        const Eigen::VectorXd residual = problem.y - problem.op.apply(x_suf_a);
        const Eigen::VectorXd x_post_a = x_suf_a + problem.op.filter_adjoint(w, residual);
        const Eigen::VectorXd x_ext_a = (x_post_a - xi_a * x_suf_a) / (1.0 - xi_a);

        std::vector<double> v_ext_a(t + 1, 0.0);
        double v_post_a_tt = 0.0;
        for (int tp = track_cov ? 0 : t; tp <= t; ++tp) {
            const double gamma = gamma_cross(w_diags[tp], w, profile);
            const double tr_ww = w_diags[tp].dot(w);
            const double v_post = gamma * suf_a_cross[tp] + sigma2 * tr_ww / N;
            if (tp == t) v_post_a_tt = v_post;
            v_ext_a[tp] = (v_post - res.xi_a[tp] * xi_a * suf_a_cross[tp]) /
                          ((1.0 - res.xi_a[tp]) * (1.0 - xi_a));
        }
        res.v_suf_a.push_back(v_suf_a);
        res.v_post_a.push_back(v_post_a_tt);

        // LM damping of the extrinsic messages.
        if (full || t == 0) {
            x_ab.col(t) = x_ext_a;
        } else {
            x_ab.col(t) = policy.theta_a * x_ext_a + (1.0 - policy.theta_a) * x_ab.col(t - 1);
        }
        if (track_cov && !(v_ext_a[t] > 0.0))
            throw SolverError("module A: nonpositive extrinsic variance", t);
        if (track_cov) {
            Eigen::VectorXd cross(t);
            if (policy.damping == DampingStyle::correct_covariance) {
                ext_a.append(Eigen::Map<const Eigen::VectorXd>(v_ext_a.data(), t), v_ext_a[t]);
                if (policy.guard_ledgers) ext_a.psd_guard(policy.psd_eps);
                for (int tp = 0; tp < t; ++tp)
                    cross[tp] = damped_entry(ext_a, theta_a_vec, tp, t);
                v_ab.append(cross, damped_entry(ext_a, theta_a_vec, t, t));
            } else {
                for (int tp = 0; tp < t; ++tp) cross[tp] = v_ext_a[tp];
                v_ab.append(cross, v_ext_a[t]);
            }
            if (policy.guard_ledgers) v_ab.psd_guard(policy.psd_eps);
        } else {
            const double prec_ext = 1.0 / v_post_a_tt - 1.0 / v_suf_a;
            if (!(prec_ext > 0.0))
                throw SolverError("module A: nonpositive extrinsic precision", t);
            if (t == 0) {
                v_ab_scalar = 1.0 / prec_ext;
            } else if (policy.damping == DampingStyle::heuristic_precision) {
                v_ab_scalar =
                    1.0 / (policy.theta_a * prec_ext + (1.0 - policy.theta_a) / v_ab_scalar);
            } else {
                v_ab_scalar =
                    policy.theta_a / prec_ext + (1.0 - policy.theta_a) * v_ab_scalar;
            }
        }
        res.v_ab_diag.push_back(track_cov ? v_ab(t, t) : v_ab_scalar);

        // ---------- Module B ----------
        Eigen::VectorXd x_suf_b;
        double v_suf_b;
        std::vector<double> suf_b_cross(t + 1, 0.0);
        if (full) {
            Eigen::VectorXd b;
            try {
                b = solve_ones(v_ab.matrix());
            } catch (const std::exception& e) {
                throw SolverError(std::string("module B sufficient statistic: ") + e.what(), t);
            }
            const double g = b.sum();
            if (!(g > 0.0))
                throw SolverError("module B: 1^T V^{-1} 1 <= 0, covariance tracking corrupt", t);
            v_suf_b = 1.0 / g;
            x_suf_b = x_ab.leftCols(t + 1) * (b / g);
            b_cache.push_back(b);
            for (int tp = 0; tp < t; ++tp)
                suf_b_cross[tp] = cross_covariance(v_ab.matrix().topLeftCorner(tp + 1, t + 1),
                                                   b_cache[tp], b);
        } else {
            x_suf_b = x_ab.col(t);
            v_suf_b = track_cov ? v_ab(t, t) : v_ab_scalar;
            if (track_cov)
                for (int tp = 0; tp < t; ++tp) suf_b_cross[tp] = v_ab(tp, t);
        }
        suf_b_cross[t] = v_suf_b;
        if (!(v_suf_b > 0.0)) throw SolverError("module B: nonpositive statistic variance", t);
        suf_b_hist.col(t) = x_suf_b;
        res.v_suf_b.push_back(v_suf_b);

        const Eigen::VectorXd f_t = bg_posterior_mean(x_suf_b, v_suf_b, prior);
        const double xi_b = bg_posterior_mean_derivative(x_suf_b, v_suf_b, prior).mean();
        if (std::abs(1.0 - xi_b) < 1e-12)
            throw SolverError("module B: degenerate denoiser, xi_B = 1", t);
        fpost_hist.col(t) = f_t;
        res.xi_b.push_back(xi_b);
        res.mse.push_back((f_t - problem.x).squaredNorm() / N);

        std::vector<double> v_post_b(t + 1, 0.0);
        double v_post_b0 = 0.0;
        const bool use_posterior_cov = policy.cov_estimator == CovEstimator::posterior;
        for (int tp = track_cov ? 0 : t; tp <= t; ++tp) {
            double v_post;
            if (tp == t) {
                if (use_posterior_cov) {
                    const BgKernel kernel(v_suf_b, prior);
                    double acc = 0.0;
                    for (int n = 0; n < N; ++n) acc += kernel.variance(x_suf_b[n]);
                    v_post = acc / N;
                } else {
                    v_post = 1.0 + f_t.squaredNorm() / N + 2.0 * v_suf_b * xi_b -
                             2.0 * f_t.dot(x_suf_b) / N;
                }
            } else if (use_posterior_cov) {
                double c = suf_b_cross[tp];
                const double vl = res.v_suf_b[tp];
                // Same replacement rule as the ledger guard, at the pair level.
                if (policy.guard_ledgers && vl * v_suf_b - c * c < policy.psd_eps) c = v_suf_b;
                Eigen::Matrix2d vp;
                vp << vl, c, c, v_suf_b;
                const BgPairKernel pair_kernel(vp, prior);
                double acc = 0.0;
                for (int n = 0; n < N; ++n) acc += pair_kernel(suf_b_hist(n, tp), x_suf_b[n]);
                v_post = acc / N;
            } else {
                v_post = 1.0 + fpost_hist.col(tp).dot(f_t) / N + suf_b_cross[tp] * xi_b -
                         f_t.dot(suf_b_hist.col(tp)) / N + suf_b_cross[tp] * res.xi_b[tp] -
                         fpost_hist.col(tp).dot(x_suf_b) / N;
            }
            v_post_b[tp] = v_post;
        }
        res.v_post_b.push_back(v_post_b[t]);
        if (use_posterior_cov) {
            v_post_b0 = v_post_b[t];
        } else {
            v_post_b0 = 1.0 + v_suf_b * xi_b - f_t.dot(x_suf_b) / N;
        }
        h0.push_back(v_post_b0 / (1.0 - xi_b));

        std::vector<double> v_ext_b(t + 1, 0.0);
        if (track_cov) {
            for (int tp = 0; tp <= t; ++tp)
                v_ext_b[tp] = (v_post_b[tp] - res.xi_b[tp] * xi_b * suf_b_cross[tp]) /
                              ((1.0 - res.xi_b[tp]) * (1.0 - xi_b));
        }

        const Eigen::VectorXd x_ext_b = (f_t - xi_b * x_suf_b) / (1.0 - xi_b);
        if (full || t == 0) {
            x_ba.col(t + 1) = x_ext_b;
        } else {
            x_ba.col(t + 1) =
                policy.theta_b * x_ext_b + (1.0 - policy.theta_b) * x_ba.col(t);
        }

        if (track_cov && !(v_ext_b[t] > 0.0))
            throw SolverError("module B: nonpositive extrinsic variance", t);
        if (track_cov) {
            Eigen::VectorXd cross(t + 1);
            double diag;
            if (policy.damping == DampingStyle::correct_covariance) {
                ext_b.append(Eigen::Map<const Eigen::VectorXd>(v_ext_b.data(), t), v_ext_b[t]);
                if (policy.guard_ledgers) ext_b.psd_guard(policy.psd_eps);
                double c0 = 0.0;
                for (int tau = 0; tau <= t; ++tau) c0 += theta_b_vec[t][tau] * h0[tau];
                cross[0] = c0;
                for (int tp = 0; tp < t; ++tp)
                    cross[tp + 1] = damped_entry(ext_b, theta_b_vec, tp, t);
                diag = damped_entry(ext_b, theta_b_vec, t, t);
            } else {
                cross[0] = h0[t];
                for (int tp = 0; tp < t; ++tp) cross[tp + 1] = v_ext_b[tp];
                diag = v_ext_b[t];
            }
            v_ba.append(cross, diag);
            if (policy.guard_ledgers) v_ba.psd_guard(policy.psd_eps);
            res.v_ba_diag.push_back(v_ba(t + 1, t + 1));
        } else {
            const double prec_ext_b = 1.0 / v_post_b[t] - 1.0 / v_suf_b;
            double v_next;
            if (t == 0) {
                if (!(prec_ext_b > 0.0))
                    throw SolverError("module B: nonpositive extrinsic precision", t);
                v_next = 1.0 / prec_ext_b;
            } else if (policy.damping == DampingStyle::heuristic_precision) {
                v_next = 1.0 / (policy.theta_b * prec_ext_b + (1.0 - policy.theta_b) / v_ba_scalar);
            } else {
                v_next = policy.theta_b / (1.0 / v_post_b[t] - 1.0 / v_ba_scalar) +
                         (1.0 - policy.theta_b) * v_ab_scalar;
            }
            if (!(v_next > 0.0) || !std::isfinite(v_next))
                throw SolverError("module B: variance recursion left (0, inf)", t);
            v_ba_scalar = v_next;
            res.v_ba_diag.push_back(v_ba_scalar);
        }

        res.iterations = t + 1;
        const double prev = t == 0 ? 1.0 : res.v_ba_diag[t - 1];
        if (std::abs(res.v_ba_diag[t] - prev) < stop_tol) {
            res.stopped_early = true;
            break;
        }
      } catch (const SolverError&) {
          throw;
      } catch (const std::exception& e) {
          throw SolverError(e.what(), t);
      }
    }

    res.x_hat = fpost_hist.col(res.iterations - 1);
    res.ledger_ab = v_ab;
    res.ledger_ba = v_ba;
    return res;
}

}  // namespace lmoamp
