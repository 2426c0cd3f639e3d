#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "lmoamp/gaussian_stat.hpp"
#include "lmoamp/prior.hpp"
#include "lmoamp/problem.hpp"

namespace lmoamp {

enum class MemoryMode { full, latest };
enum class DampingStyle { none, correct_covariance, heuristic_precision, heuristic_variance };
enum class CovEstimator { posterior, consistent };  // posterior covariance is the default
enum class FilterKind { lmmse, matched };

struct MemoryPolicy {
    MemoryMode mode = MemoryMode::full;
    DampingStyle damping = DampingStyle::none;
    double theta_a = 1.0;
    double theta_b = 1.0;
    CovEstimator cov_estimator = CovEstimator::posterior;
    FilterKind filter = FilterKind::lmmse;
    double psd_eps = 1e-6;
    bool guard_ledgers = true;  // apply the PSD guard to every ledger before inversion
    int t_cap = 64;

    void validate() const;  // full memory requires no damping

    static MemoryPolicy lm_full();
    static MemoryPolicy oamp();  // latest memory, undamped
    static MemoryPolicy damped(DampingStyle style, double theta_a, double theta_b);
};

// LMMSE filter diagonal w_m = v sigma_m / (sigma^2 + v sigma_m^2); the full
// filter is W = U diag(w) V^T, applied matrix-free.
Eigen::VectorXd lmmse_filter_diag(double v_suf, const SpectralProfile& profile, double sigma2);

// N^{-1} Tr(I - W^T A) from the filter diagonal.
double xi_a_from_diag(const Eigen::VectorXd& w_diag, const SpectralProfile& profile);

// gamma_{t',t} = N^{-1} Tr{(I - W_l^T A)^T (I - W_r^T A)} from two diagonals.
double gamma_cross(const Eigen::VectorXd& w_left, const Eigen::VectorXd& w_right,
                   const SpectralProfile& profile);

struct SolverResult {
    std::vector<double> mse;          // N^{-1} ||x^post_{B,t+1} - x||^2 per iteration
    std::vector<double> v_ab_diag;    // tracked v_{A->B,t,t}
    std::vector<double> v_ba_diag;    // tracked v_{B->A,t+1,t+1}
    std::vector<double> v_suf_a;      // v^suf_{B->A,t,t}
    std::vector<double> v_suf_b;      // v^suf_{A->B,t,t}
    std::vector<double> xi_a;
    std::vector<double> xi_b;
    std::vector<double> v_post_a;     // v^post_{A,t,t}
    std::vector<double> v_post_b;     // v^post_{B,t+1,t+1}
    CovarianceLedger ledger_ab;       // final covariance ledgers (covariance-tracking modes)
    CovarianceLedger ledger_ba;
    Eigen::VectorXd x_hat;            // final posterior mean of module B
    int iterations = 0;
    bool stopped_early = false;
};

class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, int iteration)
        : std::runtime_error(what), iteration(iteration) {}
    int iteration;
};

// Alternates the linear stage (sufficient statistic, LMMSE/MF filter,
// extrinsic correction, damping) and the BG denoising stage from the
// x_{B->A,0} = 0, v_{B->A,0,0} = 1 initialization. Stops early when the
// tracked v_{B->A,t,t} changes by less than stop_tol.
SolverResult run_solver(const ProblemInstance& problem, const MemoryPolicy& policy,
                        const BgPrior& prior, int t_max, double stop_tol = 1e-12);

}  // namespace lmoamp
