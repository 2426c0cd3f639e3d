#pragma once

#include <Eigen/Dense>
#include <vector>

#include "lmoamp/prior.hpp"
#include "lmoamp/problem.hpp"

namespace lmoamp {

// Limit eta-transform of the geometric singular-value profile:
//   eta(x) = 1 - C^{-1} ln[(k^2 - 1 + k^2 C x) / (k^2 - 1 + C x)],
// with C = 2 ln(kappa) / delta. kappa = 1 is the analytic single-atom limit.
double eta_geometric(double x, double delta, double kappa);
double eta_geometric_derivative(double x, double delta, double kappa);

// Spectral model behind the linear stage: either the closed-form geometric
// limit or an empirical singular-value profile.
class SpectrumModel {
public:
    static SpectrumModel geometric(double delta, double kappa);
    static SpectrumModel empirical(const SpectralProfile& profile);

    double delta() const { return delta_; }
    double eta(double x) const;
    double eta_derivative(double x) const;

    // xi_A for the LMMSE filter at sufficient-statistic variance v.
    double xi_a(double v, double sigma2) const { return eta(v / sigma2); }

    // Posterior cross covariance of module A's LMMSE outputs,
    //   gamma(vl, vr) c + sigma^2 N^{-1} Tr(W_l W_r^T),
    // evaluated through eta as vr eta(vr/s2) + gamma(vl, vr) (c - vr).
    double post_cross(double v_left, double v_right, double c, double sigma2) const;

private:
    bool empirical_ = false;
    double delta_ = 1.0;
    double kappa_ = 1.0;
    Eigen::VectorXd sv2_;  // squared singular values (empirical)
    int n_ = 0;
};

struct SeTrajectory {
    std::vector<double> v_ba;   // \bar v_{B->A,t,t}
    std::vector<double> v_ab;   // \bar v_{A->B,t,t}
    std::vector<double> xi_a;
    std::vector<double> xi_b;
    std::vector<double> mse;    // \bar v^post_{B,t+1,t+1}
    // Full covariance matrices when the variant tracks them.
    Eigen::MatrixXd v_ab_full;
    Eigen::MatrixXd v_ba_full;
};

struct SeBayesState {
    double v_ba = 1.0;
    double v_ab = 0.0;
    double xi_a = 0.0;
    double mse = 1.0;
};

// One step of the one-dimensional Bayes-optimal recursion:
//   xi_A = eta(v_ba / s2);  v_ab = v_ba xi_A / (1 - xi_A);
//   mse = mmse(v_ab);       v_ba' = (1/mse - 1/v_ab)^{-1}.
SeBayesState se_bayes_step(const SeBayesState& state, const SpectrumModel& spectrum,
                           double sigma2, const BgPrior& prior);

SeTrajectory se_bayes(const SpectrumModel& spectrum, double sigma2, const BgPrior& prior,
                      int T);

struct SePolicy {
    bool full_memory = true;    // T_t = {0..t}; otherwise T_t = {t}
    double theta_a = 1.0;       // geometric damping factors (latest memory only)
    double theta_b = 1.0;
};

// Full covariance-matrix recursions with the Gaussian expectations computed
// by quadrature; an independent route to the Bayes-optimal trajectory.
SeTrajectory se_general(const SePolicy& policy, int T, const SpectrumModel& spectrum,
                        double sigma2, const BgPrior& prior);

// Two-dimensional recursions for damped OAMP (latest memory, geometric
// damping) with the auxiliary c_A/c_B sequences.
SeTrajectory se_damped_oamp(double theta_a, double theta_b, int T,
                            const SpectrumModel& spectrum, double sigma2,
                            const BgPrior& prior);

// Heuristic one-dimensional damping recursions for the variance messages,
// transcribed literally; they do not track the true covariances.
enum class HeuristicDomain { precision, variance };
SeTrajectory se_heuristic_damped(double theta_a, double theta_b, int T,
                                 const SpectrumModel& spectrum, double sigma2,
                                 const BgPrior& prior, HeuristicDomain domain);

struct FixedPoint {
    double v_ba = 0.0;
    double v_ab = 0.0;
    double mse = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Iterates se_bayes_step until |delta v_ba| < tol. The Bayes-optimal
// sequence is monotone; an increase beyond rounding slack is an error.
FixedPoint fixed_point(const SpectrumModel& spectrum, double sigma2, const BgPrior& prior,
                       double tol = 1e-12, int max_iter = 10000);

// SE-level module-B expectations, shared with the solver-side estimators.
namespace se_detail {

// E[f'(x + z)] for z ~ N(0, v).
double xi_b_expectation(double v, const BgPrior& prior);

// E[{f_l(x + z_l) - x}{f_r(x + z_r) - x}] for jointly Gaussian (z_l, z_r)
// with variances (v_left, v_right) and covariance c. Uses the nested
// reduction when c = v_right; otherwise a literal 2-D quadrature.
double pair_error_covariance(double v_left, double v_right, double c, const BgPrior& prior);

// E[x {x - f(x + z)}] for z ~ N(0, v).
double zero_cross(double v, const BgPrior& prior);

}  // namespace se_detail

}  // namespace lmoamp
