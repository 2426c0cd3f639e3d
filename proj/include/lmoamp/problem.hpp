#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace lmoamp {

// Geometric singular-value profile: sigma_m / sigma_{m-1} = kappa^{-1/(M-1)}
// with sigma_0 / sigma_{M-1} = kappa and unit moment sum sigma_m^2 = N.
// kappa = 1 is the analytic limit sigma_m = sqrt(N/M).
Eigen::VectorXd synth_singular_values(int M, int N, double kappa);

struct SpectralProfile {
    Eigen::VectorXd singular_values;  // descending, length M
    int N = 0;
    int M = 0;
    double kappa = 1.0;

    static SpectralProfile geometric(int M, int N, double kappa);

    double delta() const { return static_cast<double>(M) / N; }

    // Empirical eta-transform N^{-1} Tr{(I + x A^T A)^{-1}}
    //  = N^{-1} [(N - M) + sum_m 1/(1 + x sigma_m^2)].
    double empirical_eta(double x) const;
};

// Matrix-free A = Sigma V^T with V^T a row-permuted normalized Hadamard
// matrix (optional random +-1 sign diagonal ahead of the transform, off by
// default). The permutation attaches each singular value to a random Walsh
// function; permuting the signal side instead would leave the descending
// singular-value profile aligned with the Walsh sequency order and the
// interference concentrated on a few coefficient pairs. N must be a power of
// two.
struct SensingOperator {
    SpectralProfile profile;
    std::vector<int> row_permutation;    // row k of V^T is row perm[k] of H/sqrt(N)
    std::vector<double> sign_diagonal;   // empty, or +-1 of length N

    // V^T v (length N), including the sign diagonal.
    Eigen::VectorXd vt_apply(const Eigen::VectorXd& v) const;
    // V u (length N), the exact transpose of vt_apply.
    Eigen::VectorXd v_apply(const Eigen::VectorXd& u) const;

    // A v (length M) and A^T u (length N).
    Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
    Eigen::VectorXd adjoint(const Eigen::VectorXd& u) const;

    // V (diag_m padded with zeros) applied to a length-M vector: the action of
    // W^T for any filter sharing the SVD structure of A.
    Eigen::VectorXd filter_adjoint(const Eigen::VectorXd& diag,
                                   const Eigen::VectorXd& u) const;
};

// In-place unnormalized fast Walsh-Hadamard transform; x.size() must be a
// power of two.
void fwht_inplace(Eigen::VectorXd& x);

struct ProblemConfig {
    int N = 0;
    int M = 0;
    double kappa = 1.0;
    double rho = 0.1;
    double snr_db = 40.0;
    bool sign_diagonal = false;
};

struct ProblemInstance {
    Eigen::VectorXd x;  // true signal, length N
    Eigen::VectorXd w;  // stored noise, length M
    Eigen::VectorXd y;  // y = A x + w, bit-exact for the stored w
    double sigma2 = 0.0;
    double rho = 0.0;
    SensingOperator op;
};

// Deterministic under (cfg, seed); the root seed is split into signal, noise,
// permutation, and sign streams so variants can run on identical instances.
ProblemInstance sample_problem(const ProblemConfig& cfg, std::uint64_t seed);

}  // namespace lmoamp
