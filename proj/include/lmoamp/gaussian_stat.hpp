#pragma once

#include <Eigen/Dense>

namespace lmoamp {

// Growable symmetric matrix of message covariances v_{tau',tau}, one
// row/column appended per iteration.
class CovarianceLedger {
public:
    CovarianceLedger() = default;
    explicit CovarianceLedger(double v00) { mat_.resize(1, 1); mat_(0, 0) = v00; }

    int size() const { return static_cast<int>(mat_.rows()); }

    double operator()(int i, int j) const { return mat_(i, j); }

    void set(int i, int j, double v) {
        mat_(i, j) = v;
        mat_(j, i) = v;
    }

    // Appends row/column k with cross entries against rows 0..k-1 and the new
    // diagonal. `cross` must have length size().
    void append(const Eigen::VectorXd& cross, double diag);

    const Eigen::MatrixXd& matrix() const { return mat_; }
    Eigen::MatrixXd leading(int k) const { return mat_.topLeftCorner(k, k); }

    // Replaces both off-diagonal entries of every 2x2 principal minor that
    // fails v_{t',t'} v_{t,t} - v_{t',t}^2 >= eps with the later iteration's
    // variance v_{t,t}. Scans pairs in increasing (t', t) order; idempotent.
    // Returns the number of replaced pairs.
    int psd_guard(double eps);

private:
    Eigen::MatrixXd mat_;
};

// Optimal linear combination of k correlated AWGN observations of one signal.
struct SufficientStatistic {
    Eigen::VectorXd mean;      // X V^{-1} 1 / (1^T V^{-1} 1)
    double variance = 0.0;     // 1 / (1^T V^{-1} 1)
    Eigen::VectorXd weights;   // V^{-1} 1 / (1^T V^{-1} 1), sums to 1
};

// Solves V a = 1 with a symmetric factorization; adds a tiny diagonal jitter
// (1e-12 relative to trace) only when factorization fails. One step of
// iterative refinement is always applied.
Eigen::VectorXd solve_ones(const Eigen::MatrixXd& V);

// messages: N x k matrix of message vectors, V: k x k covariance.
// Throws std::runtime_error if 1^T V^{-1} 1 <= 0 (covariance tracking is
// corrupt) and std::invalid_argument on shape mismatch.
SufficientStatistic combine(const Eigen::MatrixXd& messages, const Eigen::MatrixXd& V);

// Cross covariance of two combined statistics:
//   1^T V_left^{-1} V_block V_right^{-1} 1 / (1^T V_left^{-1} 1 . 1^T V_right^{-1} 1).
double cross_covariance(const Eigen::MatrixXd& V_block,
                        const Eigen::MatrixXd& V_left,
                        const Eigen::MatrixXd& V_right);

// Same, with the solve vectors a = V^{-1} 1 already available.
double cross_covariance(const Eigen::MatrixXd& V_block,
                        const Eigen::VectorXd& a_left,
                        const Eigen::VectorXd& a_right);

// V = Theta^T C Theta for an upper-triangular damping matrix whose columns
// sum to 1 and whose diagonal is nonzero. The combination preserves
// 1^T V^{-1} 1 = 1^T C^{-1} 1.
Eigen::MatrixXd damping_covariance(const Eigen::MatrixXd& C, const Eigen::MatrixXd& Theta);

// Geometric damping weights theta_{tau,t} for tau = 0..t:
// theta_{0,t} = (1-theta)^t, theta_{tau,t} = theta (1-theta)^{t-tau} otherwise.
Eigen::VectorXd geometric_damping(double theta, int t);

}  // namespace lmoamp
