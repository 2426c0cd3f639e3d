#include "lmoamp/gaussian_stat.hpp"

#include <cmath>
#include <stdexcept>

namespace lmoamp {

void CovarianceLedger::append(const Eigen::VectorXd& cross, double diag) {
    const int k = size();
    if (cross.size() != k) throw std::invalid_argument("ledger append: cross size mismatch");
    if (!(diag > 0.0)) throw std::runtime_error("ledger append: nonpositive diagonal");
    mat_.conservativeResize(k + 1, k + 1);
    for (int i = 0; i < k; ++i) {
        mat_(i, k) = cross[i];
        mat_(k, i) = cross[i];
    }
    mat_(k, k) = diag;
}

int CovarianceLedger::psd_guard(double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("psd_guard: eps must be positive");
    int replaced = 0;
    const int k = size();
    for (int tp = 0; tp < k; ++tp) {
        for (int t = tp + 1; t < k; ++t) {
            const double minor2 = mat_(tp, tp) * mat_(t, t) - mat_(tp, t) * mat_(tp, t);
            if (minor2 < eps) {
                if (mat_(tp, t) != mat_(t, t)) ++replaced;
                mat_(tp, t) = mat_(t, t);
                mat_(t, tp) = mat_(t, t);
            }
        }
    }
    return replaced;
}

namespace {

// One refinement step, then judge the solve by its residual; LDLT's info()
// reports NumericalIssue on the (benign) semidefinite ledgers that appear
// once the recursion has converged, while the solution of V a = 1 stays
// well-defined because 1 remains in the range of V.
bool try_solve_ones(const Eigen::MatrixXd& V, Eigen::VectorXd& a) {
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(V.rows());
    Eigen::LDLT<Eigen::MatrixXd> ldlt(V);
    a = ldlt.solve(ones);
    if (!a.allFinite()) return false;
    a += ldlt.solve(Eigen::VectorXd(ones - V * a));
    if (!a.allFinite()) return false;
    return (ones - V * a).lpNorm<Eigen::Infinity>() <= 1e-6;
}

}  // namespace

Eigen::VectorXd solve_ones(const Eigen::MatrixXd& V) {
    if (V.rows() != V.cols() || V.rows() < 1)
        throw std::invalid_argument("solve_ones: V must be square and nonempty");
    Eigen::VectorXd a;
    if (try_solve_ones(V, a)) return a;
    Eigen::MatrixXd Vj = V;
    Vj.diagonal().array() += 1e-12 * V.trace() / V.rows();
    if (try_solve_ones(Vj, a)) return a;
    throw std::runtime_error("solve_ones: factorization failed");
}

SufficientStatistic combine(const Eigen::MatrixXd& messages, const Eigen::MatrixXd& V) {
    if (V.rows() != V.cols()) throw std::invalid_argument("combine: V must be square");
    if (messages.cols() != V.rows())
        throw std::invalid_argument("combine: message count does not match V");
    if (V.rows() < 1) throw std::invalid_argument("combine: need at least one message");

    const Eigen::VectorXd a = solve_ones(V);
    const double g = a.sum();
    if (!(g > 0.0))
        throw std::runtime_error("combine: 1^T V^{-1} 1 <= 0, covariance tracking corrupt");

    SufficientStatistic stat;
    stat.variance = 1.0 / g;
    stat.weights = a / g;
    stat.mean = messages * stat.weights;
    return stat;
}

double cross_covariance(const Eigen::MatrixXd& V_block, const Eigen::VectorXd& a_left,
                        const Eigen::VectorXd& a_right) {
    if (V_block.rows() != a_left.size() || V_block.cols() != a_right.size())
        throw std::invalid_argument("cross_covariance: block shape mismatch");
    const double gl = a_left.sum();
    const double gr = a_right.sum();
    if (!(gl > 0.0) || !(gr > 0.0))
        throw std::runtime_error("cross_covariance: 1^T V^{-1} 1 <= 0");
    return a_left.dot(V_block * a_right) / (gl * gr);
}

double cross_covariance(const Eigen::MatrixXd& V_block, const Eigen::MatrixXd& V_left,
                        const Eigen::MatrixXd& V_right) {
    return cross_covariance(V_block, solve_ones(V_left), solve_ones(V_right));
}

Eigen::MatrixXd damping_covariance(const Eigen::MatrixXd& C, const Eigen::MatrixXd& Theta) {
    if (C.rows() != C.cols() || Theta.rows() != Theta.cols() || C.rows() != Theta.rows())
        throw std::invalid_argument("damping_covariance: shape mismatch");
    const int k = static_cast<int>(Theta.rows());
    for (int t = 0; t < k; ++t) {
        if (Theta.col(t).head(t + 1).sum() - 1.0 > 1e-9 ||
            Theta.col(t).head(t + 1).sum() - 1.0 < -1e-9)
            throw std::invalid_argument("damping_covariance: column sums must be 1");
        if (Theta(t, t) == 0.0)
            throw std::invalid_argument("damping_covariance: zero diagonal in Theta");
        for (int i = t + 1; i < k; ++i)
            if (Theta(i, t) != 0.0)
                throw std::invalid_argument("damping_covariance: Theta must be upper triangular");
    }
    return Theta.transpose() * C * Theta;
}

Eigen::VectorXd geometric_damping(double theta, int t) {
    if (!(theta > 0.0) || theta > 1.0)
        throw std::invalid_argument("geometric_damping: theta must be in (0,1]");
    Eigen::VectorXd w(t + 1);
    w[0] = std::pow(1.0 - theta, t);
    for (int tau = 1; tau <= t; ++tau) w[tau] = theta * std::pow(1.0 - theta, t - tau);
    return w;
}

}  // namespace lmoamp
