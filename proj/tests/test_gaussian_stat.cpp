#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "lmoamp/gaussian_stat.hpp"
#include "lmoamp/rng.hpp"

using namespace lmoamp;

namespace {

Eigen::MatrixXd random_pd(Rng& rng, int k, double diag_boost = 0.5) {
    Eigen::MatrixXd r(k, k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) r(i, j) = rng.gaussian();
    Eigen::MatrixXd v = r * r.transpose() / k;
    v.diagonal().array() += diag_boost;
    return v;
}

Eigen::MatrixXd random_theta(Rng& rng, int k) {
    Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(k, k);
    for (int t = 0; t < k; ++t) {
        double sum = 0.0;
        for (int tau = 0; tau < t; ++tau) {
            theta(tau, t) = rng.uniform() - 0.3;
            sum += theta(tau, t);
        }
        theta(t, t) = 1.0 - sum;
        if (std::abs(theta(t, t)) < 0.05) {
            theta(t, t) = 0.5;
            if (t > 0) theta(0, t) += 1.0 - theta.col(t).head(t + 1).sum();
        }
    }
    return theta;
}

}  // namespace

TEST_CASE("combine: single message is returned unchanged") {
    Eigen::MatrixXd x(4, 1);
    x << 1.0, -2.0, 0.5, 3.0;
    Eigen::MatrixXd v(1, 1);
    v << 0.7;
    const auto stat = combine(x, v);
    CHECK(stat.variance == doctest::Approx(0.7).epsilon(1e-14));
    CHECK(stat.weights[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK((stat.mean - x.col(0)).norm() == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("combine: two independent equal variances average with weights 1/2") {
    Eigen::MatrixXd x(3, 2);
    x << 1.0, 3.0, 0.0, 2.0, -1.0, 1.0;
    Eigen::MatrixXd v(2, 2);
    v << 0.4, 0.0, 0.0, 0.4;
    const auto stat = combine(x, v);
    CHECK(stat.variance == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(stat.weights[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(stat.weights[1] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(stat.mean[0] == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("combine: k=3 variance matches brute-force constrained minimization") {
    Rng rng(11);
    for (int rep = 0; rep < 20; ++rep) {
        const Eigen::MatrixXd v = random_pd(rng, 3);
        const auto stat = combine(Eigen::MatrixXd::Zero(2, 3), v);

        // Minimize a^T V a over a = e3 + B u with B columns (e1-e3), (e2-e3),
        // solving the reduced 2x2 normal equations directly.
        Eigen::MatrixXd bm(3, 2);
        bm << 1, 0, 0, 1, -1, -1;
        const Eigen::Vector3d e3(0, 0, 1);
        const Eigen::Matrix2d q = bm.transpose() * v * bm;
        const Eigen::Vector2d b = -bm.transpose() * v * e3;
        const Eigen::Vector2d u = q.inverse() * b;
        const Eigen::Vector3d a_opt = e3 + bm * u;
        const double v_opt = a_opt.dot(v * a_opt);
        CHECK(stat.variance == doctest::Approx(v_opt).epsilon(1e-10));
        CHECK(stat.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(stat.variance <= v.diagonal().minCoeff() + 1e-12);
    }
}

TEST_CASE("combine rejects corrupt covariance with 1^T V^{-1} 1 <= 0") {
    Eigen::MatrixXd v(1, 1);
    v << -0.5;
    CHECK_THROWS_AS(combine(Eigen::MatrixXd::Zero(2, 1), v), std::runtime_error);
}

TEST_CASE("cross_covariance reduces to combine variance on the diagonal") {
    Rng rng(5);
    const Eigen::MatrixXd v = random_pd(rng, 4);
    const auto stat = combine(Eigen::MatrixXd::Zero(2, 4), v);
    CHECK(cross_covariance(v, v, v) == doctest::Approx(stat.variance).epsilon(1e-12));
}

TEST_CASE("cross_covariance: full-memory nesting collapses to 1/(1^T V^{-1} 1)") {
    Rng rng(6);
    for (int rep = 0; rep < 10; ++rep) {
        const Eigen::MatrixXd v = random_pd(rng, 5);
        const int kp = 3;
        const Eigen::MatrixXd block = v.topRows(kp);  // (I, O) V
        const Eigen::MatrixXd v_left = v.topLeftCorner(kp, kp);
        const double expect = 1.0 / solve_ones(v).sum();
        CHECK(cross_covariance(block, v_left, v) == doctest::Approx(expect).epsilon(1e-10));
    }
}

TEST_CASE("cross_covariance matches Monte Carlo on a random 2x3 case") {
    Rng rng(7);
    const Eigen::MatrixXd sigma = random_pd(rng, 3);
    const Eigen::MatrixXd v_left = sigma.topLeftCorner(2, 2);
    const Eigen::MatrixXd block = sigma.topRows(2);
    const double predicted = cross_covariance(block, v_left, sigma);

    const Eigen::MatrixXd chol = sigma.llt().matrixL();
    const Eigen::VectorXd al = solve_ones(v_left);
    const Eigen::VectorXd ar = solve_ones(sigma);
    const double gl = al.sum(), gr = ar.sum();
    const int n = 1000000;
    double acc = 0.0, acc2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const Eigen::Vector3d z(rng.gaussian(), rng.gaussian(), rng.gaussian());
        const Eigen::Vector3d w = chol * z;
        const double wl = (al[0] * w[0] + al[1] * w[1]) / gl;
        const double wr = (ar[0] * w[0] + ar[1] * w[1] + ar[2] * w[2]) / gr;
        acc += wl * wr;
        acc2 += wl * wr * wl * wr;
    }
    const double mean = acc / n;
    const double se = std::sqrt((acc2 / n - mean * mean) / n);
    CHECK(std::abs(mean - predicted) < 4.0 * se);
}

TEST_CASE("scalar measurement model: combined statistic reaches the predicted MSE") {
    // Y_tau = X + W_tau with known noise covariance; the MMSE estimate from
    // the combined statistic runs at the 1/(1^T Sigma^{-1} 1) noise level.
    Rng rng(8);
    const Eigen::MatrixXd sigma = random_pd(rng, 3);
    const Eigen::MatrixXd chol = sigma.llt().matrixL();
    const Eigen::VectorXd a = solve_ones(sigma);
    const double g = a.sum();
    const double v_star = 1.0 / g;
    const int n = 400000;
    double acc = 0.0, acc2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.gaussian();
        const Eigen::Vector3d z(rng.gaussian(), rng.gaussian(), rng.gaussian());
        const Eigen::Vector3d w = chol * z;
        double s = 0.0;
        for (int t = 0; t < 3; ++t) s += a[t] * (x + w[t]);
        s /= g;
        const double xhat = s / (1.0 + v_star);  // Gaussian-prior MMSE estimate
        const double err = (xhat - x) * (xhat - x);
        acc += err;
        acc2 += err * err;
    }
    const double mean = acc / n;
    const double se = std::sqrt((acc2 / n - mean * mean) / n);
    const double predicted = v_star / (1.0 + v_star);
    CHECK(std::abs(mean - predicted) < 3.0 * se);
}

TEST_CASE("psd_guard: replacement rule on a violating 2x2") {
    CovarianceLedger ledger(1.0);
    ledger.append(Eigen::VectorXd::Constant(1, 0.9), 0.5);
    CHECK(ledger.psd_guard(1e-6) == 1);
    CHECK(ledger(0, 1) == doctest::Approx(0.5));
    CHECK(ledger(1, 0) == doctest::Approx(0.5));
    CHECK(ledger(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("psd_guard: already positive definite ledgers are untouched") {
    CovarianceLedger ledger(1.0);
    ledger.append(Eigen::VectorXd::Constant(1, 0.1), 0.8);
    const Eigen::MatrixXd before = ledger.matrix();
    CHECK(ledger.psd_guard(1e-6) == 0);
    CHECK((ledger.matrix() - before).norm() == 0.0);
}

TEST_CASE("psd_guard is idempotent on random ledgers") {
    Rng rng(10);
    for (int rep = 0; rep < 30; ++rep) {
        const int k = 2 + static_cast<int>(rng.uniform_below(5));
        CovarianceLedger ledger(0.5 + rng.uniform());
        for (int t = 1; t < k; ++t) {
            Eigen::VectorXd cross(t);
            for (int i = 0; i < t; ++i) cross[i] = rng.gaussian() * 0.5;
            ledger.append(cross, 0.1 + rng.uniform());
        }
        ledger.psd_guard(1e-2);
        const Eigen::MatrixXd once = ledger.matrix();
        CHECK(ledger.psd_guard(1e-2) == 0);
        CHECK((ledger.matrix() - once).norm() == 0.0);
    }
}

TEST_CASE("damping_covariance: identity damping returns C") {
    Rng rng(12);
    const Eigen::MatrixXd c = random_pd(rng, 4);
    const Eigen::MatrixXd v = damping_covariance(c, Eigen::MatrixXd::Identity(4, 4));
    CHECK((v - c).norm() == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("damping_covariance preserves 1^T V^{-1} 1 for random valid factors") {
    Rng rng(13);
    for (int rep = 0; rep < 40; ++rep) {
        const int k = 2 + static_cast<int>(rng.uniform_below(7));
        const Eigen::MatrixXd c = random_pd(rng, k);
        const Eigen::MatrixXd theta = random_theta(rng, k);
        const Eigen::MatrixXd v = damping_covariance(c, theta);
        const double lhs = solve_ones(v).sum();
        const double rhs = solve_ones(c).sum();
        CHECK(std::abs(lhs - rhs) < 1e-8 * std::abs(rhs));
    }
}

TEST_CASE("damping_covariance: geometric factors sum to one and satisfy the identity") {
    Rng rng(14);
    const int k = 4;
    const Eigen::MatrixXd c = random_pd(rng, k);
    Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(k, k);
    for (int t = 0; t < k; ++t) theta.col(t).head(t + 1) = geometric_damping(0.3, t);
    for (int t = 0; t < k; ++t)
        CHECK(theta.col(t).sum() == doctest::Approx(1.0).epsilon(1e-14));
    const Eigen::MatrixXd v = damping_covariance(c, theta);
    CHECK(solve_ones(v).sum() == doctest::Approx(solve_ones(c).sum()).epsilon(1e-10));
}

TEST_CASE("damping_covariance rejects a zero diagonal") {
    const Eigen::MatrixXd c = Eigen::MatrixXd::Identity(2, 2);
    Eigen::MatrixXd theta(2, 2);
    theta << 1.0, 1.0, 0.0, 0.0;  // second column sums to 1 with theta(1,1) = 0
    CHECK_THROWS_AS(damping_covariance(c, theta), std::invalid_argument);
}

TEST_CASE("determinant identity for nested covariance matrices") {
    Rng rng(15);
    for (int rep = 0; rep < 20; ++rep) {
        const int k = 2 + static_cast<int>(rng.uniform_below(6));
        std::vector<double> d(k);
        d[0] = 1.0 + rng.uniform();
        for (int i = 1; i < k; ++i) d[i] = d[i - 1] * (0.3 + 0.6 * rng.uniform());
        Eigen::MatrixXd v(k, k);
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) v(i, j) = d[std::max(i, j)];
        double prod = v(k - 1, k - 1);
        for (int tau = 0; tau + 1 < k; ++tau) prod *= v(tau, tau) - v(tau + 1, tau + 1);
        CHECK(std::abs(v.determinant() - prod) < 1e-8 * std::abs(prod));
    }
}

TEST_CASE("ledger append validates shapes and positivity") {
    CovarianceLedger ledger(1.0);
    CHECK_THROWS_AS(ledger.append(Eigen::VectorXd::Zero(2), 1.0), std::invalid_argument);
    CHECK_THROWS_AS(ledger.append(Eigen::VectorXd::Zero(1), -1.0), std::runtime_error);
}
