#pragma once

// Literal dense-matrix transcription of the solver's update rules, used as an
// oracle against the matrix-free path: every filter, trace, sufficient
// statistic, and Onsager sum is evaluated with explicit matrices and
// inverses.

#include <Eigen/Dense>
#include <vector>

#include "lmoamp/prior.hpp"
#include "lmoamp/problem.hpp"

namespace lmoamp::test {

inline Eigen::MatrixXd dense_hadamard(int n) {
    Eigen::MatrixXd h(1, 1);
    h(0, 0) = 1.0;
    while (h.rows() < n) {
        const int k = static_cast<int>(h.rows());
        Eigen::MatrixXd h2(2 * k, 2 * k);
        h2.topLeftCorner(k, k) = h;
        h2.topRightCorner(k, k) = h;
        h2.bottomLeftCorner(k, k) = h;
        h2.bottomRightCorner(k, k) = -h;
        h = h2;
    }
    return h;
}

// Dense A = Sigma V^T for the same permutation/sign data as the operator.
inline Eigen::MatrixXd dense_sensing_matrix(const SensingOperator& op) {
    const int n = op.profile.N;
    const Eigen::MatrixXd h = dense_hadamard(n);
    Eigen::MatrixXd vt(n, n);
    for (int k = 0; k < n; ++k) vt.row(k) = h.row(op.row_permutation[k]) / std::sqrt(double(n));
    if (!op.sign_diagonal.empty())
        for (int j = 0; j < n; ++j) vt.col(j) *= op.sign_diagonal[j];
    Eigen::MatrixXd a(op.profile.M, n);
    for (int m = 0; m < op.profile.M; ++m) a.row(m) = op.profile.singular_values[m] * vt.row(m);
    return a;
}

struct DenseTrace {
    std::vector<Eigen::VectorXd> x_ab, x_ba, x_suf_a, x_suf_b;
    std::vector<double> xi_a, xi_b, v_suf_a, v_suf_b;
    Eigen::MatrixXd v_ab, v_ba;
};

// Full-memory run with the posterior-covariance estimator, all linear algebra
// dense.
inline DenseTrace dense_lmoamp(const ProblemInstance& inst, const BgPrior& prior, int T,
                               double psd_eps) {
    const int n = inst.op.profile.N;
    const int m = inst.op.profile.M;
    const Eigen::MatrixXd a = dense_sensing_matrix(inst.op);
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    const double s2 = inst.sigma2;

    DenseTrace tr;
    tr.v_ba = Eigen::MatrixXd::Zero(T + 1, T + 1);
    tr.v_ab = Eigen::MatrixXd::Zero(T, T);
    tr.v_ba(0, 0) = 1.0;
    tr.x_ba.push_back(Eigen::VectorXd::Zero(n));

    std::vector<Eigen::MatrixXd> w_hist;
    std::vector<double> h0;

    auto guard = [&](Eigen::MatrixXd& v, int k) {
        for (int tp = 0; tp < k; ++tp)
            for (int t = tp + 1; t < k; ++t)
                if (v(tp, tp) * v(t, t) - v(tp, t) * v(tp, t) < psd_eps) {
                    v(tp, t) = v(t, t);
                    v(t, tp) = v(t, t);
                }
    };

    for (int t = 0; t < T; ++t) {
        // Module A.
        const Eigen::MatrixXd v_lead = tr.v_ba.topLeftCorner(t + 1, t + 1);
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(t + 1);
        const Eigen::VectorXd av = v_lead.inverse() * ones;
        const double g = ones.dot(av);
        const double v_suf = 1.0 / g;
        Eigen::VectorXd x_suf = Eigen::VectorXd::Zero(n);
        for (int tp = 0; tp <= t; ++tp) x_suf += (av[tp] / g) * tr.x_ba[tp];
        tr.x_suf_a.push_back(x_suf);
        tr.v_suf_a.push_back(v_suf);

        std::vector<double> suf_cross(t + 1);
        for (int tp = 0; tp < t; ++tp) {
            const Eigen::MatrixXd vl = tr.v_ba.topLeftCorner(tp + 1, tp + 1);
            const Eigen::VectorXd al = vl.inverse() * Eigen::VectorXd::Ones(tp + 1);
            const Eigen::MatrixXd block = tr.v_ba.block(0, 0, tp + 1, t + 1);
            suf_cross[tp] = al.dot(block * av) / (al.sum() * g);
        }
        suf_cross[t] = v_suf;

        const Eigen::MatrixXd w =
            v_suf *
            (s2 * Eigen::MatrixXd::Identity(m, m) + v_suf * a * a.transpose()).inverse() * a;
        w_hist.push_back(w);
        const double xi_a = (id - w.transpose() * a).trace() / n;
        tr.xi_a.push_back(xi_a);

        const Eigen::VectorXd x_post = x_suf + w.transpose() * (inst.y - a * x_suf);
        // Literal per-index Onsager sum.
        Eigen::VectorXd onsager = Eigen::VectorXd::Zero(n);
        for (int tp = 0; tp <= t; ++tp) onsager += xi_a * (av[tp] / g) * tr.x_ba[tp];
        const Eigen::VectorXd x_ext = (x_post - onsager) / (1.0 - xi_a);

        std::vector<double> v_ext(t + 1);
        for (int tp = 0; tp <= t; ++tp) {
            const Eigen::MatrixXd dl = id - w_hist[tp].transpose() * a;
            const Eigen::MatrixXd dr = id - w.transpose() * a;
            const double gamma = (dl.transpose() * dr).trace() / n;
            const double v_post =
                gamma * suf_cross[tp] + s2 * (w_hist[tp] * w.transpose()).trace() / n;
            v_ext[tp] = (v_post - tr.xi_a[tp] * xi_a * suf_cross[tp]) /
                        ((1.0 - tr.xi_a[tp]) * (1.0 - xi_a));
        }
        tr.x_ab.push_back(x_ext);
        for (int tp = 0; tp <= t; ++tp) {
            tr.v_ab(tp, t) = v_ext[tp];
            tr.v_ab(t, tp) = v_ext[tp];
        }
        guard(tr.v_ab, t + 1);

        // Module B.
        const Eigen::MatrixXd vb_lead = tr.v_ab.topLeftCorner(t + 1, t + 1);
        const Eigen::VectorXd bv = vb_lead.inverse() * ones;
        const double gb = ones.dot(bv);
        const double v_suf_b = 1.0 / gb;
        Eigen::VectorXd x_suf_b = Eigen::VectorXd::Zero(n);
        for (int tp = 0; tp <= t; ++tp) x_suf_b += (bv[tp] / gb) * tr.x_ab[tp];
        tr.x_suf_b.push_back(x_suf_b);
        tr.v_suf_b.push_back(v_suf_b);

        std::vector<double> suf_cross_b(t + 1);
        for (int tp = 0; tp < t; ++tp) {
            const Eigen::MatrixXd vl = tr.v_ab.topLeftCorner(tp + 1, tp + 1);
            const Eigen::VectorXd bl = vl.inverse() * Eigen::VectorXd::Ones(tp + 1);
            const Eigen::MatrixXd block = tr.v_ab.block(0, 0, tp + 1, t + 1);
            suf_cross_b[tp] = bl.dot(block * bv) / (bl.sum() * gb);
        }
        suf_cross_b[t] = v_suf_b;

        const Eigen::VectorXd f = bg_posterior_mean(x_suf_b, v_suf_b, prior);
        const double xi_b = bg_posterior_mean_derivative(x_suf_b, v_suf_b, prior).mean();
        tr.xi_b.push_back(xi_b);

        Eigen::VectorXd onsager_b = Eigen::VectorXd::Zero(n);
        for (int tp = 0; tp <= t; ++tp) onsager_b += xi_b * (bv[tp] / gb) * tr.x_ab[tp];
        const Eigen::VectorXd x_ext_b = (f - onsager_b) / (1.0 - xi_b);
        tr.x_ba.push_back(x_ext_b);

        std::vector<double> v_post_b(t + 1);
        for (int tp = 0; tp <= t; ++tp) {
            Eigen::Matrix2d vp;
            vp << tr.v_suf_b[tp], suf_cross_b[tp], suf_cross_b[tp], v_suf_b;
            double acc = 0.0;
            for (int i = 0; i < n; ++i)
                acc += bg_posterior_covariance(tr.x_suf_b[tp][i], x_suf_b[i], vp, prior);
            v_post_b[tp] = acc / n;
        }
        h0.push_back(v_post_b[t] / (1.0 - xi_b));

        tr.v_ba(0, t + 1) = h0[t];
        tr.v_ba(t + 1, 0) = h0[t];
        for (int tp = 0; tp <= t; ++tp) {
            const double e = (v_post_b[tp] - tr.xi_b[tp] * xi_b * suf_cross_b[tp]) /
                             ((1.0 - tr.xi_b[tp]) * (1.0 - xi_b));
            tr.v_ba(tp + 1, t + 1) = e;
            tr.v_ba(t + 1, tp + 1) = e;
        }
        guard(tr.v_ba, t + 2);
    }
    return tr;
}

}  // namespace lmoamp::test
