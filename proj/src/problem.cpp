#include "lmoamp/problem.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "lmoamp/rng.hpp"

namespace lmoamp {

namespace {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

enum Stream : std::uint64_t { kSignal = 0, kNoise = 1, kPermutation = 2, kSigns = 3 };

}  // namespace

Eigen::VectorXd synth_singular_values(int M, int N, double kappa) {
    if (M < 2) throw std::invalid_argument("synth_singular_values: M must be >= 2");
    if (N < M) throw std::invalid_argument("synth_singular_values: N must be >= M");
    if (!(kappa >= 1.0)) throw std::invalid_argument("synth_singular_values: kappa must be >= 1");

    Eigen::VectorXd sv(M);
    if (kappa == 1.0) {
        sv.setConstant(std::sqrt(static_cast<double>(N) / M));
        return sv;
    }
    // sigma_m^2 = sigma_0^2 r^m with r = kappa^{-2/(M-1)} and
    // sigma_0^2 = N (1 - r) / (1 - r^M), so that sum sigma_m^2 = N.
    const double log_r = -2.0 * std::log(kappa) / (M - 1);
    const double one_minus_r = -std::expm1(log_r);
    const double one_minus_rM = -std::expm1(static_cast<double>(M) * log_r);
    const double s0 = std::sqrt(N * one_minus_r / one_minus_rM);
    for (int m = 0; m < M; ++m) sv[m] = s0 * std::exp(0.5 * m * log_r);
    return sv;
}

SpectralProfile SpectralProfile::geometric(int M, int N, double kappa) {
    SpectralProfile p;
    p.singular_values = synth_singular_values(M, N, kappa);
    p.N = N;
    p.M = M;
    p.kappa = kappa;
    return p;
}

double SpectralProfile::empirical_eta(double x) const {
    double acc = static_cast<double>(N - M);
    for (int m = 0; m < M; ++m) {
        const double s2 = singular_values[m] * singular_values[m];
        acc += 1.0 / (1.0 + x * s2);
    }
    return acc / N;
}

void fwht_inplace(Eigen::VectorXd& x) {
    const int n = static_cast<int>(x.size());
    if (!is_power_of_two(n)) throw std::invalid_argument("fwht: size must be a power of two");
    for (int h = 1; h < n; h <<= 1) {
        for (int i = 0; i < n; i += h << 1) {
            for (int j = i; j < i + h; ++j) {
                const double u = x[j];
                const double w = x[j + h];
                x[j] = u + w;
                x[j + h] = u - w;
            }
        }
    }
}

Eigen::VectorXd SensingOperator::vt_apply(const Eigen::VectorXd& v) const {
    const int N = profile.N;
    if (v.size() != N) throw std::invalid_argument("vt_apply: length mismatch");
    Eigen::VectorXd u(N);
    if (sign_diagonal.empty()) {
        u = v;
    } else {
        for (int j = 0; j < N; ++j) u[j] = sign_diagonal[j] * v[j];
    }
    fwht_inplace(u);
    u /= std::sqrt(static_cast<double>(N));
    Eigen::VectorXd out(N);
    for (int k = 0; k < N; ++k) out[k] = u[row_permutation[k]];
    return out;
}

Eigen::VectorXd SensingOperator::v_apply(const Eigen::VectorXd& u) const {
    const int N = profile.N;
    if (u.size() != N) throw std::invalid_argument("v_apply: length mismatch");
    Eigen::VectorXd z(N);
    for (int k = 0; k < N; ++k) z[row_permutation[k]] = u[k];
    fwht_inplace(z);
    z /= std::sqrt(static_cast<double>(N));
    if (!sign_diagonal.empty())
        for (int j = 0; j < N; ++j) z[j] *= sign_diagonal[j];
    return z;
}

Eigen::VectorXd SensingOperator::apply(const Eigen::VectorXd& v) const {
    const Eigen::VectorXd t = vt_apply(v);
    return profile.singular_values.cwiseProduct(t.head(profile.M));
}

Eigen::VectorXd SensingOperator::adjoint(const Eigen::VectorXd& u) const {
    return filter_adjoint(profile.singular_values, u);
}

Eigen::VectorXd SensingOperator::filter_adjoint(const Eigen::VectorXd& diag,
                                                const Eigen::VectorXd& u) const {
    if (u.size() != profile.M || diag.size() != profile.M)
        throw std::invalid_argument("filter_adjoint: length mismatch");
    Eigen::VectorXd z = Eigen::VectorXd::Zero(profile.N);
    z.head(profile.M) = diag.cwiseProduct(u);
    return v_apply(z);
}

ProblemInstance sample_problem(const ProblemConfig& cfg, std::uint64_t seed) {
    if (!is_power_of_two(cfg.N))
        throw std::invalid_argument("sample_problem: N must be a power of two");
    if (!(cfg.rho > 0.0) || cfg.rho > 1.0)
        throw std::invalid_argument("sample_problem: rho must be in (0, 1]");

    ProblemInstance inst;
    inst.rho = cfg.rho;
    inst.sigma2 = std::pow(10.0, -cfg.snr_db / 10.0);
    inst.op.profile = SpectralProfile::geometric(cfg.M, cfg.N, cfg.kappa);

    // Uniform permutation by Fisher-Yates on a dedicated stream.
    Rng perm_rng(stream_seed(seed, 0, kPermutation));
    inst.op.row_permutation.resize(cfg.N);
    std::iota(inst.op.row_permutation.begin(), inst.op.row_permutation.end(), 0);
    for (int i = cfg.N - 1; i > 0; --i) {
        const int j = static_cast<int>(perm_rng.uniform_below(static_cast<std::uint64_t>(i) + 1));
        std::swap(inst.op.row_permutation[i], inst.op.row_permutation[j]);
    }

    if (cfg.sign_diagonal) {
        Rng sign_rng(stream_seed(seed, 0, kSigns));
        inst.op.sign_diagonal.resize(cfg.N);
        for (int j = 0; j < cfg.N; ++j)
            inst.op.sign_diagonal[j] = (sign_rng.next_u64() & 1u) ? 1.0 : -1.0;
    }

    Rng signal_rng(stream_seed(seed, 0, kSignal));
    inst.x.resize(cfg.N);
    const double comp_sd = std::sqrt(1.0 / cfg.rho);
    for (int n = 0; n < cfg.N; ++n) {
        const bool active = signal_rng.uniform() < cfg.rho;
        const double gauss = signal_rng.gaussian();
        inst.x[n] = active ? comp_sd * gauss : 0.0;
    }

    Rng noise_rng(stream_seed(seed, 0, kNoise));
    inst.w.resize(cfg.M);
    const double noise_sd = std::sqrt(inst.sigma2);
    for (int m = 0; m < cfg.M; ++m) inst.w[m] = noise_sd * noise_rng.gaussian();

    inst.y = inst.op.apply(inst.x) + inst.w;
    return inst;
}

}  // namespace lmoamp
