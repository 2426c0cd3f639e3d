#include <CLI11.hpp>
#include <cmath>
#include <fstream>
#include <iostream>

#include "lmoamp/harness.hpp"
#include "lmoamp/state_evolution.hpp"

namespace {

using namespace lmoamp;

int cmd_run(const std::string& config_path, std::uint64_t* seed, int* trials,
            const std::string& out_override) {
    ExperimentConfig cfg;
    try {
        cfg = ExperimentConfig::from_file(config_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n"
                  << "usage: lmoamp run <config> [--seed S] [--trials K] [--out FILE]\n";
        return 2;
    }
    if (seed) cfg.seed = *seed;
    if (trials) cfg.trials = *trials;
    if (!out_override.empty()) cfg.out = out_override;

    const ExperimentReport report = run_experiment(cfg);
    write_report_csv(cfg.out, cfg, report);
    std::cout << "wrote " << report.rows.size() << " rows to " << cfg.out;
    if (report.excluded_trials > 0)
        std::cout << " (" << report.excluded_trials << " trials excluded)";
    std::cout << "\n";
    for (const auto& err : report.trial_errors) std::cerr << err << "\n";
    return 0;
}

SeTrajectory se_by_mode(const std::string& mode, double delta, double kappa, double rho,
                        double snr_db, int iters, double theta_a, double theta_b) {
    const SpectrumModel spectrum = SpectrumModel::geometric(delta, kappa);
    const double s2 = std::pow(10.0, -snr_db / 10.0);
    const BgPrior prior(rho);
    if (mode == "bayes") return se_bayes(spectrum, s2, prior, iters);
    if (mode == "general-full")
        return se_general(SePolicy{true, 1.0, 1.0}, iters, spectrum, s2, prior);
    if (mode == "damped") return se_damped_oamp(theta_a, theta_b, iters, spectrum, s2, prior);
    if (mode == "heuristic-precision")
        return se_heuristic_damped(theta_a, theta_b, iters, spectrum, s2, prior,
                                   HeuristicDomain::precision);
    if (mode == "heuristic-variance")
        return se_heuristic_damped(theta_a, theta_b, iters, spectrum, s2, prior,
                                   HeuristicDomain::variance);
    throw std::invalid_argument("unknown SE mode '" + mode + "'");
}

int cmd_se(const std::string& mode, double delta, double kappa, double rho, double snr_db,
           int iters, double theta_a, double theta_b, const std::string& out) {
    const SeTrajectory traj = se_by_mode(mode, delta, kappa, rho, snr_db, iters, theta_a, theta_b);
    std::ofstream file;
    std::ostream* os = &std::cout;
    if (!out.empty()) {
        file.open(out, std::ios::trunc);
        if (!file) {
            std::cerr << "error: cannot open " << out << "\n";
            return 1;
        }
        os = &file;
    }
    os->precision(12);
    *os << "iteration,v_ba,v_ab,xi_a,xi_b,mse,mse_db\n";
    for (size_t t = 0; t < traj.mse.size(); ++t) {
        *os << t << ',' << traj.v_ba[t] << ',' << traj.v_ab[t] << ',' << traj.xi_a[t] << ','
            << traj.xi_b[t] << ',' << traj.mse[t] << ',' << 10.0 * std::log10(traj.mse[t])
            << "\n";
    }
    return 0;
}

int cmd_fp(double delta, double kappa, double rho, double snr_db, double tol, int max_iter) {
    const SpectrumModel spectrum = SpectrumModel::geometric(delta, kappa);
    const double s2 = std::pow(10.0, -snr_db / 10.0);
    const FixedPoint fp = fixed_point(spectrum, s2, BgPrior(rho), tol, max_iter);
    std::cout.precision(12);
    std::cout << "v_ba* = " << fp.v_ba << "\n"
              << "v_ab* = " << fp.v_ab << "\n"
              << "mse*  = " << fp.mse << " (" << 10.0 * std::log10(fp.mse) << " dB)\n"
              << "iterations = " << fp.iterations << "\n"
              << "converged = " << (fp.converged ? "yes" : "no") << "\n";
    return fp.converged ? 0 : 1;
}

int cmd_selftest();

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Compressed-sensing reconstruction with long-memory OAMP and state evolution"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "Run a Monte Carlo experiment from a config file");
    std::string config_path, out_override;
    std::uint64_t seed_override = 0;
    int trials_override = 0;
    bool has_seed = false, has_trials = false;
    run->add_option("config", config_path, "flat key = value config file")->required();
    run->add_option("--seed", seed_override, "override the root seed")
        ->each([&](const std::string&) { has_seed = true; });
    run->add_option("--trials", trials_override, "override the trial count")
        ->each([&](const std::string&) { has_trials = true; });
    run->add_option("--out", out_override, "override the output CSV path");

    // se
    auto* se = app.add_subcommand("se", "Emit a state-evolution trajectory as CSV");
    std::string se_mode = "bayes", se_out;
    double se_delta = 0.5, se_kappa = 1e3, se_rho = 0.1, se_snr = 40.0;
    double se_theta_a = 1.0, se_theta_b = 0.7;
    int se_iters = 30;
    se->add_option("--mode", se_mode,
                   "bayes | general-full | damped | heuristic-precision | heuristic-variance");
    se->add_option("--delta", se_delta, "compression ratio M/N");
    se->add_option("--kappa", se_kappa, "condition number");
    se->add_option("--rho", se_rho, "signal density");
    se->add_option("--snr", se_snr, "SNR in dB");
    se->add_option("--iters", se_iters, "iterations");
    se->add_option("--theta-a", se_theta_a, "module A damping factor");
    se->add_option("--theta-b", se_theta_b, "module B damping factor");
    se->add_option("--out", se_out, "output file (default: stdout)");

    // fp
    auto* fp = app.add_subcommand("fp", "Report the Bayes-optimal SE fixed point");
    double fp_delta = 0.5, fp_kappa = 1e3, fp_rho = 0.1, fp_snr = 40.0, fp_tol = 1e-12;
    int fp_max_iter = 10000;
    fp->add_option("--delta", fp_delta, "compression ratio M/N");
    fp->add_option("--kappa", fp_kappa, "condition number");
    fp->add_option("--rho", fp_rho, "signal density");
    fp->add_option("--snr", fp_snr, "SNR in dB");
    fp->add_option("--tol", fp_tol, "fixed-point tolerance");
    fp->add_option("--max-iter", fp_max_iter, "iteration cap");

    // selftest
    app.add_subcommand("selftest", "Run quick built-in property checks");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return cmd_run(config_path, has_seed ? &seed_override : nullptr,
                           has_trials ? &trials_override : nullptr, out_override);
        if (se->parsed())
            return cmd_se(se_mode, se_delta, se_kappa, se_rho, se_snr, se_iters, se_theta_a,
                          se_theta_b, se_out);
        if (fp->parsed()) return cmd_fp(fp_delta, fp_kappa, fp_rho, fp_snr, fp_tol, fp_max_iter);
        return cmd_selftest();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

namespace {

int cmd_selftest() {
    using namespace lmoamp;
    int failures = 0;
    auto check = [&](const char* name, bool ok) {
        std::cout << (ok ? "PASS " : "FAIL ") << name << "\n";
        if (!ok) ++failures;
    };

    // eta-transform closed form vs empirical spectrum.
    {
        const auto profile = SpectralProfile::geometric(2048, 4096, 1e3);
        double worst = 0.0;
        for (double x : {0.1, 1.0, 10.0})
            worst = std::max(worst,
                             std::abs(profile.empirical_eta(x) - eta_geometric(x, 0.5, 1e3)));
        check("eta geometric vs empirical", worst < 1e-3);
    }

    // Damping identity 1^T V^{-1} 1 = 1^T C^{-1} 1 on a geometric Theta.
    {
        Eigen::MatrixXd r = Eigen::MatrixXd::Random(4, 4);
        Eigen::MatrixXd c = r * r.transpose() + 4.0 * Eigen::MatrixXd::Identity(4, 4);
        Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(4, 4);
        for (int t = 0; t < 4; ++t) theta.col(t).head(t + 1) = geometric_damping(0.3, t);
        const Eigen::MatrixXd v = damping_covariance(c, theta);
        const double lhs = solve_ones(v).sum();
        const double rhs = solve_ones(c).sum();
        check("damping covariance identity", std::abs(lhs - rhs) < 1e-8 * std::abs(rhs));
    }

    // Denoiser derivative vs central differences.
    {
        const BgPrior prior(0.1);
        double worst = 0.0;
        for (double s : {-2.0, 0.0, 3.0}) {
            const double h = 1e-5;
            const double fd = (bg_posterior_mean(s + h, 0.2, prior) -
                               bg_posterior_mean(s - h, 0.2, prior)) /
                              (2 * h);
            worst = std::max(worst,
                             std::abs(fd - bg_posterior_mean_derivative(s, 0.2, prior)));
        }
        check("denoiser derivative", worst < 1e-6);
    }

    // SE equivalence on one grid point.
    {
        const SpectrumModel spectrum = SpectrumModel::geometric(0.5, 10.0);
        const BgPrior prior(0.1);
        const auto a = se_bayes(spectrum, 1e-2, prior, 20);
        const auto b = se_general(SePolicy{true, 1.0, 1.0}, 20, spectrum, 1e-2, prior);
        double worst = 0.0;
        for (int t = 0; t < 20; ++t)
            worst = std::max(worst, std::abs(a.mse[t] - b.mse[t]) / a.mse[t]);
        check("SE reduction equivalence", worst < 1e-8);
    }

    return failures == 0 ? 0 : 1;
}

}  // namespace
