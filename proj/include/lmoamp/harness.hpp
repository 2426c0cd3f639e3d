#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "lmoamp/solver.hpp"
#include "lmoamp/state_evolution.hpp"

namespace lmoamp {

struct VariantSpec {
    std::string name;
    MemoryPolicy policy;
};

// Parses one of: lmoamp | oamp | oamp-damped | oamp-damped-precision |
// oamp-damped-variance. Damping factors are filled in from the config.
VariantSpec parse_variant(const std::string& name, double theta_a, double theta_b);

struct ExperimentConfig {
    int n = 4096;
    int m = 2048;
    double rho = 0.1;
    double kappa = 1e3;
    double snr_db = 40.0;
    int trials = 50;
    int t_max = 21;
    std::uint64_t seed = 1;
    double theta_a = 1.0;
    double theta_b = 0.7;
    std::vector<std::string> variants{"lmoamp"};
    std::string cov_estimator = "posterior";  // posterior | consistent
    bool sign_diagonal = false;
    double stop_tol = 1e-12;
    double psd_eps = 1e-6;
    std::string out = "report.csv";

    double delta() const { return static_cast<double>(m) / n; }
    double sigma2() const { return std::pow(10.0, -snr_db / 10.0); }
    void validate() const;

    // Flat key = value text, '#' comments. Unknown keys are an error.
    static ExperimentConfig from_file(const std::string& path);
    static ExperimentConfig from_string(const std::string& text);

    std::vector<std::pair<std::string, std::string>> echo() const;
};

struct ReportRow {
    std::string variant;
    int iteration = 0;
    double mse_sim_db = 0.0;
    double stderr_db = 0.0;
    double mse_se_db = 0.0;
    double gap_db = 0.0;
};

struct ExperimentReport {
    std::vector<ReportRow> rows;
    int excluded_trials = 0;
    std::vector<std::string> trial_errors;
};

// Runs `trials` seeded Monte Carlo trials; all variants of a trial consume
// the identical ProblemInstance. Aggregates the linear MSE across trials,
// converts to dB, and pairs each variant with its SE prediction. Trials are
// dispatched to a worker pool (LMOAMP_WORKERS, default: available
// parallelism); the reduction is deterministic by trial index.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

// Rewrites the CSV (schema: variant,iteration,mse_sim_db,stderr_db,mse_se_db,
// gap_db) with the config echoed as '#' comments.
void write_report_csv(std::ostream& os, const ExperimentConfig& cfg,
                      const ExperimentReport& report);
void write_report_csv(const std::string& path, const ExperimentConfig& cfg,
                      const ExperimentReport& report);

// SE trajectory for a variant: the Bayes-optimal recursion for undamped
// variants, the two-dimensional damped recursion otherwise. Heuristic
// variants are compared against the correct damped SE.
SeTrajectory se_for_variant(const VariantSpec& variant, const ExperimentConfig& cfg,
                            const SpectrumModel& spectrum);

}  // namespace lmoamp
