#include "lmoamp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace lmoamp {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("config: invalid boolean '" + v + "'");
}

int worker_count() {
    if (const char* env = std::getenv("LMOAMP_WORKERS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

double to_db(double linear) { return 10.0 * std::log10(linear); }

}  // namespace

VariantSpec parse_variant(const std::string& name, double theta_a, double theta_b) {
    VariantSpec v;
    v.name = name;
    if (name == "lmoamp") {
        v.policy = MemoryPolicy::lm_full();
    } else if (name == "oamp") {
        v.policy = MemoryPolicy::oamp();
    } else if (name == "oamp-damped") {
        v.policy = MemoryPolicy::damped(DampingStyle::correct_covariance, theta_a, theta_b);
    } else if (name == "oamp-damped-precision") {
        v.policy = MemoryPolicy::damped(DampingStyle::heuristic_precision, theta_a, theta_b);
    } else if (name == "oamp-damped-variance") {
        v.policy = MemoryPolicy::damped(DampingStyle::heuristic_variance, theta_a, theta_b);
    } else {
        throw std::invalid_argument("unknown variant '" + name + "'");
    }
    return v;
}

void ExperimentConfig::validate() const {
    if (n < 2 || (n & (n - 1)) != 0)
        throw std::invalid_argument("config: n must be a power of two");
    if (m < 2 || m > n) throw std::invalid_argument("config: m must satisfy 2 <= m <= n");
    if (!(rho > 0.0) || rho > 1.0) throw std::invalid_argument("config: rho must be in (0, 1]");
    if (!(kappa >= 1.0)) throw std::invalid_argument("config: kappa must be >= 1");
    if (trials < 1) throw std::invalid_argument("config: trials must be >= 1");
    if (t_max < 1) throw std::invalid_argument("config: t_max must be >= 1");
    if (variants.empty()) throw std::invalid_argument("config: at least one variant required");
    if (cov_estimator != "posterior" && cov_estimator != "consistent")
        throw std::invalid_argument("config: cov_estimator must be posterior or consistent");
    for (const auto& name : variants) parse_variant(name, theta_a, theta_b);
}

ExperimentConfig ExperimentConfig::from_string(const std::string& text) {
    ExperimentConfig cfg;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "n") cfg.n = std::stoi(value);
            else if (key == "m") cfg.m = std::stoi(value);
            else if (key == "rho") cfg.rho = std::stod(value);
            else if (key == "kappa") cfg.kappa = std::stod(value);
            else if (key == "snr_db") cfg.snr_db = std::stod(value);
            else if (key == "trials") cfg.trials = std::stoi(value);
            else if (key == "t_max") cfg.t_max = std::stoi(value);
            else if (key == "seed") cfg.seed = std::stoull(value);
            else if (key == "theta_a") cfg.theta_a = std::stod(value);
            else if (key == "theta_b") cfg.theta_b = std::stod(value);
            else if (key == "variants") cfg.variants = split_list(value);
            else if (key == "cov_estimator") cfg.cov_estimator = value;
            else if (key == "sign_diagonal") cfg.sign_diagonal = parse_bool(value);
            else if (key == "stop_tol") cfg.stop_tol = std::stod(value);
            else if (key == "psd_eps") cfg.psd_eps = std::stod(value);
            else if (key == "out") cfg.out = value;
            else throw std::invalid_argument("unknown key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw;
        } catch (const std::exception&) {
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": bad value for '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return from_string(buf.str());
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::echo() const {
    auto fmt = [](double x) {
        std::ostringstream os;
        os.precision(17);
        os << x;
        return os.str();
    };
    std::string vlist;
    for (size_t i = 0; i < variants.size(); ++i) {
        if (i) vlist += ", ";
        vlist += variants[i];
    }
    return {
        {"n", std::to_string(n)},
        {"m", std::to_string(m)},
        {"rho", fmt(rho)},
        {"kappa", fmt(kappa)},
        {"snr_db", fmt(snr_db)},
        {"trials", std::to_string(trials)},
        {"t_max", std::to_string(t_max)},
        {"seed", std::to_string(seed)},
        {"theta_a", fmt(theta_a)},
        {"theta_b", fmt(theta_b)},
        {"variants", vlist},
        {"cov_estimator", cov_estimator},
        {"sign_diagonal", sign_diagonal ? "true" : "false"},
        {"stop_tol", fmt(stop_tol)},
        {"psd_eps", fmt(psd_eps)},
    };
}

SeTrajectory se_for_variant(const VariantSpec& variant, const ExperimentConfig& cfg,
                            const SpectrumModel& spectrum) {
    const double s2 = cfg.sigma2();
    const BgPrior prior(cfg.rho);
    switch (variant.policy.damping) {
        case DampingStyle::none:
            // Bayes-optimal LM-OAMP and undamped OAMP share the same SE.
            return se_bayes(spectrum, s2, prior, cfg.t_max);
        case DampingStyle::correct_covariance:
        case DampingStyle::heuristic_precision:
        case DampingStyle::heuristic_variance:
            // Heuristic variants are compared against the correct damped SE.
            return se_damped_oamp(cfg.theta_a, cfg.theta_b, cfg.t_max, spectrum, s2, prior);
    }
    throw std::logic_error("se_for_variant: unreachable");
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const int n_variants = static_cast<int>(cfg.variants.size());
    std::vector<VariantSpec> variants;
    for (const auto& name : cfg.variants) {
        VariantSpec v = parse_variant(name, cfg.theta_a, cfg.theta_b);
        v.policy.psd_eps = cfg.psd_eps;
        if (v.policy.t_cap < cfg.t_max) v.policy.t_cap = cfg.t_max;
        v.policy.cov_estimator =
            cfg.cov_estimator == "posterior" ? CovEstimator::posterior : CovEstimator::consistent;
        variants.push_back(std::move(v));
    }

    ProblemConfig pc;
    pc.N = cfg.n;
    pc.M = cfg.m;
    pc.kappa = cfg.kappa;
    pc.rho = cfg.rho;
    pc.snr_db = cfg.snr_db;
    pc.sign_diagonal = cfg.sign_diagonal;
    const BgPrior prior(cfg.rho);

    // Per-trial MSE trajectories, indexed [trial][variant][iteration];
    // iterations past an early stop repeat the converged value.
    std::vector<std::vector<std::vector<double>>> mse(cfg.trials);
    std::vector<std::string> errors(cfg.trials);

    std::atomic<int> next_trial{0};
    auto work = [&]() {
        for (;;) {
            const int trial = next_trial.fetch_add(1);
            if (trial >= cfg.trials) return;
            try {
                const ProblemInstance inst = sample_problem(pc, cfg.seed + trial);
                std::vector<std::vector<double>> per_variant(n_variants);
                for (int v = 0; v < n_variants; ++v) {
                    const SolverResult r =
                        run_solver(inst, variants[v].policy, prior, cfg.t_max, cfg.stop_tol);
                    std::vector<double> traj = r.mse;
                    while (static_cast<int>(traj.size()) < cfg.t_max)
                        traj.push_back(traj.back());
                    per_variant[v] = std::move(traj);
                }
                mse[trial] = std::move(per_variant);
            } catch (const std::exception& e) {
                errors[trial] = e.what();
            }
        }
    };

    const int workers = std::min(worker_count(), cfg.trials);
    std::vector<std::thread> pool;
    for (int i = 1; i < workers; ++i) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();

    ExperimentReport report;
    for (int trial = 0; trial < cfg.trials; ++trial) {
        if (!errors[trial].empty()) {
            ++report.excluded_trials;
            report.trial_errors.push_back("trial " + std::to_string(trial) + ": " +
                                          errors[trial]);
        }
    }
    const int included = cfg.trials - report.excluded_trials;
    if (included == 0) throw std::runtime_error("run_experiment: all trials failed");

    // Deterministic reduction by trial index: mean linear MSE, then dB.
    const SpectrumModel spectrum =
        SpectrumModel::empirical(SpectralProfile::geometric(cfg.m, cfg.n, cfg.kappa));
    for (int v = 0; v < n_variants; ++v) {
        const SeTrajectory se = se_for_variant(variants[v], cfg, spectrum);
        for (int t = 0; t < cfg.t_max; ++t) {
            double sum = 0.0, sum_sq = 0.0;
            for (int trial = 0; trial < cfg.trials; ++trial) {
                if (!errors[trial].empty()) continue;
                const double m = mse[trial][v][t];
                sum += m;
                sum_sq += m * m;
            }
            const double mean = sum / included;
            double se_lin = 0.0;
            if (included > 1) {
                const double var = (sum_sq - included * mean * mean) / (included - 1);
                se_lin = std::sqrt(std::max(var, 0.0) / included);
            }
            ReportRow row;
            row.variant = variants[v].name;
            row.iteration = t;
            row.mse_sim_db = to_db(mean);
            // Delta-method conversion of the linear standard error to dB.
            row.stderr_db = mean > 0.0 ? 10.0 / std::log(10.0) * se_lin / mean : 0.0;
            row.mse_se_db = to_db(se.mse[t]);
            row.gap_db = std::abs(row.mse_sim_db - row.mse_se_db);
            report.rows.push_back(row);
        }
    }
    return report;
}

void write_report_csv(std::ostream& os, const ExperimentConfig& cfg,
                      const ExperimentReport& report) {
    for (const auto& [k, v] : cfg.echo()) os << "# " << k << " = " << v << "\n";
    os << "# excluded_trials = " << report.excluded_trials << "\n";
    for (const auto& err : report.trial_errors) os << "# error: " << err << "\n";
    os << "variant,iteration,mse_sim_db,stderr_db,mse_se_db,gap_db\n";
    os.precision(12);
    for (const auto& r : report.rows) {
        os << r.variant << ',' << r.iteration << ',' << r.mse_sim_db << ',' << r.stderr_db
           << ',' << r.mse_se_db << ',' << r.gap_db << "\n";
    }
}

void write_report_csv(const std::string& path, const ExperimentConfig& cfg,
                      const ExperimentReport& report) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    write_report_csv(out, cfg, report);
    if (!out) throw std::runtime_error("failed writing output file: " + path);
}

}  // namespace lmoamp
