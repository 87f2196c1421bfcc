// tite: simulate | fit | prior-summary

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "tite/config.hpp"
#include "tite/report.hpp"

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfigError = 2, kDataError = 3, kStopToxicity = 4 };

int threads_from_env(int fallback) {
    const char* env = std::getenv("TITE_THREADS");
    if (!env || !*env) return fallback;
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1) throw tite::ConfigError("TITE_THREADS", 0, 0, "must be a positive integer");
    return static_cast<int>(v);
}

int run_simulate(const std::string& config_path, const std::string& out_dir, bool quiet) {
    auto cfg = tite::load_config(config_path);
    cfg.plan.threads = threads_from_env(cfg.plan.threads);
    const std::filesystem::path dir = out_dir.empty() ? cfg.output_dir : out_dir;
    std::size_t last_pct = 101;
    auto progress = [&](std::size_t done, std::size_t total) {
        if (quiet) return;
        const std::size_t pct = 100 * done / total;
        if (pct != last_pct && pct % 5 == 0) {
            std::cerr << "\r" << done << "/" << total << " trials" << std::flush;
            last_pct = pct;
        }
    };
    const auto result = tite::run_experiment(cfg.setup, cfg.plan, progress);
    if (!quiet) std::cerr << "\n";
    tite::write_experiment_outputs(dir, result, cfg);
    if (!quiet) std::cerr << "wrote " << dir.string() << "\n";
    return kOk;
}

int run_fit(const std::string& model, const std::string& data_path, const std::string& config_path,
            std::optional<std::uint64_t> seed) {
    const auto cfg = tite::load_config(config_path);
    const auto& grid = cfg.setup.grid;
    const auto& plan = cfg.setup.plan;
    const auto& trial = cfg.setup.trial;

    tite::Method method;
    try {
        method = tite::parse_method(model);
    } catch (const std::invalid_argument&) {
        std::cerr << "unknown model '" << model << "' (expected B1, B3, TCO or TCU)\n";
        return kDataError;
    }

    std::ifstream in(data_path);
    if (!in) throw tite::DataError("cannot open " + data_path);
    tite::Dataset data{tite::read_patient_csv(in, grid, plan), grid, plan};

    tite::SamplerConfig scfg = trial.sampler;
    if (seed) scfg.seed = *seed;
    const auto fitted = tite::fit_with_retry(method, data, trial.priors, scfg);
    const auto assessments = tite::assess_doses(fitted.draws, method, grid, plan, trial.thresholds);

    tite::EscalationState state(grid.size());
    for (const auto& r : data.records) state.record_cohort(*grid.level_of(r.dose), 1);
    const std::size_t start = *grid.level_of(trial.start_dose);
    const auto next = tite::select_next_dose(assessments, state, trial.rules, start);

    std::cout << "model " << tite::method_name(method) << ", " << data.records.size() << " patients, "
              << "max R-hat " << fitted.draws.diagnostics().max_rhat << ", min ESS "
              << fitted.draws.diagnostics().min_ess << (fitted.converged ? "" : " (not converged)") << "\n";
    std::cout << tite::format_assessments(assessments);
    if (!next) {
        std::cout << "recommendation: STOP_TOXICITY (no dose satisfies overdose control)\n";
        return kStopToxicity;
    }
    std::cout << "recommended next dose: " << grid[*next] << " mg\n";
    if (const auto mtd = tite::check_mtd(assessments, state, *next, trial.rules))
        std::cout << "MTD criteria met at " << grid[*mtd] << " mg\n";
    return kOk;
}

int run_prior_summary(const std::string& config_path, const std::string& out_path) {
    const auto cfg = tite::load_config(config_path);
    const auto rows = tite::prior_summary(cfg);
    if (out_path.empty() || out_path == "-") {
        tite::write_prior_summary_csv(std::cout, rows);
    } else {
        std::ofstream out(out_path);
        if (!out) throw std::runtime_error("cannot write " + out_path);
        tite::write_prior_summary_csv(out, rows);
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-cycle time-to-DLT dose-escalation simulator"};
    app.require_subcommand(1);

    std::string config, out, model, data;
    std::optional<std::uint64_t> seed;
    bool quiet = false;

    auto* sim = app.add_subcommand("simulate", "Run the simulation study described by a config file");
    sim->add_option("--config", config, "YAML configuration")->required();
    sim->add_option("--out", out, "Output directory (defaults to output_dir in the config)");
    sim->add_flag("--quiet", quiet, "No progress output");

    auto* fit = app.add_subcommand("fit", "Fit one dataset and recommend the next dose");
    fit->add_option("--model", model, "B1, B3, TCO or TCU")->required();
    fit->add_option("--data", data, "Patient CSV: id,dose_mg,u_cycles,delta[,dropout]")->required();
    fit->add_option("--config", config, "YAML configuration")->required();
    fit->add_option("--seed", seed, "Sampler seed");

    auto* prior = app.add_subcommand("prior-summary", "Prior quantiles of DLT probabilities per dose");
    prior->add_option("--config", config, "YAML configuration")->required();
    prior->add_option("--out", out, "Output CSV (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*sim) return run_simulate(config, out, quiet);
        if (*fit) return run_fit(model, data, config, seed);
        if (*prior) return run_prior_summary(config, out);
    } catch (const tite::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const tite::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kDataError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kFailure;
}
