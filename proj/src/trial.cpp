#include "tite/trial.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tite/rng.hpp"

namespace tite {

namespace {

constexpr double kTimeEps = 1e-9;

}  // namespace

void TrialConfig::validate(const DoseGrid& grid, const CyclePlan& plan) const {
    plan.validate();
    if (!grid.level_of(start_dose)) throw std::invalid_argument("start dose is not on the dose grid");
    if (cohort_size < 1) throw std::invalid_argument("cohort size must be at least 1");
    if (max_patients < cohort_size) throw std::invalid_argument("max_patients must be at least the cohort size");
    if (!(accrual_mean_days > 0.0)) throw std::invalid_argument("accrual mean must be positive");
    thresholds.validate();
    rules.validate();
    sampler.validate();
    priors.tte.validate(plan);
    priors.b1.validate();
    priors.b3.validate();
}

std::string_view outcome_name(TrialOutcome o) {
    switch (o) {
        case TrialOutcome::Mtd: return "mtd";
        case TrialOutcome::StopToxicity: return "stop_toxicity";
        case TrialOutcome::MaxPatients: return "max_patients";
    }
    return "?";
}

FitResult fit_with_retry(Method method, const Dataset& data, const ModelPriors& priors, const SamplerConfig& cfg) {
    FitResult r{fit(method, data, priors, cfg), false, false};
    r.converged = r.draws.converged(cfg);
    if (r.converged) return r;
    SamplerConfig doubled = cfg;
    doubled.n_draws *= 2;
    r.draws = fit(method, data, priors, doubled);
    r.retried = true;
    r.converged = r.draws.converged(doubled);
    return r;
}

std::vector<PatientRecord> observe(const std::vector<EnrolledPatient>& patients, double now, const CyclePlan& plan) {
    std::vector<PatientRecord> out;
    out.reserve(patients.size());
    for (const auto& p : patients) {
        PatientRecord r = p.record;
        const double elapsed = now - r.enroll_time;
        if (elapsed + kTimeEps >= p.outcome.exit_day) {
            r.u_cycles = p.outcome.u_cycles;
            r.delta = p.outcome.delta;
            r.dropout = p.outcome.dropout;
        } else {
            // Still on study: administratively censored at the last completed cycle.
            int completed = static_cast<int>(std::floor(elapsed / plan.cycle_length + kTimeEps));
            const int cap = p.outcome.delta == 1 ? p.outcome.u_cycles - 1 : p.outcome.u_cycles;
            r.u_cycles = std::clamp(completed, 0, cap);
            r.delta = 0;
            r.dropout = false;
        }
        out.push_back(r);
    }
    return out;
}

TrialResult run_trial(const TrialConfig& cfg, const DoseGrid& grid, const CyclePlan& plan,
                      const ToxScenario& toxicity, const DropoutScenario& dropout, Method method,
                      std::uint64_t seed) {
    cfg.validate(grid, plan);
    toxicity.validate(grid, plan);
    dropout.validate();

    TrialResult result;
    result.method = method;
    Rng accrual = make_rng(split_seed(seed, {hash_name("accrual")}));
    const std::size_t start_level = *grid.level_of(cfg.start_dose);
    const int window = decision_window(method, plan);
    const double window_days = window * plan.cycle_length;

    std::vector<EnrolledPatient> patients;
    EscalationState state(grid.size());
    std::size_t level = start_level;
    double now = 0.0;

    auto follow_up_end = [&] {
        double end = 0.0;
        for (const auto& p : patients) end = std::max(end, p.record.enroll_time + p.outcome.exit_day);
        return end;
    };

    for (;;) {
        if (static_cast<int>(patients.size()) + cfg.cohort_size > cfg.max_patients) {
            result.outcome = TrialOutcome::MaxPatients;
            result.duration_days = now;
            break;
        }

        // Enroll one cohort at `level`.
        const double dose = grid[level];
        const auto truth = true_cycle_probs(toxicity, level);
        const double dropout_rate = dropout_hazard(dropout, dose, plan);
        double arrival = now;
        double resolved = now;
        bool all_dropped = true;
        for (int k = 0; k < cfg.cohort_size; ++k) {
            if (!patients.empty()) arrival += sample_accrual(accrual, cfg.accrual_mean_days);
            const auto index = static_cast<std::uint64_t>(patients.size());
            Rng prng = make_rng(split_seed(seed, {hash_name("patient"), index}));
            EnrolledPatient p;
            p.record.id = static_cast<int>(index) + 1;
            p.record.dose = dose;
            p.record.enroll_time = arrival;
            p.outcome = simulate_patient(truth.conditional, dropout_rate, plan, prng);
            resolved = std::max(resolved, arrival + std::min(p.outcome.exit_day, window_days));
            if (!(p.outcome.dropout && p.outcome.u_cycles < window)) all_dropped = false;
            patients.push_back(p);
        }
        state.record_cohort(level, cfg.cohort_size);
        now = resolved;

        // A cohort lost entirely to dropout is replaced at the same dose.
        if (all_dropped) continue;

        Dataset data{observe(patients, now, plan), grid, plan};
        std::vector<int> evaluable(grid.size(), 0);
        for (const auto& r : data.records)
            if (window_outcome(r, window) != WindowOutcome::NotEvaluable) ++evaluable[*grid.level_of(r.dose)];
        for (std::size_t l = 0; l < grid.size(); ++l) state.set_evaluable(l, evaluable[l]);

        SamplerConfig scfg = cfg.sampler;
        scfg.seed = split_seed(seed, {hash_name("fit"), static_cast<std::uint64_t>(result.n_analyses)});
        const FitResult fitted = fit_with_retry(method, data, cfg.priors, scfg);
        const auto assessments = assess_doses(fitted.draws, method, grid, plan, cfg.thresholds);
        const auto next = select_next_dose(assessments, state, cfg.rules, start_level);
        std::optional<std::size_t> mtd;
        if (next) mtd = check_mtd(assessments, state, *next, cfg.rules);

        if (!fitted.converged) ++result.n_unconverged;
        if (cfg.keep_audit) {
            AnalysisRecord a;
            a.index = result.n_analyses;
            a.time = now;
            a.fit_seed = scfg.seed;
            a.n_enrolled = static_cast<int>(patients.size());
            a.data = data.records;
            a.assessments = assessments;
            a.max_rhat = fitted.draws.diagnostics().max_rhat;
            a.min_ess = fitted.draws.diagnostics().min_ess;
            a.converged = fitted.converged;
            a.retried = fitted.retried;
            a.decision = !next ? "stop_toxicity" : mtd ? "mtd" : "continue";
            a.next_level = next;
            result.audit.push_back(std::move(a));
        }
        ++result.n_analyses;

        if (!next) {
            result.outcome = TrialOutcome::StopToxicity;
            result.duration_days = now;
            break;
        }
        if (mtd) {
            result.outcome = TrialOutcome::Mtd;
            result.mtd_level = *mtd;
            result.mtd_dose = grid[*mtd];
            // Declared once the last patient's follow-up is complete.
            result.duration_days = std::max(now, follow_up_end());
            break;
        }
        level = *next;
    }

    if (result.outcome == TrialOutcome::MaxPatients && cfg.keep_audit && !result.audit.empty())
        result.audit.back().decision = "max_patients";
    result.n_enrolled = static_cast<int>(patients.size());
    result.patients = observe(patients, std::max(now, follow_up_end()), plan);
    return result;
}

}  // namespace tite
