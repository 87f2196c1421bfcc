#include "tite/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace tite {

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
    // Linear interpolation between order statistics (type 7).
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

const ToxScenario& toxicity_of(const ExperimentSetup& setup, const Cell& cell) {
    auto it = setup.scenarios.toxicity.find(cell.toxicity);
    if (it == setup.scenarios.toxicity.end())
        throw std::invalid_argument("unknown toxicity scenario '" + cell.toxicity + "'");
    return it->second;
}

const DropoutScenario& dropout_of(const ExperimentSetup& setup, const Cell& cell) {
    auto it = setup.scenarios.dropout.find(cell.dropout);
    if (it == setup.scenarios.dropout.end())
        throw std::invalid_argument("unknown dropout scenario '" + cell.dropout + "'");
    return it->second;
}

}  // namespace

std::string Cell::id() const { return std::string(method_name(method)) + "/" + toxicity + "/" + dropout; }

void ExperimentPlan::validate() const {
    if (cells.empty()) throw std::invalid_argument("experiment has no cells");
    if (replications < 1) throw std::invalid_argument("replications must be at least 1");
    if (threads < 1) throw std::invalid_argument("threads must be at least 1");
}

std::uint64_t replication_seed(std::uint64_t master_seed, const Cell& cell, int replication) {
    return split_seed(master_seed, {hash_name(cell.id()), static_cast<std::uint64_t>(replication)});
}

double proportion_mcse(double p, int replications) {
    return std::sqrt(p * (1.0 - p) / static_cast<double>(replications));
}

Summary summarize(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("summarize: no values");
    std::sort(values.begin(), values.end());
    Summary s;
    const double n = static_cast<double>(values.size());
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.mcse = std::sqrt(ss / (n - 1.0) / n);
    }
    s.min = values.front();
    s.max = values.back();
    s.q10 = quantile_sorted(values, 0.10);
    s.q25 = quantile_sorted(values, 0.25);
    s.median = quantile_sorted(values, 0.50);
    s.q75 = quantile_sorted(values, 0.75);
    s.q90 = quantile_sorted(values, 0.90);
    return s;
}

AllocationMetrics allocation_metrics(std::span<const TrialResult> results, const ToxScenario& toxicity,
                                     const DoseGrid& grid, const EwocThresholds& thresholds) {
    if (results.empty()) throw std::invalid_argument("allocation_metrics: no trial results");
    const std::size_t R = results.size();
    std::vector<std::array<double, 3>> counts(R, {0.0, 0.0, 0.0});
    std::vector<double> totals(R, 0.0);
    for (std::size_t r = 0; r < R; ++r) {
        for (const auto& p : results[r].patients) {
            const auto level = grid.level_of(p.dose);
            if (!level) throw std::invalid_argument("allocation_metrics: patient dose not on grid");
            const auto cat = classify_truth(true_cycle_probs(toxicity, *level).cumulative, thresholds);
            counts[r][static_cast<int>(cat)] += 1.0;
            totals[r] += 1.0;
        }
    }
    AllocationMetrics m;
    const double grand = std::accumulate(totals.begin(), totals.end(), 0.0);
    if (!(grand > 0.0)) throw std::invalid_argument("allocation_metrics: no enrolled patients");
    m.total_patients = static_cast<long long>(grand);
    const double mean_n = grand / static_cast<double>(R);
    for (int c = 0; c < 3; ++c) {
        double a = 0.0;
        for (std::size_t r = 0; r < R; ++r) a += counts[r][c];
        const double f = a / grand;
        double ss = 0.0;
        for (std::size_t r = 0; r < R; ++r) {
            const double e = counts[r][c] - f * totals[r];
            ss += e * e;
        }
        const double mcse = R > 1 ? std::sqrt(ss / (static_cast<double>(R) * static_cast<double>(R - 1))) / mean_n : 0.0;
        m.fraction[c] = {f, mcse};
    }
    return m;
}

CellSummary summarize_cell(const Cell& cell, std::span<const TrialResult> results, const ExperimentSetup& setup) {
    if (results.empty()) throw std::invalid_argument("summarize_cell: no trial results");
    const auto& tox = toxicity_of(setup, cell);
    CellSummary s;
    s.cell = cell;
    s.replications = static_cast<int>(results.size());
    std::array<int, 3> mtd{0, 0, 0};
    std::vector<double> durations, enrolled;
    for (const auto& r : results) {
        if (r.outcome == TrialOutcome::Mtd) {
            const auto cat = classify_truth(true_cycle_probs(tox, *r.mtd_level).cumulative, setup.trial.thresholds);
            ++mtd[static_cast<int>(cat)];
        } else if (r.outcome == TrialOutcome::StopToxicity) {
            ++s.stopped_toxicity;
        } else {
            ++s.stopped_max_patients;
        }
        durations.push_back(r.duration_days);
        enrolled.push_back(r.n_enrolled);
        s.unconverged_fits += r.n_unconverged;
        s.analyses += r.n_analyses;
    }
    const int R = s.replications;
    auto estimate = [R](int count) {
        const double p = static_cast<double>(count) / R;
        return Estimate{p, proportion_mcse(p, R)};
    };
    s.mtd_under = estimate(mtd[0]);
    s.mtd_target = estimate(mtd[1]);
    s.mtd_over = estimate(mtd[2]);
    s.stopped = estimate(s.stopped_toxicity + s.stopped_max_patients);
    s.allocation = allocation_metrics(results, tox, setup.grid, setup.trial.thresholds);
    s.duration_days = summarize(durations);
    s.n_enrolled = summarize(enrolled);
    return s;
}

const CellSummary& AggregateReport::at(Method method, const std::string& toxicity, const std::string& dropout) const {
    for (const auto& c : cells)
        if (c.cell.method == method && c.cell.toxicity == toxicity && c.cell.dropout == dropout) return c;
    throw std::out_of_range("no cell " + std::string(method_name(method)) + "/" + toxicity + "/" + dropout);
}

ExperimentResult run_experiment(const ExperimentSetup& setup, const ExperimentPlan& plan,
                                const ProgressCallback& progress) {
    plan.validate();
    for (const auto& cell : plan.cells) {
        toxicity_of(setup, cell).validate(setup.grid, setup.plan);
        dropout_of(setup, cell).validate();
    }
    TrialConfig trial = setup.trial;
    trial.keep_audit = false;
    trial.sampler.parallel_chains = false;
    trial.validate(setup.grid, setup.plan);

    const std::size_t R = static_cast<std::size_t>(plan.replications);
    const std::size_t total = plan.cells.size() * R;
    std::vector<TrialResult> results(total);
    std::vector<std::string> errors(total);
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};
    std::atomic<bool> failed{false};
    std::mutex progress_mutex;

    auto worker = [&] {
        for (;;) {
            const std::size_t job = next.fetch_add(1);
            if (job >= total || failed.load()) return;
            const auto& cell = plan.cells[job / R];
            const int rep = static_cast<int>(job % R);
            try {
                results[job] = run_trial(trial, setup.grid, setup.plan, toxicity_of(setup, cell),
                                         dropout_of(setup, cell), cell.method,
                                         replication_seed(plan.master_seed, cell, rep));
            } catch (const std::exception& e) {
                errors[job] = e.what();
                failed.store(true);
            }
            const auto n = done.fetch_add(1) + 1;
            if (progress) {
                std::lock_guard lock(progress_mutex);
                progress(n, total);
            }
        }
    };
    const int width = std::max(1, plan.threads);
    if (width == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < width; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (std::size_t job = 0; job < total; ++job)
        if (!errors[job].empty())
            throw std::runtime_error("cell " + plan.cells[job / R].id() + " replication " +
                                     std::to_string(job % R) + " failed: " + errors[job]);

    ExperimentResult out;
    for (std::size_t c = 0; c < plan.cells.size(); ++c) {
        const auto& cell = plan.cells[c];
        const std::span<const TrialResult> cell_results(results.data() + c * R, R);
        const auto& tox = toxicity_of(setup, cell);
        for (std::size_t r = 0; r < R; ++r) {
            const auto& tr = cell_results[r];
            ReplicationRow row;
            row.cell = cell;
            row.replication = static_cast<int>(r);
            row.seed = replication_seed(plan.master_seed, cell, static_cast<int>(r));
            row.outcome = tr.outcome;
            row.mtd_dose = tr.mtd_dose;
            if (tr.mtd_level)
                row.truth = classify_truth(true_cycle_probs(tox, *tr.mtd_level).cumulative, trial.thresholds);
            row.n_enrolled = tr.n_enrolled;
            row.duration_days = tr.duration_days;
            out.rows.push_back(std::move(row));
        }
        out.report.cells.push_back(summarize_cell(cell, cell_results, setup));
    }
    return out;
}

}  // namespace tite
