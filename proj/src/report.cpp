#include "tite/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "tite/rng.hpp"
#include "tite/sampler.hpp"

namespace tite {

namespace {

using nlohmann::ordered_json;

std::string num(double x, int digits = 10) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) {
        const auto b = field.find_first_not_of(" \t\r");
        const auto e = field.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

bool parse_int(const std::string& s, long long& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtoll(s.c_str(), &end, 10);
    return end && *end == '\0';
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end && *end == '\0' && std::isfinite(out);
}

std::string cell_prefix(const Cell& c) {
    return c.id() + "," + std::string(method_name(c.method)) + "," + c.toxicity + "," + c.dropout;
}

const char* kCellHeader = "cell,method,toxicity,dropout";

double quantile(std::vector<double>& v, double q) {
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << content;
}

ordered_json estimate_json(const Estimate& e) { return {{"p", e.value}, {"mcse", e.mcse}}; }

ordered_json summary_json(const Summary& s) {
    return {{"mean", s.mean}, {"mcse", s.mcse}, {"min", s.min},    {"q10", s.q10}, {"q25", s.q25},
            {"median", s.median}, {"q75", s.q75}, {"q90", s.q90}, {"max", s.max}};
}

void summary_rows(std::ostream& os, const Cell& cell, const Summary& s) {
    const std::pair<const char*, double> stats[] = {{"mean", s.mean}, {"min", s.min},       {"q10", s.q10},
                                                    {"q25", s.q25},   {"median", s.median}, {"q75", s.q75},
                                                    {"q90", s.q90},   {"max", s.max}};
    for (const auto& [name, value] : stats)
        os << cell_prefix(cell) << "," << name << "," << num(value) << ","
           << (std::string(name) == "mean" ? num(s.mcse) : std::string()) << "\n";
}

}  // namespace

void write_replications_csv(std::ostream& os, const std::vector<ReplicationRow>& rows) {
    os << kCellHeader << ",replication,seed,outcome,mtd_dose,truth_category,n_enrolled,duration_days\n";
    for (const auto& r : rows) {
        os << cell_prefix(r.cell) << "," << r.replication << "," << r.seed << "," << outcome_name(r.outcome) << ","
           << (r.mtd_dose ? num(*r.mtd_dose) : std::string()) << ","
           << (r.truth ? std::string(category_name(*r.truth)) : std::string()) << "," << r.n_enrolled << ","
           << num(r.duration_days) << "\n";
    }
}

std::vector<ReplicationRow> read_replications_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw DataError("replications CSV: missing header");
    if (line != std::string(kCellHeader) + ",replication,seed,outcome,mtd_dose,truth_category,n_enrolled,duration_days")
        throw DataError("replications CSV: unexpected header");
    std::vector<ReplicationRow> rows;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        auto bad = [&](const std::string& why) {
            return DataError("replications CSV line " + std::to_string(lineno) + ": " + why);
        };
        if (f.size() != 11) throw bad("expected 11 fields");
        ReplicationRow r;
        r.cell.method = parse_method(f[1]);
        r.cell.toxicity = f[2];
        r.cell.dropout = f[3];
        if (r.cell.id() != f[0]) throw bad("cell id does not match its parts");
        long long v = 0;
        if (!parse_int(f[4], v)) throw bad("bad replication");
        r.replication = static_cast<int>(v);
        r.seed = std::stoull(f[5]);
        if (f[6] == "mtd")
            r.outcome = TrialOutcome::Mtd;
        else if (f[6] == "stop_toxicity")
            r.outcome = TrialOutcome::StopToxicity;
        else if (f[6] == "max_patients")
            r.outcome = TrialOutcome::MaxPatients;
        else
            throw bad("bad outcome");
        double d = 0.0;
        if (!f[7].empty()) {
            if (!parse_double(f[7], d)) throw bad("bad mtd_dose");
            r.mtd_dose = d;
        }
        if (!f[8].empty()) {
            if (f[8] == "underdose")
                r.truth = TruthCategory::Underdose;
            else if (f[8] == "target")
                r.truth = TruthCategory::Target;
            else if (f[8] == "overdose")
                r.truth = TruthCategory::Overdose;
            else
                throw bad("bad truth_category");
        }
        if ((r.outcome == TrialOutcome::Mtd) != r.mtd_dose.has_value() || r.mtd_dose.has_value() != r.truth.has_value())
            throw bad("mtd_dose and truth_category must be present exactly for mtd outcomes");
        if (!parse_int(f[9], v)) throw bad("bad n_enrolled");
        r.n_enrolled = static_cast<int>(v);
        if (!parse_double(f[10], r.duration_days)) throw bad("bad duration_days");
        rows.push_back(std::move(r));
    }
    return rows;
}

void write_report_json(std::ostream& os, const AggregateReport& report, const ExperimentConfig& cfg) {
    ordered_json j;
    j["master_seed"] = cfg.plan.master_seed;
    j["replications"] = cfg.plan.replications;
    j["reference_dose"] = cfg.setup.grid.reference_dose();
    j["doses"] = std::vector<double>(cfg.setup.grid.doses().begin(), cfg.setup.grid.doses().end());
    ordered_json truth = ordered_json::array();
    for (const auto& [name, scn] : cfg.setup.scenarios.toxicity) {
        ordered_json t;
        t["toxicity"] = name;
        std::vector<double> cum;
        std::vector<std::string> cat;
        for (std::size_t l = 0; l < cfg.setup.grid.size(); ++l) {
            const double p = true_cycle_probs(scn, l).cumulative;
            cum.push_back(p);
            cat.emplace_back(category_name(classify_truth(p, cfg.setup.trial.thresholds)));
        }
        t["cumulative_dlt_probability"] = cum;
        t["category"] = cat;
        truth.push_back(t);
    }
    j["truth"] = truth;
    ordered_json cells = ordered_json::array();
    for (const auto& c : report.cells) {
        ordered_json e;
        e["cell"] = c.cell.id();
        e["method"] = method_name(c.cell.method);
        e["toxicity"] = c.cell.toxicity;
        e["dropout"] = c.cell.dropout;
        e["replications"] = c.replications;
        e["mtd"] = {{"underdose", estimate_json(c.mtd_under)},
                    {"target", estimate_json(c.mtd_target)},
                    {"overdose", estimate_json(c.mtd_over)},
                    {"stopped", estimate_json(c.stopped)}};
        e["stopped_toxicity"] = c.stopped_toxicity;
        e["stopped_max_patients"] = c.stopped_max_patients;
        e["allocation"] = {{"underdose", estimate_json(c.allocation.fraction[0])},
                           {"target", estimate_json(c.allocation.fraction[1])},
                           {"overdose", estimate_json(c.allocation.fraction[2])},
                           {"total_patients", c.allocation.total_patients}};
        e["duration_days"] = summary_json(c.duration_days);
        e["n_enrolled"] = summary_json(c.n_enrolled);
        e["analyses"] = c.analyses;
        e["unconverged_fits"] = c.unconverged_fits;
        cells.push_back(e);
    }
    j["cells"] = cells;
    os << j.dump(2) << "\n";
}

void write_mtd_declaration_csv(std::ostream& os, const AggregateReport& report) {
    os << kCellHeader << ",category,probability,mcse\n";
    for (const auto& c : report.cells) {
        const std::pair<const char*, Estimate> rows[] = {
            {"underdose", c.mtd_under}, {"target", c.mtd_target}, {"overdose", c.mtd_over}, {"stopped", c.stopped}};
        for (const auto& [name, e] : rows)
            os << cell_prefix(c.cell) << "," << name << "," << num(e.value) << "," << num(e.mcse) << "\n";
    }
}

void write_patient_allocation_csv(std::ostream& os, const AggregateReport& report) {
    os << kCellHeader << ",category,probability,mcse\n";
    for (const auto& c : report.cells)
        for (int k = 0; k < 3; ++k)
            os << cell_prefix(c.cell) << "," << category_name(static_cast<TruthCategory>(k)) << ","
               << num(c.allocation.fraction[k].value) << "," << num(c.allocation.fraction[k].mcse) << "\n";
}

void write_trial_duration_csv(std::ostream& os, const AggregateReport& report) {
    os << kCellHeader << ",statistic,value,mcse\n";
    for (const auto& c : report.cells) summary_rows(os, c.cell, c.duration_days);
}

void write_sample_size_csv(std::ostream& os, const AggregateReport& report) {
    os << kCellHeader << ",statistic,value,mcse\n";
    for (const auto& c : report.cells) summary_rows(os, c.cell, c.n_enrolled);
}

void write_experiment_outputs(const std::filesystem::path& dir, const ExperimentResult& result,
                              const ExperimentConfig& cfg) {
    std::filesystem::create_directories(dir);
    auto emit = [&](const char* name, auto&& writer) {
        std::ostringstream os;
        writer(os);
        write_file(dir / name, os.str());
    };
    emit("replications.csv", [&](std::ostream& os) { write_replications_csv(os, result.rows); });
    emit("report.json", [&](std::ostream& os) { write_report_json(os, result.report, cfg); });
    emit("mtd_declaration.csv", [&](std::ostream& os) { write_mtd_declaration_csv(os, result.report); });
    emit("patient_allocation.csv", [&](std::ostream& os) { write_patient_allocation_csv(os, result.report); });
    emit("trial_duration.csv", [&](std::ostream& os) { write_trial_duration_csv(os, result.report); });
    emit("sample_size.csv", [&](std::ostream& os) { write_sample_size_csv(os, result.report); });
}

std::vector<PatientRecord> read_patient_csv(std::istream& is, const DoseGrid& grid, const CyclePlan& plan) {
    std::string line;
    std::vector<std::string> problems;
    std::vector<PatientRecord> records;
    int lineno = 0;
    bool header_seen = false;
    bool has_dropout = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        const auto f = split_csv_line(line);
        if (!header_seen) {
            header_seen = true;
            const bool base = f.size() >= 4 && f[0] == "id" && f[1] == "dose_mg" && f[2] == "u_cycles" && f[3] == "delta";
            has_dropout = f.size() == 5 && f[4] == "dropout";
            if (!base || f.size() > 5 || (f.size() == 5 && !has_dropout))
                throw DataError("line " + std::to_string(lineno) +
                                ": header must be id,dose_mg,u_cycles,delta[,dropout]");
            continue;
        }
        const std::size_t want = has_dropout ? 5 : 4;
        std::string why;
        PatientRecord r;
        long long id = 0, u = 0, delta = 0, drop = 0;
        if (f.size() != want)
            why = "expected " + std::to_string(want) + " fields, found " + std::to_string(f.size());
        else if (!parse_int(f[0], id))
            why = "id is not an integer";
        else if (!parse_double(f[1], r.dose))
            why = "dose_mg is not a number";
        else if (!grid.level_of(r.dose))
            why = "dose " + f[1] + " is not on the dose grid";
        else if (!parse_int(f[2], u))
            why = "u_cycles is not an integer";
        else if (!parse_int(f[3], delta))
            why = "delta is not an integer";
        else if (has_dropout && (!parse_int(f[4], drop) || (drop != 0 && drop != 1)))
            why = "dropout must be 0 or 1";
        if (why.empty()) {
            r.id = static_cast<int>(id);
            r.u_cycles = static_cast<int>(u);
            r.delta = static_cast<int>(delta);
            r.dropout = drop == 1;
            try {
                r.validate(plan);
            } catch (const std::invalid_argument& e) {
                why = e.what();
            }
        }
        if (!why.empty())
            problems.push_back("line " + std::to_string(lineno) + ": " + why);
        else
            records.push_back(r);
    }
    if (!header_seen) throw DataError("patient file is empty (a header line is required)");
    if (!problems.empty()) {
        std::string msg = "malformed patient rows:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw DataError(msg);
    }
    return records;
}

void write_patient_csv(std::ostream& os, const std::vector<PatientRecord>& records) {
    os << "id,dose_mg,u_cycles,delta,dropout\n";
    for (const auto& r : records)
        os << r.id << "," << num(r.dose, 17) << "," << r.u_cycles << "," << r.delta << "," << (r.dropout ? 1 : 0)
           << "\n";
}

std::vector<PriorSummaryRow> prior_summary(const ExperimentConfig& cfg) {
    const auto& grid = cfg.setup.grid;
    const auto& plan = cfg.setup.plan;
    const auto& priors = cfg.setup.trial.priors;
    const int J = plan.n_cycles;
    const int n = cfg.prior_summary.draws;

    std::vector<double> doses(grid.doses().begin(), grid.doses().end());
    if (!grid.level_of(grid.reference_dose())) {
        doses.push_back(grid.reference_dose());
        std::sort(doses.begin(), doses.end());
    }

    std::vector<PriorSummaryRow> out;
    auto emit = [&](const std::string& model, double dose, const std::string& metric, std::vector<double>& v,
                    double at_mean) {
        std::sort(v.begin(), v.end());
        out.push_back({model, dose, metric, quantile(v, 0.025), quantile(v, 0.25), quantile(v, 0.5),
                       quantile(v, 0.75), quantile(v, 0.975), at_mean});
    };

    // Time-to-event model.
    {
        Rng rng = make_rng(split_seed(cfg.prior_summary.seed, {hash_name("TTE")}));
        std::vector<TteParams> draws;
        draws.reserve(n);
        for (int i = 0; i < n; ++i) draws.push_back(draw_tte_prior(priors.tte, rng));
        TteParams mean;
        mean.alpha1 = priors.tte.alpha1.mean;
        mean.log_beta1 = priors.tte.log_beta1.mean;
        mean.alpha2 = priors.tte.alpha2.mean;
        mean.gamma2 = priors.tte.gamma2.mean;
        const double total = std::accumulate(priors.tte.xi_concentration.begin(), priors.tte.xi_concentration.end(), 0.0);
        for (double a : priors.tte.xi_concentration) mean.xi.push_back(a / total);

        for (double dose : doses) {
            std::vector<std::vector<double>> cond(J, std::vector<double>(n)), cum(J, std::vector<double>(n));
            for (int i = 0; i < n; ++i) {
                const auto h = cycle_hazards(draws[i], dose, grid, plan);
                double H = 0.0;
                for (int j = 0; j < J; ++j) {
                    const double x = h.total(j) * plan.cycle_length;
                    cond[j][i] = -std::expm1(-x);
                    H += x;
                    cum[j][i] = -std::expm1(-H);
                }
            }
            const auto hm = cycle_hazards(mean, dose, grid, plan);
            double Hm = 0.0;
            for (int j = 0; j < J; ++j) {
                const double x = hm.total(j) * plan.cycle_length;
                Hm += x;
                emit("TTE", dose, "conditional_" + std::to_string(j + 1), cond[j], -std::expm1(-x));
                emit("TTE", dose, "cumulative_" + std::to_string(j + 1), cum[j], -std::expm1(-Hm));
            }
        }
    }

    // Binomial comparators: B1 models the first cycle, B3 all J cycles.
    const std::pair<const char*, const BlrmPrior*> blrm[] = {{"B1", &priors.b1}, {"B3", &priors.b3}};
    for (const auto& [name, prior] : blrm) {
        const int window = std::string(name) == "B1" ? 1 : J;
        Rng rng = make_rng(split_seed(cfg.prior_summary.seed, {hash_name(name)}));
        std::vector<BlrmParams> draws;
        draws.reserve(n);
        for (int i = 0; i < n; ++i) draws.push_back(draw_blrm_prior(*prior, rng));
        const BlrmParams mean{prior->alpha1.mean, prior->log_beta1.mean, prior->alpha2.mean};
        for (double dose : doses) {
            std::vector<double> v(n);
            for (int i = 0; i < n; ++i) v[i] = blrm_dlt_probability(draws[i], dose, grid);
            emit(name, dose, "cumulative_" + std::to_string(window), v, blrm_dlt_probability(mean, dose, grid));
        }
    }
    return out;
}

void write_prior_summary_csv(std::ostream& os, const std::vector<PriorSummaryRow>& rows) {
    os << "model,dose_mg,metric,q025,q25,q50,q75,q975,at_prior_mean\n";
    for (const auto& r : rows)
        os << r.model << "," << num(r.dose) << "," << r.metric << "," << num(r.q025, 6) << "," << num(r.q25, 6) << ","
           << num(r.q50, 6) << "," << num(r.q75, 6) << "," << num(r.q975, 6) << "," << num(r.at_prior_mean, 6)
           << "\n";
}

void write_audit_jsonl(std::ostream& os, const TrialResult& trial) {
    for (const auto& a : trial.audit) {
        ordered_json j;
        j["method"] = method_name(trial.method);
        j["analysis"] = a.index;
        j["time_days"] = a.time;
        j["fit_seed"] = a.fit_seed;
        j["n_enrolled"] = a.n_enrolled;
        j["decision"] = a.decision;
        j["next_dose_level"] = a.next_level ? ordered_json(*a.next_level) : ordered_json(nullptr);
        j["max_rhat"] = std::isfinite(a.max_rhat) ? ordered_json(a.max_rhat) : ordered_json("inf");
        j["min_ess"] = a.min_ess;
        j["converged"] = a.converged;
        j["retried"] = a.retried;
        ordered_json data = ordered_json::array();
        for (const auto& r : a.data)
            data.push_back({{"id", r.id}, {"dose_mg", r.dose}, {"enroll_day", r.enroll_time},
                            {"u_cycles", r.u_cycles}, {"delta", r.delta}, {"dropout", r.dropout}});
        j["data"] = data;
        ordered_json as = ordered_json::array();
        for (const auto& d : a.assessments)
            as.push_back({{"dose_mg", d.dose}, {"p_under", d.p_under}, {"p_target", d.p_target},
                          {"p_over", d.p_over}, {"ewoc_ok", d.ewoc_ok}, {"exceedance", d.exceedance}});
        j["assessments"] = as;
        os << j.dump() << "\n";
    }
}

std::string format_assessments(const std::vector<DoseAssessment>& assessments) {
    std::ostringstream os;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%10s %9s %9s %9s %12s %8s\n", "dose_mg", "p_under", "p_target", "p_over",
                  "P(>pi_c)", "ewoc_ok");
    os << buf;
    for (const auto& a : assessments) {
        const double worst = a.exceedance.empty() ? 0.0 : *std::max_element(a.exceedance.begin(), a.exceedance.end());
        std::snprintf(buf, sizeof buf, "%10s %9.4f %9.4f %9.4f %12.4f %8s\n", num(a.dose).c_str(), a.p_under,
                      a.p_target, a.p_over, worst, a.ewoc_ok ? "yes" : "no");
        os << buf;
    }
    return os.str();
}

}  // namespace tite
