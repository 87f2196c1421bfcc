#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tite/config.hpp"
#include "tite/quadrature.hpp"
#include "tite/report.hpp"

namespace py = pybind11;
using namespace tite;

namespace {

Dataset make_dataset(const std::vector<PatientRecord>& records, const DoseGrid& grid, const CyclePlan& plan) {
    Dataset d{records, grid, plan};
    d.validate();
    return d;
}

py::dict assessment_dict(const DoseAssessment& a) {
    py::dict d;
    d["dose"] = a.dose;
    d["p_under"] = a.p_under;
    d["p_target"] = a.p_target;
    d["p_over"] = a.p_over;
    d["ewoc_ok"] = a.ewoc_ok;
    d["exceedance"] = a.exceedance;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Multi-cycle time-to-DLT dose-escalation model, EWOC rules and trial simulation";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);

    py::enum_<Method>(m, "Method")
        .value("B1", Method::B1)
        .value("B3", Method::B3)
        .value("TCO", Method::TCO)
        .value("TCU", Method::TCU);

    m.def("cloglog", &cloglog);
    m.def("inv_cloglog", &inv_cloglog);
    m.def("logit", &logit);
    m.def("inv_logit", &inv_logit);

    py::class_<DoseGrid>(m, "DoseGrid")
        .def(py::init<std::vector<double>, double>(), py::arg("doses"), py::arg("reference_dose"))
        .def_property_readonly("doses", [](const DoseGrid& g) { return std::vector<double>(g.doses().begin(), g.doses().end()); })
        .def_property_readonly("reference_dose", &DoseGrid::reference_dose)
        .def("__len__", &DoseGrid::size);

    py::class_<CyclePlan>(m, "CyclePlan")
        .def(py::init([](int n_cycles, double cycle_length, int reference_cycle) {
                 CyclePlan p{n_cycles, cycle_length, reference_cycle};
                 p.validate();
                 return p;
             }),
             py::arg("n_cycles") = 3, py::arg("cycle_length") = 42.0, py::arg("reference_cycle") = 3)
        .def_readonly("n_cycles", &CyclePlan::n_cycles)
        .def_readonly("cycle_length", &CyclePlan::cycle_length)
        .def_readonly("reference_cycle", &CyclePlan::reference_cycle);

    py::class_<TteParams>(m, "TteParams")
        .def(py::init([](double a1, double lb1, double a2, double g2, std::vector<double> xi) {
                 return TteParams{a1, lb1, a2, g2, std::move(xi)};
             }),
             py::arg("alpha1"), py::arg("log_beta1"), py::arg("alpha2"), py::arg("gamma2"), py::arg("xi"))
        .def_readwrite("alpha1", &TteParams::alpha1)
        .def_readwrite("log_beta1", &TteParams::log_beta1)
        .def_readwrite("alpha2", &TteParams::alpha2)
        .def_readwrite("gamma2", &TteParams::gamma2)
        .def_readwrite("xi", &TteParams::xi);

    py::class_<BlrmParams>(m, "BlrmParams")
        .def(py::init([](double a1, double lb1, double a2) { return BlrmParams{a1, lb1, a2}; }), py::arg("alpha1"),
             py::arg("log_beta1"), py::arg("alpha2"))
        .def_readwrite("alpha1", &BlrmParams::alpha1)
        .def_readwrite("log_beta1", &BlrmParams::log_beta1)
        .def_readwrite("alpha2", &BlrmParams::alpha2);

    py::class_<PatientRecord>(m, "PatientRecord")
        .def(py::init([](int id, double dose, int u, int delta, bool dropout) {
                 PatientRecord r;
                 r.id = id;
                 r.dose = dose;
                 r.u_cycles = u;
                 r.delta = delta;
                 r.dropout = dropout;
                 return r;
             }),
             py::arg("id"), py::arg("dose"), py::arg("u_cycles"), py::arg("delta"), py::arg("dropout") = false)
        .def_readonly("id", &PatientRecord::id)
        .def_readonly("dose", &PatientRecord::dose)
        .def_readonly("u_cycles", &PatientRecord::u_cycles)
        .def_readonly("delta", &PatientRecord::delta)
        .def_readonly("dropout", &PatientRecord::dropout);

    m.def(
        "event_probabilities",
        [](const TteParams& p, double dose, const DoseGrid& g, const CyclePlan& plan) {
            const auto e = event_probabilities(cycle_hazards(p, dose, g, plan), plan);
            return py::make_tuple(e.conditional, e.cumulative);
        },
        py::arg("params"), py::arg("dose"), py::arg("grid"), py::arg("plan"),
        "Per-cycle conditional DLT probabilities and the cumulative probability over all cycles.");
    m.def("blrm_dlt_probability",
          [](const BlrmParams& p, double dose, const DoseGrid& g) { return blrm_dlt_probability(p, dose, g); });

    m.def(
        "log_likelihood_tte",
        [](const TteParams& p, const std::vector<PatientRecord>& r, const DoseGrid& g, const CyclePlan& plan) {
            return log_likelihood_tte(p, make_dataset(r, g, plan));
        },
        py::arg("params"), py::arg("records"), py::arg("grid"), py::arg("plan"));
    m.def(
        "log_likelihood_blrm",
        [](const BlrmParams& p, const std::vector<PatientRecord>& r, const DoseGrid& g, const CyclePlan& plan,
           int window) { return log_likelihood_blrm(p, make_dataset(r, g, plan), window); },
        py::arg("params"), py::arg("records"), py::arg("grid"), py::arg("plan"), py::arg("window"));

    m.def(
        "fit",
        [](Method method, const std::vector<PatientRecord>& records, const DoseGrid& g, const CyclePlan& plan,
           std::uint64_t seed, int chains, int warmup, int draws) {
            SamplerConfig cfg;
            cfg.seed = seed;
            cfg.n_chains = chains;
            cfg.n_warmup = warmup;
            cfg.n_draws = draws;
            const auto data = make_dataset(records, g, plan);
            const auto post = fit(method, data, ModelPriors::defaults(plan), cfg);
            py::list assessments;
            for (const auto& a : assess_doses(post, method, g, plan, EwocThresholds{}))
                assessments.append(assessment_dict(a));
            py::dict out;
            out["names"] = post.names();
            out["draws"] = post.matrix();
            out["max_rhat"] = post.diagnostics().max_rhat;
            out["min_ess"] = post.diagnostics().min_ess;
            out["assessments"] = assessments;
            return out;
        },
        py::arg("method"), py::arg("records"), py::arg("grid"), py::arg("plan"), py::arg("seed") = 1,
        py::arg("chains") = 4, py::arg("warmup") = 1000, py::arg("draws") = 1000,
        "Posterior draws (rows chain-major) and per-dose EWOC assessments under the default priors.");

    m.def(
        "quadrature_oracle",
        [](Method method, const std::vector<PatientRecord>& records, const DoseGrid& g, const CyclePlan& plan,
           int nodes) {
            const auto data = make_dataset(records, g, plan);
            const auto prior = method == Method::B1 ? BlrmPrior::b1_defaults() : BlrmPrior::b3_defaults();
            const auto q = quadrature_oracle(method, data, prior, EwocThresholds{}, QuadratureSpec{nodes, 6.0});
            py::dict out;
            out["log_normalizer"] = q.log_normalizer;
            out["p_under"] = q.p_under;
            out["p_target"] = q.p_target;
            out["p_over"] = q.p_over;
            return out;
        },
        py::arg("method"), py::arg("records"), py::arg("grid"), py::arg("plan"), py::arg("nodes") = 161);

    m.def(
        "run_trial",
        [](const std::string& config_text, Method method, const std::string& toxicity, const std::string& dropout,
           std::uint64_t seed) {
            const auto cfg = parse_config(config_text);
            const auto& sc = cfg.setup.scenarios;
            if (!sc.toxicity.count(toxicity)) throw py::value_error("unknown toxicity scenario " + toxicity);
            if (!sc.dropout.count(dropout)) throw py::value_error("unknown dropout scenario " + dropout);
            const auto r = run_trial(cfg.setup.trial, cfg.setup.grid, cfg.setup.plan, sc.toxicity.at(toxicity),
                                     sc.dropout.at(dropout), method, seed);
            py::dict out;
            out["outcome"] = std::string(outcome_name(r.outcome));
            out["mtd_dose"] = r.mtd_dose ? py::cast(*r.mtd_dose) : py::none();
            out["n_enrolled"] = r.n_enrolled;
            out["duration_days"] = r.duration_days;
            out["n_analyses"] = r.n_analyses;
            out["patients"] = r.patients;
            return out;
        },
        py::arg("config"), py::arg("method"), py::arg("toxicity") = "constant", py::arg("dropout") = "none",
        py::arg("seed") = 1);

    m.def(
        "simulate",
        [](const std::string& config_text, int threads) {
            auto cfg = parse_config(config_text);
            if (threads > 0) cfg.plan.threads = threads;
            ExperimentResult result;
            {
                py::gil_scoped_release release;
                result = run_experiment(cfg.setup, cfg.plan);
            }
            std::ostringstream reps, report;
            write_replications_csv(reps, result.rows);
            write_report_json(report, result.report, cfg);
            return py::make_tuple(reps.str(), report.str());
        },
        py::arg("config"), py::arg("threads") = 0,
        "Runs the configured experiment; returns (replications CSV, JSON report) as strings.");

    m.def(
        "prior_summary",
        [](const std::string& config_text) {
            std::ostringstream os;
            write_prior_summary_csv(os, prior_summary(parse_config(config_text)));
            return os.str();
        },
        py::arg("config"));
}
