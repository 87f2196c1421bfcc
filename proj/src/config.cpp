#include "tite/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace tite {

namespace {

std::string format_error(const std::string& source, int line, int column, const std::string& message) {
    std::ostringstream os;
    os << source;
    if (line > 0) os << ":" << line << ":" << column;
    os << ": " << message;
    return os.str();
}

// A mapping node plus the set of keys the schema allows at that level.
class Section {
public:
    Section(const YAML::Node& node, std::string path, const std::string& source,
            std::initializer_list<const char*> allowed)
        : node_(node), path_(std::move(path)), source_(source) {
        if (!node_.IsMap()) fail(node_, path_ + " must be a mapping");
        std::set<std::string> keys(allowed.begin(), allowed.end());
        for (const auto& kv : node_) {
            const auto key = kv.first.as<std::string>();
            if (!keys.count(key)) fail(kv.first, "unknown key '" + qualified(key) + "'");
        }
    }

    bool has(const char* key) const { return static_cast<bool>(node_[key]); }
    YAML::Node get(const char* key) const { return node_[key]; }
    std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    const std::string& source() const { return source_; }

    [[noreturn]] void fail(const YAML::Node& at, const std::string& message) const {
        const auto mark = at.Mark();
        const bool known = mark.line >= 0;
        throw ConfigError(source_, known ? mark.line + 1 : 0, known ? mark.column + 1 : 0, message);
    }

    template <typename T>
    void read(const char* key, T& out) const {
        if (!has(key)) return;
        const auto n = get(key);
        try {
            out = n.as<T>();
        } catch (const YAML::Exception&) {
            fail(n, "bad value for '" + qualified(key) + "'");
        }
    }

    template <typename T>
    T require(const char* key) const {
        if (!has(key)) fail(node_, "missing required key '" + qualified(key) + "'");
        T out{};
        read(key, out);
        return out;
    }

    Section child(const char* key, std::initializer_list<const char*> allowed) const {
        return Section(get(key), qualified(key), source_, allowed);
    }

    const YAML::Node& node() const { return node_; }

private:
    YAML::Node node_;
    std::string path_;
    const std::string& source_;
};

// A normal prior written either as {mean, sd} or as {prob, sd}, where prob is
// mapped through `link` to the mean.
template <typename Link>
void read_normal(const Section& parent, const char* key, NormalPrior& out, Link link) {
    if (!parent.has(key)) return;
    const Section s = parent.child(key, {"mean", "prob", "sd"});
    if (s.has("mean") && s.has("prob")) s.fail(s.node(), "give either mean or prob for '" + parent.qualified(key) + "'");
    s.read("mean", out.mean);
    if (s.has("prob")) {
        const double p = s.require<double>("prob");
        if (!(p > 0.0 && p < 1.0)) s.fail(s.get("prob"), "prob must lie in (0, 1)");
        out.mean = link(p);
    }
    s.read("sd", out.sd);
    if (!(out.sd > 0.0)) s.fail(s.node(), "sd must be positive for '" + parent.qualified(key) + "'");
}

void read_blrm_prior(const Section& priors, const char* key, BlrmPrior& prior) {
    if (!priors.has(key)) return;
    const Section s = priors.child(key, {"alpha1", "log_beta1", "alpha2"});
    auto lg = [](double p) { return logit(p); };
    auto id = [](double) -> double { throw std::logic_error("log_beta1 takes a mean"); };
    read_normal(s, "alpha1", prior.alpha1, lg);
    if (s.has("log_beta1") && s.get("log_beta1")["prob"]) s.fail(s.get("log_beta1"), "log_beta1 takes mean, not prob");
    read_normal(s, "log_beta1", prior.log_beta1, id);
    read_normal(s, "alpha2", prior.alpha2, lg);
}

}  // namespace

ConfigError::ConfigError(const std::string& source, int line, int column, const std::string& message)
    : std::runtime_error(format_error(source, line, column, message)), line_(line), column_(column) {}

Scenarios default_scenarios(const DoseGrid& grid, const CyclePlan& plan, const TruthCurve& curve) {
    Scenarios s;
    for (const char* profile : {"constant", "increasing", "decreasing"})
        s.toxicity.emplace(profile, make_scenario(profile, curve, default_multipliers(profile), grid, plan));
    s.dropout["none"] = {"none", 0.0, 0.0, 80.0};
    s.dropout["constant33"] = {"constant33", 0.33, 0.33, 80.0};
    s.dropout["constant55"] = {"constant55", 0.55, 0.55, 80.0};
    s.dropout["decreasing"] = {"decreasing", 0.55, 0.0, 80.0};
    s.dropout["increasing"] = {"increasing", 0.0, 0.55, 80.0};
    return s;
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError(source, e.mark.line + 1, e.mark.column + 1, e.msg);
    }
    if (!root || root.IsNull()) throw ConfigError(source, 0, 0, "empty configuration");

    const Section top(root, "", source,
                      {"reference_dose", "doses", "cycles", "priors", "thresholds", "mtd_rules", "trial", "sampler",
                       "truth", "toxicity_scenarios", "dropout_scenarios", "experiment", "prior_summary",
                       "output_dir"});

    // Grid and cycle plan first: several defaults depend on them.
    const double reference_dose = top.require<double>("reference_dose");
    std::vector<double> doses{10, 20, 40, 80, 160, 320, 640, 1280};
    top.read("doses", doses);
    std::optional<DoseGrid> grid;
    try {
        grid.emplace(doses, reference_dose);
    } catch (const std::invalid_argument& e) {
        top.fail(top.has("doses") ? top.get("doses") : top.get("reference_dose"), e.what());
    }

    CyclePlan plan;
    if (top.has("cycles")) {
        const auto s = top.child("cycles", {"n_cycles", "cycle_length_days", "reference_cycle"});
        s.read("n_cycles", plan.n_cycles);
        plan.reference_cycle = plan.n_cycles;
        s.read("cycle_length_days", plan.cycle_length);
        s.read("reference_cycle", plan.reference_cycle);
        try {
            plan.validate();
        } catch (const std::invalid_argument& e) {
            s.fail(s.node(), e.what());
        }
    }

    ExperimentConfig cfg{ExperimentSetup{*grid, plan, TrialConfig{}, Scenarios{}}, ExperimentPlan{}, {}, "results"};
    TrialConfig& trial = cfg.setup.trial;
    trial.priors = ModelPriors::defaults(plan);

    if (top.has("priors")) {
        const auto pr = top.child("priors", {"tte", "b1", "b3"});
        if (pr.has("tte")) {
            const auto s = pr.child("tte", {"alpha1", "log_beta1", "alpha2", "gamma2", "xi_concentration"});
            auto cl = [&plan](double p) { return TtePrior::intercept_for(p, plan); };
            auto id = [](double) -> double { throw std::logic_error("unused"); };
            for (const char* k : {"log_beta1", "gamma2"})
                if (s.has(k) && s.get(k)["prob"]) s.fail(s.get(k), std::string(k) + " takes mean, not prob");
            read_normal(s, "alpha1", trial.priors.tte.alpha1, cl);
            read_normal(s, "log_beta1", trial.priors.tte.log_beta1, id);
            read_normal(s, "alpha2", trial.priors.tte.alpha2, cl);
            read_normal(s, "gamma2", trial.priors.tte.gamma2, id);
            s.read("xi_concentration", trial.priors.tte.xi_concentration);
        }
        read_blrm_prior(pr, "b1", trial.priors.b1);
        read_blrm_prior(pr, "b3", trial.priors.b3);
    }

    if (top.has("thresholds")) {
        const auto s = top.child("thresholds", {"pi_c", "p_c", "target_low"});
        s.read("pi_c", trial.thresholds.pi_c);
        s.read("p_c", trial.thresholds.p_c);
        s.read("target_low", trial.thresholds.target_low);
    }
    if (top.has("mtd_rules")) {
        const auto s = top.child("mtd_rules", {"min_patients", "min_target_prob", "min_patients_alt",
                                               "require_same_dose", "escalation_cap"});
        s.read("min_patients", trial.rules.min_patients);
        s.read("min_target_prob", trial.rules.min_target_prob);
        s.read("min_patients_alt", trial.rules.min_patients_alt);
        s.read("require_same_dose", trial.rules.require_same_dose);
        s.read("escalation_cap", trial.rules.escalation_cap);
    }
    if (top.has("trial")) {
        const auto s = top.child("trial", {"cohort_size", "start_dose", "max_patients", "accrual_mean_days"});
        s.read("cohort_size", trial.cohort_size);
        s.read("start_dose", trial.start_dose);
        s.read("max_patients", trial.max_patients);
        s.read("accrual_mean_days", trial.accrual_mean_days);
    }
    if (top.has("sampler")) {
        const auto s = top.child("sampler", {"chains", "warmup", "draws", "target_accept", "initial_scale",
                                             "rhat_max", "ess_min"});
        s.read("chains", trial.sampler.n_chains);
        s.read("warmup", trial.sampler.n_warmup);
        s.read("draws", trial.sampler.n_draws);
        s.read("target_accept", trial.sampler.target_accept);
        s.read("initial_scale", trial.sampler.initial_scale);
        s.read("rhat_max", trial.sampler.rhat_max);
        s.read("ess_min", trial.sampler.ess_min);
    }
    try {
        trial.validate(*grid, plan);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(source, 0, 0, e.what());
    }

    TruthCurve curve;
    if (top.has("truth")) {
        const auto s = top.child("truth", {"pivot_prob", "slope", "pivot_dose"});
        if (s.has("pivot_prob")) {
            const double p = s.require<double>("pivot_prob");
            if (!(p > 0.0 && p < 1.0)) s.fail(s.get("pivot_prob"), "pivot_prob must lie in (0, 1)");
            curve.intercept = cloglog(p);
        }
        s.read("slope", curve.slope);
        s.read("pivot_dose", curve.pivot_dose);
        if (!(curve.slope > 0.0 && curve.pivot_dose > 0.0)) s.fail(s.node(), "truth slope and pivot_dose must be positive");
    }
    cfg.setup.scenarios = default_scenarios(*grid, plan, curve);
    auto& scenarios = cfg.setup.scenarios;

    if (top.has("toxicity_scenarios")) {
        const auto node = top.get("toxicity_scenarios");
        if (!node.IsMap()) top.fail(node, "toxicity_scenarios must map names to cycle multipliers");
        for (const auto& kv : node) {
            const auto name = kv.first.as<std::string>();
            std::vector<double> m;
            try {
                m = kv.second.as<std::vector<double>>();
            } catch (const YAML::Exception&) {
                top.fail(kv.second, "toxicity scenario '" + name + "' needs a list of multipliers");
            }
            try {
                scenarios.toxicity.emplace(name, make_scenario(name, curve, m, *grid, plan));
            } catch (const std::invalid_argument& e) {
                top.fail(kv.second, "toxicity scenario '" + name + "': " + e.what());
            }
        }
    }
    if (top.has("dropout_scenarios")) {
        const auto node = top.get("dropout_scenarios");
        if (!node.IsMap()) top.fail(node, "dropout_scenarios must be a mapping");
        for (const auto& kv : node) {
            const auto name = kv.first.as<std::string>();
            const Section s(kv.second, "dropout_scenarios." + name, source, {"low", "high", "boundary"});
            DropoutScenario d{name, 0.0, 0.0, 80.0};
            s.read("low", d.rate_low);
            s.read("high", d.rate_high);
            s.read("boundary", d.boundary);
            try {
                d.validate();
            } catch (const std::invalid_argument& e) {
                s.fail(s.node(), e.what());
            }
            scenarios.dropout[name] = d;
        }
    }

    std::vector<std::string> methods{"B1", "B3", "TCO", "TCU"};
    std::vector<std::string> tox_names, drop_names;
    for (const auto& [k, v] : scenarios.toxicity) tox_names.push_back(k);
    for (const auto& [k, v] : scenarios.dropout) drop_names.push_back(k);
    YAML::Node exp_node;
    if (top.has("experiment")) {
        const auto s = top.child("experiment", {"replications", "master_seed", "threads", "methods", "toxicity",
                                                "dropout"});
        exp_node = s.node();
        s.read("replications", cfg.plan.replications);
        s.read("master_seed", cfg.plan.master_seed);
        s.read("threads", cfg.plan.threads);
        s.read("methods", methods);
        s.read("toxicity", tox_names);
        s.read("dropout", drop_names);
        for (const auto& t : tox_names)
            if (!scenarios.toxicity.count(t)) s.fail(s.get("toxicity"), "unknown toxicity scenario '" + t + "'");
        for (const auto& d : drop_names)
            if (!scenarios.dropout.count(d)) s.fail(s.get("dropout"), "unknown dropout scenario '" + d + "'");
    }
    for (const auto& m : methods) {
        Method method;
        try {
            method = parse_method(m);
        } catch (const std::invalid_argument&) {
            throw ConfigError(source, exp_node ? exp_node["methods"].Mark().line + 1 : 0,
                              exp_node ? exp_node["methods"].Mark().column + 1 : 0, "unknown method '" + m + "'");
        }
        for (const auto& t : tox_names)
            for (const auto& d : drop_names) cfg.plan.cells.push_back({method, t, d});
    }
    try {
        cfg.plan.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(source, exp_node ? exp_node.Mark().line + 1 : 0, exp_node ? exp_node.Mark().column + 1 : 0,
                          e.what());
    }

    if (top.has("prior_summary")) {
        const auto s = top.child("prior_summary", {"draws", "seed"});
        s.read("draws", cfg.prior_summary.draws);
        s.read("seed", cfg.prior_summary.seed);
        if (cfg.prior_summary.draws < 100) s.fail(s.node(), "prior_summary.draws must be at least 100");
    }
    top.read("output_dir", cfg.output_dir);
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, 0, 0, "cannot open configuration file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path);
}

}  // namespace tite
