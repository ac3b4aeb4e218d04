#include "run_config.hpp"

#include <cstdlib>
#include <fstream>
#include <map>
#include <set>

namespace projsplit::cli {

using nlohmann::json;

namespace {

const std::vector<std::string> kProblems = {"portfolio", "group-logistic", "rare-features", "lasso"};

std::vector<FieldInfo> make_fields()
{
    using C = RunConfig;
    return {
        {"", "problem", &C::problem, "portfolio, group-logistic, rare-features or lasso"},
        {"", "seed", &C::seed, "generator seed (falls back to PROJSPLIT_SEED)"},
        {"params", "d", &C::d, "dimension (portfolio assets, logistic features)"},
        {"params", "n", &C::n, "number of samples"},
        {"params", "groups", &C::groups, "number of feature groups"},
        {"params", "leaves", &C::leaves, "number of rare features (tree leaves)"},
        {"params", "depth", &C::depth, "similarity tree depth"},
        {"params", "blocks", &C::blocks, "lasso formulation: 1 or 2 blocks"},
        {"params", "delta_r", &C::delta_r, "return target as a multiple of mean(m)"},
        {"params", "lambda", &C::lambda, "regularization weight"},
        {"params", "mu", &C::mu, "rare features: split between node and leaf penalties"},
        {"params", "instance", &C::instance, "lasso data: scalar or coupled"},
        {"solver", "scheme", &C::scheme, "smooth block: backtrack, fixed, lipschitz, lipschitz-search"},
        {"solver", "gamma", &C::gamma, "primal weight of the projection metric"},
        {"solver", "beta", &C::beta, "relaxation in (0, 2)"},
        {"solver", "alpha1", &C::alpha1, "averaging parameter of block 1"},
        {"solver", "alpha2", &C::alpha2, "averaging parameter of block 2"},
        {"solver", "rho1", &C::rho1, "block-1 stepsize (first trial when backtracking)"},
        {"solver", "rho2", &C::rho2, "block-2 stepsize"},
        {"solver", "link_rho2", &C::link_rho2, "block 2 copies the block-1 stepsize"},
        {"solver", "delta", &C::delta, "backtracking decrease factor"},
        {"solver", "rho_hat", &C::rho_hat, "backtracking stepsize cap"},
        {"solver", "trial_rule", &C::trial_rule, "first backtracking trial: upper, previous, growth"},
        {"solver", "growth", &C::growth, "growth factor of the growth trial rule"},
        {"solver", "max_iters", &C::max_iters, "iteration limit"},
        {"solver", "residual_tol", &C::residual_tol, "stop when the residual drops below this (0 disables)"},
        {"solver", "declared_l1", &C::declared_l1, "override the declared block-1 constant"},
        {"output", "trace", &C::trace, "trace file ('-' for stdout)"},
        {"output", "summary", &C::summary, "summary JSON file ('-' for stdout)"},
        {"output", "trace_format", &C::trace_format, "csv or json"},
    };
}

std::string qualified(const FieldInfo& f) { return f.section.empty() ? f.key : f.section + "." + f.key; }

template <class T>
T parse_number(const std::string& text, const FieldInfo& f)
{
    try {
        std::size_t used = 0;
        T value{};
        if constexpr (std::is_same_v<T, long>)
            value = std::stol(text, &used);
        else if constexpr (std::is_same_v<T, std::uint64_t>) {
            if (!text.empty() && text[0] == '-') throw std::invalid_argument("negative");
            value = std::stoull(text, &used);
        } else
            value = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument("trailing characters");
        return value;
    } catch (const std::exception&) {
        throw ConfigError("field '" + f.key + "': cannot parse '" + text + "'");
    }
}

bool parse_bool(const std::string& text, const FieldInfo& f)
{
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw ConfigError("field '" + f.key + "': expected true or false, got '" + text + "'");
}

void set_from_json(RunConfig& cfg, const FieldInfo& f, const json& v)
{
    auto bad = [&](const char* what) { return ConfigError("field '" + qualified(f) + "' must be " + what); };
    std::visit([&](auto ptr) {
        using T = typename std::remove_reference_t<decltype(cfg.*ptr)>::value_type;
        if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw bad("a string");
            cfg.*ptr = v.get<std::string>();
        } else if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw bad("a boolean");
            cfg.*ptr = v.get<bool>();
        } else if constexpr (std::is_same_v<T, double>) {
            if (!v.is_number()) throw bad("a number");
            cfg.*ptr = v.get<double>();
        } else if constexpr (std::is_same_v<T, std::uint64_t>) {
            // Documents built in code hold small literals as signed integers.
            if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<long long>() < 0))
                throw bad("a nonnegative integer");
            cfg.*ptr = v.get<std::uint64_t>();
        } else {
            if (!v.is_number_integer()) throw bad("an integer");
            cfg.*ptr = v.get<long>();
        }
    }, f.ptr);
}

std::optional<json> get_json(const RunConfig& cfg, const FieldInfo& f)
{
    std::optional<json> out;
    std::visit([&](auto ptr) {
        if (cfg.*ptr) out = json(*(cfg.*ptr));
    }, f.ptr);
    return out;
}

bool is_set(const RunConfig& cfg, const FieldInfo& f)
{
    bool set = false;
    std::visit([&](auto ptr) { set = (cfg.*ptr).has_value(); }, f.ptr);
    return set;
}

template <class T>
T require(const std::optional<T>& v, const char* name, const std::string& problem)
{
    if (!v) throw ConfigError("missing required field '" + std::string(name) + "' for problem '" + problem + "'");
    return *v;
}

void check_applicable(const RunConfig& cfg, const std::string& problem)
{
    static const std::map<std::string, std::set<std::string>> allowed = {
        {"portfolio", {"d", "delta_r", "alpha2", "rho2", "link_rho2"}},
        {"group-logistic", {"n", "d", "groups", "lambda", "alpha2", "rho2", "link_rho2", "growth"}},
        {"rare-features", {"n", "leaves", "depth", "lambda", "mu", "alpha2", "rho2"}},
        {"lasso", {"instance", "blocks", "lambda"}},
    };
    const auto& extra = allowed.at(problem);
    for (const auto& f : run_config_fields()) {
        if (f.section != "params" && f.section != "solver") continue;
        if (f.section == "solver" && f.key != "alpha2" && f.key != "rho2" && f.key != "link_rho2" &&
            f.key != "growth")
            continue;
        if (is_set(cfg, f) && !extra.count(f.key))
            throw ConfigError("field '" + f.key + "' does not apply to problem '" + problem + "'");
    }
}

void positive(std::optional<double> v, const char* name)
{
    if (v && !(*v > 0.0)) throw ConfigError("field '" + std::string(name) + "' must be positive");
}

void positive(std::optional<long> v, const char* name)
{
    if (v && *v < 1) throw ConfigError("field '" + std::string(name) + "' must be positive");
}

// Rebuilds a forward operator with a different declared constant.
ForwardOp redeclared(const ForwardOp& op, double lipschitz)
{
    return ForwardOp([op](const Vec& x) { return op(x); }, lipschitz);
}

template <class Builder>
ProblemSpec with_default_two_step_rho(const RunConfig& cfg, SmoothScheme scheme, Builder build)
{
    // A fixed two-step stepsize needs rho < 1/L; default to 0.9/L.
    if (scheme == SmoothScheme::Lipschitz && !cfg.rho1) {
        ProblemSpec probe = build(1e-12);
        const auto lip = probe.blocks[0].ops.forward.lipschitz();
        const double l = cfg.declared_l1 ? *cfg.declared_l1 : lip.value_or(0.0);
        if (l > 0.0) return build(0.9 / l);
        return probe;
    }
    return build(cfg.rho1.value_or(1.0));
}

} // namespace

const std::vector<FieldInfo>& run_config_fields()
{
    static const std::vector<FieldInfo> fields = make_fields();
    return fields;
}

std::string flag_name(const FieldInfo& f)
{
    std::string s = f.key;
    for (char& c : s)
        if (c == '_') c = '-';
    return s;
}

void set_from_string(RunConfig& cfg, const FieldInfo& f, const std::string& text)
{
    std::visit([&](auto ptr) {
        using T = typename std::remove_reference_t<decltype(cfg.*ptr)>::value_type;
        if constexpr (std::is_same_v<T, std::string>)
            cfg.*ptr = text;
        else if constexpr (std::is_same_v<T, bool>)
            cfg.*ptr = parse_bool(text, f);
        else
            cfg.*ptr = parse_number<T>(text, f);
    }, f.ptr);
}

RunConfig overlay(const RunConfig& base, const RunConfig& top)
{
    RunConfig out = base;
    for (const auto& f : run_config_fields())
        std::visit([&](auto ptr) {
            if ((top.*ptr).has_value()) out.*ptr = top.*ptr;
        }, f.ptr);
    return out;
}

RunConfig parse_spec(const json& doc)
{
    if (!doc.is_object()) throw ConfigError("spec document must be a JSON object");
    RunConfig cfg;
    const auto& fields = run_config_fields();
    for (const auto& [key, value] : doc.items()) {
        if (key == "params" || key == "solver" || key == "output") {
            if (!value.is_object()) throw ConfigError("'" + key + "' must be an object");
            for (const auto& [sub, v] : value.items()) {
                auto it = std::find_if(fields.begin(), fields.end(),
                                       [&](const FieldInfo& f) { return f.section == key && f.key == sub; });
                if (it == fields.end()) throw ConfigError("unknown key '" + key + "." + sub + "'");
                set_from_json(cfg, *it, v);
            }
            continue;
        }
        auto it = std::find_if(fields.begin(), fields.end(),
                               [&](const FieldInfo& f) { return f.section.empty() && f.key == key; });
        if (it == fields.end()) throw ConfigError("unknown key '" + key + "'");
        set_from_json(cfg, *it, value);
    }
    return cfg;
}

RunConfig load_spec_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open spec file '" + path + "'");
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw ConfigError("spec file '" + path + "': " + e.what());
    }
    return parse_spec(doc);
}

json to_spec(const RunConfig& cfg)
{
    json doc = json::object();
    for (const auto& f : run_config_fields()) {
        auto v = get_json(cfg, f);
        if (!v) continue;
        if (f.section.empty())
            doc[f.key] = *v;
        else
            doc[f.section][f.key] = *v;
    }
    return doc;
}

void apply_seed_env(RunConfig& cfg)
{
    if (cfg.seed) return;
    if (const char* env = std::getenv("PROJSPLIT_SEED")) {
        if (*env == '\0') return;
        const auto& fields = run_config_fields();
        auto it = std::find_if(fields.begin(), fields.end(), [](const FieldInfo& f) { return f.key == "seed"; });
        try {
            set_from_string(cfg, *it, env);
        } catch (const ConfigError&) {
            throw ConfigError("PROJSPLIT_SEED: cannot parse '" + std::string(env) + "'");
        }
    }
}

SolveOptions Experiment::options() const
{
    SolveOptions opts;
    opts.max_iters = max_iters;
    opts.residual_tol = residual_tol;
    auto f = objective;
    opts.objective = [f](const PrimalDualPoint& p, std::span<const BlockState>) { return f(p.z()); };
    return opts;
}

Experiment build_experiment(const RunConfig& cfg, std::optional<SmoothScheme> scheme_override)
{
    if (!cfg.problem) throw ConfigError("missing required field 'problem'");
    const std::string problem = *cfg.problem;
    if (std::find(kProblems.begin(), kProblems.end(), problem) == kProblems.end())
        throw ConfigError("field 'problem': unknown problem '" + problem +
                          "' (portfolio, group-logistic, rare-features, lasso)");
    check_applicable(cfg, problem);

    // Cheap range checks before any instance is generated.
    positive(cfg.d, "d");
    positive(cfg.n, "n");
    positive(cfg.groups, "groups");
    positive(cfg.leaves, "leaves");
    positive(cfg.depth, "depth");
    positive(cfg.delta_r, "delta_r");
    positive(cfg.gamma, "gamma");
    positive(cfg.rho1, "rho1");
    positive(cfg.rho2, "rho2");
    positive(cfg.rho_hat, "rho_hat");
    positive(cfg.declared_l1, "declared_l1");
    if (cfg.max_iters && *cfg.max_iters < 0) throw ConfigError("field 'max_iters' must be nonnegative");
    if (cfg.residual_tol && !(*cfg.residual_tol >= 0.0))
        throw ConfigError("field 'residual_tol' must be nonnegative");
    if (cfg.trace_format && *cfg.trace_format != "csv" && *cfg.trace_format != "json")
        throw ConfigError("field 'trace_format' must be csv or json");

    SmoothScheme scheme = cfg.scheme ? smooth_scheme_from_string(*cfg.scheme)
                                     : (problem == "lasso" ? SmoothScheme::Fixed : SmoothScheme::Backtrack);
    if (scheme_override) scheme = *scheme_override;
    auto trial_or = [&](TrialRule fallback) {
        return cfg.trial_rule ? trial_rule_from_string(*cfg.trial_rule) : fallback;
    };

    Experiment ex;
    ex.problem = problem;
    ex.max_iters = cfg.max_iters.value_or(5000);
    ex.residual_tol = cfg.residual_tol.value_or(1e-8);

    if (problem == "portfolio") {
        const long d = require(cfg.d, "d", problem);
        const double delta_r = require(cfg.delta_r, "delta_r", problem);
        const auto seed = require(cfg.seed, "seed", problem);
        if (d < 2) throw ConfigError("field 'd' must be >= 2 for portfolio");
        auto inst = std::make_shared<PortfolioInstance>(gen_portfolio(d, delta_r, seed));
        PortfolioSolverConfig sc;
        sc.gamma = cfg.gamma;
        sc.beta = cfg.beta.value_or(sc.beta);
        sc.scheme = scheme;
        sc.alpha1 = cfg.alpha1.value_or(sc.alpha1);
        sc.alpha2 = cfg.alpha2.value_or(sc.alpha2);
        sc.rho2 = cfg.rho2.value_or(sc.rho2);
        sc.link_rho2 = cfg.link_rho2.value_or(sc.link_rho2);
        sc.delta = cfg.delta.value_or(sc.delta);
        sc.rho_hat = cfg.rho_hat.value_or(sc.rho_hat);
        sc.trial_rule = trial_or(sc.trial_rule);
        ex.spec = with_default_two_step_rho(cfg, scheme, [&](double rho1) {
            PortfolioSolverConfig c = sc;
            c.rho1 = rho1;
            return portfolio_problem(*inst, c);
        });
        ex.init = portfolio_initial_point(*inst, ex.spec);
        ex.objective = [inst](const Vec& x) { return portfolio_objective(x, *inst); };
        auto ref = std::make_shared<std::optional<ReferenceSolution>>();
        ex.reference = [inst, ref]() -> const ReferenceSolution& {
            if (!*ref) *ref = reference_solve(*inst);
            return **ref;
        };
        auto reference = ex.reference;
        ex.criterion = [inst, reference](const Vec& x) { return portfolio_criterion(x, *inst, reference().f_star); };
    } else if (problem == "group-logistic") {
        const auto seed = require(cfg.seed, "seed", problem);
        const long n = cfg.n.value_or(60), d = cfg.d.value_or(200), groups = cfg.groups.value_or(20);
        if (groups > d) throw ConfigError("field 'groups' must not exceed d");
        auto inst =
            std::make_shared<GroupLogisticInstance>(gen_group_logistic(n, d, groups, cfg.lambda.value_or(0.5), seed));
        GroupLogisticSolverConfig sc;
        sc.gamma = cfg.gamma;
        sc.beta = cfg.beta.value_or(sc.beta);
        sc.scheme = scheme;
        sc.alpha1 = cfg.alpha1.value_or(sc.alpha1);
        sc.alpha2 = cfg.alpha2.value_or(sc.alpha2);
        sc.rho2 = cfg.rho2.value_or(sc.rho2);
        sc.link_rho2 = cfg.link_rho2.value_or(sc.link_rho2);
        sc.delta = cfg.delta.value_or(sc.delta);
        sc.rho_hat = cfg.rho_hat.value_or(sc.rho_hat);
        sc.trial_rule = trial_or(sc.trial_rule);
        sc.growth = cfg.growth.value_or(sc.growth);
        ex.spec = with_default_two_step_rho(cfg, scheme, [&](double rho1) {
            GroupLogisticSolverConfig c = sc;
            c.rho1 = rho1;
            return group_logistic_problem(*inst, c);
        });
        ex.init = group_logistic_initial_point(*inst, ex.spec);
        ex.objective = [inst](const Vec& v) { return group_logistic_objective(v, *inst); };
        auto ref = std::make_shared<std::optional<ReferenceSolution>>();
        ex.reference = [inst, ref]() -> const ReferenceSolution& {
            if (!*ref) *ref = reference_solve(*inst);
            return **ref;
        };
    } else if (problem == "rare-features") {
        const auto seed = require(cfg.seed, "seed", problem);
        const long n = cfg.n.value_or(200), leaves = cfg.leaves.value_or(32), depth = cfg.depth.value_or(3);
        if (leaves < 2) throw ConfigError("field 'leaves' must be >= 2");
        auto inst = std::make_shared<RareFeatureInstance>(
            gen_rare_features(n, leaves, depth, cfg.lambda.value_or(0.1), cfg.mu.value_or(0.5), seed));
        RareFeatureSolverConfig sc;
        sc.gamma = cfg.gamma.value_or(sc.gamma);
        sc.beta = cfg.beta.value_or(sc.beta);
        sc.alpha1 = cfg.alpha1.value_or(sc.alpha1);
        sc.rho1 = cfg.rho1.value_or(sc.rho1);
        sc.scheme = scheme;
        sc.alpha2 = cfg.alpha2.value_or(sc.alpha2);
        sc.delta = cfg.delta.value_or(sc.delta);
        sc.rho_hat = cfg.rho_hat.value_or(sc.rho_hat);
        sc.trial_rule = trial_or(sc.trial_rule);
        // The smooth block is block 2 here; rho2 plays the role rho1 has elsewhere.
        if (scheme == SmoothScheme::Lipschitz && !cfg.rho2) {
            RareFeatureSolverConfig probe = sc;
            probe.rho2 = 1e-12;
            const auto l = rare_feature_problem(*inst, probe).blocks[1].ops.forward.lipschitz().value_or(0.0);
            sc.rho2 = l > 0.0 ? 0.9 / l : 1.0;
        } else {
            sc.rho2 = cfg.rho2.value_or(sc.rho2);
        }
        ex.spec = rare_feature_problem(*inst, sc);
        ex.init = rare_feature_initial_point(*inst, ex.spec);
        ex.objective = [inst](const Vec& v) { return rare_feature_objective(v, *inst); };
        auto ref = std::make_shared<std::optional<ReferenceSolution>>();
        ex.reference = [inst, ref]() -> const ReferenceSolution& {
            if (!*ref) *ref = reference_solve(*inst);
            return **ref;
        };
    } else {
        const std::string which = cfg.instance.value_or("scalar");
        LassoInstance base;
        if (which == "scalar")
            base = scalar_lasso();
        else if (which == "coupled")
            base = coupled_lasso();
        else
            throw ConfigError("field 'instance' must be scalar or coupled");
        base.lambda = cfg.lambda.value_or(base.lambda);
        auto inst = std::make_shared<LassoInstance>(base);
        const long blocks = cfg.blocks.value_or(1);
        if (blocks != 1 && blocks != 2) throw ConfigError("field 'blocks' must be 1 or 2");
        LassoSolverConfig sc;
        sc.blocks = static_cast<std::size_t>(blocks);
        sc.gamma = cfg.gamma.value_or(sc.gamma);
        sc.beta = cfg.beta.value_or(sc.beta);
        sc.scheme = scheme;
        sc.alpha = cfg.alpha1.value_or(sc.alpha);
        sc.delta = cfg.delta.value_or(sc.delta);
        sc.rho_hat = cfg.rho_hat.value_or(sc.rho_hat);
        sc.trial_rule = trial_or(sc.trial_rule);
        if (scheme == SmoothScheme::Lipschitz && !cfg.rho1) {
            sc.rho = 0.9 / inst->lipschitz();
        } else {
            sc.rho = cfg.rho1.value_or(sc.rho);
        }
        ex.spec = lasso_problem(*inst, sc);
        const Vec z0 = Vec::Zero(inst->c.size());
        ex.init = default_initial_point(ex.spec, z0);
        ex.objective = [inst](const Vec& z) { return lasso_objective(z, *inst); };
        auto ref = std::make_shared<std::optional<ReferenceSolution>>();
        ex.reference = [inst, ref, blocks]() -> const ReferenceSolution& {
            if (!*ref) *ref = reference_solve(*inst, static_cast<std::size_t>(blocks));
            return **ref;
        };
    }

    if (cfg.declared_l1) {
        auto& ops = ex.spec.blocks[0].ops;
        ops.forward = redeclared(ops.forward, *cfg.declared_l1);
    }
    ex.spec.validate();
    return ex;
}

} // namespace projsplit::cli
