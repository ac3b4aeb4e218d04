#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "projsplit/operators.hpp"
#include "run_config.hpp"

using namespace projsplit;
using namespace projsplit::cli;
using nlohmann::json;

namespace {

constexpr int kExitViolation = 1;
constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;

//! Raw flag text per field, converted after parsing so that errors share one path.
struct FlagBuffer {
    std::map<std::string, std::string> values;
    std::string spec_path;

    void attach(CLI::App& app)
    {
        app.add_option("--spec", spec_path, "JSON spec document (flags override it)");
        for (const auto& f : run_config_fields())
            app.add_option("--" + flag_name(f), values[f.key], f.help);
    }

    RunConfig resolve(const CLI::App& app) const
    {
        RunConfig base;
        if (!spec_path.empty()) base = load_spec_file(spec_path);
        RunConfig top;
        for (const auto& f : run_config_fields())
            if (app.count("--" + flag_name(f)) > 0) set_from_string(top, f, values.at(f.key));
        RunConfig cfg = overlay(base, top);
        apply_seed_env(cfg);
        return cfg;
    }
};

std::string fmt(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

//! Opens a file or stdout for "-".
class Sink {
public:
    explicit Sink(const std::string& path)
    {
        if (path != "-") {
            file_.open(path);
            if (!file_) throw ConfigError("cannot open output file '" + path + "'");
        }
    }
    std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

private:
    std::ofstream file_;
};

void write_trace_csv(std::ostream& out, const SolveTrace& trace, std::size_t n)
{
    out << "iter,phi,pi,tau,res_primal,res_dual,obj,fwd_evals,elapsed_s";
    for (std::size_t i = 1; i <= n; ++i) out << ",rho_" << i;
    for (std::size_t i = 1; i <= n; ++i) out << ",eta_" << i;
    out << '\n';
    for (const auto& r : trace.records) {
        out << r.iter << ',' << fmt(r.phi) << ',' << fmt(r.pi) << ',' << fmt(r.tau) << ',' << fmt(r.res_primal)
            << ',' << fmt(r.res_dual) << ',' << fmt(r.objective) << ',' << r.fwd_evals << ',' << fmt(r.elapsed_s);
        for (double v : r.rho) out << ',' << fmt(v);
        for (double v : r.eta) out << ',' << fmt(v);
        out << '\n';
    }
}

void write_trace_json(std::ostream& out, const SolveTrace& trace)
{
    json rows = json::array();
    for (const auto& r : trace.records) {
        json row = {{"iter", r.iter},         {"phi", r.phi},           {"pi", r.pi},
                    {"tau", r.tau},           {"res_primal", r.res_primal}, {"res_dual", r.res_dual},
                    {"obj", r.objective},     {"fwd_evals", r.fwd_evals}, {"elapsed_s", r.elapsed_s},
                    {"rho", r.rho},           {"eta", r.eta}};
        rows.push_back(std::move(row));
    }
    out << rows.dump(1) << '\n';
}

json summary_json(const Experiment& ex, const SolveResult& res, double elapsed)
{
    json s;
    s["problem"] = ex.problem;
    s["status"] = to_string(res.status);
    s["iters"] = res.iterations;
    s["final_residuals"] = {{"primal", res.final_residuals.max_primal}, {"dual", res.final_residuals.max_dual}};
    s["F"] = ex.objective(res.point.z());
    std::uint64_t evals = 0;
    for (auto e : res.forward_evals) evals += e;
    s["fwd_evals"] = evals;
    s["elapsed_s"] = elapsed;
    if (ex.criterion) {
        s["f_star"] = ex.reference().f_star;
        // x_1 is the simplex-feasible iterate; c(z) is reported alongside.
        s["c_x"] = ex.criterion(res.blocks.front().x);
        s["c_z"] = ex.criterion(res.point.z());
    }
    return s;
}

int cmd_run(const CLI::App& app, const FlagBuffer& flags)
{
    const RunConfig cfg = flags.resolve(app);
    const Experiment ex = build_experiment(cfg);
    SolveOptions opts = ex.options();
    const auto start = std::chrono::steady_clock::now();
    const SolveResult res = solve(ex.spec, ex.init, opts);
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    {
        Sink trace(cfg.trace.value_or("trace.csv"));
        if (cfg.trace_format.value_or("csv") == "csv")
            write_trace_csv(trace.stream(), res.trace, ex.spec.size());
        else
            write_trace_json(trace.stream(), res.trace);
    }
    const json s = summary_json(ex, res, elapsed);
    const std::string summary_path = cfg.summary.value_or("summary.json");
    if (summary_path != "-") {
        Sink sink(summary_path);
        sink.stream() << s.dump(2) << '\n';
    }
    std::cout << s.dump(2) << '\n';
    return 0;
}

//! Worst value seen for one audited property.
struct Audit {
    explicit Audit(std::string n) : name(std::move(n)) {}

    std::string name;
    double worst = std::numeric_limits<double>::infinity();  //!< smallest slack; >= -tol passes
    long checks = 0;
    bool skipped = false;
    std::string note;

    void record(double slack)
    {
        worst = std::min(worst, slack);
        ++checks;
    }
    bool passed(double tol) const { return skipped || checks == 0 || worst >= -tol; }
};

//! Power iteration on v -> B(x + v) - B(x), which is exact for affine B.
double estimate_constant(const ForwardOp& op, const Vec& x)
{
    const Vec bx = op(x);
    const double h = 1e-3 * std::max(1.0, x.norm());
    auto jv = [&](const Vec& v) -> Vec { return (op(x + h * v) - bx) / h; };
    return power_iteration_lmax(jv, x.size(), 300, 1e-10);
}

void check_declared_constants(const Experiment& ex)
{
    const auto maps = ex.spec.maps();
    for (std::size_t i = 0; i < ex.spec.size(); ++i) {
        const auto& fwd = ex.spec.blocks[i].ops.forward;
        const auto declared = fwd.lipschitz();
        if (!declared || fwd.is_constant()) continue;
        const double est = estimate_constant(fwd, maps[i].apply(ex.init.point.z()));
        if (*declared < est * (1.0 - 1e-3))
            throw ConfigError("block " + std::to_string(i + 1) + " (" + ex.spec.blocks[i].name +
                              "): declared constant " + fmt(*declared) + " is below the estimate " + fmt(est));
    }
}

int cmd_verify(const CLI::App& app, const FlagBuffer& flags, double tol, double kkt_tol)
{
    const RunConfig cfg = flags.resolve(app);
    const Experiment ex = build_experiment(cfg);
    check_declared_constants(ex);

    const ReferenceSolution& ref = ex.reference();
    const auto maps = ex.spec.maps();
    const GammaMetric& metric = ex.spec.metric;

    Audit ascent{"ascent"}, contractive{"contractive"}, fejer{"fejer"}, sep{"separator_at_solution"},
        lip{"lipschitz_block_nonneg"};
    bool any_one_step = false, any_backtrack = false, any_two_step = false;
    for (const auto& b : ex.spec.blocks) {
        any_one_step |= !std::holds_alternative<LipschitzStep>(b.scheme);
        any_backtrack |= std::holds_alternative<Backtracking>(b.scheme);
        any_two_step |= std::holds_alternative<LipschitzStep>(b.scheme);
    }
    const std::optional<PrimalDualPoint> star = ref.point;

    SolveOptions opts = ex.options();
    opts.observer = [&](const IterationView& v) {
        std::vector<BlockPair> pairs;
        for (const auto& st : v.current) pairs.push_back({st.x, st.y});
        const auto terms = separator_terms(v.point, pairs, maps);
        for (std::size_t i = 0; i < v.current.size(); ++i) {
            const Vec gz = maps[i].apply(v.point.z());
            const auto& scheme = v.schemes[i];
            double alpha = 0.0;
            if (const auto* fs = std::get_if<FixedStep>(&scheme)) alpha = fs->params.alpha;
            if (const auto* bt = std::get_if<Backtracking>(&scheme)) alpha = bt->alpha;
            if (alpha > 0.0 && v.iter >= 2) {
                const auto r = ascent_check(v.prev_phi[i], v.previous[i].y, v.current[i], gz, v.duals[i], alpha,
                                            v.current[i].rho, tol);
                ascent.record(r.slack);
            }
            if (const auto* bt = std::get_if<Backtracking>(&scheme)) {
                const auto r = contractive_check(v.current[i], v.previous[i].x, gz, v.duals[i], bt->alpha,
                                                 v.current[i].rho, bt->config.theta_hat, bt->config.w_hat, tol);
                contractive.record(r.slack);
            }
            if (std::holds_alternative<LipschitzStep>(scheme)) lip.record(terms[i]);
        }
        if (star) {
            const double before = gamma_norm_sq(v.point - *star, metric);
            const double after = gamma_norm_sq(v.outcome.next_point - *star, metric);
            fejer.record(before - after);
            sep.record(-v.hyperplane.value(*star));
        }
    };
    const SolveResult res = solve(ex.spec, ex.init, opts);
    const KktReport kkt = kkt_check(res, ex.spec, kkt_tol);

    if (!any_one_step) ascent.skipped = true, ascent.note = "no one-step blocks";
    if (!any_backtrack) contractive.skipped = true, contractive.note = "no backtracking blocks";
    if (!any_two_step) lip.skipped = true, lip.note = "no two-step blocks";
    if (!star) {
        fejer.skipped = sep.skipped = true;
        fejer.note = sep.note = "reference has no primal-dual point";
    }

    bool ok = true;
    std::cout << "status " << to_string(res.status) << " iters " << res.iterations << '\n';
    for (const Audit* a : {&ascent, &contractive, &fejer, &sep, &lip}) {
        const bool pass = a->passed(tol);
        ok &= pass;
        std::cout << a->name << ' ';
        if (a->skipped)
            std::cout << "skipped (" << a->note << ")\n";
        else
            std::cout << "worst_slack " << fmt(a->checks ? a->worst : 0.0) << " checks " << a->checks << ' '
                      << (pass ? "PASS" : "FAIL") << '\n';
    }
    ok &= kkt.passed;
    std::cout << "kkt max_residual " << fmt(kkt.max_residual) << " consistency " << fmt(kkt.consistency) << ' '
              << (kkt.passed ? "PASS" : "FAIL") << '\n';
    return ok ? 0 : kExitViolation;
}

int cmd_compare_steps(const CLI::App& app, const FlagBuffer& flags)
{
    RunConfig cfg = flags.resolve(app);
    if (cfg.scheme) throw ConfigError("field 'scheme' is chosen by compare-steps itself");
    const long iters = cfg.max_iters.value_or(200);
    cfg.max_iters = iters;
    cfg.residual_tol = 0.0;

    // Same instance, same iteration budget, only the smooth-block update differs.
    const Experiment one = build_experiment(cfg, SmoothScheme::Backtrack);
    const Experiment two = build_experiment(cfg, SmoothScheme::LipschitzSearch);
    std::size_t smooth = 0;
    for (std::size_t i = 0; i < one.spec.size(); ++i)
        if (std::holds_alternative<Backtracking>(one.spec.blocks[i].scheme)) smooth = i;

    const SolveResult r1 = solve(one.spec, one.init, one.options());
    const SolveResult r2 = solve(two.spec, two.init, two.options());

    {
        Sink out(cfg.trace.value_or("steps.csv"));
        auto& os = out.stream();
        os << "iter,rho_one_step,rho_two_step\n";
        const std::size_t rows = std::max(r1.trace.records.size(), r2.trace.records.size());
        for (std::size_t k = 0; k < rows; ++k) {
            os << k + 1;
            for (const auto* r : {&r1, &r2}) {
                os << ',';
                if (k < r->trace.records.size()) os << fmt(r->trace.records[k].rho[smooth]);
            }
            os << '\n';
        }
    }
    json s;
    s["problem"] = one.problem;
    s["smooth_block"] = smooth + 1;
    s["one_step"] = {{"iters", r1.iterations}, {"fwd_evals", r1.forward_evals[smooth]},
                     {"status", to_string(r1.status)}};
    s["two_step"] = {{"iters", r2.iterations}, {"fwd_evals", r2.forward_evals[smooth]},
                     {"status", to_string(r2.status)}};
    const double per1 = static_cast<double>(r1.forward_evals[smooth]) / std::max(1L, r1.iterations);
    const double per2 = static_cast<double>(r2.forward_evals[smooth]) / std::max(1L, r2.iterations);
    s["fwd_evals_per_iter"] = {{"one_step", per1}, {"two_step", per2}, {"ratio", per1 / per2}};
    const std::string summary_path = cfg.summary.value_or("-");
    if (summary_path != "-") {
        Sink sink(summary_path);
        sink.stream() << s.dump(2) << '\n';
    }
    std::cout << s.dump(2) << '\n';
    return 0;
}

int cmd_gen(const CLI::App& app, const FlagBuffer& flags, const std::string& path)
{
    const RunConfig cfg = flags.resolve(app);
    // Building the experiment validates the document and exercises the generator.
    (void)build_experiment(cfg);
    Sink out(path);
    out.stream() << to_spec(cfg).dump(2) << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Projective splitting solver and experiment driver"};
    app.require_subcommand(1);

    FlagBuffer run_flags, verify_flags, compare_flags, gen_flags;
    auto* run = app.add_subcommand("run", "solve one instance, write a trace and a summary");
    run_flags.attach(*run);

    double tol = 1e-8, kkt_tol = 1e-6;
    auto* verify = app.add_subcommand("verify", "solve with per-iteration invariant audits");
    verify_flags.attach(*verify);
    verify->add_option("--tol", tol, "allowed negative slack of each audited inequality");
    verify->add_option("--kkt-tol", kkt_tol, "tolerance of the final KKT check");

    auto* compare = app.add_subcommand("compare-steps", "one-step backtracking against the two-step search");
    compare_flags.attach(*compare);

    std::string gen_out = "-";
    auto* gen = app.add_subcommand("gen", "write a spec document");
    gen_flags.attach(*gen);
    gen->add_option("--out", gen_out, "spec file ('-' for stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (run->parsed()) return cmd_run(*run, run_flags);
        if (verify->parsed()) return cmd_verify(*verify, verify_flags, tol, kkt_tol);
        if (compare->parsed()) return cmd_compare_steps(*compare, compare_flags);
        if (gen->parsed()) return cmd_gen(*gen, gen_flags, gen_out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DimensionError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "solver error: " << e.what() << '\n';
        return kExitSolver;
    }
    return kExitConfig;
}
