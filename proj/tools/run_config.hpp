#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "projsplit/problems.hpp"

namespace projsplit::cli {

//! Everything a subcommand can be told, from flags or a spec document.
/*!
 * All fields are optional so that a spec file and explicit flags can be
 * layered; build_experiment() decides what is required for each problem.
 */
struct RunConfig {
    std::optional<std::string> problem;
    std::optional<std::uint64_t> seed;

    // instance parameters
    std::optional<long> d;
    std::optional<long> n;
    std::optional<long> groups;
    std::optional<long> leaves;
    std::optional<long> depth;
    std::optional<long> blocks;
    std::optional<double> delta_r;
    std::optional<double> lambda;
    std::optional<double> mu;
    std::optional<std::string> instance;

    // solver options
    std::optional<std::string> scheme;
    std::optional<double> gamma;
    std::optional<double> beta;
    std::optional<double> alpha1;
    std::optional<double> alpha2;
    std::optional<double> rho1;
    std::optional<double> rho2;
    std::optional<bool> link_rho2;
    std::optional<double> delta;
    std::optional<double> rho_hat;
    std::optional<std::string> trial_rule;
    std::optional<double> growth;
    std::optional<long> max_iters;
    std::optional<double> residual_tol;
    std::optional<double> declared_l1;  //!< overrides the block-1 constant (for audits)

    // outputs
    std::optional<std::string> trace;
    std::optional<std::string> summary;
    std::optional<std::string> trace_format;
};

using FieldPtr = std::variant<std::optional<long> RunConfig::*, std::optional<double> RunConfig::*,
                              std::optional<std::string> RunConfig::*, std::optional<bool> RunConfig::*,
                              std::optional<std::uint64_t> RunConfig::*>;

struct FieldInfo {
    std::string section;  //!< "", "params", "solver" or "output"
    std::string key;      //!< snake_case; the flag is its kebab-case form
    FieldPtr ptr;
    std::string help;
};

const std::vector<FieldInfo>& run_config_fields();
std::string flag_name(const FieldInfo& f);

void set_from_string(RunConfig& cfg, const FieldInfo& f, const std::string& text);
//! Layer `top` over `base`: every field set in `top` wins.
RunConfig overlay(const RunConfig& base, const RunConfig& top);

//! Spec document {problem, seed, params{...}, solver{...}, output{...}}; unknown keys throw.
RunConfig parse_spec(const nlohmann::json& doc);
RunConfig load_spec_file(const std::string& path);
nlohmann::json to_spec(const RunConfig& cfg);

//! Falls back to PROJSPLIT_SEED when no seed was given.
void apply_seed_env(RunConfig& cfg);

//! A generated instance wired to a solver configuration.
struct Experiment {
    std::string problem;
    ProblemSpec spec;
    InitialPoint init;
    long max_iters = 5000;
    double residual_tol = 1e-8;
    //! F at a primal point.
    std::function<double(const Vec&)> objective;
    //! Certified reference (computed on first use).
    std::function<const ReferenceSolution&()> reference;
    //! c(x) for portfolio problems, empty otherwise.
    std::function<double(const Vec&)> criterion;

    SolveOptions options() const;
};

//! Throws ConfigError naming the offending field.
Experiment build_experiment(const RunConfig& cfg, std::optional<SmoothScheme> scheme_override = std::nullopt);

} // namespace projsplit::cli
