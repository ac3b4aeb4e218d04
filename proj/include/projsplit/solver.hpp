#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "projsplit/block_updates.hpp"
#include "projsplit/separator.hpp"
#include "projsplit/spaces.hpp"

namespace projsplit {

//! One-forward-step update with a user-chosen stepsize.
struct FixedStep {
    OneStepParams params;
    //! Copy the stepsize of an earlier block (same iteration) instead of params.rho.
    //! Only allowed for blocks with a constant forward operator.
    std::optional<std::size_t> rho_link;
};

//! One-forward-step update with backtracking.
struct Backtracking {
    double alpha = 0.1;
    BacktrackConfig config;
};

//! Two-forward-step update for a merely Lipschitz B.
struct LipschitzStep {
    double rho = 1.0;
    //! Optional per-iteration stepsize (k starts at 1); overrides rho.
    std::function<double(long)> schedule;
    //! Optional local-Lipschitz search; overrides rho/schedule (rho is the first trial).
    std::optional<TwoStepBacktrackConfig> search;
};

using Scheme = std::variant<FixedStep, Backtracking, LipschitzStep>;

struct BlockSpec {
    BlockOps ops;
    Scheme scheme;
    std::string name;
};

struct ProblemSpec {
    std::vector<BlockSpec> blocks;
    GammaMetric metric{1.0};
    double beta = 1.0;

    std::size_t size() const noexcept { return blocks.size(); }
    Eigen::Index primal_dim() const;
    std::vector<LinearMap> maps() const;
    //! Throws ConfigError on any violated parameter range or shape.
    void validate() const;
};

//! Starting data. x0 has one entry per block; y0 is optional per block (an
//! empty vector means "derive it").
struct InitialPoint {
    PrimalDualPoint point;
    std::vector<Vec> x0;
    std::vector<Vec> y0;
};

//! Start at z = z0, all duals zero and x_i^0 = G_i z0.
InitialPoint default_initial_point(const ProblemSpec& problem, const Vec& z0);

struct ResidualReport {
    std::vector<double> dual;    //!< |y_i - w_i|
    std::vector<double> primal;  //!< |G_i z - x_i|
    double max_dual = 0.0;
    double max_primal = 0.0;
    double aggregate() const noexcept { return std::max(max_dual, max_primal); }
};

ResidualReport residuals(const PrimalDualPoint& point, std::span<const BlockState> states,
                         std::span<const LinearMap> maps);

struct IterationRecord {
    long iter = 0;
    double phi = 0.0;
    double pi = 0.0;
    double tau = 0.0;
    double res_primal = 0.0;
    double res_dual = 0.0;
    double objective = 0.0;  //!< NaN when no objective was given
    std::uint64_t fwd_evals = 0;  //!< cumulative, all blocks, excluding initialization
    double elapsed_s = 0.0;
    std::vector<double> rho;
    std::vector<double> eta;
    std::vector<int> trials;  //!< backtracking trials this iteration (0 for other schemes)
    std::vector<std::uint64_t> block_fwd_evals;  //!< cumulative, per block
};

struct SolveTrace {
    std::vector<IterationRecord> records;
};

//! Everything an iteration observer can look at.
struct IterationView {
    long iter;
    const PrimalDualPoint& point;          //!< p^k, before projection
    std::span<const BlockState> previous;  //!< states from iteration k-1
    std::span<const BlockState> current;   //!< states from iteration k
    std::span<const Vec> duals;            //!< w_i^k including the implied w_n
    std::span<const double> prev_phi;      //!< <G z^k - x^{k-1}, y^{k-1} - w^k> per block
    const HyperplaneData& hyperplane;
    const ProjectionOutcome& outcome;
    const ProblemSpec& problem;
    std::span<const Scheme> schemes;       //!< runtime schemes with certificate pairs filled in
};

struct SolveOptions {
    long max_iters = 1000;
    double pi_tol = kDefaultPiTol;
    //! Stop when max_i max{|y_i - w_i|, |G_i z - x_i|} drops below this; 0 disables.
    double residual_tol = 1e-8;
    std::function<double(const PrimalDualPoint&, std::span<const BlockState>)> objective;
    //! Keep a trace record every `trace_every` iterations (0 = no trace).
    int trace_every = 1;
    std::function<void(const IterationView&)> observer;
};

enum class SolveStatus { ConvergedResidual, TerminalPiZero, MaxIters };

std::string to_string(SolveStatus s);

struct SolveResult {
    SolveStatus status = SolveStatus::MaxIters;
    long iterations = 0;
    PrimalDualPoint point;          //!< final iterate (the solution tuple when terminal)
    PrimalDualPoint last_point;     //!< p^k at which the final pairs were computed
    std::vector<BlockState> blocks;
    std::vector<BlockState> initial_blocks;
    SolveTrace trace;
    std::vector<std::uint64_t> forward_evals;  //!< per block, loop only
    ResidualReport final_residuals;

    std::vector<BlockPair> pairs() const;
};

//! Runs projective splitting until a stop rule fires.
SolveResult solve(const ProblemSpec& problem, const InitialPoint& init, const SolveOptions& opts = {});

struct KktReport {
    std::vector<double> block_residuals;  //!< |G_i z - J_{A_i}(G_i z + w_i - B_i G_i z)|
    double consistency = 0.0;             //!< |sum_i G_i^* w_i| with w_n implied
    double max_residual = 0.0;
    bool passed = false;
};

//! Membership test of a point in the Kuhn-Tucker set, through resolvent residuals.
KktReport kkt_check(const PrimalDualPoint& point, const ProblemSpec& problem, double tol);
KktReport kkt_check(const SolveResult& candidate, const ProblemSpec& problem, double tol);

} // namespace projsplit
