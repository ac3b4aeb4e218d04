#include "projsplit/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace projsplit {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string block_label(const ProblemSpec& problem, std::size_t i)
{
    const auto& name = problem.blocks[i].name;
    return "block " + std::to_string(i + 1) + (name.empty() ? "" : " (" + name + ")");
}

std::vector<BlockPair> to_pairs(std::span<const BlockState> states)
{
    std::vector<BlockPair> pairs;
    pairs.reserve(states.size());
    for (const auto& s : states) pairs.push_back({s.x, s.y});
    return pairs;
}

std::vector<Vec> all_duals(const PrimalDualPoint& p, std::span<const LinearMap> maps)
{
    std::vector<Vec> w(p.w());
    w.push_back(p.implied_last_dual(maps));
    return w;
}

} // namespace

std::string to_string(SolveStatus s)
{
    switch (s) {
    case SolveStatus::ConvergedResidual: return "converged";
    case SolveStatus::TerminalPiZero: return "terminal_pi_zero";
    case SolveStatus::MaxIters: return "max_iters";
    }
    return "unknown";
}

Eigen::Index ProblemSpec::primal_dim() const
{
    if (blocks.empty()) throw ConfigError("problem has no blocks");
    return blocks.back().ops.map.domain_dim();
}

std::vector<LinearMap> ProblemSpec::maps() const
{
    std::vector<LinearMap> out;
    out.reserve(blocks.size());
    for (const auto& b : blocks) out.push_back(b.ops.map);
    return out;
}

void ProblemSpec::validate() const
{
    if (blocks.empty()) throw ConfigError("problem has no blocks");
    if (!(beta > 0.0 && beta < 2.0)) throw ConfigError("relaxation beta must lie in (0, 2)");
    if (!blocks.back().ops.map.is_identity()) throw ConfigError("the last block must use the identity map");
    const Eigen::Index d = primal_dim();
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const auto& b = blocks[i];
        const std::string label = block_label(*this, i);
        if (b.ops.map.domain_dim() != d)
            throw ConfigError(label + ": map domain does not match the primal dimension");
        const auto lip = b.ops.forward.lipschitz();
        std::visit(Overloaded{
            [&](const FixedStep& s) {
                if (s.rho_link) {
                    if (*s.rho_link >= i) throw ConfigError(label + ": rho_link must point to an earlier block");
                    if (!b.ops.forward.is_constant() && !(lip && *lip == 0.0))
                        throw ConfigError(label + ": rho_link needs a constant forward operator");
                    if (!(s.params.alpha > 0.0 && s.params.alpha <= 1.0))
                        throw ConfigError(label + ": alpha must lie in (0, 1]");
                    return;
                }
                try {
                    validate_one_step(s.params, lip);
                } catch (const ConfigError& e) {
                    throw ConfigError(label + ": " + e.what());
                }
            },
            [&](const Backtracking& s) {
                try {
                    validate_backtrack(s.config, s.alpha);
                } catch (const ConfigError& e) {
                    throw ConfigError(label + ": " + e.what());
                }
                if (s.config.theta_hat.size() != 0 && s.config.theta_hat.size() != b.ops.map.codomain_dim())
                    throw ConfigError(label + ": theta_hat has the wrong size");
            },
            [&](const LipschitzStep& s) {
                try {
                    if (s.search) {
                        if (!(s.rho > 0.0)) throw ConfigError("stepsize rho must be positive");
                        if (!(s.search->bound > 0.0 && s.search->bound < 1.0))
                            throw ConfigError("two-step bound must lie in (0, 1)");
                        if (!(s.search->delta > 0.0 && s.search->delta < 1.0))
                            throw ConfigError("backtracking delta must lie in (0, 1)");
                    } else if (!s.schedule) {
                        validate_two_step(s.rho, lip);
                    }
                } catch (const ConfigError& e) {
                    throw ConfigError(label + ": " + e.what());
                }
            },
        }, b.scheme);
    }
}

InitialPoint default_initial_point(const ProblemSpec& problem, const Vec& z0)
{
    InitialPoint init;
    std::vector<Vec> w;
    for (std::size_t i = 0; i + 1 < problem.size(); ++i)
        w.push_back(Vec::Zero(problem.blocks[i].ops.map.codomain_dim()));
    init.point = PrimalDualPoint(z0, std::move(w));
    for (const auto& b : problem.blocks) init.x0.push_back(b.ops.map.apply(z0));
    return init;
}

ResidualReport residuals(const PrimalDualPoint& point, std::span<const BlockState> states,
                         std::span<const LinearMap> maps)
{
    if (states.size() != maps.size()) throw DimensionError("residuals: state/map count mismatch");
    ResidualReport r;
    for (std::size_t i = 0; i < states.size(); ++i) {
        const Vec w = point.dual_for_block(i, maps);
        const double rd = (states[i].y - w).norm();
        const double rp = (maps[i].apply(point.z()) - states[i].x).norm();
        r.dual.push_back(rd);
        r.primal.push_back(rp);
        r.max_dual = std::max(r.max_dual, rd);
        r.max_primal = std::max(r.max_primal, rp);
    }
    return r;
}

std::vector<BlockPair> SolveResult::pairs() const { return to_pairs(blocks); }

SolveResult solve(const ProblemSpec& problem, const InitialPoint& init, const SolveOptions& opts)
{
    problem.validate();
    const std::size_t n = problem.size();
    const auto maps = problem.maps();
    if (init.point.blocks() != n) throw DimensionError("initial point has the wrong number of dual blocks");
    if (init.point.z().size() != problem.primal_dim()) throw DimensionError("initial z has the wrong size");
    for (std::size_t i = 0; i + 1 < n; ++i)
        if (init.point.w(i).size() != maps[i].codomain_dim())
            throw DimensionError("initial w_" + std::to_string(i + 1) + " has the wrong size");
    if (init.x0.size() != n) throw DimensionError("initial point needs one x0 per block");
    if (!init.y0.empty() && init.y0.size() != n) throw DimensionError("y0 must be empty or have one entry per block");
    if (opts.max_iters < 0) throw ConfigError("max_iters must be nonnegative");

    // Per-block runtime copy of the schemes (certificate pairs get filled in).
    std::vector<Scheme> schemes;
    std::vector<BlockState> states;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& blk = problem.blocks[i];
        Scheme scheme = blk.scheme;
        Vec x0 = init.x0[i];
        if (x0.size() != maps[i].codomain_dim())
            throw DimensionError(block_label(problem, i) + ": x0 has the wrong size");
        const bool has_y0 = !init.y0.empty() && init.y0[i].size() != 0;
        BlockState st;
        if (auto* bt = std::get_if<Backtracking>(&scheme)) {
            const double rho0 = bt->config.rho0;
            if (has_y0) {
                st = make_block_state(x0, blk.ops.forward(x0), rho0);
                st.y = init.y0[i];
            } else {
                // Replace x0 by a resolvent output so that y0 is a genuine member of T x0.
                const Vec bx = blk.ops.forward(x0);
                const Vec t = x0 - rho0 * bx;
                auto [x, a] = blk.ops.resolvent(t, rho0);
                Vec b = blk.ops.forward(x);
                st = make_block_state(x, b, rho0);
                st.y = a + b;
                st.t = t;
            }
            if (bt->config.theta_hat.size() == 0) {
                bt->config.theta_hat = st.x;
                bt->config.w_hat = st.y;
            }
        } else if (const auto* fs = std::get_if<FixedStep>(&scheme)) {
            st = make_block_state(x0, blk.ops.forward(x0), fs->params.rho);
            if (has_y0) st.y = init.y0[i];
        } else {
            const auto& ls = std::get<LipschitzStep>(scheme);
            st = make_block_state(x0, Vec::Zero(x0.size()), ls.rho);
            if (has_y0) st.y = init.y0[i];
        }
        if (st.y.size() != st.x.size()) throw DimensionError(block_label(problem, i) + ": y0 has the wrong size");
        states.push_back(std::move(st));
        schemes.push_back(std::move(scheme));
    }

    SolveResult result;
    result.initial_blocks = states;
    std::vector<std::uint64_t> base(n);
    for (std::size_t i = 0; i < n; ++i) base[i] = problem.blocks[i].ops.forward.evaluations();

    PrimalDualPoint p = init.point;
    const auto start = std::chrono::steady_clock::now();
    result.status = SolveStatus::MaxIters;
    result.point = p;
    result.last_point = p;

    for (long k = 1; k <= opts.max_iters; ++k) {
        const auto duals = all_duals(p, maps);
        std::vector<BlockState> next(n);
        std::vector<double> prev_phi(n);
        std::vector<int> trials(n, 0);
        double phi_blocks = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& blk = problem.blocks[i];
            const Vec gz = maps[i].apply(p.z());
            prev_phi[i] = (gz - states[i].x).dot(states[i].y - duals[i]);
            try {
                std::visit(Overloaded{
                    [&](const FixedStep& s) {
                        OneStepParams params = s.params;
                        if (s.rho_link) params.rho = next[*s.rho_link].rho;
                        next[i] = one_forward_step_gz(gz, states[i], duals[i], params, blk.ops);
                    },
                    [&](const Backtracking& s) {
                        auto r = backtrack(p.z(), states[i], duals[i], s.config, s.alpha, blk.ops);
                        trials[i] = r.trials;
                        next[i] = std::move(r.state);
                    },
                    [&](const LipschitzStep& s) {
                        if (s.search) {
                            const double prev = k == 1 ? s.rho : states[i].rho;
                            auto r = two_step_backtrack(p.z(), duals[i], prev, *s.search, blk.ops);
                            trials[i] = r.trials;
                            next[i] = std::move(r.state);
                        } else {
                            const double rho = s.schedule ? s.schedule(k) : s.rho;
                            if (!(rho > 0.0 && std::isfinite(rho)))
                                throw ConfigError(block_label(problem, i) + ": scheduled stepsize must be positive");
                            next[i] = two_forward_step(p.z(), duals[i], rho, blk.ops);
                        }
                    },
                }, schemes[i]);
            } catch (BacktrackError& e) {
                throw BacktrackError(block_label(problem, i) + " at iteration " + std::to_string(k) + ": " +
                                     e.what(), k);
            }
            if (!all_finite(next[i].x) || !all_finite(next[i].y))
                throw NonFiniteError(block_label(problem, i) + ": non-finite iterate at iteration " +
                                     std::to_string(k), k);
            phi_blocks += (gz - next[i].x).dot(next[i].y - duals[i]);
        }

        const auto pairs = to_pairs(next);
        const HyperplaneData h = separator_gradient(pairs, maps, problem.metric);
        const ProjectionOutcome out = project_to_hplane(p, h, problem.metric, problem.beta, opts.pi_tol, phi_blocks);
        const ResidualReport res = residuals(p, next, maps);

        if (opts.trace_every > 0 && (k % opts.trace_every == 0 || k == 1)) {
            IterationRecord rec;
            rec.iter = k;
            rec.phi = out.phi_value;
            rec.pi = out.pi;
            rec.tau = out.tau;
            rec.res_primal = res.max_primal;
            rec.res_dual = res.max_dual;
            rec.objective = opts.objective ? opts.objective(p, next)
                                           : std::numeric_limits<double>::quiet_NaN();
            for (std::size_t i = 0; i < n; ++i) {
                const auto ev = problem.blocks[i].ops.forward.evaluations() - base[i];
                rec.block_fwd_evals.push_back(ev);
                rec.fwd_evals += ev;
                rec.rho.push_back(next[i].rho);
                rec.eta.push_back(next[i].eta);
            }
            rec.trials = trials;
            rec.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            result.trace.records.push_back(std::move(rec));
        }

        if (opts.observer) {
            IterationView view{k, p, states, next, duals, prev_phi, h, out, problem, schemes};
            opts.observer(view);
        }

        result.iterations = k;
        result.last_point = p;
        result.final_residuals = res;
        states = std::move(next);

        if (out.terminal) {
            result.status = SolveStatus::TerminalPiZero;
            result.point = out.next_point;
            break;
        }
        if (!out.next_point.all_finite())
            throw NonFiniteError("non-finite primal-dual point at iteration " + std::to_string(k), k);
        p = out.next_point;
        result.point = p;
        if (opts.residual_tol > 0.0 && res.aggregate() < opts.residual_tol) {
            result.status = SolveStatus::ConvergedResidual;
            break;
        }
    }

    result.blocks = std::move(states);
    for (std::size_t i = 0; i < n; ++i)
        result.forward_evals.push_back(problem.blocks[i].ops.forward.evaluations() - base[i]);
    return result;
}

KktReport kkt_check(const PrimalDualPoint& point, const ProblemSpec& problem, double tol)
{
    const auto maps = problem.maps();
    if (point.blocks() != problem.size()) throw DimensionError("kkt_check: wrong number of dual blocks");
    KktReport r;
    Vec sum = Vec::Zero(point.z().size());
    for (std::size_t i = 0; i < problem.size(); ++i) {
        const auto& ops = problem.blocks[i].ops;
        const Vec w = point.dual_for_block(i, maps);
        const Vec gz = maps[i].apply(point.z());
        const Vec x = ops.resolvent.apply(gz + w - ops.forward(gz), 1.0);
        const double res = (gz - x).norm();
        r.block_residuals.push_back(res);
        r.max_residual = std::max(r.max_residual, res);
        sum += maps[i].apply_adjoint(w);
    }
    r.consistency = sum.norm();
    r.passed = r.max_residual <= tol && r.consistency <= tol;
    return r;
}

KktReport kkt_check(const SolveResult& candidate, const ProblemSpec& problem, double tol)
{
    return kkt_check(candidate.point, problem, tol);
}

} // namespace projsplit
