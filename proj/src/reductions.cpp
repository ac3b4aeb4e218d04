#include "projsplit/reductions.hpp"

#include <algorithm>

#include "projsplit/separator.hpp"
#include "projsplit/solver.hpp"

namespace projsplit {

FbStepPair fb_step_equivalence(const BlockOps& ops, double rho, const Vec& x, const Vec& z)
{
    if (!(rho > 0.0)) throw ConfigError("fb_step_equivalence: rho must be positive");
    const Vec bx = ops.forward(x);
    const BlockState state = make_block_state(x, bx, rho);
    const Vec w = Vec::Zero(x.size());
    FbStepPair out;
    out.one_step = one_forward_step(z, state, w, {0.0, rho}, ops).x;
    out.forward_backward = ops.resolvent.apply(x - rho * bx, rho);
    return out;
}

std::vector<FbLimitRow> fb_limit_check(const BlockOps& ops, double rho, const Vec& z0,
                                       const std::vector<double>& alphas, long iterations)
{
    if (iterations < 1) throw ConfigError("fb_limit_check: need at least one iteration");
    std::vector<Vec> fb;
    Vec x = z0;
    for (long k = 0; k < iterations; ++k) {
        x = ops.resolvent.apply(x - rho * ops.forward(x), rho);
        fb.push_back(x);
    }

    std::vector<FbLimitRow> rows;
    for (double alpha : alphas) {
        if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("fb_limit_check: alpha must lie in [0, 1)");
        std::vector<Vec> xs;
        if (alpha == 0.0) {
            BlockState st = make_block_state(z0, ops.forward(z0), rho);
            const Vec w = Vec::Zero(z0.size());
            for (long k = 0; k < iterations; ++k) {
                st = one_forward_step(z0, st, w, {0.0, rho}, ops);
                xs.push_back(st.x);
            }
        } else {
            ProblemSpec problem;
            problem.blocks.push_back({ops, FixedStep{{alpha, rho}, std::nullopt}, "single"});
            InitialPoint init{PrimalDualPoint(z0, {}), {z0}, {}};
            SolveOptions opts;
            opts.max_iters = iterations;
            opts.residual_tol = 0.0;
            opts.trace_every = 0;
            opts.observer = [&xs](const IterationView& v) { xs.push_back(v.current[0].x); };
            solve(problem, init, opts);
        }
        FbLimitRow row;
        row.alpha = alpha;
        for (std::size_t k = 0; k < fb.size(); ++k) {
            // A terminal stop leaves the last iterate in place.
            const Vec& xk = xs.empty() ? z0 : xs[std::min(k, xs.size() - 1)];
            row.gap = std::max(row.gap, (xk - fb[k]).lpNorm<Eigen::Infinity>());
        }
        rows.push_back(row);
    }
    return rows;
}

TsengStepReport tseng_equivalence_step(const BlockOps& ops, double rho, double gamma, const Vec& z)
{
    if (!ops.map.is_identity()) throw ConfigError("tseng_equivalence_step: the map must be the identity");
    const std::uint64_t calls_before = ops.resolvent.calls();
    const Vec w = Vec::Zero(z.size());
    const BlockState st = two_forward_step(z, w, rho, ops);

    TsengStepReport rep;
    rep.resolvent_calls = ops.resolvent.calls() - calls_before;

    const PrimalDualPoint p(z, {});
    const std::vector<BlockPair> pairs{{st.x, st.y}};
    const std::vector<LinearMap> maps{ops.map};
    const GammaMetric metric(gamma);
    const auto h = separator_gradient(pairs, maps, metric);
    const auto out = project_to_hplane(p, h, metric, 1.0);
    rep.z_plus_projective = out.next_point.z();

    const Vec bz = ops.forward(z);
    const double ysq = st.y.squaredNorm();
    if (out.terminal || ysq == 0.0) {
        rep.terminal = true;
        rep.rho_tilde = rho;
        rep.z_plus_tseng_form = st.x;
    } else {
        rep.rho_tilde = rho * (1.0 + (bz - st.b).dot(st.y) / ysq);
        const double ratio = rep.rho_tilde / rho;
        rep.z_plus_tseng_form = (1.0 - ratio) * z + ratio * st.x - rep.rho_tilde * (st.b - bz);
    }
    rep.discrepancy = (rep.z_plus_projective - rep.z_plus_tseng_form).norm();
    return rep;
}

} // namespace projsplit
