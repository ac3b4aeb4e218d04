#include "projsplit/block_updates.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace projsplit {

namespace {

// Rounding allowance for the acceptance tests inside backtracking, relative to
// the magnitudes of the summands. Both conditions can hold with equality in
// exact arithmetic (e.g. constant B).
constexpr double kAcceptRelTol = 1e-12;
constexpr double kEtaDenominatorFloor = 1e-24;

struct AscentTerms {
    double lhs;
    double rhs;
    double scale = 0.0;  //!< sum of magnitudes of the summands, for rounding allowances
};

AscentTerms ascent_terms(double prev_phi, double y_prev_res_sq, const Vec& x_new, const Vec& y_new,
                         const Vec& y_hat, const Vec& gz, const Vec& w, double alpha, double rho)
{
    const double phi_plus = (gz - x_new).dot(y_new - w);
    const double c = rho / (2.0 * alpha);
    const double fresh = c * ((y_new - w).squaredNorm() + alpha * (y_hat - w).squaredNorm());
    const double rhs = fresh + (1.0 - alpha) * (prev_phi - c * y_prev_res_sq);
    const double scale = std::abs(phi_plus) + fresh + (1.0 - alpha) * (std::abs(prev_phi) + c * y_prev_res_sq);
    return {phi_plus, rhs, scale};
}

AscentTerms contractive_terms(const Vec& x_new, const Vec& x_prev, const Vec& gz, const Vec& w,
                              double alpha, double rho, const Vec& theta_hat, const Vec& w_hat)
{
    const double lhs = (x_new - theta_hat).norm();
    const double rhs = (1.0 - alpha) * (x_prev - theta_hat).norm() + alpha * (gz - theta_hat).norm() +
                       rho * (w - w_hat).norm();
    return {lhs, rhs};
}

double first_trial(TrialRule rule, double rho_prev, double top, double growth)
{
    switch (rule) {
    case TrialRule::UpperEnd: return top;
    case TrialRule::Previous: return rho_prev;
    case TrialRule::Growth: return std::clamp(growth * rho_prev, rho_prev, top);
    }
    return top;
}

} // namespace

ResolventOp::Fn ResolventOp::identity_fn()
{
    return [](const Vec& t, double) { return t; };
}

ResolventResult ResolventOp::operator()(const Vec& t, double rho) const
{
    Vec x = apply(t, rho);
    Vec a = (t - x) / rho;
    return {std::move(x), std::move(a)};
}

Vec ResolventOp::apply(const Vec& t, double rho) const
{
    counter_.bump();
    Vec x = fn_(t, rho);
    if (x.size() != t.size()) throw DimensionError("resolvent returned a vector of the wrong size");
    return x;
}

ForwardOp::ForwardOp(Fn fn, std::optional<double> lipschitz)
    : fn_(std::move(fn)), lipschitz_(lipschitz)
{
    if (lipschitz_ && !(*lipschitz_ >= 0.0)) throw ConfigError("forward operator: negative constant");
}

ForwardOp ForwardOp::zero(Eigen::Index dim) { return constant(Vec::Zero(dim)); }

ForwardOp ForwardOp::constant(Vec value)
{
    ForwardOp op([v = std::move(value)](const Vec& x) {
        if (x.size() != v.size()) throw DimensionError("constant forward operator: input size");
        return v;
    }, 0.0);
    op.constant_ = true;
    return op;
}

Vec ForwardOp::operator()(const Vec& x) const
{
    counter_.bump();
    return fn_(x);
}

void validate_one_step(const OneStepParams& params, std::optional<double> lipschitz)
{
    if (!(params.alpha > 0.0 && params.alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
    if (!(params.rho > 0.0)) throw ConfigError("stepsize rho must be positive");
    if (lipschitz && *lipschitz > 0.0) {
        if (params.alpha >= 1.0) throw ConfigError("alpha must be < 1 when L > 0");
        const double bound = 2.0 * (1.0 - params.alpha) / *lipschitz;
        if (params.rho > bound) {
            std::ostringstream os;
            os << "stepsize rho = " << params.rho << " exceeds 2(1-alpha)/L = " << bound;
            throw ConfigError(os.str());
        }
    }
}

void validate_backtrack(const BacktrackConfig& cfg, double alpha)
{
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
    if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) throw ConfigError("backtracking delta must lie in (0, 1)");
    if (!(cfg.rho0 > 0.0)) throw ConfigError("initial stepsize rho0 must be positive");
    if (!(cfg.rho_hat >= cfg.rho0)) throw ConfigError("rho_hat must be >= rho0");
    if (cfg.max_inner < 1) throw ConfigError("max_inner must be >= 1");
    if (cfg.trial_rule == TrialRule::Growth && !(cfg.growth >= 1.0))
        throw ConfigError("trial growth factor must be >= 1");
    if (cfg.theta_hat.size() != cfg.w_hat.size())
        throw ConfigError("theta_hat and w_hat must have the same size");
}

void validate_two_step(double rho, std::optional<double> lipschitz)
{
    if (!(rho > 0.0)) throw ConfigError("stepsize rho must be positive");
    if (lipschitz && *lipschitz > 0.0 && rho * *lipschitz >= 1.0) {
        std::ostringstream os;
        os << "two-step stepsize rho = " << rho << " must be < 1/L = " << 1.0 / *lipschitz;
        throw ConfigError(os.str());
    }
}

BlockState make_block_state(Vec x, Vec b, double rho)
{
    require_same_size(x, b, "block state");
    BlockState s;
    s.y = Vec::Zero(x.size());
    s.y_hat = Vec::Zero(x.size());
    s.t = x;
    s.x = std::move(x);
    s.b = std::move(b);
    s.rho = rho;
    return s;
}

BlockState one_forward_step_gz(const Vec& gz, const BlockState& state, const Vec& w,
                               const OneStepParams& params, const BlockOps& ops)
{
    require_same_size(gz, state.x, "one_forward_step");
    require_same_size(w, state.x, "one_forward_step");
    require_same_size(state.b, state.x, "one_forward_step");
    const double alpha = params.alpha;
    const double rho = params.rho;

    BlockState next;
    next.t = (1.0 - alpha) * state.x + alpha * gz - rho * (state.b - w);
    auto [x, a] = ops.resolvent(next.t, rho);
    next.b = ops.forward(x);
    next.y = a + next.b;
    next.y_hat = a + state.b;
    next.x = std::move(x);
    next.rho = rho;
    next.eta = state.eta;
    return next;
}

BlockState one_forward_step(const Vec& z, const BlockState& state, const Vec& w,
                            const OneStepParams& params, const BlockOps& ops)
{
    return one_forward_step_gz(ops.map.apply(z), state, w, params, ops);
}

BlockState two_forward_step(const Vec& z, const Vec& w, double rho, const BlockOps& ops)
{
    const Vec gz = ops.map.apply(z);
    require_same_size(gz, w, "two_forward_step");
    const Vec bgz = ops.forward(gz);
    BlockState next;
    next.t = gz - rho * (bgz - w);
    auto [x, a] = ops.resolvent(next.t, rho);
    next.b = ops.forward(x);
    next.y = a + next.b;
    next.y_hat = a + bgz;
    next.x = std::move(x);
    next.rho = rho;
    return next;
}

BacktrackResult backtrack(const Vec& z, const BlockState& state, const Vec& w,
                          const BacktrackConfig& cfg, double alpha, const BlockOps& ops)
{
    if (cfg.theta_hat.size() != state.x.size() || cfg.w_hat.size() != state.x.size())
        throw ConfigError("backtracking: theta_hat / w_hat missing or of the wrong size");
    const Vec gz = ops.map.apply(z);
    require_same_size(gz, state.x, "backtrack");

    BacktrackResult out;
    out.prev_phi = (gz - state.x).dot(state.y - w);
    const double y_prev_res_sq = (state.y - w).squaredNorm();
    out.interval_top = std::min((1.0 + alpha * state.eta) * state.rho, cfg.rho_hat);
    out.first_trial = first_trial(cfg.trial_rule, state.rho, out.interval_top, cfg.growth);

    // Both sides of C1 share these norms across trials.
    const double c1_fixed = (1.0 - alpha) * (state.x - cfg.theta_hat).norm() +
                            alpha * (gz - cfg.theta_hat).norm();
    const double w_gap = (w - cfg.w_hat).norm();
    const Vec anchor = (1.0 - alpha) * state.x + alpha * gz;
    const double gz_norm = gz.norm();
    const double w_norm = w.norm();
    const double c1_operands = cfg.theta_hat.norm() + state.x.norm() + gz_norm;
    const double y_prev_ops = state.y.norm() + w_norm;
    const double prev_operands = (gz_norm + state.x.norm()) * std::sqrt(y_prev_res_sq) +
                                 (gz - state.x).norm() * y_prev_ops;

    double rho = out.first_trial;
    for (int j = 1; j <= cfg.max_inner; ++j) {
        BlockState cand = one_forward_step_gz(gz, state, w, {alpha, rho}, ops);
        out.trials = j;

        // y^_j written as in the original search; algebraically equal to cand.y_hat.
        const Vec y_hat = (anchor - cand.x) / rho + w;

        const double c1_lhs = (cand.x - cfg.theta_hat).norm();
        const double c1_rhs = c1_fixed + rho * w_gap;
        const bool c1 = c1_lhs <= c1_rhs + kAcceptRelTol * (c1_lhs + c1_rhs + c1_operands + cand.x.norm());

        const auto c2t = ascent_terms(out.prev_phi, y_prev_res_sq, cand.x, cand.y, y_hat, gz, w, alpha, rho);
        // Near a solution the summands are far smaller than the rounding error of
        // the differences they are built from, which grows like 1/rho for y.
        const double gz_x = (gz - cand.x).norm();
        const double y_w = (cand.y - w).norm();
        const double y_ops = (cand.t.norm() + cand.x.norm()) / rho + cand.b.norm() + w_norm;
        const double yh_ops = (anchor.norm() + cand.x.norm()) / rho + w_norm;
        const double c = rho / (2.0 * alpha);
        const double operand_scale = (gz_norm + cand.x.norm()) * y_w + gz_x * y_ops +
                                     c * (y_w * y_ops + alpha * (y_hat - w).norm() * yh_ops) +
                                     (1.0 - alpha) * (prev_operands + c * std::sqrt(y_prev_res_sq) * y_prev_ops);
        const bool c2 = c2t.lhs >= c2t.rhs - kAcceptRelTol * (c2t.scale + operand_scale);

        if (c1 && c2) {
            const double denom = (cand.y - w).squaredNorm();
            cand.eta = denom < kEtaDenominatorFloor ? 0.0 : (y_hat - w).squaredNorm() / denom;
            cand.y_hat = y_hat;
            out.state = std::move(cand);
            return out;
        }
        rho *= cfg.delta;
    }
    std::ostringstream os;
    os << "backtracking did not accept a stepsize within " << cfg.max_inner
       << " trials (last rho = " << rho / cfg.delta
       << "); the forward operator may not be cocoercive or theta_hat/w_hat is not a valid pair";
    throw BacktrackError(os.str());
}

BacktrackResult two_step_backtrack(const Vec& z, const Vec& w, double rho_prev,
                                   const TwoStepBacktrackConfig& cfg, const BlockOps& ops)
{
    if (!(cfg.bound > 0.0 && cfg.bound < 1.0)) throw ConfigError("two-step bound must lie in (0, 1)");
    if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) throw ConfigError("backtracking delta must lie in (0, 1)");
    const Vec gz = ops.map.apply(z);
    require_same_size(gz, w, "two_step_backtrack");
    const Vec bgz = ops.forward(gz);

    BacktrackResult out;
    out.interval_top = std::min(cfg.trial_rule == TrialRule::Previous ? rho_prev : cfg.growth * rho_prev,
                                cfg.rho_hat);
    out.first_trial = first_trial(cfg.trial_rule, rho_prev, out.interval_top, cfg.growth);

    double rho = out.first_trial;
    for (int j = 1; j <= cfg.max_inner; ++j) {
        BlockState cand;
        cand.t = gz - rho * (bgz - w);
        auto [x, a] = ops.resolvent(cand.t, rho);
        cand.b = ops.forward(x);
        out.trials = j;
        const double step = (gz - x).norm();
        if (rho * (cand.b - bgz).norm() <= cfg.bound * step || step == 0.0) {
            cand.y = a + cand.b;
            cand.y_hat = a + bgz;
            cand.x = std::move(x);
            cand.rho = rho;
            out.state = std::move(cand);
            return out;
        }
        rho *= cfg.delta;
    }
    throw BacktrackError("two-step backtracking did not accept a stepsize within " +
                         std::to_string(cfg.max_inner) + " trials");
}

CheckReport ascent_check(double prev_phi, const Vec& y_prev, const BlockState& next, const Vec& gz,
                         const Vec& w, double alpha, double rho, double tol)
{
    const auto t = ascent_terms(prev_phi, (y_prev - w).squaredNorm(), next.x, next.y, next.y_hat, gz, w,
                                alpha, rho);
    CheckReport r;
    r.slack = t.lhs - t.rhs;
    r.holds = r.slack >= -tol;
    return r;
}

CheckReport contractive_check(const BlockState& next, const Vec& x_prev, const Vec& gz, const Vec& w,
                              double alpha, double rho, const Vec& theta_hat, const Vec& w_hat, double tol)
{
    const auto t = contractive_terms(next.x, x_prev, gz, w, alpha, rho, theta_hat, w_hat);
    CheckReport r;
    r.slack = t.rhs - t.lhs;
    r.holds = r.slack >= -tol;
    return r;
}

} // namespace projsplit
