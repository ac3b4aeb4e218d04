#include "projsplit/problems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace projsplit {

namespace {

struct SmoothBlockSettings {
    SmoothScheme scheme;
    double alpha;
    double rho;
    double delta;
    double rho_hat;
    TrialRule trial_rule;
    double growth;
    Vec theta_hat;
    Vec w_hat;
};

Scheme make_smooth_scheme(const SmoothBlockSettings& s)
{
    switch (s.scheme) {
    case SmoothScheme::Backtrack: {
        Backtracking bt;
        bt.alpha = s.alpha;
        bt.config.delta = s.delta;
        bt.config.rho_hat = s.rho_hat;
        bt.config.rho0 = s.rho;
        bt.config.theta_hat = s.theta_hat;
        bt.config.w_hat = s.w_hat;
        bt.config.trial_rule = s.trial_rule;
        bt.config.growth = s.growth;
        return bt;
    }
    case SmoothScheme::Fixed: return FixedStep{{s.alpha, s.rho}, std::nullopt};
    case SmoothScheme::Lipschitz: {
        LipschitzStep ls;
        ls.rho = s.rho;
        return ls;
    }
    case SmoothScheme::LipschitzSearch: {
        LipschitzStep ls;
        ls.rho = s.rho;
        TwoStepBacktrackConfig c;
        c.delta = s.delta;
        c.rho_hat = s.rho_hat;
        c.trial_rule = s.trial_rule == TrialRule::UpperEnd ? TrialRule::Previous : s.trial_rule;
        c.growth = s.growth;
        ls.search = c;
        return ls;
    }
    }
    throw ConfigError("unknown smooth-block scheme");
}

Scheme linked_or_fixed(bool link, double alpha, double rho)
{
    FixedStep fs{{alpha, rho}, std::nullopt};
    if (link) fs.rho_link = 0;
    return fs;
}

// Solves the square KKT system in the least-squares sense; reports the residual.
Vec lsq_solve(const Mat& k, const Vec& rhs, double& residual)
{
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(k);
    Vec sol = cod.solve(rhs);
    residual = (k * sol - rhs).norm();
    return sol;
}

struct PortfolioKkt {
    bool valid = false;
    Vec x;
    double nu = 0.0;
    double mu = 0.0;
    double violation = std::numeric_limits<double>::infinity();
};

// KKT point with the given support and halfspace activity, if one exists.
PortfolioKkt portfolio_kkt_candidate(const PortfolioInstance& inst, const std::vector<Eigen::Index>& support,
                                     bool active, double tol)
{
    const Eigen::Index d = inst.dim();
    const Eigen::Index s = static_cast<Eigen::Index>(support.size());
    const Eigen::Index extra = active ? 2 : 1;
    Mat k = Mat::Zero(s + extra, s + extra);
    Vec rhs = Vec::Zero(s + extra);
    for (Eigen::Index a = 0; a < s; ++a) {
        for (Eigen::Index b = 0; b < s; ++b) k(a, b) = 2.0 * inst.q(support[a], support[b]);
        k(a, s) = -1.0;
        k(s, a) = 1.0;
        if (active) {
            k(a, s + 1) = -inst.m[support[a]];
            k(s + 1, a) = inst.m[support[a]];
        }
    }
    rhs[s] = 1.0;
    if (active) rhs[s + 1] = inst.r;

    PortfolioKkt out;
    double res = 0.0;
    const Vec sol = lsq_solve(k, rhs, res);
    if (res > 1e-9) return out;
    out.x = Vec::Zero(d);
    for (Eigen::Index a = 0; a < s; ++a) out.x[support[a]] = sol[a];
    out.nu = sol[s];
    out.mu = active ? sol[s + 1] : 0.0;

    // Violations: negativity, halfspace, multiplier sign, dual slack sign, stationarity.
    const Vec slack = 2.0 * (inst.q * out.x) - out.nu * Vec::Ones(d) - out.mu * inst.m;
    double viol = res;
    viol = std::max(viol, std::max(0.0, -out.x.minCoeff()));
    viol = std::max(viol, std::max(0.0, inst.r - inst.m.dot(out.x)));
    viol = std::max(viol, std::max(0.0, -out.mu));
    std::vector<char> in_support(static_cast<std::size_t>(d), 0);
    for (auto i : support) in_support[static_cast<std::size_t>(i)] = 1;
    for (Eigen::Index i = 0; i < d; ++i) {
        if (in_support[static_cast<std::size_t>(i)])
            viol = std::max(viol, std::abs(slack[i]));
        else
            viol = std::max(viol, std::max(0.0, -slack[i]));
    }
    out.violation = viol;
    out.valid = viol <= tol;
    return out;
}

ReferenceSolution portfolio_solution_from(const PortfolioInstance& inst, const PortfolioKkt& k,
                                          std::string method)
{
    ReferenceSolution ref;
    // Clean tiny negative round-off so the point is feasible for the simplex.
    ref.x = k.x.cwiseMax(0.0);
    ref.x /= ref.x.sum();
    ref.f_star = portfolio_objective(ref.x, inst);
    ref.method = std::move(method);
    ref.kkt_residual = k.violation;
    ref.point = PrimalDualPoint(ref.x, {std::max(k.mu, 0.0) * inst.m});
    return ref;
}

double soft(double v, double s)
{
    const double m = std::abs(v) - s;
    return m > 0.0 ? std::copysign(m, v) : 0.0;
}

} // namespace

SmoothScheme smooth_scheme_from_string(const std::string& s)
{
    if (s == "backtrack") return SmoothScheme::Backtrack;
    if (s == "fixed") return SmoothScheme::Fixed;
    if (s == "lipschitz") return SmoothScheme::Lipschitz;
    if (s == "lipschitz-search") return SmoothScheme::LipschitzSearch;
    throw ConfigError("unknown scheme '" + s + "' (backtrack, fixed, lipschitz, lipschitz-search)");
}

std::string to_string(SmoothScheme s)
{
    switch (s) {
    case SmoothScheme::Backtrack: return "backtrack";
    case SmoothScheme::Fixed: return "fixed";
    case SmoothScheme::Lipschitz: return "lipschitz";
    case SmoothScheme::LipschitzSearch: return "lipschitz-search";
    }
    return "unknown";
}

TrialRule trial_rule_from_string(const std::string& s)
{
    if (s == "upper") return TrialRule::UpperEnd;
    if (s == "previous") return TrialRule::Previous;
    if (s == "growth") return TrialRule::Growth;
    throw ConfigError("unknown trial rule '" + s + "' (upper, previous, growth)");
}

std::string to_string(TrialRule r)
{
    switch (r) {
    case TrialRule::UpperEnd: return "upper";
    case TrialRule::Previous: return "previous";
    case TrialRule::Growth: return "growth";
    }
    return "unknown";
}

// ----- Portfolio ------------------------------------------------------------

PortfolioInstance gen_portfolio(Eigen::Index d, double delta_r, std::uint64_t seed)
{
    if (d < 2) throw ConfigError("portfolio: d must be >= 2");
    if (!(delta_r > 0.0)) throw ConfigError("portfolio: delta_r must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 100.0);
    Mat q0(d, d);
    for (Eigen::Index j = 0; j < d; ++j)
        for (Eigen::Index i = 0; i < d; ++i) q0(i, j) = normal(rng);
    PortfolioInstance inst;
    inst.q = (q0 * q0.transpose()) / static_cast<double>(d);
    inst.q = 0.5 * (inst.q + inst.q.transpose()).eval();
    inst.m.resize(d);
    for (Eigen::Index i = 0; i < d; ++i) inst.m[i] = uniform(rng);
    inst.r = delta_r * inst.m.sum() / static_cast<double>(d);
    inst.delta_r = delta_r;
    inst.seed = seed;
    if (!(inst.m.maxCoeff() > inst.r))
        throw ConfigError("portfolio: delta_r too large, the feasible set has no relative interior");
    return inst;
}

std::optional<double> group_logistic_table_gamma(double lambda, bool two_step)
{
    struct Row {
        double lambda, one_step, two_step;
    };
    static constexpr Row rows[] = {{0.05, 0.05, 1.0}, {0.5, 1e2, 1e2}, {0.85, 1e2, 1e5}};
    for (const auto& row : rows)
        if (std::abs(row.lambda - lambda) < 1e-12) return two_step ? row.two_step : row.one_step;
    return std::nullopt;
}

std::optional<double> portfolio_table_gamma(double delta_r, bool two_step)
{
    struct Row {
        double delta_r, one_step, two_step;
    };
    static constexpr Row rows[] = {{0.5, 0.01, 0.1}, {0.8, 0.01, 0.1}, {1.0, 0.5, 10.0}, {1.5, 5.0, 10.0}};
    for (const auto& row : rows)
        if (std::abs(row.delta_r - delta_r) < 1e-12) return two_step ? row.two_step : row.one_step;
    return std::nullopt;
}

ProblemSpec portfolio_problem(const PortfolioInstance& inst, const PortfolioSolverConfig& cfg)
{
    const Eigen::Index d = inst.dim();
    const bool two_step = cfg.scheme == SmoothScheme::Lipschitz || cfg.scheme == SmoothScheme::LipschitzSearch;
    const double gamma = cfg.gamma ? *cfg.gamma : portfolio_table_gamma(inst.delta_r, two_step).value_or(1.0);

    const Vec z0 = Vec::Constant(d, 1.0 / static_cast<double>(d));
    ProblemSpec p;
    p.metric = GammaMetric(gamma);
    p.beta = cfg.beta;

    BlockSpec b1;
    b1.name = "simplex+quadratic";
    b1.ops.resolvent = resolvent_from_prox(ProxSimplex{}, d);
    b1.ops.forward = forward_from_grad(GradQuadratic{inst.q});
    b1.ops.map = LinearMap::identity(d);
    b1.scheme = make_smooth_scheme({cfg.scheme, cfg.alpha1, cfg.rho1, cfg.delta, cfg.rho_hat, cfg.trial_rule, 1.1,
                                    z0, grad_quadratic(z0, inst.q)});

    BlockSpec b2;
    b2.name = "halfspace";
    b2.ops.resolvent = resolvent_from_prox(ProxHalfspace{inst.m, inst.r}, d);
    b2.ops.forward = ForwardOp::zero(d);
    b2.ops.map = LinearMap::identity(d);
    b2.scheme = linked_or_fixed(cfg.link_rho2, cfg.alpha2, cfg.rho2);

    p.blocks = {std::move(b1), std::move(b2)};
    p.validate();
    return p;
}

InitialPoint portfolio_initial_point(const PortfolioInstance& inst, const ProblemSpec& problem)
{
    const Eigen::Index d = inst.dim();
    const Vec z0 = Vec::Constant(d, 1.0 / static_cast<double>(d));
    InitialPoint init = default_initial_point(problem, z0);
    init.y0 = {grad_quadratic(z0, inst.q), Vec()};
    return init;
}

double portfolio_objective(const Vec& x, const PortfolioInstance& inst)
{
    require_same_size(x, inst.m, "portfolio_objective");
    return x.dot(inst.q * x);
}

double portfolio_criterion(const Vec& x, const PortfolioInstance& inst, double f_star, bool literal_last_term)
{
    if (!(f_star > 0.0)) throw ConfigError("portfolio_criterion: F* must be positive");
    const double f = portfolio_objective(x, inst);
    const double min_x = x.minCoeff();
    double c = std::max((f - f_star) / f_star, 0.0) - std::min(inst.m.dot(x) - inst.r, 0.0) +
               std::abs(x.sum() - 1.0);
    c -= literal_last_term ? std::max(0.0, min_x) : std::min(0.0, min_x);
    return c;
}

ReferenceSolution portfolio_reference_enumerate(const PortfolioInstance& inst)
{
    const Eigen::Index d = inst.dim();
    if (d > 8) throw ConfigError("portfolio enumeration supports d <= 8");
    PortfolioKkt best;
    double best_f = std::numeric_limits<double>::infinity();
    for (unsigned mask = 1; mask < (1u << d); ++mask) {
        std::vector<Eigen::Index> support;
        for (Eigen::Index i = 0; i < d; ++i)
            if (mask & (1u << i)) support.push_back(i);
        for (bool active : {false, true}) {
            auto cand = portfolio_kkt_candidate(inst, support, active, 1e-10);
            if (!cand.valid) continue;
            const double f = portfolio_objective(cand.x, inst);
            if (f < best_f - 1e-14 || (f <= best_f + 1e-14 && cand.violation < best.violation)) {
                best_f = f;
                best = cand;
            }
        }
    }
    if (!best.valid) throw SolverError("portfolio enumeration found no KKT point");
    return portfolio_solution_from(inst, best, "enumeration");
}

Vec project_simplex_halfspace(const Vec& t, const Vec& m, double r)
{
    Vec x = project_simplex(t);
    if (m.dot(x) >= r) return x;
    double lo = 0.0;
    double hi = 1.0;
    for (int i = 0; i < 200 && m.dot(project_simplex(t + hi * m)) < r; ++i) hi *= 2.0;
    for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (m.dot(project_simplex(t + mid * m)) < r)
            lo = mid;
        else
            hi = mid;
    }
    return project_simplex(t + hi * m);
}

ReferenceSolution portfolio_reference_iterative(const PortfolioInstance& inst, double tol, long max_iters)
{
    const Eigen::Index d = inst.dim();
    const double lip = 2.0 * power_iteration_lmax(inst.q, 1000, 1e-14) * 1.01;
    const double step = 1.0 / lip;
    // Start feasible: the restart test compares objective values.
    Vec x = project_simplex_halfspace(Vec::Constant(d, 1.0 / static_cast<double>(d)), inst.m, inst.r);
    Vec yk = x;
    double tk = 1.0;
    bool restarted = false;
    double f_prev = portfolio_objective(x, inst);
    PortfolioKkt polished;

    // Any candidate passing the exact KKT test is optimal, so several support
    // thresholds can be tried cheaply.
    auto try_polish = [&](const Vec& pt) {
        const bool near_active = inst.m.dot(pt) - inst.r < 1e-6 * (1.0 + std::abs(inst.r));
        std::vector<Eigen::Index> last;
        for (double thr = 1e-3; thr >= 1e-13; thr *= 0.1) {
            std::vector<Eigen::Index> support;
            for (Eigen::Index i = 0; i < d; ++i)
                if (pt[i] > thr) support.push_back(i);
            if (support.empty() || support == last) continue;
            last = support;
            for (bool active : {near_active, !near_active}) {
                auto cand = portfolio_kkt_candidate(inst, support, active, 1e-10);
                if (cand.valid) {
                    polished = cand;
                    return true;
                }
            }
        }
        return false;
    };

    for (long k = 1; k <= max_iters; ++k) {
        if (k % 100 == 0 && try_polish(x)) return portfolio_solution_from(inst, polished, "fista+active-set");
        const Vec x_next = project_simplex_halfspace(yk - step * grad_quadratic(yk, inst.q), inst.m, inst.r);
        const double f_next = portfolio_objective(x_next, inst);
        // Adaptive restart; a plain step right after a restart is always taken.
        if (f_next > f_prev && !restarted) {
            tk = 1.0;
            yk = x;
            restarted = true;
            continue;
        }
        restarted = false;
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
        yk = x_next + ((tk - 1.0) / t_next) * (x_next - x);
        const double change = (x_next - x).norm();
        x = x_next;
        tk = t_next;
        f_prev = f_next;
        if (change < tol && try_polish(x)) return portfolio_solution_from(inst, polished, "fista+active-set");
    }
    PortfolioKkt fallback;
    fallback.x = x;
    fallback.violation =
        (x - project_simplex_halfspace(x - step * grad_quadratic(x, inst.q), inst.m, inst.r)).norm() / step;
    ReferenceSolution ref;
    ref.x = x;
    ref.f_star = portfolio_objective(x, inst);
    ref.method = "fista";
    ref.kkt_residual = fallback.violation;
    return ref;
}

ReferenceSolution reference_solve(const PortfolioInstance& inst)
{
    return inst.dim() <= 8 ? portfolio_reference_enumerate(inst) : portfolio_reference_iterative(inst);
}

// ----- Group-sparse logistic regression -------------------------------------

GroupList contiguous_groups(Eigen::Index d, Eigen::Index count)
{
    if (count < 1 || count > d) throw ConfigError("group count must lie in [1, d]");
    GroupList groups(static_cast<std::size_t>(count));
    for (Eigen::Index j = 0; j < d; ++j) groups[static_cast<std::size_t>(j * count / d)].push_back(j + 1);
    return groups;
}

GroupLogisticInstance gen_group_logistic(Eigen::Index n, Eigen::Index d, Eigen::Index n_groups, double lambda,
                                         std::uint64_t seed, bool normalize)
{
    if (n < 1 || d < 1) throw ConfigError("group logistic: n and d must be positive");
    if (!(lambda >= 0.0)) throw ConfigError("group logistic: lambda must be nonnegative");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    GroupLogisticInstance inst;
    inst.groups = contiguous_groups(d, n_groups);
    inst.lambda1 = lambda;
    inst.lambda2 = lambda;
    inst.normalized = normalize;
    inst.seed = seed;

    Mat a(n, d);
    for (Eigen::Index j = 0; j < d; ++j)
        for (Eigen::Index i = 0; i < n; ++i) a(i, j) = normal(rng);
    if (normalize) {
        for (Eigen::Index j = 0; j < d; ++j) {
            const double nrm = a.col(j).norm();
            if (nrm > 0.0) a.col(j) /= nrm;
        }
    }
    // Planted model: the first quarter of the groups carries signal.
    Vec truth = Vec::Zero(d);
    const std::size_t active = std::max<std::size_t>(1, inst.groups.size() / 4);
    for (std::size_t g = 0; g < active; ++g)
        for (auto idx : inst.groups[g]) truth[idx - 1] = normal(rng);
    const double scale = normalize ? std::sqrt(static_cast<double>(n)) : 1.0;
    Vec labels(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double score = scale * a.row(i).dot(truth) + 0.3 * normal(rng);
        labels[i] = score >= 0.0 ? 1.0 : -1.0;
    }
    inst.data = {std::move(a), std::move(labels)};
    return inst;
}

namespace {

Vec logistic_l1_weights(Eigen::Index packed)
{
    Vec w = Vec::Ones(packed);
    w[0] = 0.0;
    return w;
}

} // namespace

ProblemSpec group_logistic_problem(const GroupLogisticInstance& inst, const GroupLogisticSolverConfig& cfg)
{
    const Eigen::Index dim = inst.packed_dim();
    const Vec z0 = Vec::Zero(dim);
    ProblemSpec p;
    const bool two_step = cfg.scheme == SmoothScheme::Lipschitz || cfg.scheme == SmoothScheme::LipschitzSearch;
    p.metric = GammaMetric(cfg.gamma ? *cfg.gamma
                                     : group_logistic_table_gamma(inst.lambda1, two_step).value_or(1.0));
    p.beta = cfg.beta;

    BlockSpec b1;
    b1.name = "l1+logistic";
    b1.ops.resolvent = resolvent_from_prox(ProxL1{inst.lambda1, logistic_l1_weights(dim)}, dim);
    b1.ops.forward = forward_from_grad(GradLogistic{inst.data});
    b1.ops.map = LinearMap::identity(dim);
    b1.scheme = make_smooth_scheme({cfg.scheme, cfg.alpha1, cfg.rho1, cfg.delta, cfg.rho_hat, cfg.trial_rule,
                                    cfg.growth, z0, grad_logistic_packed(z0, inst.data)});

    BlockSpec b2;
    b2.name = "group";
    b2.ops.resolvent = resolvent_from_prox(ProxGroupL2{inst.lambda2, inst.groups}, dim);
    b2.ops.forward = ForwardOp::zero(dim);
    b2.ops.map = LinearMap::identity(dim);
    b2.scheme = linked_or_fixed(cfg.link_rho2, cfg.alpha2, cfg.rho2);

    p.blocks = {std::move(b1), std::move(b2)};
    p.validate();
    return p;
}

InitialPoint group_logistic_initial_point(const GroupLogisticInstance& inst, const ProblemSpec& problem)
{
    const Vec z0 = Vec::Zero(inst.packed_dim());
    InitialPoint init = default_initial_point(problem, z0);
    init.y0 = {grad_logistic_packed(z0, inst.data), Vec()};
    return init;
}

double group_logistic_objective(const Vec& v, const GroupLogisticInstance& inst)
{
    if (v.size() != inst.packed_dim()) throw DimensionError("group_logistic_objective: size");
    double pen_group = 0.0;
    for (const auto& g : inst.groups) {
        double s = 0.0;
        for (auto i : g) s += v[i] * v[i];
        pen_group += std::sqrt(s);
    }
    return logistic_loss_packed(v, inst.data) + inst.lambda1 * v.tail(v.size() - 1).lpNorm<1>() +
           inst.lambda2 * pen_group;
}

Vec group_logistic_prox(const Vec& t, double step, const GroupLogisticInstance& inst)
{
    Vec shrunk = prox_l1_weighted(t, logistic_l1_weights(t.size()), step * inst.lambda1);
    return prox_group_l2(shrunk, step * inst.lambda2, inst.groups);
}

ReferenceSolution reference_solve(const GroupLogisticInstance& inst, double tol, long max_iters)
{
    const Eigen::Index dim = inst.packed_dim();
    const double lip = cocoercivity_constant(GradLogistic{inst.data}) * 1.01;
    const double step = 1.0 / lip;
    Vec x = Vec::Zero(dim);
    Vec yk = x;
    double tk = 1.0;
    bool restarted = false;
    double f_prev = group_logistic_objective(x, inst);
    double residual = std::numeric_limits<double>::infinity();
    for (long k = 1; k <= max_iters; ++k) {
        if (k % 20 == 0) {
            residual = (x - group_logistic_prox(x - step * grad_logistic_packed(x, inst.data), step, inst)).norm() /
                       step;
            if (residual < tol) break;
        }
        const Vec x_next = group_logistic_prox(yk - step * grad_logistic_packed(yk, inst.data), step, inst);
        const double f_next = group_logistic_objective(x_next, inst);
        // Adaptive restart; a plain step right after a restart is always taken.
        if (f_next > f_prev && !restarted) {
            tk = 1.0;
            yk = x;
            restarted = true;
            continue;
        }
        restarted = false;
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
        yk = x_next + ((tk - 1.0) / t_next) * (x_next - x);
        x = x_next;
        tk = t_next;
        f_prev = f_next;
    }
    residual = (x - group_logistic_prox(x - step * grad_logistic_packed(x, inst.data), step, inst)).norm() / step;
    ReferenceSolution ref;
    ref.x = x;
    ref.f_star = group_logistic_objective(x, inst);
    ref.method = "fista";
    ref.kkt_residual = residual;
    return ref;
}

// ----- Rare features ---------------------------------------------------------

std::vector<Eigen::Index> SimilarityTree::leaf_descendants(Eigen::Index j) const
{
    std::vector<Eigen::Index> out;
    std::vector<Eigen::Index> stack{j};
    while (!stack.empty()) {
        const auto node = stack.back();
        stack.pop_back();
        if (node < leaves) {
            out.push_back(node);
            continue;
        }
        for (auto c : children[static_cast<std::size_t>(node)]) stack.push_back(c);
    }
    std::sort(out.begin(), out.end());
    return out;
}

SimilarityTree build_balanced_tree(Eigen::Index leaves, Eigen::Index depth)
{
    if (leaves < 2) throw ConfigError("tree: need at least two leaves");
    if (depth < 1) throw ConfigError("tree: depth must be >= 1");
    using Range = std::pair<Eigen::Index, Eigen::Index>;

    // Top-down: a range of s leaves with r levels left splits into the smallest
    // k with k^r >= s nearly equal chunks.
    std::vector<std::vector<Range>> levels{{{0, leaves}}};
    for (Eigen::Index r = depth; r >= 1; --r) {
        std::vector<Range> next;
        for (auto [lo, hi] : levels.back()) {
            const Eigen::Index size = hi - lo;
            Eigen::Index k = 1;
            while (true) {
                double pw = 1.0;
                for (Eigen::Index e = 0; e < r; ++e) pw *= static_cast<double>(k);
                if (pw >= static_cast<double>(size)) break;
                ++k;
            }
            for (Eigen::Index c = 0; c < k; ++c) next.emplace_back(lo + c * size / k, lo + (c + 1) * size / k);
        }
        levels.push_back(std::move(next));
    }

    SimilarityTree tree;
    tree.leaves = leaves;
    tree.depth = depth;
    tree.children.assign(static_cast<std::size_t>(leaves), {});
    tree.parent.assign(static_cast<std::size_t>(leaves), -1);
    // Ids of the nodes on the level below, in range order (that level is the leaves at first).
    std::vector<Eigen::Index> below(static_cast<std::size_t>(leaves));
    std::iota(below.begin(), below.end(), 0);
    for (auto t = static_cast<std::ptrdiff_t>(levels.size()) - 2; t >= 0; --t) {
        const auto& lower = levels[static_cast<std::size_t>(t) + 1];
        std::vector<Eigen::Index> ids;
        std::size_t child = 0;
        for (auto [lo, hi] : levels[static_cast<std::size_t>(t)]) {
            const auto id = static_cast<Eigen::Index>(tree.children.size());
            tree.children.emplace_back();
            tree.parent.push_back(-1);
            while (child < lower.size() && lower[child].second <= hi) {
                if (lower[child].first >= lo) {
                    tree.children.back().push_back(below[child]);
                    tree.parent[static_cast<std::size_t>(below[child])] = id;
                }
                ++child;
            }
            ids.push_back(id);
        }
        below = std::move(ids);
    }
    return tree;
}

SparseMat tree_matrix(const SimilarityTree& tree)
{
    std::vector<Eigen::Triplet<double>> trips;
    for (Eigen::Index j = 0; j < tree.nodes(); ++j)
        for (auto leaf : tree.leaf_descendants(j)) trips.emplace_back(leaf, j, 1.0);
    SparseMat h(tree.leaves, tree.nodes());
    h.setFromTriplets(trips.begin(), trips.end());
    return h;
}

SparseMat RareFeatureInstance::leaf_map() const
{
    SparseMat out(h.rows(), h.cols() + 1);
    std::vector<Eigen::Triplet<double>> trips;
    for (Eigen::Index r = 0; r < h.outerSize(); ++r)
        for (SparseMat::InnerIterator it(h, r); it; ++it) trips.emplace_back(it.row(), it.col(), it.value());
    out.setFromTriplets(trips.begin(), trips.end());
    return out;
}

SparseMat RareFeatureInstance::design() const
{
    const SparseMat xh = x * h;
    SparseMat out(x.rows(), h.cols() + 1);
    std::vector<Eigen::Triplet<double>> trips;
    for (Eigen::Index r = 0; r < xh.outerSize(); ++r)
        for (SparseMat::InnerIterator it(xh, r); it; ++it) trips.emplace_back(it.row(), it.col(), it.value());
    for (Eigen::Index i = 0; i < x.rows(); ++i) trips.emplace_back(i, h.cols(), 1.0);
    out.setFromTriplets(trips.begin(), trips.end());
    return out;
}

RareFeatureInstance gen_rare_features(Eigen::Index n, Eigen::Index leaves, Eigen::Index depth, double lambda,
                                      double mu, std::uint64_t seed)
{
    if (n < 1) throw ConfigError("rare features: n must be positive");
    if (!(lambda >= 0.0)) throw ConfigError("rare features: lambda must be nonnegative");
    if (!(mu >= 0.0 && mu <= 1.0)) throw ConfigError("rare features: mu must lie in [0, 1]");
    RareFeatureInstance inst;
    inst.tree = build_balanced_tree(leaves, depth);
    inst.h = tree_matrix(inst.tree);
    inst.lambda = lambda;
    inst.mu = mu;
    inst.seed = seed;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    // Feature j occurs with probability decaying geometrically from 0.5 to 0.02.
    std::vector<Eigen::Triplet<double>> trips;
    for (Eigen::Index j = 0; j < leaves; ++j) {
        const double frac = leaves > 1 ? static_cast<double>(j) / static_cast<double>(leaves - 1) : 0.0;
        const double prob = 0.5 * std::pow(0.04, frac);
        for (Eigen::Index i = 0; i < n; ++i)
            if (unif(rng) < prob) trips.emplace_back(i, j, 1.0 + std::floor(3.0 * unif(rng)));
    }
    inst.x = SparseMat(n, leaves);
    inst.x.setFromTriplets(trips.begin(), trips.end());
    // Unit root-mean-square columns, so rare features carry large entries when present.
    Vec col_sq = Vec::Zero(leaves);
    for (Eigen::Index r = 0; r < inst.x.outerSize(); ++r)
        for (SparseMat::InnerIterator it(inst.x, r); it; ++it) col_sq[it.col()] += it.value() * it.value();
    for (Eigen::Index r = 0; r < inst.x.outerSize(); ++r)
        for (SparseMat::InnerIterator it(inst.x, r); it; ++it)
            it.valueRef() *= std::sqrt(static_cast<double>(n) / col_sq[it.col()]);

    // Planted tree-fused coefficients: a few internal nodes carry signal.
    Vec gamma_true = Vec::Zero(inst.tree.nodes());
    for (Eigen::Index j = leaves; j < inst.tree.root(); ++j)
        if (unif(rng) < 0.3) gamma_true[j] = normal(rng);
    const Vec beta_true = inst.h * gamma_true;
    inst.y = (inst.x * beta_true).array() + 3.0;
    for (Eigen::Index i = 0; i < n; ++i) inst.y[i] += 0.1 * normal(rng);
    return inst;
}

Vec rare_feature_weights(const RareFeatureInstance& inst)
{
    Vec w = Vec::Ones(inst.packed_dim());
    w[inst.tree.root()] = 0.0;
    w[inst.packed_dim() - 1] = 0.0;
    return w;
}

ProblemSpec rare_feature_problem(const RareFeatureInstance& inst, const RareFeatureSolverConfig& cfg)
{
    const Eigen::Index dim = inst.packed_dim();
    const Eigen::Index d = inst.tree.leaves;
    const double n = static_cast<double>(inst.x.rows());
    ProblemSpec p;
    p.metric = GammaMetric(cfg.gamma);
    p.beta = cfg.beta;

    BlockSpec b1;
    b1.name = "l1 on leaves";
    b1.ops.resolvent = resolvent_from_prox(ProxL1{inst.lambda * (1.0 - inst.mu), Vec()}, d);
    b1.ops.forward = ForwardOp::zero(d);
    b1.ops.map = LinearMap::sparse(inst.leaf_map());
    b1.scheme = FixedStep{{cfg.alpha1, cfg.rho1}, std::nullopt};

    GradLeastSquares ls{inst.design(), inst.y, 1.0 / n};
    const Vec grad0 = apply_grad(ls, Vec::Zero(dim));
    BlockSpec b2;
    b2.name = "l1 on nodes+least squares";
    b2.ops.resolvent = resolvent_from_prox(ProxL1{inst.lambda * inst.mu, rare_feature_weights(inst)}, dim);
    b2.ops.forward = forward_from_grad(std::move(ls));
    b2.ops.map = LinearMap::identity(dim);
    b2.scheme = make_smooth_scheme({cfg.scheme, cfg.alpha2, cfg.rho2, cfg.delta, cfg.rho_hat, cfg.trial_rule, 1.1,
                                    Vec::Zero(dim), grad0});

    p.blocks = {std::move(b1), std::move(b2)};
    p.validate();
    return p;
}

InitialPoint rare_feature_initial_point(const RareFeatureInstance& inst, const ProblemSpec& problem)
{
    const Eigen::Index dim = inst.packed_dim();
    InitialPoint init = default_initial_point(problem, Vec::Zero(dim));
    GradLeastSquares ls{inst.design(), inst.y, 1.0 / static_cast<double>(inst.x.rows())};
    init.y0 = {Vec(), apply_grad(ls, Vec::Zero(dim))};
    return init;
}

double rare_feature_objective(const Vec& v, const RareFeatureInstance& inst)
{
    if (v.size() != inst.packed_dim()) throw DimensionError("rare_feature_objective: size");
    const Eigen::Index nodes = inst.tree.nodes();
    const Vec g = v.head(nodes);
    const double b0 = v[nodes];
    const Vec beta = inst.h * g;
    const Vec resid = ((inst.x * beta).array() + b0).matrix() - inst.y;
    const double n = static_cast<double>(inst.x.rows());
    const double pen_nodes = g.lpNorm<1>() - std::abs(g[inst.tree.root()]);
    return resid.squaredNorm() / (2.0 * n) + inst.lambda * (inst.mu * pen_nodes + (1.0 - inst.mu) * beta.lpNorm<1>());
}

ReferenceSolution reference_solve(const RareFeatureInstance& inst, double tol, long max_iters)
{
    // min (1/2n)|M v - y|^2 + |K v|_{1,c} with K = [H 0; D], c = (lambda(1-mu), lambda mu w).
    const Eigen::Index dim = inst.packed_dim();
    const Eigen::Index d = inst.tree.leaves;
    const double n = static_cast<double>(inst.x.rows());
    const Mat m = Mat(inst.design());
    const Mat lmap = Mat(inst.leaf_map());
    const Vec wts = rare_feature_weights(inst);
    Mat k(d + dim, dim);
    k.topRows(d) = lmap;
    k.bottomRows(dim) = wts.asDiagonal();
    Vec thresh(d + dim);
    thresh.head(d).setConstant(inst.lambda * (1.0 - inst.mu));
    thresh.tail(dim) = inst.lambda * inst.mu * Vec::Ones(dim);

    const double rho = 1.0;
    const Mat system = m.transpose() * m / n + rho * k.transpose() * k;
    const Eigen::LLT<Mat> llt(system);
    if (llt.info() != Eigen::Success) throw SolverError("rare-feature reference: system not positive definite");
    const Vec mty = m.transpose() * inst.y / n;

    Vec v = Vec::Zero(dim);
    Vec s = Vec::Zero(d + dim);
    Vec u = Vec::Zero(d + dim);
    double r_primal = 0.0;
    double r_dual = 0.0;
    for (long it = 0; it < max_iters; ++it) {
        v = llt.solve(mty + rho * k.transpose() * (s - u));
        const Vec kv = k * v;
        const Vec s_old = s;
        for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = soft(kv[i] + u[i], thresh[i] / rho);
        u += kv - s;
        r_primal = (kv - s).norm();
        r_dual = rho * (k.transpose() * (s - s_old)).norm();
        if (r_primal < tol && r_dual < tol) break;
    }

    ReferenceSolution ref;
    ref.x = v;
    ref.f_star = rare_feature_objective(v, inst);
    ref.method = "admm";
    ref.kkt_residual = std::max(r_primal, r_dual);

    // Kuhn-Tucker point for the generated spec: w_1 = scaled dual of the leaf l1 term.
    const Vec dual_leaves = rho * u.head(d);
    ref.point = PrimalDualPoint(v, {dual_leaves});
    return ref;
}

// ----- Lasso ------------------------------------------------------------------

Vec LassoInstance::gradient(const Vec& z) const
{
    if (q.size() == 0) return z - c;
    return q * z - c;
}

double LassoInstance::lipschitz() const
{
    if (q.size() == 0) return 1.0;
    Eigen::SelfAdjointEigenSolver<Mat> es(q, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

LassoInstance scalar_lasso()
{
    LassoInstance inst;
    inst.c = Vec::Constant(1, 3.0);
    inst.lambda = 1.0;
    return inst;
}

LassoInstance coupled_lasso()
{
    LassoInstance inst;
    inst.c.resize(3);
    inst.c << 3.0, -1.0, 0.5;
    inst.q.resize(3, 3);
    inst.q << 2.0, 0.5, 0.0, 0.5, 1.0, 0.3, 0.0, 0.3, 0.5;
    inst.lambda = 1.0;
    return inst;
}

BlockOps lasso_block_ops(const LassoInstance& inst)
{
    const Eigen::Index d = inst.c.size();
    BlockOps ops;
    ops.resolvent = resolvent_from_prox(ProxL1{inst.lambda, Vec()}, d);
    ops.forward = ForwardOp([inst](const Vec& z) { return inst.gradient(z); }, inst.lipschitz());
    ops.map = LinearMap::identity(d);
    return ops;
}

ProblemSpec lasso_problem(const LassoInstance& inst, const LassoSolverConfig& cfg)
{
    const Eigen::Index d = inst.c.size();
    if (d < 1) throw ConfigError("lasso: empty data");
    if (cfg.blocks != 1 && cfg.blocks != 2) throw ConfigError("lasso: blocks must be 1 or 2");
    ProblemSpec p;
    p.metric = GammaMetric(cfg.gamma);
    p.beta = cfg.beta;
    const ForwardOp grad = lasso_block_ops(inst).forward;
    const Vec zero = Vec::Zero(d);
    const Vec w_hat = inst.gradient(zero);

    const SmoothBlockSettings smooth{cfg.scheme, cfg.alpha, cfg.rho, cfg.delta, cfg.rho_hat, cfg.trial_rule, 1.1,
                                     zero, w_hat};
    if (cfg.blocks == 1) {
        BlockSpec b;
        b.name = "lasso";
        b.ops.resolvent = resolvent_from_prox(ProxL1{inst.lambda, Vec()}, d);
        b.ops.forward = grad;
        b.ops.map = LinearMap::identity(d);
        b.scheme = make_smooth_scheme(smooth);
        p.blocks = {std::move(b)};
    } else {
        BlockSpec b1;
        b1.name = "l1";
        b1.ops.resolvent = resolvent_from_prox(ProxL1{inst.lambda, Vec()}, d);
        b1.ops.forward = ForwardOp::zero(d);
        b1.ops.map = LinearMap::identity(d);
        b1.scheme = FixedStep{{1.0, cfg.rho}, std::nullopt};
        BlockSpec b2;
        b2.name = "quadratic";
        b2.ops.resolvent = ResolventOp();
        b2.ops.forward = grad;
        b2.ops.map = LinearMap::identity(d);
        b2.scheme = make_smooth_scheme(smooth);
        p.blocks = {std::move(b1), std::move(b2)};
    }
    p.validate();
    return p;
}

double lasso_objective(const Vec& z, const LassoInstance& inst)
{
    const double quad = inst.q.size() == 0 ? z.squaredNorm() : z.dot(inst.q * z);
    return inst.lambda * z.lpNorm<1>() + 0.5 * quad - inst.c.dot(z) + 0.5 * inst.c.squaredNorm();
}

ReferenceSolution reference_solve(const LassoInstance& inst, std::size_t blocks)
{
    ReferenceSolution ref;
    if (inst.q.size() == 0) {
        ref.x = prox_l1(inst.c, inst.lambda);
        ref.method = "analytic";
    } else {
        // Proximal gradient; Q is positive definite so this converges linearly.
        const double step = 1.0 / inst.lipschitz();
        Vec z = Vec::Zero(inst.c.size());
        for (int k = 0; k < 100000; ++k) {
            const Vec next = prox_l1(z - step * inst.gradient(z), step * inst.lambda);
            const double change = (next - z).norm();
            z = next;
            if (change < 1e-15) break;
        }
        ref.x = z;
        ref.method = "proximal-gradient";
    }
    ref.f_star = lasso_objective(ref.x, inst);
    ref.kkt_residual = (ref.x - prox_l1(ref.x - inst.gradient(ref.x), inst.lambda)).norm();
    if (blocks == 1)
        ref.point = PrimalDualPoint(ref.x, {});
    else
        ref.point = PrimalDualPoint(ref.x, {Vec(-inst.gradient(ref.x))});
    return ref;
}

} // namespace projsplit
