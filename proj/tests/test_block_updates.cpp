#include "doctest.h"
#include "fixtures.hpp"
#include "projsplit/block_updates.hpp"
#include "projsplit/operators.hpp"

using namespace projsplit;

namespace {

Vec s(double v) { return Vec::Constant(1, v); }

BlockOps scalar_ops(ProxSpec prox, ForwardOp fwd)
{
    BlockOps ops;
    ops.resolvent = resolvent_from_prox(std::move(prox), 1);
    ops.forward = std::move(fwd);
    ops.map = LinearMap::identity(1);
    return ops;
}

ForwardOp identity_forward() { return ForwardOp([](const Vec& x) { return x; }, 1.0); }

} // namespace

TEST_CASE("one_forward_step examples")
{
    SUBCASE("A = 0, B = 0, alpha = 1")
    {
        const auto ops = scalar_ops(ProxZero{}, ForwardOp::zero(1));
        const auto st = make_block_state(s(0.5), s(0.0), 2.0);
        const auto out = one_forward_step(s(1.0), st, s(0.3), {1.0, 2.0}, ops);
        CHECK(out.t[0] == doctest::Approx(1.6));
        CHECK(out.x[0] == doctest::Approx(1.6));
        CHECK(out.y[0] == doctest::Approx(0.0));
    }
    SUBCASE("soft threshold with B = identity")
    {
        const auto ops = scalar_ops(ProxL1{1.0, Vec()}, identity_forward());
        const auto st = make_block_state(s(0.5), s(0.5), 1.0);
        const auto out = one_forward_step(s(1.0), st, s(0.0), {0.5, 1.0}, ops);
        CHECK(out.t[0] == doctest::Approx(0.25));
        CHECK(out.x[0] == 0.0);
        CHECK(out.y[0] == doctest::Approx(0.25));
        // y - B x lies in d|.|(0) = [-1, 1]
        CHECK(std::abs(out.y[0] - out.b[0]) <= 1.0);
    }
    SUBCASE("fixed point")
    {
        // A = d|.|, B x = x, z = x = 2, w = 3: a = w - B x = 1 lies in d|2|.
        const auto ops = scalar_ops(ProxL1{1.0, Vec()}, identity_forward());
        const auto st = make_block_state(s(2.0), s(2.0), 0.7);
        const auto out = one_forward_step(s(2.0), st, s(3.0), {0.4, 0.7}, ops);
        CHECK(out.x[0] == doctest::Approx(2.0));
        CHECK(out.y[0] == doctest::Approx(3.0));
    }
}

TEST_CASE("one_forward_step evaluates B once and certifies graph membership")
{
    std::mt19937_64 rng(21);
    for (int t = 0; t < 100; ++t) {
        const auto c = fixture::random_ascent_case(rng, false);
        const auto before = c.ops.forward.evaluations();
        const auto out = one_forward_step(c.z, c.prev, c.w, {c.alpha, c.rho}, c.ops);
        CHECK(c.ops.forward.evaluations() - before == 1);
        CHECK((out.b - (c.q * out.x + c.c)).norm() <= 1e-12 * std::max(1.0, out.b.norm()));
        CHECK((out.y - (out.t - out.x) / c.rho - out.b).norm() <= 1e-12 * std::max(1.0, out.y.norm()));
        const Vec yhat = (out.t - out.x) / c.rho + c.prev.b;
        CHECK((out.y_hat - yhat).norm() <= 1e-12 * std::max(1.0, yhat.norm()));
    }
}

TEST_CASE("two_forward_step examples")
{
    SUBCASE("A = 0, B = 0")
    {
        const auto ops = scalar_ops(ProxZero{}, ForwardOp::zero(1));
        const auto out = two_forward_step(s(1.0), s(0.5), 0.4, ops);
        CHECK(out.x[0] == doctest::Approx(1.2));
        CHECK(out.y[0] == doctest::Approx(0.0));
    }
    SUBCASE("soft threshold, equality in the Lipschitz ascent bound")
    {
        const auto ops = scalar_ops(ProxL1{1.0, Vec()}, identity_forward());
        const auto before = ops.forward.evaluations();
        const auto out = two_forward_step(s(1.0), s(0.0), 0.5, ops);
        CHECK(ops.forward.evaluations() - before == 2);
        CHECK(out.t[0] == doctest::Approx(0.5));
        CHECK(out.x[0] == 0.0);
        CHECK(out.y[0] == doctest::Approx(1.0));
        const double phi = (1.0 - out.x[0]) * (out.y[0] - 0.0);
        CHECK(phi == doctest::Approx((1.0 / 0.5 - 1.0) * 1.0));
    }
    SUBCASE("fixed point")
    {
        // A = d|.| at Gz = 2 contains 1; w = B(Gz) + 1 = 3.
        const auto ops = scalar_ops(ProxL1{1.0, Vec()}, identity_forward());
        const auto out = two_forward_step(s(2.0), s(3.0), 0.3, ops);
        CHECK(out.x[0] == doctest::Approx(2.0));
        CHECK(out.y[0] == doctest::Approx(3.0));
    }
}

TEST_CASE("Lipschitz ascent for two_forward_step on random instances")
{
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 500; ++t) {
        auto c = fixture::random_ascent_case(rng, false);
        const double rho = u(rng) * 0.999 / c.lipschitz;
        const auto out = two_forward_step(c.z, c.w, rho, c.ops);
        const double lhs = (c.z - out.x).dot(out.y - c.w);
        const double rhs = (1.0 / rho - c.lipschitz) * (c.z - out.x).squaredNorm();
        CHECK(lhs >= rhs - 1e-8);
    }
}

TEST_CASE("stepsize validation")
{
    CHECK_NOTHROW(validate_one_step({0.5, 1.0}, 1.0));
    CHECK_THROWS_AS(validate_one_step({0.5, 1.01}, 1.0), ConfigError);
    CHECK_THROWS_AS(validate_one_step({1.0, 0.1}, 1.0), ConfigError);
    CHECK_THROWS_AS(validate_one_step({0.0, 0.1}, 1.0), ConfigError);
    CHECK_THROWS_AS(validate_one_step({0.5, -1.0}, std::nullopt), ConfigError);
    CHECK_NOTHROW(validate_one_step({1.0, 50.0}, 0.0));
    CHECK_NOTHROW(validate_two_step(0.99, 1.0));
    CHECK_THROWS_AS(validate_two_step(1.0, 1.0), ConfigError);
    CHECK_THROWS_AS(validate_two_step(0.0, std::nullopt), ConfigError);
    BacktrackConfig cfg;
    CHECK_NOTHROW(validate_backtrack(cfg, 0.5));
    cfg.rho0 = 2e6;
    CHECK_THROWS_AS(validate_backtrack(cfg, 0.5), ConfigError);
    cfg.rho0 = 1.0;
    cfg.delta = 1.0;
    CHECK_THROWS_AS(validate_backtrack(cfg, 0.5), ConfigError);
}

TEST_CASE("ascent_check examples")
{
    // Fixed-point input: every term is zero.
    BlockState next = make_block_state(s(1.0), s(0.0), 1.0);
    next.y = s(2.0);
    next.y_hat = s(2.0);
    const auto r = ascent_check(0.0, s(2.0), next, s(1.0), s(2.0), 0.5, 1.0);
    CHECK(r.holds);
    CHECK(r.slack == doctest::Approx(0.0));
}

TEST_CASE("ascent inequality on random instances, including L = 0")
{
    std::mt19937_64 rng(23);
    for (bool constant : {false, true}) {
        for (int t = 0; t < 1000; ++t) {
            const auto c = fixture::random_ascent_case(rng, constant);
            const auto next = one_forward_step(c.z, c.prev, c.w, {c.alpha, c.rho}, c.ops);
            const double prev_phi = (c.z - c.prev.x).dot(c.prev.y - c.w);
            const auto r = ascent_check(prev_phi, c.prev.y, next, c.z, c.w, c.alpha, c.rho);
            const double scratch = fixture::ascent_slack_from_scratch(c, next);
            CHECK(r.slack >= -1e-8);
            CHECK(scratch >= -1e-8);
            CHECK(std::abs(r.slack - scratch) <= 1e-8 * std::max(1.0, std::abs(scratch)));
            if (constant) {
                // y+ = y^ when B is constant, which gives the reduced form.
                CHECK((next.y - next.y_hat).norm() <= 1e-9 * std::max(1.0, next.y.norm()));
                const double k = c.rho / (2.0 * c.alpha);
                const double phi_plus = (c.z - next.x).dot(next.y - c.w);
                const double reduced = phi_plus - (k * (1.0 + c.alpha) * (next.y - c.w).squaredNorm() +
                                                   (1.0 - c.alpha) * (prev_phi - k * (c.prev.y - c.w).squaredNorm()));
                CHECK(std::abs(reduced - scratch) <= 1e-8 * std::max(1.0, std::abs(scratch)));
            }
        }
    }
}

TEST_CASE("contractive_check")
{
    SUBCASE("alpha = 1, A = 0, B = 0 is a triangle inequality")
    {
        const auto ops = scalar_ops(ProxZero{}, ForwardOp::zero(1));
        const auto st = make_block_state(s(4.0), s(0.0), 0.5);
        const auto out = one_forward_step(s(1.0), st, s(2.0), {1.0, 0.5}, ops);
        CHECK(out.x[0] == doctest::Approx(2.0));
        const auto r = contractive_check(out, st.x, s(1.0), s(2.0), 1.0, 0.5, s(-1.0), s(0.0));
        CHECK(r.holds);
        CHECK(r.slack == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("theta_hat = solution, w = w_hat = 0")
    {
        // 0 in d|x| + (x - 3): solution 2, and 0 lies in (A + B)(2).
        const BlockOps ops = scalar_ops(ProxL1{1.0, Vec()}, ForwardOp([](const Vec& x) { return Vec(x.array() - 3.0); }, 1.0));
        std::mt19937_64 rng(24);
        std::uniform_real_distribution<double> u(-5.0, 5.0), a(0.05, 0.95);
        for (int t = 0; t < 1000; ++t) {
            const double alpha = a(rng);
            const double rho = 2.0 * (1.0 - alpha) * a(rng);
            const Vec x = s(u(rng)), z = s(u(rng));
            const auto st = make_block_state(x, ops.forward(x), rho);
            const auto out = one_forward_step(z, st, s(0.0), {alpha, rho}, ops);
            const auto r = contractive_check(out, x, z, s(0.0), alpha, rho, s(2.0), s(0.0));
            CHECK(r.holds);
        }
    }
    SUBCASE("random instances with a genuine certificate pair")
    {
        std::mt19937_64 rng(25);
        for (int t = 0; t < 1000; ++t) {
            const auto c = fixture::random_ascent_case(rng, t % 2 == 0);
            // (theta, w_hat): any point produced by the resolvent is in the graph.
            const Vec theta_t = oracle::random_vector(rng, c.z.size());
            auto [theta, a] = c.ops.resolvent(theta_t, 1.0);
            const Vec w_hat = a + c.ops.forward(theta);
            const auto out = one_forward_step(c.z, c.prev, c.w, {c.alpha, c.rho}, c.ops);
            const auto r = contractive_check(out, c.prev.x, c.z, c.w, c.alpha, c.rho, theta, w_hat);
            CHECK(r.slack >= -1e-8);
        }
    }
}

TEST_CASE("backtrack")
{
    SUBCASE("constant B accepts the first trial")
    {
        const auto ops = scalar_ops(ProxL1{1.0, Vec()}, ForwardOp::constant(s(0.5)));
        auto st = make_block_state(s(1.0), s(0.5), 3.0);
        st.y = s(1.5);
        BacktrackConfig cfg;
        cfg.rho0 = 3.0;
        cfg.theta_hat = st.x;
        cfg.w_hat = st.y;
        const auto r = backtrack(s(0.2), st, s(0.1), cfg, 0.5, ops);
        CHECK(r.trials == 1);
        CHECK(r.state.rho == r.first_trial);
    }
    SUBCASE("scalar B = x from a large first trial")
    {
        const auto ops = scalar_ops(ProxZero{}, identity_forward());
        auto st = make_block_state(s(2.0), s(2.0), 10.0);
        st.y = s(2.0);  // A = 0
        BacktrackConfig cfg;
        cfg.delta = 0.7;
        cfg.rho0 = 10.0;
        cfg.rho_hat = 10.0;
        cfg.trial_rule = TrialRule::Previous;
        cfg.theta_hat = s(0.0);
        cfg.w_hat = s(0.0);
        const double alpha = 0.5;
        const Vec z = s(-1.0), w = s(0.3);
        const auto r = backtrack(z, st, w, cfg, alpha, ops);
        CHECK(r.first_trial == 10.0);
        CHECK(r.state.rho >= 2.0 * cfg.delta * (1.0 - alpha) / 1.0 - 1e-12);
        // Re-evaluate both acceptance conditions from scratch.
        const double rho = r.state.rho;
        const double t = (1.0 - alpha) * 2.0 + alpha * z[0] - rho * (2.0 - w[0]);
        const double x = t, y = x;
        CHECK(r.state.x[0] == doctest::Approx(x));
        const double c1_lhs = std::abs(x - 0.0);
        const double c1_rhs = (1.0 - alpha) * 2.0 + alpha * std::abs(z[0]) + rho * std::abs(w[0]);
        CHECK(c1_lhs <= c1_rhs + 1e-12);
        const double yhat = (t - x) / rho + 2.0;
        const double phi = (z[0] - 2.0) * (2.0 - w[0]);
        const double phi_plus = (z[0] - x) * (y - w[0]);
        const double k = rho / (2.0 * alpha);
        CHECK(phi_plus >= k * ((y - w[0]) * (y - w[0]) + alpha * (yhat - w[0]) * (yhat - w[0])) +
                              (1.0 - alpha) * (phi - k * (2.0 - w[0]) * (2.0 - w[0])) - 1e-10);
        const double eta = (yhat - w[0]) * (yhat - w[0]) / ((y - w[0]) * (y - w[0]));
        CHECK(r.state.eta == doctest::Approx(eta));
    }
    SUBCASE("eta guard when the new y equals w")
    {
        // A = 0, B = 0: y+ = 0 = w.
        const auto ops = scalar_ops(ProxZero{}, ForwardOp::zero(1));
        auto st = make_block_state(s(1.0), s(0.0), 1.0);
        BacktrackConfig cfg;
        cfg.theta_hat = s(0.0);
        cfg.w_hat = s(0.0);
        const auto r = backtrack(s(1.0), st, s(0.0), cfg, 0.5, ops);
        CHECK(r.state.eta == 0.0);
    }
    SUBCASE("trial interval and stepsize floor on random instances")
    {
        std::mt19937_64 rng(26);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int t = 0; t < 300; ++t) {
            auto c = fixture::random_ascent_case(rng, false);
            BacktrackConfig cfg;
            cfg.delta = 0.3 + 0.6 * u(rng);
            cfg.rho_hat = 50.0;
            cfg.rho0 = 1.0;
            cfg.trial_rule = static_cast<TrialRule>(t % 3);
            const auto [theta, a] = c.ops.resolvent(c.prev.x, 1.0);
            cfg.theta_hat = theta;
            cfg.w_hat = a + c.ops.forward(theta);
            c.prev.rho = 0.1 + 10.0 * u(rng);
            c.prev.eta = 2.0 * u(rng);
            const auto r = backtrack(c.z, c.prev, c.w, cfg, c.alpha, c.ops);
            const double top = std::min((1.0 + c.alpha * c.prev.eta) * c.prev.rho, cfg.rho_hat);
            CHECK(r.interval_top == doctest::Approx(top));
            CHECK(r.first_trial >= std::min(c.prev.rho, cfg.rho_hat) - 1e-12);
            CHECK(r.first_trial <= top + 1e-12);
            CHECK(r.state.rho >= std::min(r.first_trial, 2.0 * cfg.delta * (1.0 - c.alpha) / c.lipschitz) - 1e-12);
        }
    }
    SUBCASE("trial cap")
    {
        const auto ops = scalar_ops(ProxZero{}, ForwardOp([](const Vec& x) { return Vec(100.0 * x); }, 100.0));
        auto st = make_block_state(s(2.0), s(200.0), 10.0);
        st.y = s(200.0);
        BacktrackConfig cfg;
        cfg.rho0 = 10.0;
        cfg.max_inner = 1;
        cfg.trial_rule = TrialRule::Previous;
        cfg.theta_hat = s(0.0);
        cfg.w_hat = s(0.0);
        CHECK_THROWS_AS(backtrack(s(-1.0), st, s(0.0), cfg, 0.5, ops), BacktrackError);
    }
}

TEST_CASE("two-step local Lipschitz search")
{
    std::mt19937_64 rng(27);
    for (int t = 0; t < 200; ++t) {
        const auto c = fixture::random_ascent_case(rng, false);
        TwoStepBacktrackConfig cfg;
        const auto before = c.ops.forward.evaluations();
        const auto r = two_step_backtrack(c.z, c.w, 10.0, cfg, c.ops);
        CHECK(c.ops.forward.evaluations() - before == static_cast<std::uint64_t>(1 + r.trials));
        const double lhs = (c.z - r.state.x).dot(r.state.y - c.w);
        CHECK(lhs >= (1.0 - cfg.bound) / r.state.rho * (c.z - r.state.x).squaredNorm() - 1e-8);
        CHECK(r.state.rho >= std::min(10.0, cfg.delta * cfg.bound / c.lipschitz) - 1e-12);
    }
}
