#include "doctest.h"
#include "oracles.hpp"
#include "projsplit/separator.hpp"

using namespace projsplit;

namespace {

Vec s(double v) { return Vec::Constant(1, v); }

struct RandomInstance {
    PrimalDualPoint p;
    std::vector<BlockPair> pairs;
    std::vector<LinearMap> maps;
    std::vector<Mat> dense;
};

// Three blocks: two dense maps R^4 -> R^3 / R^2 plus the identity.
RandomInstance random_instance(std::mt19937_64& rng)
{
    RandomInstance r;
    const Eigen::Index d0 = 4;
    r.dense = {oracle::random_matrix(rng, 3, d0), oracle::random_matrix(rng, 2, d0), Mat::Identity(d0, d0)};
    r.maps = {LinearMap::dense(r.dense[0]), LinearMap::dense(r.dense[1]), LinearMap::identity(d0)};
    r.p = PrimalDualPoint(oracle::random_vector(rng, d0), {oracle::random_vector(rng, 3), oracle::random_vector(rng, 2)});
    for (const auto& g : r.dense)
        r.pairs.push_back({oracle::random_vector(rng, g.rows()), oracle::random_vector(rng, g.rows())});
    return r;
}

} // namespace

TEST_CASE("eval_separator examples")
{
    const std::vector<BlockPair> pairs{{s(0.0), s(1.0)}};
    const std::vector<LinearMap> maps{LinearMap::identity(1)};
    CHECK(eval_separator(PrimalDualPoint(s(1.0), {}), pairs, maps) == doctest::Approx(1.0));

    // x_i = G_i z and y_i = w_i make every term vanish.
    std::mt19937_64 rng(1);
    auto r = random_instance(rng);
    const auto duals = std::vector<Vec>{r.p.w(0), r.p.w(1), r.p.implied_last_dual(r.maps)};
    for (std::size_t i = 0; i < 3; ++i) r.pairs[i] = {r.maps[i].apply(r.p.z()), duals[i]};
    CHECK(std::abs(eval_separator(r.p, r.pairs, r.maps)) < 1e-12);
}

TEST_CASE("expanded and block forms agree")
{
    std::mt19937_64 rng(2);
    for (int t = 0; t < 100; ++t) {
        const auto r = random_instance(rng);
        std::vector<Vec> x, y;
        for (const auto& pr : r.pairs) x.push_back(pr.x), y.push_back(pr.y);
        const double expected = oracle::separator_block_form(r.p.z(), r.p.w(), r.dense, x, y);
        const double got = eval_separator(r.p, r.pairs, r.maps);
        CHECK(std::abs(got - expected) <= 1e-9 * std::max(1.0, std::abs(expected)));
        const auto terms = separator_terms(r.p, r.pairs, r.maps);
        double sum = 0.0;
        for (double v : terms) sum += v;
        CHECK(std::abs(sum - expected) <= 1e-9 * std::max(1.0, std::abs(expected)));
        const auto h = separator_gradient(r.pairs, r.maps, GammaMetric(0.7));
        CHECK(std::abs(h.value(r.p) - expected) <= 1e-9 * std::max(1.0, std::abs(expected)));
    }
}

TEST_CASE("separator_gradient: n = 1 collapse and directional derivative")
{
    const std::vector<BlockPair> pairs{{s(0.5), s(2.0)}};
    const std::vector<LinearMap> maps{LinearMap::identity(1)};
    const auto h = separator_gradient(pairs, maps, GammaMetric(4.0));
    CHECK(h.u.empty());
    CHECK(h.v[0] == 2.0);
    CHECK(h.pi == doctest::Approx(1.0));

    std::mt19937_64 rng(3);
    for (int t = 0; t < 50; ++t) {
        const auto r = random_instance(rng);
        const GammaMetric m(0.4);
        const auto hg = separator_gradient(r.pairs, r.maps, m);
        // Gradient in the gamma metric is (v / gamma, u).
        const PrimalDualPoint grad(hg.v / m.gamma(), hg.u);
        const PrimalDualPoint q(oracle::random_vector(rng, 4), {oracle::random_vector(rng, 3), oracle::random_vector(rng, 2)});
        const double step = 0.37;
        PrimalDualPoint moved = r.p;
        moved.z() += step * q.z();
        for (std::size_t i = 0; i < 2; ++i) moved.w()[i] += step * q.w(i);
        const double lhs = hg.value(moved) - hg.value(r.p);
        const double rhs = step * gamma_inner(grad, q, m);
        CHECK(std::abs(lhs - rhs) <= 1e-9 * std::max(1.0, std::abs(rhs)));
        CHECK(hg.pi == doctest::Approx(gamma_norm_sq(grad, m)).epsilon(1e-12));
    }
}

TEST_CASE("pi vanishes at a solution pair set")
{
    // 0 in d|z| + (z - 3) splits as A_1 = d|.|, T_2 = z - 3; solution z = 2, w_1 = 1.
    const std::vector<BlockPair> pairs{{s(2.0), s(1.0)}, {s(2.0), s(-1.0)}};
    const std::vector<LinearMap> maps{LinearMap::identity(1), LinearMap::identity(1)};
    const auto h = separator_gradient(pairs, maps, GammaMetric(1.0));
    CHECK(h.pi == 0.0);
    const auto out = project_to_hplane(PrimalDualPoint(s(5.0), {s(0.0)}), h, GammaMetric(1.0));
    CHECK(out.terminal);
    CHECK(out.next_point.z()[0] == 2.0);
    CHECK(out.next_point.w(0)[0] == 1.0);
}

TEST_CASE("project_to_hplane examples")
{
    const std::vector<BlockPair> pairs{{s(0.0), s(1.0)}};
    const std::vector<LinearMap> maps{LinearMap::identity(1)};
    const GammaMetric m(1.0);
    const auto h = separator_gradient(pairs, maps, m);
    const PrimalDualPoint p(s(1.0), {});

    const auto out = project_to_hplane(p, h, m, 1.0);
    CHECK_FALSE(out.terminal);
    CHECK(out.pi == doctest::Approx(1.0));
    CHECK(out.tau == doctest::Approx(1.0));
    CHECK(out.next_point.z()[0] == doctest::Approx(0.0));

    const auto refl = project_to_hplane(p, h, m, 2.0);
    CHECK(refl.next_point.z()[0] == doctest::Approx(-1.0));
    const PrimalDualPoint star(s(0.0), {});
    CHECK(gamma_norm_sq(refl.next_point - star, m) == doctest::Approx(gamma_norm_sq(p - star, m)));

    // phi(p) <= 0: no move.
    const auto stay = project_to_hplane(PrimalDualPoint(s(-1.0), {}), h, m, 1.0);
    CHECK(stay.tau == 0.0);
    CHECK(stay.next_point.z()[0] == -1.0);

    CHECK_THROWS_AS(project_to_hplane(p, h, m, 0.0), ConfigError);
    CHECK_THROWS_AS(project_to_hplane(p, h, m, 2.5), ConfigError);
}

TEST_CASE("exact projection and Fejer step on random instances")
{
    std::mt19937_64 rng(4);
    for (int t = 0; t < 200; ++t) {
        const auto r = random_instance(rng);
        const GammaMetric m(0.25 + (t % 7) * 0.3);
        const auto h = separator_gradient(r.pairs, r.maps, m);
        const double phi = h.value(r.p);
        const auto out = project_to_hplane(r.p, h, m, 1.0);
        if (phi > 0.0) CHECK(std::abs(h.value(out.next_point)) <= 1e-8 * std::max(1.0, std::abs(phi)));

        // A point q on the nonpositive side of the separator.
        PrimalDualPoint q(oracle::random_vector(rng, 4), {oracle::random_vector(rng, 3), oracle::random_vector(rng, 2)});
        const double phi_q = h.value(q);
        if (phi_q > 0.0) {
            const auto pq = project_to_hplane(q, h, m, 1.0);
            q = pq.next_point;
        }
        for (double beta : {0.5, 1.0, 1.5}) {
            const auto step = project_to_hplane(r.p, h, m, beta);
            CHECK(gamma_norm_sq(step.next_point - q, m) <= gamma_norm_sq(r.p - q, m) + 1e-9);
        }
    }
}

TEST_CASE("separator shape errors")
{
    const std::vector<BlockPair> pairs{{s(0.0), s(1.0)}};
    const std::vector<LinearMap> two{LinearMap::identity(1), LinearMap::identity(1)};
    CHECK_THROWS(eval_separator(PrimalDualPoint(s(1.0), {}), pairs, two));
}
