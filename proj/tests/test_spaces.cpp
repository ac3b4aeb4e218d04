#include "doctest.h"
#include "oracles.hpp"
#include "projsplit/spaces.hpp"

using namespace projsplit;

namespace {

Vec vec(std::initializer_list<double> v)
{
    Vec out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

} // namespace

TEST_CASE("gamma_norm_sq examples")
{
    CHECK(gamma_norm_sq(PrimalDualPoint(vec({0.0}), {}), GammaMetric(1.0)) == 0.0);
    CHECK(gamma_norm_sq(PrimalDualPoint(vec({1.0}), {vec({1.0})}), GammaMetric(2.0)) == 3.0);
    CHECK(gamma_norm_sq(PrimalDualPoint(vec({3.0, 4.0}), {vec({0.0, 0.0})}), GammaMetric(0.5)) == 12.5);
}

TEST_CASE("gamma_inner examples")
{
    const GammaMetric m(1.0);
    const PrimalDualPoint p1(vec({1.0}), {vec({3.0})}), p2(vec({2.0}), {vec({4.0})});
    CHECK(gamma_inner(p1, p2, m) == 14.0);
    CHECK(gamma_inner(p1, p1, m) == gamma_norm_sq(p1, m));
    const PrimalDualPoint e1(vec({1.0, 0.0}), {vec({0.0})}), e2(vec({0.0, 1.0}), {vec({0.0})});
    CHECK(gamma_inner(e1, e2, m) == 0.0);
}

TEST_CASE("gamma metric rejects bad input")
{
    CHECK_THROWS_AS(GammaMetric(0.0), ConfigError);
    CHECK_THROWS_AS(GammaMetric(-1.0), ConfigError);
    const PrimalDualPoint a(vec({1.0}), {vec({1.0})}), b(vec({1.0, 2.0}), {vec({1.0})});
    CHECK_THROWS_AS(gamma_inner(a, b, GammaMetric(1.0)), DimensionError);
}

TEST_CASE("apply_adjoint examples")
{
    Mat g(2, 2);
    g << 1, 2, 3, 4;
    const Vec out = apply_adjoint(LinearMap::dense(g), vec({1.0, 1.0}));
    CHECK(out[0] == 4.0);
    CHECK(out[1] == 6.0);
    const Vec y = vec({1.5, -2.0, 7.0});
    CHECK(apply_adjoint(LinearMap::identity(3), y) == y);
    CHECK(apply(LinearMap::identity(3), y) == y);
    CHECK_THROWS_AS(LinearMap::dense(g).apply(y), DimensionError);
}

TEST_CASE("adjoint identity on random dense and sparse maps")
{
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> dim(1, 64);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const int rows = dim(rng), cols = dim(rng);
        Mat dense = oracle::random_matrix(rng, rows, cols);
        SparseMat sp(rows, cols);
        std::vector<Eigen::Triplet<double>> trips;
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j)
                if (u(rng) < 0.2) trips.emplace_back(i, j, dense(i, j));
        sp.setFromTriplets(trips.begin(), trips.end());
        const Vec x = oracle::random_vector(rng, cols), y = oracle::random_vector(rng, rows);
        for (const auto& g : {LinearMap::dense(dense), LinearMap::sparse(sp)}) {
            const double lhs = g.apply(x).dot(y), rhs = x.dot(g.apply_adjoint(y));
            CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs)));
            // adjoint of adjoint is representation-identical
            CHECK(g.adjoint().adjoint().apply(x) == g.apply(x));
            CHECK(g.adjoint().apply(y) == g.apply_adjoint(y));
        }
    }
}

TEST_CASE("implied last dual and n = 1 convention")
{
    Mat g(2, 3);
    g << 1, 0, 2, 0, 1, -1;
    const std::vector<LinearMap> maps{LinearMap::dense(g), LinearMap::identity(3)};
    const PrimalDualPoint p(vec({1.0, 2.0, 3.0}), {vec({1.0, -1.0})});
    const Vec wn = p.implied_last_dual(maps);
    CHECK(wn == Vec(-g.transpose() * vec({1.0, -1.0})));
    CHECK(p.dual_for_block(1, maps) == wn);
    CHECK(p.blocks() == 2);

    const PrimalDualPoint single(vec({1.0}), {});
    const std::vector<LinearMap> one{LinearMap::identity(1)};
    CHECK(single.blocks() == 1);
    CHECK(single.implied_last_dual(one).norm() == 0.0);
}

TEST_CASE("gamma norm is positive definite and satisfies the triangle inequality")
{
    std::mt19937_64 rng(5);
    const GammaMetric m(0.3);
    auto rnd = [&] { return PrimalDualPoint(oracle::random_vector(rng, 4), {oracle::random_vector(rng, 3)}); };
    for (int t = 0; t < 200; ++t) {
        const auto a = rnd(), b = rnd(), c = rnd();
        CHECK(gamma_norm_sq(a, m) > 0.0);
        const double ab = std::sqrt(gamma_norm_sq(a - b, m)), bc = std::sqrt(gamma_norm_sq(b - c, m)),
                     ac = std::sqrt(gamma_norm_sq(a - c, m));
        CHECK(ac <= ab + bc + 1e-12);
    }
    CHECK(gamma_norm_sq(PrimalDualPoint(Vec::Zero(4), {Vec::Zero(3)}), m) == 0.0);
}

TEST_CASE("non-finite detection")
{
    Vec v = vec({1.0, 2.0});
    CHECK(all_finite(v));
    v[1] = std::numeric_limits<double>::quiet_NaN();
    CHECK_FALSE(all_finite(v));
    CHECK_FALSE(PrimalDualPoint(v, {}).all_finite());
}
