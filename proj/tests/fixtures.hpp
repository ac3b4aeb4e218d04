#pragma once

// Random instance builders shared by the unit and acceptance tests.

#include <random>

#include "oracles.hpp"
#include "projsplit/block_updates.hpp"
#include "projsplit/operators.hpp"

namespace fixture {

using projsplit::BlockOps;
using projsplit::BlockState;
using projsplit::Vec;
using projsplit::Mat;

//! Random symmetric PSD matrix M M^T with M of rank <= d.
inline Mat random_psd(std::mt19937_64& rng, Eigen::Index d)
{
    const Mat m = oracle::random_matrix(rng, d, d);
    return m * m.transpose() / static_cast<double>(d);
}

inline double exact_lmax(const Mat& q)
{
    Eigen::SelfAdjointEigenSolver<Mat> es(q);
    return es.eigenvalues().maxCoeff();
}

//! One-forward-step instance with a valid previous pair.
struct AscentCase {
    BlockOps ops;
    Mat q;         //!< B x = q x + c (q = 0 for the constant case)
    Vec c;
    double lipschitz = 0.0;
    double alpha = 0.5;
    double rho = 1.0;
    Vec z, w;
    BlockState prev;
};

//! A from {0, lambda|.|_1, simplex, halfspace}, B affine and cocoercive (or constant).
inline AscentCase random_ascent_case(std::mt19937_64& rng, bool constant_b)
{
    std::uniform_int_distribution<int> dim_d(1, 5), kind_d(0, 3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    AscentCase c;
    const Eigen::Index d = dim_d(rng);
    const int kind = kind_d(rng);
    projsplit::ProxSpec prox = projsplit::ProxZero{};
    if (kind == 1) prox = projsplit::ProxL1{0.1 + 2.0 * u(rng), Vec()};
    if (kind == 2) prox = projsplit::ProxSimplex{};
    if (kind == 3) prox = projsplit::ProxHalfspace{oracle::random_vector(rng, d), u(rng)};
    c.ops.resolvent = projsplit::resolvent_from_prox(prox, d);
    c.c = oracle::random_vector(rng, d);
    c.ops.map = projsplit::LinearMap::identity(d);
    if (constant_b) {
        c.q = Mat::Zero(d, d);
        c.ops.forward = projsplit::ForwardOp::constant(c.c);
        c.alpha = 0.05 + 0.95 * u(rng);
        c.rho = 0.01 + 10.0 * u(rng);
    } else {
        c.q = random_psd(rng, d) * (0.1 + 5.0 * u(rng));
        c.lipschitz = exact_lmax(c.q);
        const Mat q = c.q;
        const Vec off = c.c;
        c.ops.forward = projsplit::ForwardOp([q, off](const Vec& x) { return Vec(q * x + off); }, c.lipschitz);
        c.alpha = 0.02 + 0.96 * u(rng);
        // Anywhere in (0, 2(1 - alpha)/L], including the endpoint.
        const double top = 2.0 * (1.0 - c.alpha) / c.lipschitz;
        c.rho = u(rng) < 0.1 ? top : top * (0.01 + 0.99 * u(rng));
    }
    // Previous pair from one step at a different (z, w, rho): y lies in A x + B x.
    const Vec x0 = oracle::random_vector(rng, d, 2.0);
    BlockState start = projsplit::make_block_state(x0, c.ops.forward(x0), c.rho);
    c.prev = projsplit::one_forward_step(oracle::random_vector(rng, d, 2.0), start, oracle::random_vector(rng, d),
                                         {c.alpha, c.rho * (0.5 + u(rng))}, c.ops);
    c.z = oracle::random_vector(rng, d, 2.0);
    c.w = oracle::random_vector(rng, d);
    return c;
}

//! Ascent-lemma slack computed from scratch (G = I).
inline double ascent_slack_from_scratch(const AscentCase& c, const BlockState& next)
{
    const Vec bx = c.q * c.prev.x + c.c;
    const Vec t = (1.0 - c.alpha) * c.prev.x + c.alpha * c.z - c.rho * (bx - c.w);
    const Vec y_hat = (t - next.x) / c.rho + bx;
    const double phi = (c.z - c.prev.x).dot(c.prev.y - c.w);
    const double phi_plus = (c.z - next.x).dot(next.y - c.w);
    const double k = c.rho / (2.0 * c.alpha);
    const double rhs = k * ((next.y - c.w).squaredNorm() + c.alpha * (y_hat - c.w).squaredNorm()) +
                       (1.0 - c.alpha) * (phi - k * (c.prev.y - c.w).squaredNorm());
    return phi_plus - rhs;
}

} // namespace fixture
