#pragma once

#include <optional>
#include <span>
#include <vector>

#include "projsplit/spaces.hpp"

namespace projsplit {

//! A point (x_i, y_i) in the graph of T_i = A_i + B_i.
struct BlockPair {
    Vec x;
    Vec y;
};

//! Gradient pieces of the affine separator built from one set of pairs.
/*!
 * phi(p) = <z, v> + sum_{i<n} <w_i, u_i> - offset, with
 *   u_i = x_i - G_i x_n, v = sum_{i<n} G_i^* y_i + y_n,
 *   offset = sum_i <x_i, y_i>, pi = |u|^2 + |v|^2 / gamma.
 * x_n and y_1..y_{n-1} are kept so that the pi = 0 branch can hand back the
 * exact solution tuple.
 */
struct HyperplaneData {
    std::vector<Vec> u;
    Vec v;
    double pi = 0.0;
    double offset = 0.0;
    Vec x_last;
    std::vector<Vec> y_head;

    double value(const PrimalDualPoint& p) const;
};

struct ProjectionOutcome {
    bool terminal = false;
    PrimalDualPoint next_point;
    double pi = 0.0;
    double tau = 0.0;
    double phi_value = 0.0;
};

//! phi(p) in the expanded form (one G application per block).
double eval_separator(const PrimalDualPoint& p, std::span<const BlockPair> pairs,
                      std::span<const LinearMap> maps);

//! The per-block terms phi_i = <G_i z - x_i, y_i - w_i>, w_n included.
/*!
 * Their sum is phi(p). Used for per-block audits (a Lipschitz block's term is
 * nonnegative every iteration).
 */
std::vector<double> separator_terms(const PrimalDualPoint& p, std::span<const BlockPair> pairs,
                                    std::span<const LinearMap> maps);

HyperplaneData separator_gradient(std::span<const BlockPair> pairs, std::span<const LinearMap> maps,
                                  const GammaMetric& metric);

inline constexpr double kDefaultPiTol = 1e-24;

//! Relaxed projection of p onto {phi <= 0}; beta in (0, 2] (2 is the reflection, the solver needs < 2).
/*!
 * pi <= pi_tol is treated as pi = 0: the outcome is terminal and next_point is
 * (x_n, y_1, ..., y_{n-1}). `phi` is phi(p) when the caller already has it;
 * the solver passes the block form, which keeps its accuracy near solutions
 * where the expanded form cancels.
 */
ProjectionOutcome project_to_hplane(const PrimalDualPoint& p, const HyperplaneData& h,
                                    const GammaMetric& metric, double beta = 1.0,
                                    double pi_tol = kDefaultPiTol, std::optional<double> phi = std::nullopt);

} // namespace projsplit
