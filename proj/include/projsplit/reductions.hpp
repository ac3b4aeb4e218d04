#pragma once

#include <cstdint>
#include <vector>

#include "projsplit/block_updates.hpp"
#include "projsplit/spaces.hpp"

namespace projsplit {

struct FbStepPair {
    Vec one_step;          //!< x-component of the one-forward-step map at alpha = 0, w = 0
    Vec forward_backward;  //!< J_{rho A}(x - rho B x)
};

//! Both sides of the alpha = 0 reduction; they must agree bit for bit.
FbStepPair fb_step_equivalence(const BlockOps& ops, double rho, const Vec& x, const Vec& z);

struct FbLimitRow {
    double alpha = 0.0;
    double gap = 0.0;  //!< sup over k = 1..K of |x^k - x_FB^k|
};

//! Runs K iterations of the single-block method per alpha and of plain FB
//! from the same start; alpha = 0 drives the map directly.
std::vector<FbLimitRow> fb_limit_check(const BlockOps& ops, double rho, const Vec& z0,
                                       const std::vector<double>& alphas, long iterations);

struct TsengStepReport {
    double rho_tilde = 0.0;
    Vec z_plus_projective;
    Vec z_plus_tseng_form;
    double discrepancy = 0.0;
    std::uint64_t resolvent_calls = 0;
    bool terminal = false;  //!< y = 0: x already solves the inclusion
};

//! One single-block two-forward-step iteration at w = 0 against its closed form.
/*!
 * rho~ = rho (1 + <Bz - Bx, y>/|y|^2) and
 * z+ = (1 - rho~/rho) z + (rho~/rho) x - rho~ (Bx - Bz).
 */
TsengStepReport tseng_equivalence_step(const BlockOps& ops, double rho, double gamma, const Vec& z);

} // namespace projsplit
