#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>

#include "projsplit/spaces.hpp"

namespace projsplit {

//! Thread-safe call counter shared between copies of an operator.
class CallCounter {
public:
    CallCounter() : count_(std::make_shared<std::atomic<std::uint64_t>>(0)) {}
    void bump() const noexcept { count_->fetch_add(1, std::memory_order_relaxed); }
    std::uint64_t value() const noexcept { return count_->load(std::memory_order_relaxed); }
    void reset() const noexcept { count_->store(0, std::memory_order_relaxed); }

private:
    std::shared_ptr<std::atomic<std::uint64_t>> count_;
};

struct ResolventResult {
    Vec x;  //!< J_{rho A}(t)
    Vec a;  //!< (t - x) / rho, an element of A x
};

//! Backward step t -> J_{rho A}(t) for a maximal monotone A.
class ResolventOp {
public:
    using Fn = std::function<Vec(const Vec& t, double rho)>;

    ResolventOp() : ResolventOp(identity_fn()) {}
    explicit ResolventOp(Fn fn) : fn_(std::move(fn)) {}

    ResolventResult operator()(const Vec& t, double rho) const;
    //! J only, skipping the a computation.
    Vec apply(const Vec& t, double rho) const;

    std::uint64_t calls() const noexcept { return counter_.value(); }
    void reset_calls() const noexcept { counter_.reset(); }

private:
    static Fn identity_fn();

    Fn fn_;
    CallCounter counter_;
};

//! Single-valued forward operator B.
/*!
 * lipschitz() is the declared constant: cocoercivity constant L for blocks
 * using the one-forward-step update, Lipschitz constant for two-step blocks.
 * It is optional because backtracking blocks need not know it. A constant map
 * has L = 0.
 */
class ForwardOp {
public:
    using Fn = std::function<Vec(const Vec&)>;

    ForwardOp(Fn fn, std::optional<double> lipschitz);

    static ForwardOp zero(Eigen::Index dim);
    static ForwardOp constant(Vec value);

    Vec operator()(const Vec& x) const;

    bool is_constant() const noexcept { return constant_; }
    std::optional<double> lipschitz() const noexcept { return lipschitz_; }

    std::uint64_t evaluations() const noexcept { return counter_.value(); }
    void reset_evaluations() const noexcept { counter_.reset(); }

private:
    Fn fn_;
    std::optional<double> lipschitz_;
    bool constant_ = false;
    CallCounter counter_;
};

struct BlockOps {
    ResolventOp resolvent;
    ForwardOp forward = ForwardOp::zero(0);
    LinearMap map = LinearMap::identity(0);
};

struct OneStepParams {
    double alpha = 0.5;
    double rho = 1.0;
};

//! Rejects alpha outside (0,1], rho <= 0, and rho > 2(1-alpha)/L when L > 0.
void validate_one_step(const OneStepParams& params, std::optional<double> lipschitz);

enum class TrialRule {
    UpperEnd,   //!< start at min{(1 + alpha eta) rho_prev, rho_hat}
    Previous,   //!< start at the previously accepted stepsize
    Growth,     //!< min{growth * rho_prev, upper end}
};

struct BacktrackConfig {
    double delta = 0.7;
    double rho_hat = 1e6;
    double rho0 = 1.0;
    //! Certificate pair with w_hat in A theta_hat + B theta_hat. Empty vectors
    //! mean "use the initial pair (x^0, y^0)"; the solver fills them in.
    Vec theta_hat;
    Vec w_hat;
    TrialRule trial_rule = TrialRule::UpperEnd;
    double growth = 1.1;
    int max_inner = 100;
};

void validate_backtrack(const BacktrackConfig& cfg, double alpha);

//! Running state of one block.
struct BlockState {
    Vec x;
    Vec y;
    Vec b;       //!< cached B x
    Vec y_hat;   //!< a + B x_prev
    Vec t;       //!< argument of the last resolvent call
    double rho = 1.0;
    double eta = 0.0;
};

//! Builds the state for a block from (x, b = Bx); y and y_hat are zero.
BlockState make_block_state(Vec x, Vec b, double rho);

//! The one-forward-step map with averaging alpha in [0, 1].
/*!
 * t = (1-alpha) x + alpha G z - rho (b - w), x+ = J(t), y+ = (t - x+)/rho + B x+.
 * Reuses state.b as B x, so exactly one new B evaluation is made. alpha = 0 is
 * accepted here (the forward-backward limit); the solver itself never uses it.
 */
BlockState one_forward_step(const Vec& z, const BlockState& state, const Vec& w,
                            const OneStepParams& params, const BlockOps& ops);

//! Same as one_forward_step with G z already computed.
BlockState one_forward_step_gz(const Vec& gz, const BlockState& state, const Vec& w,
                               const OneStepParams& params, const BlockOps& ops);

//! Two-forward-step update for a block whose B is only Lipschitz.
/*!
 * t = Gz - rho (B(Gz) - w), x = J(t), y = (t - x)/rho + B x. Two B
 * evaluations. y_hat is set to (t - x)/rho + B(Gz).
 */
BlockState two_forward_step(const Vec& z, const Vec& w, double rho, const BlockOps& ops);

//! Rejects rho <= 0, and rho >= 1/L when L is declared.
void validate_two_step(double rho, std::optional<double> lipschitz);

struct BacktrackResult {
    BlockState state;
    int trials = 0;             //!< inner iterations, each one B evaluation
    double first_trial = 0.0;   //!< rho~_1
    double interval_top = 0.0;  //!< min{(1 + alpha eta) rho_prev, rho_hat}
    double prev_phi = 0.0;      //!< <Gz - x, y - w> with the previous pair
};

//! Backtracking search for a one-forward-step stepsize.
/*!
 * Candidates come from one_forward_step at rho~_j = delta^{j-1} rho~_1 until
 * both acceptance conditions hold:
 *   (C1) |x~ - theta| <= (1-alpha)|x - theta| + alpha|Gz - theta| + rho~ |w - w_hat|
 *   (C2) phi+ >= rho~/(2 alpha) (|y~ - w|^2 + alpha |y^ - w|^2)
 *               + (1-alpha)(phi - rho~/(2 alpha) |y - w|^2)
 * On acceptance eta = |y^ - w|^2 / |y~ - w|^2 (0 when the denominator is below
 * 1e-24). Throws BacktrackError after cfg.max_inner trials.
 */
BacktrackResult backtrack(const Vec& z, const BlockState& state, const Vec& w,
                          const BacktrackConfig& cfg, double alpha, const BlockOps& ops);

struct TwoStepBacktrackConfig {
    double delta = 0.7;
    double rho_hat = 1e6;
    //! Acceptance requires rho |B x - B G z| <= bound * |G z - x|, bound in (0,1).
    double bound = 0.9;
    TrialRule trial_rule = TrialRule::Previous;
    double growth = 1.1;
    int max_inner = 100;
};

//! Local-Lipschitz stepsize search for the two-forward-step update.
/*!
 * B(Gz) is computed once; each trial adds one evaluation at the candidate x.
 * The accepted candidate satisfies <Gz - x, y - w> >= (1 - bound)/rho |Gz - x|^2.
 */
BacktrackResult two_step_backtrack(const Vec& z, const Vec& w, double rho_prev,
                                   const TwoStepBacktrackConfig& cfg, const BlockOps& ops);

struct CheckReport {
    bool holds = true;
    double slack = 0.0;  //!< lhs - rhs oriented so that >= 0 means "holds"
};

//! Ascent inequality for a one-forward-step output.
/*!
 * phi+ >= rho/(2 alpha)(|y+ - w|^2 + alpha |y^ - w|^2) + (1-alpha)(phi - rho/(2 alpha)|y - w|^2)
 * with phi = prev_phi, phi+ = <Gz - x+, y+ - w>. Holds when slack >= -tol.
 */
CheckReport ascent_check(double prev_phi, const Vec& y_prev, const BlockState& next, const Vec& gz,
                         const Vec& w, double alpha, double rho, double tol = 1e-8);

//! |x+ - theta| <= (1-alpha)|x - theta| + alpha|Gz - theta| + rho|w - w_hat|.
CheckReport contractive_check(const BlockState& next, const Vec& x_prev, const Vec& gz, const Vec& w,
                              double alpha, double rho, const Vec& theta_hat, const Vec& w_hat,
                              double tol = 1e-8);

} // namespace projsplit
