#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "projsplit/operators.hpp"
#include "projsplit/solver.hpp"

namespace projsplit {

//! Certified reference solution of a generated instance.
struct ReferenceSolution {
    Vec x;
    double f_star = 0.0;
    std::string method;
    double kkt_residual = 0.0;
    //! A point of the Kuhn-Tucker set for the generated ProblemSpec, when available.
    std::optional<PrimalDualPoint> point;
};

//! How block 1 of a two-block instance updates.
enum class SmoothScheme {
    Backtrack,        //!< one-forward-step with backtracking
    Fixed,            //!< one-forward-step at a fixed rho
    Lipschitz,        //!< two-forward-step at a fixed rho
    LipschitzSearch,  //!< two-forward-step with local-Lipschitz search
};

SmoothScheme smooth_scheme_from_string(const std::string& s);
std::string to_string(SmoothScheme s);
TrialRule trial_rule_from_string(const std::string& s);
std::string to_string(TrialRule r);

// ----- Portfolio ------------------------------------------------------------

//! min x^T Q x  s.t.  m^T x >= r, sum x = 1, x >= 0.
struct PortfolioInstance {
    Mat q;
    Vec m;
    double r = 0.0;
    double delta_r = 0.0;
    std::uint64_t seed = 0;

    Eigen::Index dim() const noexcept { return q.rows(); }
};

//! Q = Q0 Q0^T / d with N(0,1) entries, m ~ U(0,100), r = delta_r * mean(m).
PortfolioInstance gen_portfolio(Eigen::Index d, double delta_r, std::uint64_t seed);

//! gamma tuned for the one-step (or two-step) scheme at the four tabulated delta_r values.
std::optional<double> portfolio_table_gamma(double delta_r, bool two_step = false);

struct PortfolioSolverConfig {
    std::optional<double> gamma;  //!< unset: tabulated value, else 1
    double beta = 1.0;
    SmoothScheme scheme = SmoothScheme::Backtrack;
    double alpha1 = 0.1;
    double alpha2 = 1.0;
    double rho1 = 1.0;      //!< fixed stepsize, or the first backtracking trial
    double delta = 0.7;
    double rho_hat = 1e6;
    TrialRule trial_rule = TrialRule::Previous;
    bool link_rho2 = true;  //!< rho_2^k = rho_1^k
    double rho2 = 1.0;
};

ProblemSpec portfolio_problem(const PortfolioInstance& inst, const PortfolioSolverConfig& cfg = {});
//! z = 1/d, zero duals, x_i = z, y_1 = 2 Q z.
InitialPoint portfolio_initial_point(const PortfolioInstance& inst, const ProblemSpec& problem);

double portfolio_objective(const Vec& x, const PortfolioInstance& inst);

//! Termination measure; 0 exactly at solutions.
/*!
 * max{(F - F*)/F*, 0} - min{m^T x - r, 0} + |sum x - 1| - min{0, min_i x_i}.
 * With `literal_last_term` the final term is -max{0, min_i x_i} as printed in
 * the source formula.
 */
double portfolio_criterion(const Vec& x, const PortfolioInstance& inst, double f_star,
                           bool literal_last_term = false);

//! Active-set enumeration over simplex support and halfspace activity (d <= 8).
ReferenceSolution portfolio_reference_enumerate(const PortfolioInstance& inst);
//! Accelerated projected gradient on the exact intersection projection, then
//! an active-set polish. Any d.
ReferenceSolution portfolio_reference_iterative(const PortfolioInstance& inst, double tol = 1e-12,
                                                long max_iters = 200000);
//! Dispatches on size.
ReferenceSolution reference_solve(const PortfolioInstance& inst);

//! Projection onto simplex intersect halfspace by bisection on the halfspace multiplier.
Vec project_simplex_halfspace(const Vec& t, const Vec& m, double r);

// ----- Group-sparse logistic regression -------------------------------------

struct GroupLogisticInstance {
    LogisticData data;
    GroupList groups;  //!< indices into the packed vector (coordinate 0 is the intercept)
    double lambda1 = 0.5;
    double lambda2 = 0.5;
    bool normalized = true;
    std::uint64_t seed = 0;

    Eigen::Index features() const noexcept { return data.a.cols(); }
    Eigen::Index packed_dim() const noexcept { return data.a.cols() + 1; }
};

//! Contiguous partition of packed coordinates 1..d into `count` groups.
GroupList contiguous_groups(Eigen::Index d, Eigen::Index count);

//! Planted group-sparse model; labels from the sign of a noisy linear score.
GroupLogisticInstance gen_group_logistic(Eigen::Index n, Eigen::Index d, Eigen::Index n_groups,
                                         double lambda, std::uint64_t seed, bool normalize = true);

//! gamma tuned for the one-step (or two-step) scheme at the three tabulated lambda values.
std::optional<double> group_logistic_table_gamma(double lambda, bool two_step = false);

struct GroupLogisticSolverConfig {
    std::optional<double> gamma;  //!< unset: tabulated value, else 1
    double beta = 1.0;
    SmoothScheme scheme = SmoothScheme::Backtrack;
    double alpha1 = 0.1;
    double alpha2 = 1.0;
    double rho1 = 1.0;
    double delta = 0.7;
    double rho_hat = 1e6;
    TrialRule trial_rule = TrialRule::Growth;
    double growth = 1.1;
    bool link_rho2 = true;
    double rho2 = 1.0;
};

ProblemSpec group_logistic_problem(const GroupLogisticInstance& inst, const GroupLogisticSolverConfig& cfg = {});
//! Zero start, y_1 = grad of the loss at 0.
InitialPoint group_logistic_initial_point(const GroupLogisticInstance& inst, const ProblemSpec& problem);
double group_logistic_objective(const Vec& v, const GroupLogisticInstance& inst);
//! Exact prox of the combined penalty on the packed vector (intercept untouched).
Vec group_logistic_prox(const Vec& t, double step, const GroupLogisticInstance& inst);
//! FISTA with restart on the exact prox; certified by the prox-gradient residual.
ReferenceSolution reference_solve(const GroupLogisticInstance& inst, double tol = 1e-12,
                                  long max_iters = 500000);

// ----- Rare features ---------------------------------------------------------

//! Balanced similarity tree over `leaves` features.
/*!
 * Node numbering: leaves 0..leaves-1 first, then internal nodes level by
 * level from the bottom, with the root last. children[j] lists the direct
 * children of node j.
 */
struct SimilarityTree {
    Eigen::Index leaves = 0;
    Eigen::Index depth = 0;
    std::vector<std::vector<Eigen::Index>> children;
    std::vector<Eigen::Index> parent;  //!< -1 for the root

    Eigen::Index nodes() const noexcept { return static_cast<Eigen::Index>(children.size()); }
    Eigen::Index root() const noexcept { return nodes() - 1; }
    //! Leaf features below node j (a leaf is its own descendant).
    std::vector<Eigen::Index> leaf_descendants(Eigen::Index j) const;
};

//! depth = number of edges from the root to every leaf. A node over s leaves
//! with r levels left has the smallest k with k^r >= s children.
SimilarityTree build_balanced_tree(Eigen::Index leaves, Eigen::Index depth);

//! H(i, j) = 1 iff leaf i is a descendant of node j.
SparseMat tree_matrix(const SimilarityTree& tree);

//! (1/2n)|b0 e + X H g - y|^2 + lambda (mu |g_{-root}|_1 + (1 - mu)|H g|_1).
/*!
 * Packed variable v = (g, b0) of size nodes + 1.
 */
struct RareFeatureInstance {
    SparseMat x;  //!< samples x features
    SimilarityTree tree;
    SparseMat h;  //!< features x nodes
    Vec y;
    double lambda = 1e-2;
    double mu = 0.5;
    std::uint64_t seed = 0;

    Eigen::Index packed_dim() const noexcept { return h.cols() + 1; }
    //! [H, 0]: maps v to the leaf coefficients beta = H g.
    SparseMat leaf_map() const;
    //! [X H, e].
    SparseMat design() const;
};

//! Sparse counts with rare columns; response from a planted tree-fused model.
RareFeatureInstance gen_rare_features(Eigen::Index n, Eigen::Index leaves, Eigen::Index depth, double lambda,
                                      double mu, std::uint64_t seed);

struct RareFeatureSolverConfig {
    double gamma = 0.1;
    double beta = 1.0;
    double alpha1 = 1.0;
    double rho1 = 1.0;
    SmoothScheme scheme = SmoothScheme::Backtrack;
    double alpha2 = 0.1;
    double rho2 = 1.0;  //!< fixed stepsize, or the first backtracking trial
    double delta = 0.7;
    double rho_hat = 1e6;
    TrialRule trial_rule = TrialRule::Previous;
};

ProblemSpec rare_feature_problem(const RareFeatureInstance& inst, const RareFeatureSolverConfig& cfg = {});
InitialPoint rare_feature_initial_point(const RareFeatureInstance& inst, const ProblemSpec& problem);
double rare_feature_objective(const Vec& v, const RareFeatureInstance& inst);
//! Penalty weights on v for the lambda*mu term (root and intercept free).
Vec rare_feature_weights(const RareFeatureInstance& inst);
//! ADMM on the stacked l1 terms with a cached factorization.
ReferenceSolution reference_solve(const RareFeatureInstance& inst, double tol = 1e-12, long max_iters = 2000000);

// ----- Lasso ------------------------------------------------------------------

//! 0 in lambda d|z|_1 + (Q z - c), Q symmetric positive definite.
/*!
 * An empty q means the identity, where the solution is soft(c, lambda).
 */
struct LassoInstance {
    Vec c;
    double lambda = 1.0;
    Mat q;

    //! Q z - c.
    Vec gradient(const Vec& z) const;
    double lipschitz() const;
};

LassoInstance scalar_lasso();   //!< c = 3, lambda = 1, solution 2
LassoInstance coupled_lasso();  //!< three coordinates with a non-diagonal Q

//! Single-block operators (soft threshold, Q z - c) for the reduction checks.
BlockOps lasso_block_ops(const LassoInstance& inst);

struct LassoSolverConfig {
    std::size_t blocks = 1;  //!< 1: (d|.|, z - c) in one block; 2: prox block then gradient block
    double gamma = 1.0;
    double beta = 1.0;
    SmoothScheme scheme = SmoothScheme::Fixed;
    double alpha = 0.5;
    double rho = 1.0;
    double delta = 0.7;
    double rho_hat = 1e6;
    TrialRule trial_rule = TrialRule::UpperEnd;
};

ProblemSpec lasso_problem(const LassoInstance& inst, const LassoSolverConfig& cfg = {});
double lasso_objective(const Vec& z, const LassoInstance& inst);
ReferenceSolution reference_solve(const LassoInstance& inst, std::size_t blocks = 1);

} // namespace projsplit
