#pragma once

#include <memory>
#include <utility>
#include <variant>
#include <vector>

#include "projsplit/block_updates.hpp"
#include "projsplit/spaces.hpp"

namespace projsplit {

using Group = std::vector<Eigen::Index>;
using GroupList = std::vector<Group>;

//! Throws ConfigError unless the groups are nonempty, in range and pairwise disjoint.
void validate_groups(const GroupList& groups, Eigen::Index dim);

//! Componentwise soft threshold sign(t) max(|t| - s, 0).
Vec prox_l1(const Vec& t, double scale);
//! Soft threshold with per-coordinate thresholds (weights scaled by `scale`).
Vec prox_l1_weighted(const Vec& t, const Vec& weights, double scale);
//! Per-group shrink t_g max(1 - s/|t_g|, 0); coordinates in no group pass through.
Vec prox_group_l2(const Vec& t, double scale, const GroupList& groups);
//! prox of s (l1 * |.|_1 + l2 * sum_g |.|_g): group shrink of the soft threshold.
Vec prox_sparse_group(const Vec& t, double l1_scale, double l2_scale, const GroupList& groups);

//! Euclidean projection onto {x : sum x = 1, x >= 0} by sort-and-threshold.
Vec project_simplex(const Vec& t);
//! Projection onto {x : m^T x >= r}; m must be nonzero.
Vec project_halfspace(const Vec& t, const Vec& m, double r);

//! 2 Q x.
Vec grad_quadratic(const Vec& x, const Mat& q);

//! Largest eigenvalue estimate of a symmetric PSD operator.
double power_iteration_lmax(const std::function<Vec(const Vec&)>& apply, Eigen::Index dim,
                            int iters = 100, double tol = 1e-8);
double power_iteration_lmax(const Mat& q, int iters = 100, double tol = 1e-8);

struct LogisticData {
    Mat a;        //!< samples in rows
    Vec labels;   //!< +1 / -1
};

//! sum_i log(1 + exp(-y_i (x0 + a_i^T x))).
double logistic_loss(double x0, const Vec& x, const LogisticData& data);
//! Gradient with respect to (x0, x).
std::pair<double, Vec> grad_logistic(double x0, const Vec& x, const LogisticData& data);

// Packed variants: v = (x0, x) with the intercept in coordinate 0.
double logistic_loss_packed(const Vec& v, const LogisticData& data);
Vec grad_logistic_packed(const Vec& v, const LogisticData& data);

// ----- Proximal specifications ---------------------------------------------

struct ProxZero {};
struct ProxL1 {
    double lambda = 1.0;
    Vec weights;  //!< empty = all ones; zero weight leaves a coordinate free
};
struct ProxGroupL2 {
    double lambda = 1.0;
    GroupList groups;
};
struct ProxSimplex {};
struct ProxHalfspace {
    Vec m;
    double r = 0.0;
};
struct ProxTranslated;
struct ProxScaled;

using ProxSpec = std::variant<ProxZero, ProxL1, ProxGroupL2, ProxSimplex, ProxHalfspace,
                              std::shared_ptr<const ProxTranslated>, std::shared_ptr<const ProxScaled>>;

//! f(x) = g(x - shift): prox_{rho f}(t) = shift + prox_{rho g}(t - shift).
struct ProxTranslated {
    Vec shift;
    ProxSpec inner;
};
//! f = factor * g with factor > 0: prox_{rho f} = prox_{rho factor g}.
struct ProxScaled {
    double factor = 1.0;
    ProxSpec inner;
};

ProxSpec translated(Vec shift, ProxSpec inner);
ProxSpec scaled(double factor, ProxSpec inner);

void validate_prox(const ProxSpec& spec, Eigen::Index dim);
//! prox_{rho f}(t) for the function described by spec.
Vec apply_prox(const ProxSpec& spec, const Vec& t, double rho);
//! Wraps the prox as a resolvent J_{rho A} with A the subdifferential (or normal cone).
ResolventOp resolvent_from_prox(ProxSpec spec, Eigen::Index dim);

// ----- Gradient specifications ---------------------------------------------

struct GradZero {
    Eigen::Index dim = 0;
};
struct GradQuadratic {
    Mat q;  //!< symmetric PSD; the gradient is 2 Q x
};
struct GradLogistic {
    LogisticData data;  //!< acts on packed (x0, x)
};
//! h(v) = scale/2 |M v - y|^2, gradient scale M^T (M v - y).
struct GradLeastSquares {
    SparseMat design;
    Vec target;
    double scale = 1.0;
};

using GradSpec = std::variant<GradZero, GradQuadratic, GradLogistic, GradLeastSquares>;

//! Cocoercivity constant: exact up to the power-iteration tolerance.
double cocoercivity_constant(const GradSpec& spec);
//! Forward operator for the gradient, declaring L unless `declare_lipschitz` is false.
ForwardOp forward_from_grad(GradSpec spec, bool declare_lipschitz = true);
Vec apply_grad(const GradSpec& spec, const Vec& x);

} // namespace projsplit
