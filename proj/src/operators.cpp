#include "projsplit/operators.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

namespace projsplit {

namespace {

constexpr double kExpClamp = 30.0;

// sigma(-m) = 1 / (1 + exp(m)), m clamped to [-30, 30].
double sigmoid_neg(double m)
{
    m = std::clamp(m, -kExpClamp, kExpClamp);
    return 1.0 / (1.0 + std::exp(m));
}

// log(1 + exp(-m)) without overflow.
double log1p_exp_neg(double m)
{
    return m > 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
}

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

} // namespace

void validate_groups(const GroupList& groups, Eigen::Index dim)
{
    std::vector<char> seen(static_cast<std::size_t>(dim), 0);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].empty()) throw ConfigError("group " + std::to_string(g) + " is empty");
        for (auto idx : groups[g]) {
            if (idx < 0 || idx >= dim)
                throw ConfigError("group " + std::to_string(g) + " index out of range");
            if (seen[static_cast<std::size_t>(idx)]++)
                throw ConfigError("groups overlap at coordinate " + std::to_string(idx));
        }
    }
}

Vec prox_l1(const Vec& t, double scale)
{
    return t.unaryExpr([scale](double v) {
        const double m = std::abs(v) - scale;
        return m > 0.0 ? std::copysign(m, v) : 0.0;
    });
}

Vec prox_l1_weighted(const Vec& t, const Vec& weights, double scale)
{
    require_same_size(t, weights, "prox_l1_weighted");
    Vec out(t.size());
    for (Eigen::Index i = 0; i < t.size(); ++i) {
        const double m = std::abs(t[i]) - scale * weights[i];
        out[i] = m > 0.0 ? std::copysign(m, t[i]) : 0.0;
    }
    return out;
}

Vec prox_group_l2(const Vec& t, double scale, const GroupList& groups)
{
    Vec out = t;
    for (const auto& g : groups) {
        double nrm = 0.0;
        for (auto i : g) nrm += t[i] * t[i];
        nrm = std::sqrt(nrm);
        const double factor = nrm > scale ? 1.0 - scale / nrm : 0.0;
        for (auto i : g) out[i] = factor * t[i];
    }
    return out;
}

Vec prox_sparse_group(const Vec& t, double l1_scale, double l2_scale, const GroupList& groups)
{
    return prox_group_l2(prox_l1(t, l1_scale), l2_scale, groups);
}

Vec project_simplex(const Vec& t)
{
    if (t.size() == 0) throw DimensionError("project_simplex: empty vector");
    std::vector<double> u(t.data(), t.data() + t.size());
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumsum = 0.0;
    double theta = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        cumsum += u[k];
        const double candidate = (cumsum - 1.0) / static_cast<double>(k + 1);
        if (u[k] - candidate > 0.0) theta = candidate;
    }
    return (t.array() - theta).max(0.0).matrix();
}

Vec project_halfspace(const Vec& t, const Vec& m, double r)
{
    require_same_size(t, m, "project_halfspace");
    const double msq = m.squaredNorm();
    if (!(msq > 0.0)) throw ConfigError("project_halfspace: normal vector must be nonzero");
    const double gap = r - m.dot(t);
    if (gap <= 0.0) return t;
    return t + (gap / msq) * m;
}

Vec grad_quadratic(const Vec& x, const Mat& q)
{
    if (q.cols() != x.size()) throw DimensionError("grad_quadratic: size mismatch");
    return 2.0 * (q * x);
}

double power_iteration_lmax(const std::function<Vec(const Vec&)>& apply, Eigen::Index dim, int iters,
                            double tol)
{
    if (dim == 0) return 0.0;
    Vec v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v[i] = 1.0 + 0.01 * static_cast<double>(i % 7);
    v.normalize();
    double lambda = 0.0;
    for (int k = 0; k < iters; ++k) {
        Vec av = apply(v);
        const double next = v.dot(av);
        const double nrm = av.norm();
        if (nrm == 0.0) return 0.0;
        v = av / nrm;
        if (std::abs(next - lambda) <= tol * std::max(1.0, std::abs(next))) {
            lambda = next;
            break;
        }
        lambda = next;
    }
    return lambda;
}

double power_iteration_lmax(const Mat& q, int iters, double tol)
{
    return power_iteration_lmax([&q](const Vec& v) { return Vec(q * v); }, q.rows(), iters, tol);
}

double logistic_loss(double x0, const Vec& x, const LogisticData& data)
{
    const Vec margins = ((data.a * x).array() + x0).matrix().cwiseProduct(data.labels);
    double s = 0.0;
    for (Eigen::Index i = 0; i < margins.size(); ++i) s += log1p_exp_neg(margins[i]);
    return s;
}

std::pair<double, Vec> grad_logistic(double x0, const Vec& x, const LogisticData& data)
{
    if (data.a.cols() != x.size() || data.a.rows() != data.labels.size())
        throw DimensionError("grad_logistic: size mismatch");
    const Vec margins = ((data.a * x).array() + x0).matrix().cwiseProduct(data.labels);
    Vec coeff(margins.size());
    for (Eigen::Index i = 0; i < margins.size(); ++i) coeff[i] = -data.labels[i] * sigmoid_neg(margins[i]);
    return {coeff.sum(), data.a.transpose() * coeff};
}

double logistic_loss_packed(const Vec& v, const LogisticData& data)
{
    return logistic_loss(v[0], v.tail(v.size() - 1), data);
}

Vec grad_logistic_packed(const Vec& v, const LogisticData& data)
{
    auto [g0, g] = grad_logistic(v[0], v.tail(v.size() - 1), data);
    Vec out(v.size());
    out[0] = g0;
    out.tail(g.size()) = g;
    return out;
}

// ----- prox specs -----------------------------------------------------------

ProxSpec translated(Vec shift, ProxSpec inner)
{
    return std::make_shared<const ProxTranslated>(ProxTranslated{std::move(shift), std::move(inner)});
}

ProxSpec scaled(double factor, ProxSpec inner)
{
    return std::make_shared<const ProxScaled>(ProxScaled{factor, std::move(inner)});
}

void validate_prox(const ProxSpec& spec, Eigen::Index dim)
{
    std::visit(Overloaded{
        [](const ProxZero&) {},
        [dim](const ProxL1& s) {
            if (!(s.lambda >= 0.0)) throw ConfigError("l1 weight must be nonnegative");
            if (s.weights.size() != 0 && s.weights.size() != dim)
                throw ConfigError("l1 weights have the wrong size");
            if (s.weights.size() != 0 && (s.weights.array() < 0.0).any())
                throw ConfigError("l1 weights must be nonnegative");
        },
        [dim](const ProxGroupL2& s) {
            if (!(s.lambda >= 0.0)) throw ConfigError("group weight must be nonnegative");
            validate_groups(s.groups, dim);
        },
        [dim](const ProxSimplex&) {
            if (dim < 1) throw ConfigError("simplex needs dimension >= 1");
        },
        [dim](const ProxHalfspace& s) {
            if (s.m.size() != dim) throw ConfigError("halfspace normal has the wrong size");
            if (!(s.m.squaredNorm() > 0.0)) throw ConfigError("halfspace normal must be nonzero");
        },
        [dim](const std::shared_ptr<const ProxTranslated>& s) {
            if (s->shift.size() != dim) throw ConfigError("translation has the wrong size");
            validate_prox(s->inner, dim);
        },
        [dim](const std::shared_ptr<const ProxScaled>& s) {
            if (!(s->factor > 0.0)) throw ConfigError("scaling factor must be positive");
            validate_prox(s->inner, dim);
        },
    }, spec);
}

Vec apply_prox(const ProxSpec& spec, const Vec& t, double rho)
{
    return std::visit(Overloaded{
        [&](const ProxZero&) -> Vec { return t; },
        [&](const ProxL1& s) -> Vec {
            if (s.weights.size() == 0) return prox_l1(t, rho * s.lambda);
            return prox_l1_weighted(t, s.weights, rho * s.lambda);
        },
        [&](const ProxGroupL2& s) -> Vec { return prox_group_l2(t, rho * s.lambda, s.groups); },
        [&](const ProxSimplex&) -> Vec { return project_simplex(t); },
        [&](const ProxHalfspace& s) -> Vec { return project_halfspace(t, s.m, s.r); },
        [&](const std::shared_ptr<const ProxTranslated>& s) -> Vec {
            return s->shift + apply_prox(s->inner, t - s->shift, rho);
        },
        [&](const std::shared_ptr<const ProxScaled>& s) -> Vec {
            return apply_prox(s->inner, t, rho * s->factor);
        },
    }, spec);
}

ResolventOp resolvent_from_prox(ProxSpec spec, Eigen::Index dim)
{
    validate_prox(spec, dim);
    return ResolventOp([spec = std::move(spec), dim](const Vec& t, double rho) {
        if (t.size() != dim) throw DimensionError("resolvent: input has the wrong size");
        return apply_prox(spec, t, rho);
    });
}

// ----- gradient specs -------------------------------------------------------

Vec apply_grad(const GradSpec& spec, const Vec& x)
{
    return std::visit(Overloaded{
        [&](const GradZero& s) -> Vec {
            if (x.size() != s.dim) throw DimensionError("zero gradient: input size");
            return Vec::Zero(s.dim);
        },
        [&](const GradQuadratic& s) -> Vec { return grad_quadratic(x, s.q); },
        [&](const GradLogistic& s) -> Vec { return grad_logistic_packed(x, s.data); },
        [&](const GradLeastSquares& s) -> Vec {
            if (s.design.cols() != x.size()) throw DimensionError("least squares: input size");
            return s.scale * Vec(s.design.transpose() * (s.design * x - s.target));
        },
    }, spec);
}

namespace {

// Up to this size the constant comes from a dense symmetric eigensolve, which
// never underestimates it the way a truncated power iteration can.
constexpr Eigen::Index kExactEigenDim = 1000;

double exact_lmax(const Mat& sym)
{
    Eigen::SelfAdjointEigenSolver<Mat> es(sym, Eigen::EigenvaluesOnly);
    return std::max(0.0, es.eigenvalues().maxCoeff());
}

} // namespace

double cocoercivity_constant(const GradSpec& spec)
{
    return std::visit(Overloaded{
        [](const GradZero&) { return 0.0; },
        [](const GradQuadratic& s) {
            if (s.q.rows() <= kExactEigenDim) return 2.0 * exact_lmax(s.q);
            return 2.0 * power_iteration_lmax(s.q, 500, 1e-12);
        },
        [](const GradLogistic& s) {
            const Mat& a = s.data.a;
            if (a.cols() + 1 <= kExactEigenDim) {
                Mat packed(a.rows(), a.cols() + 1);
                packed.col(0).setOnes();
                packed.rightCols(a.cols()) = a;
                return 0.25 * exact_lmax(packed.transpose() * packed);
            }
            auto gram = [&a](const Vec& v) {
                Vec av = (a * v.tail(v.size() - 1)).array() + v[0];
                Vec out(v.size());
                out[0] = av.sum();
                out.tail(a.cols()) = a.transpose() * av;
                return out;
            };
            return 0.25 * power_iteration_lmax(gram, a.cols() + 1, 500, 1e-12);
        },
        [](const GradLeastSquares& s) {
            const SparseMat& m = s.design;
            if (m.cols() <= kExactEigenDim) {
                const Mat dm = Mat(m);
                return s.scale * exact_lmax(dm.transpose() * dm);
            }
            auto gram = [&m](const Vec& v) { return Vec(m.transpose() * (m * v)); };
            return s.scale * power_iteration_lmax(gram, m.cols(), 500, 1e-12);
        },
    }, spec);
}

ForwardOp forward_from_grad(GradSpec spec, bool declare_lipschitz)
{
    if (const auto* z = std::get_if<GradZero>(&spec)) return ForwardOp::zero(z->dim);
    std::optional<double> lip;
    if (declare_lipschitz) lip = cocoercivity_constant(spec);
    return ForwardOp([spec = std::move(spec)](const Vec& x) { return apply_grad(spec, x); }, lip);
}

} // namespace projsplit
