#include "projsplit/separator.hpp"

#include <algorithm>
#include <string>

namespace projsplit {

namespace {

void check_shapes(std::span<const BlockPair> pairs, std::span<const LinearMap> maps)
{
    if (pairs.empty()) throw DimensionError("separator: need at least one block");
    if (pairs.size() != maps.size())
        throw DimensionError("separator: " + std::to_string(pairs.size()) + " pairs but " +
                             std::to_string(maps.size()) + " maps");
    if (!maps.back().is_identity()) throw DimensionError("separator: last map must be the identity");
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        require_same_size(pairs[i].x, pairs[i].y, "separator pair");
        if (pairs[i].x.size() != maps[i].codomain_dim())
            throw DimensionError("separator: pair " + std::to_string(i) + " does not match its map");
    }
}

void check_point(const PrimalDualPoint& p, std::span<const LinearMap> maps)
{
    if (p.blocks() != maps.size()) throw DimensionError("separator: point has wrong block count");
    if (p.z().size() != maps.back().domain_dim()) throw DimensionError("separator: primal size");
    for (std::size_t i = 0; i + 1 < maps.size(); ++i)
        if (p.w(i).size() != maps[i].codomain_dim())
            throw DimensionError("separator: dual block " + std::to_string(i) + " size");
}

} // namespace

double HyperplaneData::value(const PrimalDualPoint& p) const
{
    require_same_size(p.z(), v, "hyperplane value");
    if (p.w().size() != u.size()) throw DimensionError("hyperplane value: block count");
    double s = p.z().dot(v);
    for (std::size_t i = 0; i < u.size(); ++i) s += p.w(i).dot(u[i]);
    return s - offset;
}

double eval_separator(const PrimalDualPoint& p, std::span<const BlockPair> pairs,
                      std::span<const LinearMap> maps)
{
    check_shapes(pairs, maps);
    check_point(p, maps);
    const std::size_t n = pairs.size();
    const Vec& xn = pairs[n - 1].x;
    Vec sum_gy = pairs[n - 1].y;
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        sum_gy += maps[i].apply_adjoint(pairs[i].y);
        s += (pairs[i].x - maps[i].apply(xn)).dot(p.w(i));
    }
    s += p.z().dot(sum_gy);
    for (const auto& pr : pairs) s -= pr.x.dot(pr.y);
    return s;
}

std::vector<double> separator_terms(const PrimalDualPoint& p, std::span<const BlockPair> pairs,
                                    std::span<const LinearMap> maps)
{
    check_shapes(pairs, maps);
    check_point(p, maps);
    std::vector<double> terms(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const Vec wi = p.dual_for_block(i, maps);
        terms[i] = (maps[i].apply(p.z()) - pairs[i].x).dot(pairs[i].y - wi);
    }
    return terms;
}

HyperplaneData separator_gradient(std::span<const BlockPair> pairs, std::span<const LinearMap> maps,
                                  const GammaMetric& metric)
{
    check_shapes(pairs, maps);
    const std::size_t n = pairs.size();
    HyperplaneData h;
    h.x_last = pairs[n - 1].x;
    h.v = pairs[n - 1].y;
    h.u.reserve(n - 1);
    h.y_head.reserve(n - 1);
    double usq = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        h.v += maps[i].apply_adjoint(pairs[i].y);
        h.u.push_back(pairs[i].x - maps[i].apply(h.x_last));
        usq += h.u.back().squaredNorm();
        h.y_head.push_back(pairs[i].y);
    }
    h.pi = usq + h.v.squaredNorm() / metric.gamma();
    h.offset = 0.0;
    for (const auto& pr : pairs) h.offset += pr.x.dot(pr.y);
    return h;
}

ProjectionOutcome project_to_hplane(const PrimalDualPoint& p, const HyperplaneData& h,
                                    const GammaMetric& metric, double beta, double pi_tol,
                                    std::optional<double> phi)
{
    if (!(beta > 0.0 && beta <= 2.0)) throw ConfigError("relaxation beta must lie in (0, 2]");
    if (h.pi < 0.0) throw SolverError("projection: negative pi");

    ProjectionOutcome out;
    out.pi = h.pi;
    out.phi_value = phi ? *phi : h.value(p);
    if (h.pi <= pi_tol) {
        out.terminal = true;
        out.next_point = PrimalDualPoint(h.x_last, h.y_head);
        return out;
    }
    out.tau = beta * std::max(0.0, out.phi_value) / h.pi;
    Vec z = p.z() - (out.tau / metric.gamma()) * h.v;
    std::vector<Vec> w(h.u.size());
    for (std::size_t i = 0; i < h.u.size(); ++i) w[i] = p.w(i) - out.tau * h.u[i];
    out.next_point = PrimalDualPoint(std::move(z), std::move(w));
    return out;
}

} // namespace projsplit
