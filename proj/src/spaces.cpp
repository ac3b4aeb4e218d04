#include "projsplit/spaces.hpp"

#include <cmath>
#include <string>

namespace projsplit {

bool all_finite(const Vec& v) { return v.allFinite(); }

void require_same_size(const Vec& a, const Vec& b, const char* what)
{
    if (a.size() != b.size())
        throw DimensionError(std::string(what) + ": size " + std::to_string(a.size()) +
                             " vs " + std::to_string(b.size()));
}

LinearMap LinearMap::identity(Eigen::Index dim)
{
    if (dim < 0) throw DimensionError("identity map: negative dimension");
    LinearMap g;
    g.kind_ = Kind::Identity;
    g.dim_ = dim;
    return g;
}

LinearMap LinearMap::dense(Mat m)
{
    LinearMap g;
    g.kind_ = Kind::Dense;
    g.dense_ = std::make_shared<const Mat>(std::move(m));
    return g;
}

LinearMap LinearMap::sparse(SparseMat m)
{
    m.makeCompressed();
    LinearMap g;
    g.kind_ = Kind::Sparse;
    g.sparse_ = std::make_shared<const SparseMat>(std::move(m));
    return g;
}

Eigen::Index LinearMap::domain_dim() const noexcept
{
    switch (kind_) {
    case Kind::Identity: return dim_;
    case Kind::Dense: return transposed_ ? dense_->rows() : dense_->cols();
    case Kind::Sparse: return transposed_ ? sparse_->rows() : sparse_->cols();
    }
    return 0;
}

Eigen::Index LinearMap::codomain_dim() const noexcept
{
    switch (kind_) {
    case Kind::Identity: return dim_;
    case Kind::Dense: return transposed_ ? dense_->cols() : dense_->rows();
    case Kind::Sparse: return transposed_ ? sparse_->cols() : sparse_->rows();
    }
    return 0;
}

Vec LinearMap::apply(const Vec& x) const
{
    if (x.size() != domain_dim())
        throw DimensionError("linear map: input size " + std::to_string(x.size()) +
                             ", domain " + std::to_string(domain_dim()));
    switch (kind_) {
    case Kind::Identity: return x;
    case Kind::Dense:
        return transposed_ ? Vec(dense_->transpose() * x) : Vec(*dense_ * x);
    case Kind::Sparse:
        return transposed_ ? Vec(sparse_->transpose() * x) : Vec(*sparse_ * x);
    }
    return x;
}

Vec LinearMap::apply_adjoint(const Vec& y) const { return adjoint().apply(y); }

LinearMap LinearMap::adjoint() const
{
    LinearMap g = *this;
    g.transposed_ = !transposed_;
    return g;
}

Mat LinearMap::to_dense() const
{
    switch (kind_) {
    case Kind::Identity: return Mat::Identity(dim_, dim_);
    case Kind::Dense: return transposed_ ? Mat(dense_->transpose()) : *dense_;
    case Kind::Sparse: {
        Mat m(*sparse_);
        return transposed_ ? Mat(m.transpose()) : m;
    }
    }
    return {};
}

PrimalDualPoint::PrimalDualPoint(Vec z, std::vector<Vec> w) : z_(std::move(z)), w_(std::move(w)) {}

Vec PrimalDualPoint::implied_last_dual(std::span<const LinearMap> maps) const
{
    if (maps.size() != blocks())
        throw DimensionError("implied_last_dual: expected " + std::to_string(blocks()) +
                             " maps, got " + std::to_string(maps.size()));
    Vec wn = Vec::Zero(z_.size());
    for (std::size_t i = 0; i < w_.size(); ++i) wn -= maps[i].apply_adjoint(w_[i]);
    return wn;
}

Vec PrimalDualPoint::dual_for_block(std::size_t i, std::span<const LinearMap> maps) const
{
    if (i < w_.size()) return w_[i];
    return implied_last_dual(maps);
}

PrimalDualPoint PrimalDualPoint::operator-(const PrimalDualPoint& other) const
{
    if (w_.size() != other.w_.size()) throw DimensionError("point difference: block count");
    require_same_size(z_, other.z_, "point difference");
    std::vector<Vec> dw(w_.size());
    for (std::size_t i = 0; i < w_.size(); ++i) {
        require_same_size(w_[i], other.w_[i], "point difference");
        dw[i] = w_[i] - other.w_[i];
    }
    return PrimalDualPoint(z_ - other.z_, std::move(dw));
}

bool PrimalDualPoint::all_finite() const
{
    if (!z_.allFinite()) return false;
    for (const auto& wi : w_)
        if (!wi.allFinite()) return false;
    return true;
}

GammaMetric::GammaMetric(double gamma) : gamma_(gamma)
{
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be positive and finite");
}

double gamma_inner(const PrimalDualPoint& p1, const PrimalDualPoint& p2, const GammaMetric& m)
{
    require_same_size(p1.z(), p2.z(), "gamma_inner");
    if (p1.w().size() != p2.w().size()) throw DimensionError("gamma_inner: block count");
    double s = m.gamma() * p1.z().dot(p2.z());
    for (std::size_t i = 0; i < p1.w().size(); ++i) {
        require_same_size(p1.w(i), p2.w(i), "gamma_inner");
        s += p1.w(i).dot(p2.w(i));
    }
    return s;
}

double gamma_norm_sq(const PrimalDualPoint& p, const GammaMetric& m)
{
    double s = m.gamma() * p.z().squaredNorm();
    for (const auto& wi : p.w()) s += wi.squaredNorm();
    return s;
}

} // namespace projsplit
