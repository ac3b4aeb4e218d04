#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <memory>
#include <span>
#include <vector>

#include "projsplit/error.hpp"

namespace projsplit {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SparseMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

bool all_finite(const Vec& v);

//! Bounded linear map between coordinate spaces.
/*!
 * Three storage kinds: identity (never materialized), dense, and
 * compressed-row sparse. Storage is shared and immutable; adjoint() flips a
 * transpose flag, so adjoint().adjoint() has the same representation as the
 * original and applies bit-identically.
 */
class LinearMap {
public:
    enum class Kind { Identity, Dense, Sparse };

    static LinearMap identity(Eigen::Index dim);
    static LinearMap dense(Mat m);
    static LinearMap sparse(SparseMat m);

    Kind kind() const noexcept { return kind_; }
    bool is_identity() const noexcept { return kind_ == Kind::Identity; }
    Eigen::Index domain_dim() const noexcept;
    Eigen::Index codomain_dim() const noexcept;

    Vec apply(const Vec& x) const;
    Vec apply_adjoint(const Vec& y) const;
    LinearMap adjoint() const;

    //! Dense copy of the operator, for tests and small problems.
    Mat to_dense() const;

private:
    LinearMap() = default;

    Kind kind_ = Kind::Identity;
    Eigen::Index dim_ = 0;
    bool transposed_ = false;
    std::shared_ptr<const Mat> dense_;
    std::shared_ptr<const SparseMat> sparse_;
};

inline Vec apply(const LinearMap& g, const Vec& x) { return g.apply(x); }
inline Vec apply_adjoint(const LinearMap& g, const Vec& y) { return g.apply_adjoint(y); }

//! Product-space point p = (z, w_1, ..., w_{n-1}).
/*!
 * The last dual block w_n is never stored; it is recomputed from the maps as
 * -sum_i G_i^* w_i whenever it is asked for. With n = 1 the dual list is empty.
 */
class PrimalDualPoint {
public:
    PrimalDualPoint() = default;
    PrimalDualPoint(Vec z, std::vector<Vec> w);

    const Vec& z() const noexcept { return z_; }
    Vec& z() noexcept { return z_; }
    const std::vector<Vec>& w() const noexcept { return w_; }
    std::vector<Vec>& w() noexcept { return w_; }
    const Vec& w(std::size_t i) const { return w_.at(i); }

    //! Number of operator blocks n (dual blocks + 1).
    std::size_t blocks() const noexcept { return w_.size() + 1; }

    //! w_n = -sum_i G_i^* w_i; maps must hold n entries (the last is unused).
    Vec implied_last_dual(std::span<const LinearMap> maps) const;

    //! Dual variable seen by block i in [0, n): w_i, or w_n for the last block.
    Vec dual_for_block(std::size_t i, std::span<const LinearMap> maps) const;

    PrimalDualPoint operator-(const PrimalDualPoint& other) const;
    bool all_finite() const;

private:
    Vec z_;
    std::vector<Vec> w_;
};

//! Weight gamma > 0 of the primal part in gamma*|z|^2 + sum |w_i|^2.
class GammaMetric {
public:
    explicit GammaMetric(double gamma = 1.0);
    double gamma() const noexcept { return gamma_; }

private:
    double gamma_;
};

double gamma_inner(const PrimalDualPoint& p1, const PrimalDualPoint& p2, const GammaMetric& m);
double gamma_norm_sq(const PrimalDualPoint& p, const GammaMetric& m);

void require_same_size(const Vec& a, const Vec& b, const char* what);

} // namespace projsplit
