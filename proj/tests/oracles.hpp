#pragma once

// Test-only reference computations. None of these call into the library code
// they are used to check.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <vector>

namespace oracle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline double soft(double t, double s)
{
    if (t > s) return t - s;
    if (t < -s) return t + s;
    return 0.0;
}

//! Projection onto the unit simplex by trying every support set.
/*!
 * On a support S the projection is t_S shifted by a common constant; the
 * feasible candidate closest to t is the answer. Exponential in d.
 */
inline Vec simplex_by_enumeration(const Vec& t)
{
    const int d = static_cast<int>(t.size());
    Vec best;
    double best_dist = std::numeric_limits<double>::infinity();
    for (unsigned mask = 1; mask < (1u << d); ++mask) {
        double sum = 0.0;
        int count = 0;
        for (int i = 0; i < d; ++i)
            if (mask & (1u << i)) sum += t[i], ++count;
        const double shift = (sum - 1.0) / count;
        Vec x = Vec::Zero(d);
        bool ok = true;
        for (int i = 0; i < d; ++i)
            if (mask & (1u << i)) {
                x[i] = t[i] - shift;
                if (x[i] < -1e-14) ok = false;
            }
        if (!ok) continue;
        const double dist = (x - t).squaredNorm();
        if (dist < best_dist) best_dist = dist, best = x;
    }
    return best;
}

//! Central differences of a scalar function.
inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h = 1e-5)
{
    Vec g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Vec xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        g[i] = (f(xp) - f(xm)) / (2.0 * h);
    }
    return g;
}

//! Block form sum_i <G_i z - x_i, y_i - w_i> with w_n = -sum_{i<n} G_i^T w_i.
inline double separator_block_form(const Vec& z, const std::vector<Vec>& w, const std::vector<Mat>& g,
                                   const std::vector<Vec>& x, const std::vector<Vec>& y)
{
    const std::size_t n = x.size();
    Vec wn = Vec::Zero(z.size());
    for (std::size_t i = 0; i + 1 < n; ++i) wn -= g[i].transpose() * w[i];
    double phi = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec& wi = i + 1 < n ? w[i] : wn;
        phi += (g[i] * z - x[i]).dot(y[i] - wi);
    }
    return phi;
}

inline double quadratic_form(const Vec& x, const Mat& q)
{
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i)
        for (Eigen::Index j = 0; j < x.size(); ++j) s += x[i] * q(i, j) * x[j];
    return s;
}

//! sum_i log(1 + exp(-y_i (x0 + a_i^T x))) summed one sample at a time.
inline double logistic_loss(double x0, const Vec& x, const Mat& a, const Vec& labels)
{
    double s = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        double margin = x0;
        for (Eigen::Index j = 0; j < a.cols(); ++j) margin += a(i, j) * x[j];
        const double u = -labels[i] * margin;
        s += u > 0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
    }
    return s;
}

//! Minimizer of x^T Q x over {sum x = 1, x >= 0, m^T x >= r} by enumeration.
/*!
 * For every support S and both states of the return constraint, solve the
 * equality-constrained QP on S with a dense LU and keep candidates that
 * satisfy every KKT sign condition. Returns x and the return multiplier mu.
 */
struct PortfolioSolution {
    Vec x;
    double mu = 0.0;
    double value = 0.0;
};

inline std::optional<PortfolioSolution> portfolio_by_enumeration(const Mat& q, const Vec& m, double r)
{
    const int d = static_cast<int>(q.rows());
    std::optional<PortfolioSolution> best;
    for (unsigned mask = 1; mask < (1u << d); ++mask) {
        std::vector<int> s;
        for (int i = 0; i < d; ++i)
            if (mask & (1u << i)) s.push_back(i);
        const int k = static_cast<int>(s.size());
        for (int active = 0; active < 2; ++active) {
            // Unknowns: x_S, nu (simplex), mu (return, if active).
            const int dim = k + 1 + active;
            Mat sys = Mat::Zero(dim, dim);
            Vec rhs = Vec::Zero(dim);
            for (int a = 0; a < k; ++a) {
                for (int b = 0; b < k; ++b) sys(a, b) = 2.0 * q(s[a], s[b]);
                sys(a, k) = -1.0;
                if (active) sys(a, k + 1) = -m[s[a]];
                sys(k, a) = 1.0;
                if (active) sys(k + 1, a) = m[s[a]];
            }
            rhs[k] = 1.0;
            if (active) rhs[k + 1] = r;
            Eigen::FullPivLU<Mat> lu(sys);
            if (lu.rank() < dim) continue;
            const Vec sol = lu.solve(rhs);
            Vec x = Vec::Zero(d);
            for (int a = 0; a < k; ++a) x[s[a]] = sol[a];
            const double nu = sol[k];
            const double mu = active ? sol[k + 1] : 0.0;
            const double tol = 1e-10;
            bool ok = x.minCoeff() >= -tol && mu >= -tol && m.dot(x) >= r - tol;
            // Multipliers of x_i >= 0 on the complement must be nonnegative.
            const Vec grad = 2.0 * q * x;
            for (int i = 0; i < d && ok; ++i)
                if (!(mask & (1u << i)) && grad[i] - nu - mu * m[i] < -tol) ok = false;
            if (!ok) continue;
            const double value = quadratic_form(x, q);
            if (!best || value < best->value) best = PortfolioSolution{x, std::max(mu, 0.0), value};
        }
    }
    return best;
}

//! Random matrix with N(0,1) entries.
inline Mat random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols)
{
    std::normal_distribution<double> nd;
    Mat a(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) a(i, j) = nd(rng);
    return a;
}

inline Vec random_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0)
{
    std::normal_distribution<double> nd(0.0, scale);
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = nd(rng);
    return v;
}

} // namespace oracle
