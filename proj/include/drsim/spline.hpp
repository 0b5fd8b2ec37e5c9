#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "drsim/core.hpp"

/**
 * @file spline.hpp
 * @brief Cubic regression splines parameterised by their values at the knots, with the
 * integrated squared second derivative penalty, and a GCV-tuned penalised least squares solver.
 */

namespace drsim::spline {

/**
 * Natural cubic spline basis. Coefficients are the function values at the knots; second
 * derivatives at the knots follow linearly from them (zero at the end knots). Outside the
 * knot range the spline is continued linearly.
 *
 * Coincident knots are merged. With a single distinct knot the basis is the constant
 * function; with two, the linear interpolant.
 */
class CubicRegressionSpline {
public:
    CubicRegressionSpline() = default;

    explicit CubicRegressionSpline(std::vector<double> knots) : knots_(std::move(knots)) {
        if (knots_.empty()) throw ValidationError("spline needs at least one knot");
        std::sort(knots_.begin(), knots_.end());
        const double scale = std::max(1.0, std::abs(knots_.back() - knots_.front()));
        std::vector<double> uniq{knots_.front()};
        for (double k : knots_)
            if (k - uniq.back() > 1e-9 * scale) uniq.push_back(k);
        knots_ = std::move(uniq);
        build();
    }

    /// Knots at the given quantiles (linear interpolation between order statistics) of `x`.
    static CubicRegressionSpline at_quantiles(std::span<const double> x, std::span<const double> probs) {
        if (x.empty()) throw ValidationError("cannot place knots on empty data");
        std::vector<double> s(x.begin(), x.end());
        std::sort(s.begin(), s.end());
        std::vector<double> knots;
        for (double p : probs) {
            const double pos = p * static_cast<double>(s.size() - 1);
            const auto lo = static_cast<std::size_t>(std::floor(pos));
            const auto hi = std::min(lo + 1, s.size() - 1);
            knots.push_back(s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]));
        }
        return CubicRegressionSpline(std::move(knots));
    }

    static CubicRegressionSpline equally_spaced(double lo, double hi, int count) {
        std::vector<double> knots;
        for (int i = 0; i < count; ++i) knots.push_back(count > 1 ? lo + (hi - lo) * i / (count - 1) : lo);
        return CubicRegressionSpline(std::move(knots));
    }

    int dimension() const { return static_cast<int>(knots_.size()); }
    const std::vector<double>& knots() const { return knots_; }

    /// Writes the basis row at `x` into `out` (size dimension()).
    void evaluate(double x, std::span<double> out) const {
        const int k = dimension();
        std::fill(out.begin(), out.end(), 0.0);
        if (k == 1) {
            out[0] = 1.0;
            return;
        }
        auto add_f = [&](int row, double w) {
            for (int c = 0; c < k; ++c) out[static_cast<std::size_t>(c)] += w * f_plus_(row, c);
        };
        if (x < knots_.front() || x > knots_.back()) {
            // Linear continuation using the end-knot slope.
            const bool left = x < knots_.front();
            const int j = left ? 0 : k - 2;
            const double h = knots_[static_cast<std::size_t>(j + 1)] - knots_[static_cast<std::size_t>(j)];
            const double x0 = left ? knots_.front() : knots_.back();
            const double dx = x - x0;
            // f(x0) + dx * f'(x0)
            out[static_cast<std::size_t>(left ? 0 : k - 1)] += 1.0;
            out[static_cast<std::size_t>(j)] -= dx / h;
            out[static_cast<std::size_t>(j + 1)] += dx / h;
            if (left) {
                add_f(j, -dx * h / 3.0);
                add_f(j + 1, -dx * h / 6.0);
            } else {
                add_f(j, dx * h / 6.0);
                add_f(j + 1, dx * h / 3.0);
            }
            return;
        }
        const auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
        int j = static_cast<int>(it - knots_.begin()) - 1;
        j = std::clamp(j, 0, k - 2);
        const double xl = knots_[static_cast<std::size_t>(j)], xr = knots_[static_cast<std::size_t>(j + 1)];
        const double h = xr - xl;
        const double am = (xr - x) / h, ap = (x - xl) / h;
        const double cm = ((xr - x) * (xr - x) * (xr - x) / h - h * (xr - x)) / 6.0;
        const double cp = ((x - xl) * (x - xl) * (x - xl) / h - h * (x - xl)) / 6.0;
        out[static_cast<std::size_t>(j)] += am;
        out[static_cast<std::size_t>(j + 1)] += ap;
        add_f(j, cm);
        add_f(j + 1, cp);
    }

    Matrix design(std::span<const double> x) const {
        Matrix m(static_cast<Eigen::Index>(x.size()), dimension());
        std::vector<double> row(static_cast<std::size_t>(dimension()));
        for (std::size_t i = 0; i < x.size(); ++i) {
            evaluate(x[i], row);
            for (int c = 0; c < dimension(); ++c) m(static_cast<Eigen::Index>(i), c) = row[static_cast<std::size_t>(c)];
        }
        return m;
    }

    /// Integrated squared second derivative as a quadratic form in the coefficients.
    const Matrix& penalty() const { return penalty_; }

private:
    void build() {
        const int k = dimension();
        f_plus_ = Matrix::Zero(k, k);
        penalty_ = Matrix::Zero(k, k);
        if (k < 3) return;
        const int m = k - 2;
        Matrix d = Matrix::Zero(m, k), b = Matrix::Zero(m, m);
        for (int i = 0; i < m; ++i) {
            const double h0 = knots_[static_cast<std::size_t>(i + 1)] - knots_[static_cast<std::size_t>(i)];
            const double h1 = knots_[static_cast<std::size_t>(i + 2)] - knots_[static_cast<std::size_t>(i + 1)];
            d(i, i) = 1.0 / h0;
            d(i, i + 1) = -1.0 / h0 - 1.0 / h1;
            d(i, i + 2) = 1.0 / h1;
            b(i, i) = (h0 + h1) / 3.0;
            if (i + 1 < m) b(i, i + 1) = b(i + 1, i) = h1 / 6.0;
        }
        const Eigen::LLT<Matrix> llt(b);
        const Matrix f = llt.solve(d);
        f_plus_.middleRows(1, m) = f;
        penalty_ = d.transpose() * f;
        penalty_ = 0.5 * (penalty_ + penalty_.transpose()).eval();
    }

    std::vector<double> knots_;
    Matrix f_plus_;   // second derivatives at the knots from knot values
    Matrix penalty_;
};

/**
 * A spline term constrained to sum to zero over the data it was set up on, so that it is
 * identifiable next to an intercept or a full set of indicator columns. The constraint is
 * absorbed by a Householder reparameterisation, dropping one basis dimension.
 */
class SmoothTerm {
public:
    SmoothTerm() = default;

    SmoothTerm(CubicRegressionSpline basis, std::span<const double> x) : basis_(std::move(basis)) {
        const Matrix raw = basis_.design(x);
        constraint_ = raw.colwise().mean().transpose();
        build();
    }

    /// Rebuilds a term from a saved basis and its column-mean constraint.
    SmoothTerm(CubicRegressionSpline basis, Vector constraint) : basis_(std::move(basis)), constraint_(std::move(constraint)) {
        if (constraint_.size() != basis_.dimension()) throw ValidationError("spline constraint has wrong length");
        build();
    }

    int dimension() const { return static_cast<int>(null_space_.cols()); }

    Matrix design(std::span<const double> x) const { return basis_.design(x) * null_space_; }

    /// Term value at `x` for the reduced coefficients `coef`.
    double value(double x, const Vector& coef) const {
        if (dimension() == 0) return 0.0;
        std::vector<double> row(static_cast<std::size_t>(basis_.dimension()));
        basis_.evaluate(x, row);
        const Eigen::Map<const Eigen::RowVectorXd> r(row.data(), static_cast<Eigen::Index>(row.size()));
        return (r * null_space_ * coef)(0);
    }

    Matrix penalty() const { return null_space_.transpose() * basis_.penalty() * null_space_; }

    const CubicRegressionSpline& basis() const { return basis_; }
    const Vector& constraint() const { return constraint_; }

private:
    void build() {
        const int k = basis_.dimension();
        if (k <= 1) {
            null_space_ = Matrix::Zero(k, 0);
            return;
        }
        const Matrix c = constraint_;
        Eigen::HouseholderQR<Matrix> qr(c);
        const Matrix q = qr.householderQ() * Matrix::Identity(k, k);
        null_space_ = q.rightCols(k - 1);
    }

    CubicRegressionSpline basis_;
    Vector constraint_;
    Matrix null_space_;
};

/// Penalty matrix acting on columns [offset, offset + S.rows()) of a design.
struct PenaltyBlock {
    Eigen::Index offset = 0;
    Matrix matrix;
};

struct PenalizedFit {
    Vector coef;
    std::vector<double> lambda;  ///< selected smoothing parameter per penalty block
    double gcv = 0.0;
    double edf = 0.0;
    double rss = 0.0;
    bool ridge_fallback = false;
    Matrix normal_inverse;  ///< (X'X + sum lambda_j S_j)^-1 at the selected smoothing parameters
};

inline constexpr double kRidgeFallback = 1e-6;

/// Ten log-spaced smoothing parameters 1e-5 .. 1e4 (penalties are pre-scaled to the design).
inline std::vector<double> default_lambda_grid() {
    std::vector<double> g;
    for (int e = -5; e <= 4; ++e) g.push_back(std::pow(10.0, e));
    return g;
}

/**
 * Minimises ||y - X b||^2 + sum_j lambda_j b' S_j b, choosing every lambda_j on `grid`
 * (exhaustive over the product grid) by generalised cross-validation
 * n RSS / (n - edf)^2. Each S_j is first rescaled to the Frobenius norm of the matching
 * block of X'X so that the grid is scale free. A rank-deficient X gets a 1e-6 ridge.
 */
inline PenalizedFit fit_penalized(const Matrix& x, const Vector& y, const std::vector<PenaltyBlock>& penalties,
                                  const std::vector<double>& grid = default_lambda_grid()) {
    const Eigen::Index n = x.rows(), p = x.cols();
    if (y.size() != n) throw ValidationError("design and response lengths differ");
    PenalizedFit best;
    const Matrix xtx = x.transpose() * x;
    const Vector xty = x.transpose() * y;

    Eigen::ColPivHouseholderQR<Matrix> qr(x);
    qr.setThreshold(1e-10);
    const bool deficient = qr.rank() < p;
    Matrix base = xtx;
    if (deficient) base += kRidgeFallback * Matrix::Identity(p, p);

    std::vector<Matrix> scaled;
    for (const auto& blk : penalties) {
        const Eigen::Index m = blk.matrix.rows();
        const double sn = blk.matrix.norm();
        const double xn = xtx.block(blk.offset, blk.offset, m, m).norm();
        Matrix s = Matrix::Zero(p, p);
        if (sn > 0) s.block(blk.offset, blk.offset, m, m) = blk.matrix * (xn / sn);
        scaled.push_back(std::move(s));
    }

    const std::size_t nb = scaled.size();
    std::vector<std::size_t> pick(nb, 0), best_pick(nb, 0);
    best.gcv = std::numeric_limits<double>::infinity();
    while (true) {
        Matrix a = base;
        for (std::size_t j = 0; j < nb; ++j) a += grid[pick[j]] * scaled[j];
        const Eigen::LDLT<Matrix> ldlt(a);
        const Vector coef = ldlt.solve(xty);
        const double rss = (y - x * coef).squaredNorm();
        const double edf = ldlt.solve(xtx).trace();
        const double denom = static_cast<double>(n) - edf;
        const double gcv = denom > 0 ? static_cast<double>(n) * rss / (denom * denom) : std::numeric_limits<double>::infinity();
        if (coef.allFinite() && (gcv < best.gcv || best.coef.size() == 0)) {
            best.coef = coef;
            best.gcv = gcv;
            best.edf = edf;
            best.rss = rss;
            best_pick = pick;
        }
        std::size_t j = 0;
        while (j < nb && ++pick[j] == grid.size()) pick[j++] = 0;
        if (j == nb) break;
    }
    if (best.coef.size() != p) throw NumericalError("penalised least squares failed to produce finite coefficients");
    best.ridge_fallback = deficient;
    Matrix a = base;
    for (std::size_t j = 0; j < nb; ++j) {
        a += grid[best_pick[j]] * scaled[j];
        best.lambda.push_back(grid[best_pick[j]]);
    }
    best.normal_inverse = a.ldlt().solve(Matrix::Identity(p, p));
    return best;
}

}  // namespace drsim::spline
