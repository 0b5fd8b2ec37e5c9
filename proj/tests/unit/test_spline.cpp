#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "drsim/spline.hpp"

using namespace drsim;
using namespace drsim::spline;

namespace {

std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> x;
    for (int i = 0; i < n; ++i) x.push_back(lo + (hi - lo) * i / (n - 1));
    return x;
}

// Value of the spline whose knot values are `v`, evaluated from the basis row.
double spline_value(const CubicRegressionSpline& s, const std::vector<double>& v, double x) {
    std::vector<double> row(static_cast<std::size_t>(s.dimension()));
    s.evaluate(x, row);
    double acc = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) acc += row[i] * v[i];
    return acc;
}

}  // namespace

TEST(CubicRegressionSpline, InterpolatesKnotValues) {
    const CubicRegressionSpline s({0.0, 1.0, 2.5, 4.0, 7.0});
    const std::vector<double> v{1.0, -2.0, 0.5, 3.0, 2.0};
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(spline_value(s, v, s.knots()[i]), v[i], 1e-12);
}

TEST(CubicRegressionSpline, BasisRowsSumToOne) {
    const CubicRegressionSpline s({-3.0, 0.0, 1.0, 5.0, 6.0});
    for (double x : linspace(-10.0, 12.0, 97)) {
        std::vector<double> row(5);
        s.evaluate(x, row);
        double sum = 0.0;
        for (double r : row) {
            EXPECT_TRUE(std::isfinite(r));
            sum += r;
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(CubicRegressionSpline, ReproducesLinesExactlyWithZeroPenalty) {
    const CubicRegressionSpline s({0.0, 2.0, 3.0, 7.0, 8.0});
    std::vector<double> v;
    for (double k : s.knots()) v.push_back(1.5 - 0.25 * k);
    for (double x : linspace(-5.0, 13.0, 50)) EXPECT_NEAR(spline_value(s, v, x), 1.5 - 0.25 * x, 1e-12);
    Vector vv = Eigen::Map<const Vector>(v.data(), 5);
    EXPECT_NEAR(vv.dot(s.penalty() * vv), 0.0, 1e-12);
}

TEST(CubicRegressionSpline, SecondDerivativeContinuity) {
    // Finite-difference curvature on both sides of each interior knot agrees.
    const CubicRegressionSpline s({0.0, 1.0, 2.0, 3.5, 5.0});
    const std::vector<double> v{0.0, 1.0, -1.0, 2.0, 0.5};
    const double e = 1e-4;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
        const double k = s.knots()[i];
        auto curv = [&](double x) { return (spline_value(s, v, x + e) - 2 * spline_value(s, v, x) + spline_value(s, v, x - e)) / (e * e); };
        EXPECT_NEAR(curv(k - 3 * e), curv(k + 3 * e), 1e-2);
    }
}

TEST(CubicRegressionSpline, PenaltyMatchesIntegratedCurvature) {
    const CubicRegressionSpline s({0.0, 1.0, 3.0, 4.0});
    const std::vector<double> v{0.0, 2.0, -1.0, 1.0};
    // Midpoint rule on a fine grid, curvature by central differences.
    const int n = 40000;
    const double a = 0.0, b = 4.0, step = (b - a) / n, e = 1e-3;
    double integral = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = std::clamp(a + (i + 0.5) * step, a + e, b - e);
        const double c = (spline_value(s, v, x + e) - 2 * spline_value(s, v, x) + spline_value(s, v, x - e)) / (e * e);
        integral += c * c * step;
    }
    const Vector vv = Eigen::Map<const Vector>(v.data(), 4);
    EXPECT_NEAR(vv.dot(s.penalty() * vv), integral, 1e-3 * integral);
}

TEST(CubicRegressionSpline, DegenerateKnotSets) {
    const CubicRegressionSpline one({2.0, 2.0, 2.0});
    EXPECT_EQ(one.dimension(), 1);
    const CubicRegressionSpline two({1.0, 1.0, 3.0});
    EXPECT_EQ(two.dimension(), 2);
    EXPECT_NEAR(spline_value(two, {0.0, 2.0}, 2.0), 1.0, 1e-12);
    EXPECT_THROW(CubicRegressionSpline(std::vector<double>{}), ValidationError);
}

TEST(CubicRegressionSpline, KnotsAtQuantiles) {
    std::vector<double> x;
    for (int i = 0; i <= 100; ++i) x.push_back(i);
    const std::vector<double> probs{0.1, 0.3, 0.5, 0.7, 0.9};
    const auto s = CubicRegressionSpline::at_quantiles(x, probs);
    ASSERT_EQ(s.dimension(), 5);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(s.knots()[i], 100.0 * probs[i]);
    for (std::size_t i = 1; i < 5; ++i) EXPECT_LT(s.knots()[i - 1], s.knots()[i]);
}

TEST(SmoothTerm, CenteredOverItsData) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(10.0, 5.0);
    std::vector<double> x(300);
    for (auto& v : x) v = g(rng);
    const std::vector<double> probs{0.1, 0.3, 0.5, 0.7, 0.9};
    const SmoothTerm term(CubicRegressionSpline::at_quantiles(x, probs), x);
    EXPECT_EQ(term.dimension(), 4);
    const Matrix d = term.design(x);
    EXPECT_LT(d.colwise().sum().cwiseAbs().maxCoeff(), 1e-9);
    const SmoothTerm reloaded(term.basis(), term.constraint());
    EXPECT_EQ((reloaded.design(x) - d).cwiseAbs().maxCoeff(), 0.0);
}

TEST(FitPenalized, ExactLinearSignalHasTinyResiduals) {
    const auto x = linspace(-5.0, 25.0, 200);
    const std::vector<double> probs{0.1, 0.3, 0.5, 0.7, 0.9};
    const SmoothTerm term(CubicRegressionSpline::at_quantiles(x, probs), x);
    Matrix design(200, 5);
    design.leftCols(4) = term.design(x);
    design.col(4).setOnes();
    Vector y(200);
    for (int i = 0; i < 200; ++i) y[i] = 3.0 - 0.2 * x[static_cast<std::size_t>(i)];
    const auto fit = fit_penalized(design, y, {{0, term.penalty()}});
    EXPECT_LT((design * fit.coef - y).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_FALSE(fit.ridge_fallback);
    ASSERT_EQ(fit.lambda.size(), 1u);
}

TEST(FitPenalized, NoPenaltyIsOrdinaryLeastSquares) {
    Matrix x = Matrix::Random(50, 3);
    const Vector y = Vector::Random(50);
    const auto fit = fit_penalized(x, y, {});
    const Vector ols = x.colPivHouseholderQr().solve(y);
    EXPECT_LT((fit.coef - ols).norm(), 1e-10);
    EXPECT_NEAR(fit.edf, 3.0, 1e-10);
}

TEST(FitPenalized, RankDeficientDesignUsesRidge) {
    Matrix x = Matrix::Random(30, 3);
    x.col(2) = x.col(0);
    const Vector y = Vector::Random(30);
    const auto fit = fit_penalized(x, y, {});
    EXPECT_TRUE(fit.ridge_fallback);
    EXPECT_TRUE(fit.coef.allFinite());
}

TEST(FitPenalized, DefaultGridIsTenLogSpacedValues) {
    const auto g = default_lambda_grid();
    ASSERT_EQ(g.size(), 10u);
    EXPECT_DOUBLE_EQ(g.front(), 1e-5);
    EXPECT_DOUBLE_EQ(g.back(), 1e4);
}
