#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "drsim/causality.hpp"
#include "drsim/core.hpp"
#include "drsim/csv.hpp"
#include "drsim/dataio.hpp"
#include "drsim/spline.hpp"

/**
 * @file gamgen.hpp
 * @brief Semi-parametric profile generator: one additive mean model per half-hour,
 * per-tariff noise scales and a correlated Gaussian residual across the day.
 */

namespace drsim::gamgen {

/// Exogenous variables of one day as seen by the mean models.
struct DayConditions {
    Vector temperature;       ///< H half-hourly temperatures
    double smoothed = 0.0;    ///< daily mean of the smoothed temperature
    int working_day = 0;
    double position = 0.0;    ///< position in the year, 0..1
};

inline DayConditions day_conditions(const dataio::DayFeatures& f, int t) {
    if (t < 0 || t >= f.days()) throw std::out_of_range("day index " + std::to_string(t) + " outside the day range");
    return {f.temperature.row(t).transpose(), f.smoothed.daily[t], f.calendar.working_day[static_cast<std::size_t>(t)], f.calendar.position_in_year[t]};
}

struct GamSettings {
    std::vector<double> knot_quantiles{0.1, 0.3, 0.5, 0.7, 0.9};
    int position_knots = 5;
    std::vector<double> lambda_grid = spline::default_lambda_grid();
};

/**
 * Mean model of one half-hour:
 * intercept + s1(temperature) + s2(smoothed) + s3(position) + a w + b_low 1{Low} + b_high 1{High},
 * Normal being the reference tariff.
 */
class HalfHourGam {
public:
    static constexpr int kLinearTerms = 3;  // working day, Low, High

    HalfHourGam() = default;

    HalfHourGam(spline::SmoothTerm temperature, spline::SmoothTerm smoothed, spline::SmoothTerm position, Vector coef, bool ridge = false)
        : terms_{std::move(temperature), std::move(smoothed), std::move(position)}, coef_(std::move(coef)), ridge_fallback_(ridge) {
        if (coef_.size() != width()) throw ValidationError("half-hour model coefficient count does not match its terms");
    }

    /// Fits on paired observations; the four feature columns follow the DayConditions order.
    static HalfHourGam fit(std::span<const double> y, std::span<const double> temperature, std::span<const double> smoothed,
                           std::span<const int> working_day, std::span<const double> position, std::span<const Tariff> tariffs,
                           const GamSettings& settings = {}) {
        const std::size_t n = y.size();
        if (temperature.size() != n || smoothed.size() != n || working_day.size() != n || position.size() != n || tariffs.size() != n)
            throw ValidationError("half-hour model: input lengths differ");
        const std::size_t needed = 3 * settings.knot_quantiles.size() + 3;
        if (n < needed) throw ValidationError("half-hour model needs at least " + std::to_string(needed) + " observations, got " + std::to_string(n));
        HalfHourGam g;
        g.terms_[0] = spline::SmoothTerm(spline::CubicRegressionSpline::at_quantiles(temperature, settings.knot_quantiles), temperature);
        g.terms_[1] = spline::SmoothTerm(spline::CubicRegressionSpline::at_quantiles(smoothed, settings.knot_quantiles), smoothed);
        g.terms_[2] = spline::SmoothTerm(spline::CubicRegressionSpline::equally_spaced(0.0, 1.0, settings.position_knots), position);

        Matrix x = Matrix::Zero(static_cast<Eigen::Index>(n), g.width());
        x.col(0).setOnes();
        std::vector<spline::PenaltyBlock> pen;
        Eigen::Index col = 1;
        const std::span<const double> inputs[3] = {temperature, smoothed, position};
        for (int k = 0; k < 3; ++k) {
            const auto& term = g.terms_[static_cast<std::size_t>(k)];
            if (term.dimension() > 0) {
                x.middleCols(col, term.dimension()) = term.design(inputs[k]);
                pen.push_back({col, term.penalty()});
            }
            col += term.dimension();
        }
        for (std::size_t i = 0; i < n; ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            x(r, col) = working_day[i];
            x(r, col + 1) = tariffs[i] == Tariff::Low ? 1.0 : 0.0;
            x(r, col + 2) = tariffs[i] == Tariff::High ? 1.0 : 0.0;
        }
        const auto fit = spline::fit_penalized(x, Eigen::Map<const Vector>(y.data(), static_cast<Eigen::Index>(n)), pen, settings.lambda_grid);
        g.coef_ = fit.coef;
        g.ridge_fallback_ = fit.ridge_fallback;
        const double resid_var = fit.rss / std::max(1.0, static_cast<double>(n) - fit.edf);
        const Matrix cov = resid_var * fit.normal_inverse * (x.transpose() * x) * fit.normal_inverse;
        g.standard_errors_ = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
        return g;
    }

    Eigen::Index width() const {
        Eigen::Index w = 1 + kLinearTerms;
        for (const auto& t : terms_) w += t.dimension();
        return w;
    }

    double predict(double temperature, double smoothed, int working_day, double position, Tariff tariff) const {
        Eigen::Index col = 1;
        double v = coef_[0];
        const double inputs[3] = {temperature, smoothed, position};
        for (int k = 0; k < 3; ++k) {
            const auto& term = terms_[static_cast<std::size_t>(k)];
            v += term.value(inputs[k], coef_.segment(col, term.dimension()));
            col += term.dimension();
        }
        v += coef_[col] * working_day + tariff_effect(tariff);
        return v;
    }

    /// Additive tariff offset relative to Normal (0 for Normal and Flat).
    double tariff_effect(Tariff p) const {
        const Eigen::Index col = width() - 2;
        if (p == Tariff::Low) return coef_[col];
        if (p == Tariff::High) return coef_[col + 1];
        return 0.0;
    }

    double working_day_effect() const { return coef_[width() - 3]; }
    double working_day_se() const { return standard_errors_.size() ? standard_errors_[width() - 3] : 0.0; }

    const std::array<spline::SmoothTerm, 3>& terms() const { return terms_; }
    const Vector& coefficients() const { return coef_; }
    bool ridge_fallback() const { return ridge_fallback_; }

    /// Names matching coefficients(): intercept, spline coordinates, linear terms.
    std::vector<std::string> coefficient_names() const {
        std::vector<std::string> names{"intercept"};
        const char* prefix[3] = {"s_temperature_", "s_smoothed_", "s_position_"};
        for (int k = 0; k < 3; ++k)
            for (int j = 0; j < terms_[static_cast<std::size_t>(k)].dimension(); ++j) names.push_back(prefix[k] + std::to_string(j + 1));
        names.insert(names.end(), {"working_day", "low", "high"});
        return names;
    }

private:
    std::array<spline::SmoothTerm, 3> terms_;
    Vector coef_;
    Vector standard_errors_;
    bool ridge_fallback_ = false;
};

// ---------------------------------------------------------------------------
// Residual correlation

inline constexpr double kEigenvalueFloor = 1e-8;

struct ResidualCorrelation {
    Matrix sigma;     ///< H x H, unit diagonal
    Matrix cholesky;  ///< lower triangular, L L' = sigma
    bool repaired = false;
    double smallest_eigenvalue = 0.0;  ///< before repair
};

/// Correlation repaired to positive definiteness (eigenvalues clipped at 1e-8, unit diagonal restored).
inline ResidualCorrelation repair_correlation(Matrix sigma) {
    ResidualCorrelation rc;
    sigma = 0.5 * (sigma + sigma.transpose()).eval();
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma);
    rc.smallest_eigenvalue = eig.eigenvalues().minCoeff();
    if (rc.smallest_eigenvalue < kEigenvalueFloor) {
        rc.repaired = true;
        const Vector clipped = eig.eigenvalues().cwiseMax(kEigenvalueFloor);
        sigma = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
        const Vector d = sigma.diagonal().cwiseSqrt().cwiseInverse();
        sigma = d.asDiagonal() * sigma * d.asDiagonal();
        sigma = 0.5 * (sigma + sigma.transpose()).eval();
    }
    sigma.diagonal().setOnes();
    const Eigen::LLT<Matrix> llt(sigma);
    if (llt.info() != Eigen::Success) throw NumericalError("correlation matrix is not positive definite after repair");
    rc.cholesky = llt.matrixL();
    rc.sigma = std::move(sigma);
    return rc;
}

/**
 * Empirical correlation of residual vectors (rows of `residuals`, T0 x H). A constant
 * channel has no defined correlation and is reported by its 1-based half-hour.
 */
inline ResidualCorrelation estimate_correlation(const Matrix& residuals) {
    const Eigen::Index n = residuals.rows();
    if (n < 2) throw ValidationError("correlation needs at least 2 residual vectors");
    const Matrix centered = residuals.rowwise() - residuals.colwise().mean();
    const Matrix cov = centered.transpose() * centered / static_cast<double>(n - 1);
    for (Eigen::Index h = 0; h < cov.rows(); ++h)
        if (!(cov(h, h) > 0.0) || residuals.col(h).maxCoeff() == residuals.col(h).minCoeff()) throw NumericalError("residual channel " + std::to_string(h + 1) + " is constant; correlation undefined");
    const Vector inv_sd = cov.diagonal().cwiseSqrt().cwiseInverse();
    return repair_correlation(inv_sd.asDiagonal() * cov * inv_sd.asDiagonal());
}

// ---------------------------------------------------------------------------
// Generator

/// Noise standard deviation per half-hour and tariff, indexed [tariff_index][h].
using NoiseScale = std::array<Vector, kTariffCount>;

class GamGenerator {
public:
    GamGenerator() = default;

    GamGenerator(std::vector<HalfHourGam> models, NoiseScale noise, ResidualCorrelation correlation)
        : models_(std::move(models)), noise_(std::move(noise)), correlation_(std::move(correlation)) {
        const auto h = static_cast<Eigen::Index>(models_.size());
        for (const auto& v : noise_)
            if (v.size() != h) throw ValidationError("noise scale length differs from the number of half-hour models");
        if (correlation_.sigma.rows() != h) throw ValidationError("correlation size differs from the number of half-hour models");
    }

    int half_hours() const { return static_cast<int>(models_.size()); }
    const std::vector<HalfHourGam>& models() const { return models_; }
    const NoiseScale& noise() const { return noise_; }
    const ResidualCorrelation& correlation() const { return correlation_; }

    double noise_scale(int h, Tariff p) const { return noise_[static_cast<std::size_t>(tariff_index(p))][h]; }

    /// Mean profile f(x, p) for one day, before any clamping.
    Vector mean(const DayConditions& day, std::span<const Tariff> tariffs) const {
        check(day, tariffs);
        Vector m(half_hours());
        for (int h = 0; h < half_hours(); ++h)
            m[h] = models_[static_cast<std::size_t>(h)].predict(day.temperature[h], day.smoothed, day.working_day, day.position,
                                                                tariffs[static_cast<std::size_t>(h)]);
        return m;
    }

    /**
     * N x H samples f + sigma(p) * (L eps). The same seed reuses the same eps across calls,
     * so scenarios differing only in tariffs are directly comparable. Negative values are
     * set to zero unless `clamp` is false.
     */
    Matrix sample(const DayConditions& day, std::span<const Tariff> tariffs, int count, std::uint64_t seed, bool clamp = true) const {
        const Vector f = mean(day, tariffs);
        Vector scale(half_hours());
        for (int h = 0; h < half_hours(); ++h) scale[h] = noise_scale(h, tariffs[static_cast<std::size_t>(h)]);
        Rng rng(seed);
        Matrix eps(half_hours(), count);
        fill_standard_normal(rng, eps);
        Matrix out = ((correlation_.cholesky * eps).array().colwise() * scale.array()).colwise() + f.array();
        if (clamp) out = out.cwiseMax(0.0);
        return out.transpose();
    }

    void save(std::ostream& out) const;
    static GamGenerator load(std::istream& in);

    /// `h,term,coef` rows, 1-based h.
    void write_coefficients(std::ostream& out) const {
        out << "h,term,coef\n";
        for (int h = 0; h < half_hours(); ++h) {
            const auto& m = models_[static_cast<std::size_t>(h)];
            const auto names = m.coefficient_names();
            for (std::size_t j = 0; j < names.size(); ++j) out << h + 1 << ',' << names[j] << ',' << csv::num(m.coefficients()[static_cast<Eigen::Index>(j)]) << '\n';
            out << h + 1 << ",normal,0\n";
        }
    }

private:
    void check(const DayConditions& day, std::span<const Tariff> tariffs) const {
        if (day.temperature.size() != half_hours() || static_cast<int>(tariffs.size()) != half_hours())
            throw ValidationError("day conditions and tariffs must cover " + std::to_string(half_hours()) + " half-hours");
    }

    std::vector<HalfHourGam> models_;
    NoiseScale noise_;
    ResidualCorrelation correlation_;
};

/// Standardised residuals (y - f) / sigma(p) of the given days, one row per day.
inline Matrix standardized_residuals(const GamGenerator& gen, const Matrix& consumption, const std::vector<dataio::TariffProfile>& tariffs,
                                     const dataio::DayFeatures& features, std::span<const int> days) {
    Matrix e(static_cast<Eigen::Index>(days.size()), gen.half_hours());
    for (std::size_t i = 0; i < days.size(); ++i) {
        const int t = days[i];
        const auto& p = tariffs[static_cast<std::size_t>(t)];
        const Vector f = gen.mean(day_conditions(features, t), p);
        for (int h = 0; h < gen.half_hours(); ++h)
            e(static_cast<Eigen::Index>(i), h) = (consumption(t, h) - f[h]) / gen.noise_scale(h, p[static_cast<std::size_t>(h)]);
    }
    return e;
}

/**
 * Fits the generator of one cluster on its training days: the mean models, the noise
 * scales of the cluster-level location-scale model, and the residual correlation.
 */
inline GamGenerator fit_generator(const Matrix& consumption, const std::vector<dataio::TariffProfile>& tariffs, const dataio::DayFeatures& features,
                                  std::span<const int> days, const GamSettings& settings = {}) {
    if (consumption.cols() != kHalfHours) throw ValidationError("consumption must have one column per half-hour");
    const std::size_t n = days.size();
    std::vector<double> y(n), tau(n), smooth(n), pos(n);
    std::vector<int> work(n);
    std::vector<Tariff> p(n);
    std::vector<HalfHourGam> models;
    for (int h = 0; h < kHalfHours; ++h) {
        for (std::size_t i = 0; i < n; ++i) {
            const int t = days[i];
            y[i] = consumption(t, h);
            tau[i] = features.temperature(t, h);
            smooth[i] = features.smoothed.daily[t];
            work[i] = features.calendar.working_day[static_cast<std::size_t>(t)];
            pos[i] = features.calendar.position_in_year[t];
            p[i] = tariffs[static_cast<std::size_t>(t)][static_cast<std::size_t>(h)];
        }
        models.push_back(HalfHourGam::fit(y, tau, smooth, work, pos, p, settings));
    }
    const causality::SplineSettings cs{settings.knot_quantiles, settings.lambda_grid};
    const auto scale_models = causality::fit_entity(consumption, tariffs, features.temperature, days, cs);
    NoiseScale noise;
    for (Tariff q : kTouTariffs) {
        Vector s(kHalfHours);
        for (int h = 0; h < kHalfHours; ++h) s[h] = scale_models[static_cast<std::size_t>(h)].scale(q);
        noise[static_cast<std::size_t>(tariff_index(q))] = s;
    }
    GamGenerator partial(models, noise, repair_correlation(Matrix::Identity(kHalfHours, kHalfHours)));
    const Matrix e = standardized_residuals(partial, consumption, tariffs, features, days);
    return GamGenerator(std::move(models), std::move(noise), estimate_correlation(e));
}

// ---------------------------------------------------------------------------
// Model file

namespace detail {

inline std::string hex(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

inline double read_number(std::istream& in) {
    std::string tok;
    if (!(in >> tok)) throw ParseError("generator file truncated");
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) throw ParseError("bad number '" + tok + "' in generator file");
    return v;
}

inline void expect(std::istream& in, std::string_view word) {
    std::string tok;
    if (!(in >> tok) || tok != word) throw ParseError("generator file: expected '" + std::string(word) + "', got '" + tok + "'");
}

inline void write_vector(std::ostream& out, const Vector& v) {
    out << v.size();
    for (double x : v) out << ' ' << hex(x);
    out << '\n';
}

inline Vector read_vector(std::istream& in) {
    Vector v(static_cast<Eigen::Index>(read_number(in)));
    for (auto& x : v) x = read_number(in);
    return v;
}

}  // namespace detail

inline void GamGenerator::save(std::ostream& out) const {
    out << "drsim-gam 1\nhalf_hours " << half_hours() << '\n';
    for (const auto& m : models_) {
        out << "model\n";
        for (const auto& term : m.terms()) {
            const auto& knots = term.basis().knots();
            detail::write_vector(out, Eigen::Map<const Vector>(knots.data(), static_cast<Eigen::Index>(knots.size())));
            detail::write_vector(out, term.constraint());
        }
        detail::write_vector(out, m.coefficients());
        out << "ridge " << (m.ridge_fallback() ? 1 : 0) << '\n';
    }
    out << "noise\n";
    for (const auto& v : noise_) detail::write_vector(out, v);
    out << "correlation\n";
    for (Eigen::Index i = 0; i < correlation_.sigma.rows(); ++i) detail::write_vector(out, correlation_.sigma.row(i).transpose());
}

inline GamGenerator GamGenerator::load(std::istream& in) {
    detail::expect(in, "drsim-gam");
    if (detail::read_number(in) != 1.0) throw ParseError("unsupported generator version");
    detail::expect(in, "half_hours");
    const int nh = static_cast<int>(detail::read_number(in));
    std::vector<HalfHourGam> models;
    for (int h = 0; h < nh; ++h) {
        detail::expect(in, "model");
        std::array<spline::SmoothTerm, 3> terms;
        for (auto& term : terms) {
            const Vector knots = detail::read_vector(in);
            Vector constraint = detail::read_vector(in);
            term = spline::SmoothTerm(spline::CubicRegressionSpline(std::vector<double>(knots.begin(), knots.end())), std::move(constraint));
        }
        Vector coef = detail::read_vector(in);
        detail::expect(in, "ridge");
        const bool ridge = detail::read_number(in) != 0.0;
        models.emplace_back(terms[0], terms[1], terms[2], std::move(coef), ridge);
    }
    detail::expect(in, "noise");
    NoiseScale noise;
    for (auto& v : noise) v = detail::read_vector(in);
    detail::expect(in, "correlation");
    Matrix sigma(nh, nh);
    for (int i = 0; i < nh; ++i) sigma.row(i) = detail::read_vector(in).transpose();
    return GamGenerator(std::move(models), std::move(noise), repair_correlation(std::move(sigma)));
}

}  // namespace drsim::gamgen
