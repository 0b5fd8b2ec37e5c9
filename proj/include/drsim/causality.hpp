#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "drsim/core.hpp"
#include "drsim/csv.hpp"
#include "drsim/dataio.hpp"
#include "drsim/spline.hpp"

/**
 * @file causality.hpp
 * @brief Per-half-hour Gaussian location-scale model of consumption against temperature and
 * tariff, and the counterfactual per-tariff mean/std daily profiles derived from it.
 */

namespace drsim::causality {

/// Lower bound on every estimated standard deviation (kWh).
inline constexpr double kScaleFloor = 1e-6;

struct SplineSettings {
    std::vector<double> knot_quantiles{0.1, 0.3, 0.5, 0.7, 0.9};
    std::vector<double> lambda_grid = spline::default_lambda_grid();
};

/**
 * Mean: centred temperature spline plus one offset per tariff (no global intercept).
 * Scale: one constant per tariff, estimated from the mean-model residuals as
 * mean |r| * sqrt(pi / 2). Tariffs never observed are unavailable; queries for them fall
 * back to the Normal tariff (or, failing that, the first available tariff).
 */
class LocationScaleModel {
public:
    static LocationScaleModel fit(std::span<const double> y, std::span<const double> temperature, std::span<const Tariff> tariffs,
                                  const SplineSettings& settings = {}) {
        const auto n = static_cast<Eigen::Index>(y.size());
        if (temperature.size() != y.size() || tariffs.size() != y.size())
            throw ValidationError("location-scale fit: input lengths differ");
        LocationScaleModel m;
        m.term_ = spline::SmoothTerm(spline::CubicRegressionSpline::at_quantiles(temperature, settings.knot_quantiles), temperature);
        const int ks = m.term_.dimension();

        std::array<int, kTariffCount> count{};
        for (Tariff p : tariffs) ++count[static_cast<std::size_t>(tariff_index(p))];
        std::array<int, kTariffCount> column{-1, -1, -1};
        int nt = 0;
        for (int p = 0; p < kTariffCount; ++p)
            if (count[static_cast<std::size_t>(p)] > 0) column[static_cast<std::size_t>(p)] = ks + nt++;
        if (n < ks + 1 + kTariffCount)
            throw ValidationError("location-scale fit needs at least " + std::to_string(ks + 1 + kTariffCount) + " observations, got " +
                                  std::to_string(n));

        Matrix x = Matrix::Zero(n, ks + nt);
        if (ks > 0) x.leftCols(ks) = m.term_.design(temperature);
        for (Eigen::Index i = 0; i < n; ++i) x(i, column[static_cast<std::size_t>(tariff_index(tariffs[static_cast<std::size_t>(i)]))]) = 1.0;
        const Eigen::Map<const Vector> yv(y.data(), n);

        std::vector<spline::PenaltyBlock> pen;
        if (ks > 0) pen.push_back({0, m.term_.penalty()});
        const auto fit = spline::fit_penalized(x, yv, pen, settings.lambda_grid);
        m.spline_coef_ = fit.coef.head(ks);
        m.lambda_ = fit.lambda.empty() ? 0.0 : fit.lambda.front();
        m.ridge_fallback_ = fit.ridge_fallback;

        // Coefficient covariance sigma^2 A^-1 X'X A^-1, A the penalised normal matrix.
        const double resid_var = fit.rss / std::max(1.0, static_cast<double>(n) - fit.edf);
        const Matrix cov = resid_var * fit.normal_inverse * (x.transpose() * x) * fit.normal_inverse;

        const Vector resid = yv - x * fit.coef;
        std::array<double, kTariffCount> abs_sum{};
        for (Eigen::Index i = 0; i < n; ++i) abs_sum[static_cast<std::size_t>(tariff_index(tariffs[static_cast<std::size_t>(i)]))] += std::abs(resid[i]);
        for (int p = 0; p < kTariffCount; ++p) {
            const auto up = static_cast<std::size_t>(p);
            m.available_[up] = column[up] >= 0;
            if (!m.available_[up]) continue;
            m.offset_[up] = fit.coef[column[up]];
            m.scale_[up] = std::max(kScaleFloor, abs_sum[up] / count[up] * std::sqrt(std::numbers::pi / 2.0));
            for (int q = 0; q < kTariffCount; ++q)
                if (column[static_cast<std::size_t>(q)] >= 0) m.offset_cov_(p, q) = cov(column[up], column[static_cast<std::size_t>(q)]);
        }
        if (!m.available_[1] && !m.available_[0] && !m.available_[2]) throw ValidationError("location-scale fit without any tariff");
        return m;
    }

    bool available(Tariff p) const { return available_[static_cast<std::size_t>(tariff_index(p))]; }

    /// Tariff offset xi_p, with the unavailable-tariff substitution applied.
    double tariff_offset(Tariff p) const { return offset_[resolve(p)]; }

    /// Per-tariff standard deviation gamma_p (>= floor), with substitution.
    double scale(Tariff p) const { return scale_[resolve(p)]; }

    double temperature_effect(double temperature) const { return term_.value(temperature, spline_coef_); }

    double mean(double temperature, Tariff p) const { return temperature_effect(temperature) + tariff_offset(p); }

    /// Standard error of xi_p - xi_q from the penalised fit.
    double offset_difference_se(Tariff p, Tariff q) const {
        const auto i = static_cast<Eigen::Index>(resolve(p)), j = static_cast<Eigen::Index>(resolve(q));
        return std::sqrt(std::max(0.0, offset_cov_(i, i) + offset_cov_(j, j) - 2.0 * offset_cov_(i, j)));
    }

    const spline::SmoothTerm& temperature_term() const { return term_; }
    const Vector& spline_coef() const { return spline_coef_; }
    double lambda() const { return lambda_; }
    bool ridge_fallback() const { return ridge_fallback_; }

private:
    std::size_t resolve(Tariff p) const {
        const auto i = static_cast<std::size_t>(tariff_index(p));
        if (available_[i]) return i;
        if (available_[1]) return 1;
        return available_[0] ? 0 : 2;
    }

    spline::SmoothTerm term_;
    Vector spline_coef_;
    std::array<double, kTariffCount> offset_{};
    std::array<double, kTariffCount> scale_{kScaleFloor, kScaleFloor, kScaleFloor};
    std::array<bool, kTariffCount> available_{};
    Eigen::Matrix3d offset_cov_ = Eigen::Matrix3d::Zero();
    double lambda_ = 0.0;
    bool ridge_fallback_ = false;
};

/// Counterfactual per-tariff profiles mu^h(p), sigma^h(p), indexed [tariff_index(p)][h].
struct TariffResponseProfile {
    std::array<Vector, kTariffCount> mu;
    std::array<Vector, kTariffCount> sigma;

    const Vector& mean(Tariff p) const { return mu[static_cast<std::size_t>(tariff_index(p))]; }
    const Vector& stddev(Tariff p) const { return sigma[static_cast<std::size_t>(tariff_index(p))]; }
};

/// One model per half-hour of a household or cluster.
using HalfHourModels = std::vector<LocationScaleModel>;

/**
 * Fits the 48 half-hour models of one entity on the given days.
 * `temperature` is the T x H grid shared by all entities.
 */
inline HalfHourModels fit_entity(const Matrix& consumption, const std::vector<dataio::TariffProfile>& tariffs, const Matrix& temperature,
                                  std::span<const int> days, const SplineSettings& settings = {}) {
    HalfHourModels models;
    models.reserve(kHalfHours);
    std::vector<double> y(days.size()), tau(days.size());
    std::vector<Tariff> p(days.size());
    for (int h = 0; h < kHalfHours; ++h) {
        for (std::size_t i = 0; i < days.size(); ++i) {
            const int t = days[i];
            y[i] = consumption(t, h);
            tau[i] = temperature(t, h);
            p[i] = tariffs[static_cast<std::size_t>(t)][static_cast<std::size_t>(h)];
        }
        models.push_back(LocationScaleModel::fit(y, tau, p, settings));
    }
    return models;
}

/// Averages the fitted mean and scale over the temperature history with the tariff forced to p.
inline TariffResponseProfile tariff_profile(const HalfHourModels& models, const Matrix& temperature, std::span<const int> days) {
    if (static_cast<int>(models.size()) != temperature.cols()) throw ValidationError("one model per half-hour required");
    TariffResponseProfile prof;
    const auto nh = static_cast<Eigen::Index>(models.size());
    for (Tariff p : kTouTariffs) {
        const auto ip = static_cast<std::size_t>(tariff_index(p));
        prof.mu[ip] = Vector::Zero(nh);
        prof.sigma[ip] = Vector::Zero(nh);
        for (Eigen::Index h = 0; h < nh; ++h) {
            const auto& m = models[static_cast<std::size_t>(h)];
            double acc = 0.0;
            for (int t : days) acc += m.mean(temperature(t, h), p);
            prof.mu[ip][h] = acc / static_cast<double>(days.size());
            prof.sigma[ip][h] = m.scale(p);
        }
    }
    return prof;
}

inline void write_profiles_header(std::ostream& out) { out << "entity,tariff,h,mu,sigma\n"; }

/// Appends rows `entity,tariff,h,mu,sigma` (h is 1-based in the file).
inline void write_profiles(std::ostream& out, const std::string& entity, const TariffResponseProfile& prof) {
    for (Tariff p : kTouTariffs)
        for (Eigen::Index h = 0; h < prof.mean(p).size(); ++h)
            out << entity << ',' << to_string(p) << ',' << h + 1 << ',' << csv::num(prof.mean(p)[h]) << ',' << csv::num(prof.stddev(p)[h]) << '\n';
}

}  // namespace drsim::causality
