#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "drsim/core.hpp"
#include "drsim/csv.hpp"

/**
 * @file metrics.hpp
 * @brief Ensemble scores against an observed daily profile. An ensemble is an N x H
 * matrix, one member per row.
 */

namespace drsim::metrics {

inline constexpr double kDefaultVariogramOrder = 0.5;

namespace detail {

inline void check_shapes(const Matrix& ensemble, const Vector& observed) {
    if (ensemble.rows() == 0) throw ValidationError("empty ensemble");
    if (ensemble.cols() != observed.size())
        throw ValidationError("ensemble members have length " + std::to_string(ensemble.cols()) + ", observation " +
                              std::to_string(observed.size()));
}

}  // namespace detail

/// Euclidean distance between the ensemble mean and the observation.
inline double rmse(const Matrix& ensemble, const Vector& observed) {
    detail::check_shapes(ensemble, observed);
    const Vector mean = ensemble.colwise().mean().transpose();
    return (mean - observed).norm();
}

/**
 * Split-halves energy score: member i of the first half is compared with the observation
 * and paired with member N/2 + i for the spread term,
 * (2/N) sum_i |Y_i - y| - (1/N) sum_i |Y_i - Y_{N/2+i}|, i = 1..N/2.
 */
inline double energy_score(const Matrix& ensemble, const Vector& observed) {
    detail::check_shapes(ensemble, observed);
    const Eigen::Index n = ensemble.rows();
    if (n % 2 != 0) throw ValidationError("energy score needs an even ensemble size, got " + std::to_string(n));
    const Eigen::Index half = n / 2;
    double accuracy = 0.0, spread = 0.0;
    for (Eigen::Index i = 0; i < half; ++i) {
        accuracy += (ensemble.row(i).transpose() - observed).norm();
        spread += (ensemble.row(i) - ensemble.row(half + i)).norm();
    }
    return 2.0 / static_cast<double>(n) * accuracy - spread / static_cast<double>(n);
}

/// Unweighted variogram score of order p over all ordered pairs of half-hours.
inline double variogram_score(const Matrix& ensemble, const Vector& observed, double p = kDefaultVariogramOrder) {
    detail::check_shapes(ensemble, observed);
    if (!(p > 0.0)) throw ValidationError("variogram order must be positive");
    const Eigen::Index nh = observed.size(), n = ensemble.rows();
    double total = 0.0;
    for (Eigen::Index a = 0; a < nh; ++a)
        for (Eigen::Index b = 0; b < nh; ++b) {
            double member_mean = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) member_mean += std::pow(std::fabs(ensemble(i, a) - ensemble(i, b)), p);
            const double diff = std::pow(std::fabs(observed[a] - observed[b]), p) - member_mean / static_cast<double>(n);
            total += diff * diff;
        }
    return total;
}

struct DayScore {
    int day = 0;
    std::string generator;
    double rmse = 0.0;
    double energy = 0.0;
    double variogram = 0.0;
};

struct Summary {
    double mean = 0.0, min = 0.0, q25 = 0.0, median = 0.0, q75 = 0.0, max = 0.0;
};

/// Quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> values, double prob) {
    if (values.empty()) throw ValidationError("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double pos = prob * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline Summary summarize(const std::vector<double>& values) {
    Summary s;
    double acc = 0.0;
    for (double v : values) acc += v;
    s.mean = acc / static_cast<double>(values.size());
    s.min = quantile(values, 0.0);
    s.q25 = quantile(values, 0.25);
    s.median = quantile(values, 0.5);
    s.q75 = quantile(values, 0.75);
    s.max = quantile(values, 1.0);
    return s;
}

/// Draws an N x H ensemble for a day from a given seed.
using EnsembleSource = std::function<Matrix(int day, int members, std::uint64_t seed)>;

struct NamedSource {
    std::string name;
    EnsembleSource source;
};

/**
 * Scores every generator on every listed day. Day t of every generator is drawn with the
 * same seed so that identical generators give identical scores.
 */
inline std::vector<DayScore> evaluate_generators(std::span<const int> days, const Matrix& observed, std::span<const NamedSource> generators,
                                                 int members, std::uint64_t seed, double p = kDefaultVariogramOrder) {
    std::vector<DayScore> out;
    for (int t : days) {
        const Vector y = observed.row(t).transpose();
        for (const auto& g : generators) {
            const Matrix ens = g.source(t, members, derive_seed(seed, "evaluate", static_cast<std::uint64_t>(t)));
            out.push_back({t, g.name, rmse(ens, y), energy_score(ens, y), variogram_score(ens, y, p)});
        }
    }
    return out;
}

inline void write_scores(std::ostream& out, std::span<const DayScore> scores) {
    out << "day,generator,rmse,energy,variogram_p05\n";
    for (const auto& s : scores) out << s.day << ',' << s.generator << ',' << csv::num(s.rmse) << ',' << csv::num(s.energy) << ',' << csv::num(s.variogram) << '\n';
}

/// One row per (generator, score) with mean and boxplot quantiles.
inline void write_score_quantiles(std::ostream& out, std::span<const DayScore> scores, const std::string& prefix_columns = "",
                                  const std::string& prefix_values = "", bool header = true) {
    if (header) out << prefix_columns << "generator,score,mean,min,q25,median,q75,max\n";
    std::vector<std::string> names;
    for (const auto& s : scores)
        if (std::find(names.begin(), names.end(), s.generator) == names.end()) names.push_back(s.generator);
    for (const auto& name : names) {
        std::vector<double> r, e, v;
        for (const auto& s : scores)
            if (s.generator == name) {
                r.push_back(s.rmse);
                e.push_back(s.energy);
                v.push_back(s.variogram);
            }
        const std::pair<const char*, const std::vector<double>*> cols[] = {{"rmse", &r}, {"energy", &e}, {"variogram_p05", &v}};
        for (const auto& [label, values] : cols) {
            const auto q = summarize(*values);
            out << prefix_values << name << ',' << label << ',' << csv::num(q.mean) << ',' << csv::num(q.min) << ',' << csv::num(q.q25) << ','
                << csv::num(q.median) << ',' << csv::num(q.q75) << ',' << csv::num(q.max) << '\n';
        }
    }
}

}  // namespace drsim::metrics
