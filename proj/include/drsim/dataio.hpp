#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "drsim/core.hpp"
#include "drsim/csv.hpp"

/**
 * @file dataio.hpp
 * @brief Smart-meter record ingestion, gap repair and the day-level feature set
 * (calendar, smoothed temperature, temperature PCA, conditional vectors).
 *
 * Time is discretised in half-hour slots counted from 1970-01-01 00:00; slot index
 * `h` within a day covers the clock interval [h/2, (h+1)/2) hours (0-based).
 */

namespace drsim::dataio {

using Slot = std::int64_t;
using TariffProfile = std::array<Tariff, kHalfHours>;

inline Slot slot_of(Date day, int half_hour = 0) {
    return static_cast<Slot>(day.time_since_epoch().count()) * kHalfHours + half_hour;
}
inline Date day_of(Slot s) {
    const auto q = s >= 0 ? s / kHalfHours : -((-s + kHalfHours - 1) / kHalfHours);
    return Date{std::chrono::days{q}};
}

/// Parses `YYYY-MM-DDTHH:MM[:SS]` (a space may replace `T`); must fall on a half-hour boundary.
inline Slot parse_timestamp(std::string_view s) {
    if (s.size() < 16 || (s[10] != 'T' && s[10] != ' ')) throw ValidationError("malformed timestamp '" + std::string(s) + "'");
    const Date day = parse_date(s.substr(0, 10));
    unsigned hh = 0, mm = 0, ss = 0;
    const std::string rest(s.substr(11));
    const int n = std::sscanf(rest.c_str(), "%u:%u:%u", &hh, &mm, &ss);
    if (n < 2 || hh > 23 || mm > 59 || ss > 59) throw ValidationError("malformed timestamp '" + std::string(s) + "'");
    if ((mm != 0 && mm != 30) || ss != 0) throw ValidationError("timestamp not on a half-hour boundary '" + std::string(s) + "'");
    return slot_of(day, static_cast<int>(hh * 2 + mm / 30));
}

inline std::string format_timestamp(Slot s) {
    const Date d = day_of(s);
    const auto h = static_cast<int>(s - slot_of(d));
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02d:%02d", h / 2, (h % 2) * 30);
    return format_date(d) + "T" + buf;
}

// ---------------------------------------------------------------------------
// Raw records

struct Reading {
    Slot slot;
    std::optional<double> kwh;
    Tariff tariff;
};

struct HouseholdRecords {
    std::string id;
    Group group = Group::Tou;
    std::vector<Reading> readings;  ///< strictly increasing slots
    double coverage = 1.0;          ///< observed fraction of the common day range
    bool excluded = false;          ///< coverage below the retention threshold
};

struct RawRecordSet {
    std::vector<HouseholdRecords> households;
    Date first_day{};
    int day_count = 0;

    Slot first_slot() const { return slot_of(first_day); }
    Slot slot_count() const { return static_cast<Slot>(day_count) * kHalfHours; }
    std::vector<Date> dates() const {
        std::vector<Date> out;
        for (int t = 0; t < day_count; ++t) out.push_back(first_day + std::chrono::days{t});
        return out;
    }
};

/// Households observed less than this fraction of the time are flagged for exclusion.
inline constexpr double kMinCoverage = 0.95;

/**
 * Reads the consumption CSV (`household_id,timestamp,kwh,tariff,group`).
 *
 * Empty, `NA` or `nan` kWh fields are missing readings. Rows of a household may appear
 * in any order; they are sorted, and duplicates are rejected. Coverage is measured
 * against the full day range spanned by the whole file.
 */
inline RawRecordSet ingest_records(std::istream& in) {
    csv::Reader reader(in, {"household_id", "timestamp", "kwh", "tariff", "group"});
    RawRecordSet set;
    std::unordered_map<std::string, std::size_t> index;
    std::vector<std::string_view> f;
    Slot lo = std::numeric_limits<Slot>::max(), hi = std::numeric_limits<Slot>::min();
    while (reader.next(f)) {
        const auto line = reader.line();
        const std::string id(f[0]);
        if (id.empty()) throw ParseError("empty household_id", line);
        Slot slot = 0;
        Tariff tariff{};
        Group group{};
        try {
            slot = parse_timestamp(f[1]);
            tariff = parse_tariff(f[3]);
            group = parse_group(f[4]);
        } catch (const ValidationError& e) {
            throw ParseError(e.what(), line);
        }
        std::optional<double> kwh;
        if (!(f[2].empty() || f[2] == "NA" || f[2] == "nan" || f[2] == "NaN")) {
            const double v = csv::parse_double(f[2], line);
            if (!std::isfinite(v) || v < 0.0)
                throw ValidationError("line " + std::to_string(line) + ": consumption must be finite and >= 0");
            kwh = v;
        }
        if (group == Group::Tou && tariff == Tariff::Flat)
            throw ValidationError("line " + std::to_string(line) + ": ToU household '" + id + "' with FLAT tariff");
        auto [it, inserted] = index.try_emplace(id, set.households.size());
        if (inserted) set.households.push_back(HouseholdRecords{id, group, {}, 1.0, false});
        auto& hh = set.households[it->second];
        if (hh.group != group)
            throw ValidationError("line " + std::to_string(line) + ": household '" + id + "' changes group");
        hh.readings.push_back({slot, kwh, tariff});
        lo = std::min(lo, slot);
        hi = std::max(hi, slot);
    }
    if (set.households.empty()) throw ValidationError("no consumption records");

    set.first_day = day_of(lo);
    set.day_count = static_cast<int>((day_of(hi) - set.first_day).count()) + 1;
    const double expected = static_cast<double>(set.slot_count());
    for (auto& hh : set.households) {
        std::sort(hh.readings.begin(), hh.readings.end(), [](const Reading& a, const Reading& b) { return a.slot < b.slot; });
        for (std::size_t i = 1; i < hh.readings.size(); ++i)
            if (hh.readings[i].slot == hh.readings[i - 1].slot)
                throw ValidationError("household '" + hh.id + "' has duplicate timestamp " + format_timestamp(hh.readings[i].slot));
        const auto observed = std::count_if(hh.readings.begin(), hh.readings.end(), [](const Reading& r) { return r.kwh.has_value(); });
        hh.coverage = static_cast<double>(observed) / expected;
        hh.excluded = hh.coverage < kMinCoverage;
    }
    return set;
}

/**
 * Fills NaN entries of a half-hourly series in place.
 *
 * Gaps shorter than a day with observations on both sides are linearly interpolated.
 * Longer gaps, and gaps touching either end of the series, are filled slot by slot by
 * interpolating, in day index, between the same half-hour of the nearest complete days
 * before and after (a single complete neighbour is copied).
 */
inline void repair_series(std::vector<double>& y, int day_length = kHalfHours) {
    const auto n = static_cast<std::ptrdiff_t>(y.size());
    if (n == 0) return;
    if (std::none_of(y.begin(), y.end(), [](double v) { return !std::isnan(v); }))
        throw ValidationError("series entirely missing, cannot repair");
    const std::vector<double> orig = y;
    const std::ptrdiff_t days = (n + day_length - 1) / day_length;
    std::vector<char> complete(static_cast<std::size_t>(days), 0);
    for (std::ptrdiff_t d = 0; d < days; ++d) {
        const auto b = d * day_length, e = std::min(n, b + day_length);
        complete[d] = (e - b == day_length) && std::none_of(orig.begin() + b, orig.begin() + e, [](double v) { return std::isnan(v); });
    }
    auto nearest_observed = [&](std::ptrdiff_t i) {
        for (std::ptrdiff_t k = 1; k < n; ++k) {
            if (i - k >= 0 && !std::isnan(orig[i - k])) return orig[i - k];
            if (i + k < n && !std::isnan(orig[i + k])) return orig[i + k];
        }
        return orig[i];
    };

    std::ptrdiff_t i = 0;
    while (i < n) {
        if (!std::isnan(orig[i])) { ++i; continue; }
        std::ptrdiff_t b = i;
        while (b < n && std::isnan(orig[b])) ++b;
        const std::ptrdiff_t a = i, len = b - a;
        const bool left = a > 0, right = b < n;
        if (len < day_length && left && right) {
            const double y0 = orig[a - 1], y1 = orig[b];
            for (std::ptrdiff_t k = a; k < b; ++k)
                y[k] = y0 + (y1 - y0) * static_cast<double>(k - a + 1) / static_cast<double>(len + 1);
        } else {
            for (std::ptrdiff_t k = a; k < b; ++k) {
                const std::ptrdiff_t d = k / day_length, h = k % day_length;
                std::ptrdiff_t dp = d - 1, dn = d + 1;
                while (dp >= 0 && !complete[dp]) --dp;
                while (dn < days && !complete[dn]) ++dn;
                const bool has_p = dp >= 0, has_n = dn < days;
                if (has_p && has_n) {
                    const double v0 = orig[dp * day_length + h], v1 = orig[dn * day_length + h];
                    y[k] = v0 + (v1 - v0) * static_cast<double>(d - dp) / static_cast<double>(dn - dp);
                } else if (has_p) {
                    y[k] = orig[dp * day_length + h];
                } else if (has_n) {
                    y[k] = orig[dn * day_length + h];
                } else if (left && right) {
                    const double y0 = orig[a - 1], y1 = orig[b];
                    y[k] = y0 + (y1 - y0) * static_cast<double>(k - a + 1) / static_cast<double>(len + 1);
                } else {
                    y[k] = nearest_observed(k);
                }
            }
        }
        i = b;
    }
}

/// Returns a record set where every household has one complete reading per slot of the day range.
inline RawRecordSet repair_gaps(const RawRecordSet& raw) {
    RawRecordSet out;
    out.first_day = raw.first_day;
    out.day_count = raw.day_count;
    const Slot s0 = raw.first_slot(), n = raw.slot_count();
    for (const auto& hh : raw.households) {
        std::vector<double> y(static_cast<std::size_t>(n), std::numeric_limits<double>::quiet_NaN());
        std::vector<Tariff> p(static_cast<std::size_t>(n), hh.group == Group::Tou ? Tariff::Normal : Tariff::Flat);
        for (const auto& r : hh.readings) {
            const auto k = static_cast<std::size_t>(r.slot - s0);
            if (r.kwh) y[k] = *r.kwh;
            p[k] = r.tariff;
        }
        try {
            repair_series(y);
        } catch (const ValidationError&) {
            throw ValidationError("household '" + hh.id + "' has no observed consumption, cannot repair");
        }
        HouseholdRecords fixed{hh.id, hh.group, {}, hh.coverage, hh.excluded};
        fixed.readings.reserve(y.size());
        for (Slot k = 0; k < n; ++k) fixed.readings.push_back({s0 + k, y[static_cast<std::size_t>(k)], p[static_cast<std::size_t>(k)]});
        out.households.push_back(std::move(fixed));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Day grids

/// T x H consumption and tariff grids of one household or cluster.
struct DayGrid {
    Matrix consumption;                 ///< T x H, kWh per half-hour
    std::vector<TariffProfile> tariffs; ///< T profiles

    int days() const { return static_cast<int>(consumption.rows()); }
};

/// Requires a repaired household (one reading per slot of the range).
inline DayGrid to_day_grid(const HouseholdRecords& hh, int day_count) {
    if (static_cast<Slot>(hh.readings.size()) != static_cast<Slot>(day_count) * kHalfHours)
        throw ValidationError("household '" + hh.id + "' is not gap-repaired");
    DayGrid g;
    g.consumption.resize(day_count, kHalfHours);
    g.tariffs.resize(static_cast<std::size_t>(day_count));
    for (int t = 0; t < day_count; ++t)
        for (int h = 0; h < kHalfHours; ++h) {
            const auto& r = hh.readings[static_cast<std::size_t>(t * kHalfHours + h)];
            g.consumption(t, h) = r.kwh.value();
            g.tariffs[static_cast<std::size_t>(t)][static_cast<std::size_t>(h)] = r.tariff;
        }
    return g;
}

/**
 * Common ToU price schedule: per slot, the majority label among ToU households
 * (Normal on ties or when no ToU household is present). Control (Std) households are
 * modelled against this schedule since they never see the prices themselves.
 */
inline std::vector<TariffProfile> tariff_schedule(const RawRecordSet& repaired) {
    std::vector<TariffProfile> sched(static_cast<std::size_t>(repaired.day_count));
    const Slot n = repaired.slot_count();
    std::vector<std::array<int, 3>> votes(static_cast<std::size_t>(n), {0, 0, 0});
    for (const auto& hh : repaired.households) {
        if (hh.group != Group::Tou || hh.excluded) continue;
        for (Slot k = 0; k < n && k < static_cast<Slot>(hh.readings.size()); ++k)
            ++votes[static_cast<std::size_t>(k)][static_cast<std::size_t>(tariff_index(hh.readings[static_cast<std::size_t>(k)].tariff))];
    }
    for (Slot k = 0; k < n; ++k) {
        const auto& v = votes[static_cast<std::size_t>(k)];
        Tariff p = Tariff::Normal;
        if (v[0] > v[1] && v[0] > v[2]) p = Tariff::Low;
        else if (v[2] > v[1] && v[2] > v[0]) p = Tariff::High;
        sched[static_cast<std::size_t>(k / kHalfHours)][static_cast<std::size_t>(k % kHalfHours)] = p;
    }
    return sched;
}

/// Tariffs a household is modelled against: its own for ToU, the common schedule for Std.
inline std::vector<TariffProfile> effective_tariffs(const DayGrid& grid, Group group, const std::vector<TariffProfile>& schedule) {
    return group == Group::Tou ? grid.tariffs : schedule;
}

// ---------------------------------------------------------------------------
// Temperature

struct TemperatureReading {
    Slot slot;
    double celsius;
};

/// Reads the hourly temperature CSV (`timestamp,temp_c`).
inline std::vector<TemperatureReading> ingest_temperature(std::istream& in) {
    csv::Reader reader(in, {"timestamp", "temp_c"});
    std::vector<TemperatureReading> out;
    std::vector<std::string_view> f;
    while (reader.next(f)) {
        Slot s = 0;
        try {
            s = parse_timestamp(f[0]);
        } catch (const ValidationError& e) {
            throw ParseError(e.what(), reader.line());
        }
        const double v = csv::parse_double(f[1], reader.line());
        if (!std::isfinite(v)) throw ParseError("non-finite temperature", reader.line());
        out.push_back({s, v});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.slot < b.slot; });
    for (std::size_t i = 1; i < out.size(); ++i)
        if (out[i].slot == out[i - 1].slot) throw ValidationError("duplicate temperature timestamp " + format_timestamp(out[i].slot));
    if (out.empty()) throw ValidationError("no temperature records");
    return out;
}

/// Linear interpolation of (sorted) temperature readings onto every half-hour of the day range.
inline Matrix half_hourly_temperature(const std::vector<TemperatureReading>& readings, Date first_day, int day_count) {
    if (readings.empty()) throw ValidationError("no temperature records");
    Matrix tau(day_count, kHalfHours);
    const Slot s0 = slot_of(first_day);
    std::size_t j = 0;
    for (int t = 0; t < day_count; ++t)
        for (int h = 0; h < kHalfHours; ++h) {
            const Slot s = s0 + t * kHalfHours + h;
            while (j + 1 < readings.size() && readings[j + 1].slot <= s) ++j;
            double v;
            if (s <= readings.front().slot) v = readings.front().celsius;
            else if (j + 1 >= readings.size()) v = readings.back().celsius;
            else {
                const auto& a = readings[j];
                const auto& b = readings[j + 1];
                v = a.celsius + (b.celsius - a.celsius) * static_cast<double>(s - a.slot) / static_cast<double>(b.slot - a.slot);
            }
            tau(t, h) = v;
        }
    return tau;
}

struct SmoothedTemperature {
    Matrix per_half_hour;  ///< T x H exponentially smoothed temperature
    Vector daily;          ///< T daily means of the smoothed series
    double a = 0.998;
};

inline constexpr double kDefaultSmoothing = 0.998;

/**
 * Exponential smoothing of the half-hourly temperature read as one long series:
 * the first value is copied, then s_k = (1 - a) tau_k + a s_{k-1}.
 */
inline SmoothedTemperature smooth_temperature(const Matrix& tau, double a = kDefaultSmoothing) {
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("smoothing parameter a must lie in [0, 1], got " + std::to_string(a));
    if (tau.size() == 0) throw ValidationError("empty temperature series");
    SmoothedTemperature out;
    out.a = a;
    out.per_half_hour.resize(tau.rows(), tau.cols());
    double prev = tau(0, 0);
    for (Eigen::Index t = 0; t < tau.rows(); ++t)
        for (Eigen::Index h = 0; h < tau.cols(); ++h) {
            prev = (t == 0 && h == 0) ? tau(0, 0) : (1.0 - a) * tau(t, h) + a * prev;
            out.per_half_hour(t, h) = prev;
        }
    out.daily = out.per_half_hour.rowwise().mean();
    return out;
}

// ---------------------------------------------------------------------------
// Calendar

struct CalendarFeatures {
    std::vector<int> working_day;  ///< 1 Monday-Friday, 0 weekend
    Vector position_in_year;       ///< linear from 0 (first day) to 1 (last day)
};

inline CalendarFeatures build_calendar(std::span<const Date> dates) {
    CalendarFeatures cal;
    const auto n = static_cast<Eigen::Index>(dates.size());
    cal.position_in_year.resize(n);
    for (Eigen::Index t = 0; t < n; ++t) {
        if (t > 0 && dates[static_cast<std::size_t>(t)] != dates[static_cast<std::size_t>(t - 1)] + std::chrono::days{1})
            throw ValidationError("calendar dates must be contiguous");
        cal.working_day.push_back(is_working_day(dates[static_cast<std::size_t>(t)]) ? 1 : 0);
        cal.position_in_year[t] = n > 1 ? static_cast<double>(t) / static_cast<double>(n - 1) : 0.0;
    }
    return cal;
}

// ---------------------------------------------------------------------------
// Temperature PCA

/// Rows [tau_t^1..tau_t^H, smoothed daily mean] used as PCA input.
inline Matrix temperature_pca_input(const Matrix& tau, const Vector& smoothed_daily) {
    Matrix x(tau.rows(), tau.cols() + 1);
    x.leftCols(tau.cols()) = tau;
    x.col(tau.cols()) = smoothed_daily;
    return x;
}

class TemperaturePca {
public:
    static constexpr int kComponents = 3;

    /// Fits on the given rows (training days). Requires >= 4 rows and rank >= 3.
    static TemperaturePca fit(const Matrix& rows) {
        if (rows.rows() < 4) throw ValidationError("temperature PCA needs at least 4 rows");
        if (!rows.allFinite()) throw ValidationError("temperature PCA input has non-finite entries");
        TemperaturePca pca;
        pca.mean_ = rows.colwise().mean().transpose();
        const Matrix centered = rows.rowwise() - pca.mean_.transpose();
        Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinV);
        const Vector s = svd.singularValues();
        const double tol = std::max(rows.rows(), rows.cols()) * std::numeric_limits<double>::epsilon() * (s.size() ? s[0] : 0.0);
        int rank = 0;
        for (Eigen::Index i = 0; i < s.size(); ++i) rank += s[i] > tol ? 1 : 0;
        if (rank < kComponents)
            throw ValidationError("temperature PCA input has rank " + std::to_string(rank) + ", need at least 3");
        pca.directions_ = svd.matrixV();
        for (Eigen::Index c = 0; c < pca.directions_.cols(); ++c) {
            Eigen::Index arg = 0;
            pca.directions_.col(c).cwiseAbs().maxCoeff(&arg);
            if (pca.directions_(arg, c) < 0) pca.directions_.col(c) *= -1.0;
        }
        const Vector var = s.array().square();
        pca.explained_ = var / var.sum();
        const Matrix proj = centered * pca.directions_.leftCols(kComponents);
        pca.lo_ = proj.colwise().minCoeff().transpose();
        pca.hi_ = proj.colwise().maxCoeff().transpose();
        return pca;
    }

    /// Raw projection on the leading `n` directions.
    Vector project(const Vector& row, int n = kComponents) const {
        return directions_.leftCols(n).transpose() * (row - mean_);
    }

    /// Retained components rescaled to [0, 1] with training bounds (clamped outside them).
    std::array<double, kComponents> transform(const Vector& row) const {
        const Vector p = project(row);
        std::array<double, kComponents> out{};
        for (int c = 0; c < kComponents; ++c) {
            const double span = hi_[c] - lo_[c];
            out[static_cast<std::size_t>(c)] = span > 0 ? std::clamp((p[c] - lo_[c]) / span, 0.0, 1.0) : 0.5;
        }
        return out;
    }

    Vector reconstruct(const Vector& row, int n) const {
        return mean_ + directions_.leftCols(n) * project(row, n);
    }

    const Vector& mean() const { return mean_; }
    const Matrix& directions() const { return directions_; }
    /// Explained-variance ratios of all components, non-increasing.
    const Vector& explained_variance_ratio() const { return explained_; }
    int component_count() const { return static_cast<int>(directions_.cols()); }

private:
    Vector mean_;
    Matrix directions_;
    Vector explained_;
    Vector lo_, hi_;
};

// ---------------------------------------------------------------------------
// Partition

struct DatasetPartition {
    std::vector<int> train;  ///< sorted day indices
    std::vector<int> test;   ///< sorted day indices
    std::uint64_t seed = 0;
};

inline constexpr double kDefaultTrainFraction = 0.75;

/// Random day split with floor(fraction * T) training days.
inline DatasetPartition partition_days(int day_count, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("train fraction must lie in (0, 1)");
    std::vector<int> idx(static_cast<std::size_t>(day_count));
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::floor(fraction * day_count));
    DatasetPartition part;
    part.seed = seed;
    part.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    part.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    std::sort(part.train.begin(), part.train.end());
    std::sort(part.test.begin(), part.test.end());
    return part;
}

// ---------------------------------------------------------------------------
// Day-level features

/// Exogenous variables shared by every household for each day of the range.
struct DayFeatures {
    std::vector<Date> dates;
    Matrix temperature;  ///< T x H
    SmoothedTemperature smoothed;
    CalendarFeatures calendar;
    TemperaturePca pca;
    DatasetPartition partition;

    int days() const { return static_cast<int>(dates.size()); }

    std::array<double, TemperaturePca::kComponents> pca_components(int t) const {
        Vector row(kHalfHours + 1);
        row.head(kHalfHours) = temperature.row(t).transpose();
        row[kHalfHours] = smoothed.daily[t];
        return pca.transform(row);
    }
};

/// Builds all day-level features; the PCA is fit on the training days only.
inline DayFeatures build_day_features(std::vector<Date> dates, Matrix temperature, double smoothing_a, double train_fraction,
                                      std::uint64_t seed) {
    DayFeatures f;
    f.dates = std::move(dates);
    f.temperature = std::move(temperature);
    if (f.temperature.rows() != static_cast<Eigen::Index>(f.dates.size()) || f.temperature.cols() != kHalfHours)
        throw ValidationError("temperature grid does not match the day range");
    f.smoothed = smooth_temperature(f.temperature, smoothing_a);
    f.calendar = build_calendar(f.dates);
    f.partition = partition_days(f.days(), train_fraction, seed);
    const Matrix all = temperature_pca_input(f.temperature, f.smoothed.daily);
    Matrix train(static_cast<Eigen::Index>(f.partition.train.size()), all.cols());
    for (std::size_t i = 0; i < f.partition.train.size(); ++i) train.row(static_cast<Eigen::Index>(i)) = all.row(f.partition.train[i]);
    f.pca = TemperaturePca::fit(train);
    return f;
}

/// Dimension of the conditional vector for H half-hours.
inline constexpr int conditional_dimension(int half_hours = kHalfHours) { return 5 + 2 * half_hours; }

/**
 * Conditional input of the CVAE, in fixed order:
 * [pca_1, pca_2, pca_3, position-in-year, working-day, 1{Low} x H, 1{High} x H].
 */
inline Vector build_conditional_vector(const std::array<double, 3>& pca, double position_in_year, int working_day,
                                       std::span<const Tariff> tariffs) {
    const auto n = static_cast<Eigen::Index>(tariffs.size());
    Vector x = Vector::Zero(5 + 2 * n);
    x[0] = pca[0];
    x[1] = pca[1];
    x[2] = pca[2];
    x[3] = position_in_year;
    x[4] = working_day;
    for (Eigen::Index h = 0; h < n; ++h) {
        x[5 + h] = tariffs[static_cast<std::size_t>(h)] == Tariff::Low ? 1.0 : 0.0;
        x[5 + n + h] = tariffs[static_cast<std::size_t>(h)] == Tariff::High ? 1.0 : 0.0;
    }
    return x;
}

inline Vector build_conditional_vector(const DayFeatures& f, int t, std::span<const Tariff> tariffs) {
    return build_conditional_vector(f.pca_components(t), f.calendar.position_in_year[t], f.calendar.working_day[static_cast<std::size_t>(t)], tariffs);
}

/// Per-half-hour exogenous vector (tau_t^h, smoothed daily tau_t, w_t, kappa_t); h is 0-based.
inline std::array<double, 4> build_gam_features(const DayFeatures& f, int t, int h) {
    if (h < 0 || h >= kHalfHours) throw std::out_of_range("half-hour index " + std::to_string(h) + " outside [0, 48)");
    if (t < 0 || t >= f.days()) throw std::out_of_range("day index " + std::to_string(t) + " outside the day range");
    return {f.temperature(t, h), f.smoothed.daily[t], static_cast<double>(f.calendar.working_day[static_cast<std::size_t>(t)]),
            f.calendar.position_in_year[t]};
}

}  // namespace drsim::dataio
