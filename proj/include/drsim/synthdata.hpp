#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "drsim/core.hpp"
#include "drsim/csv.hpp"
#include "drsim/dataio.hpp"

/**
 * @file synthdata.hpp
 * @brief Synthetic smart-meter populations with planted archetypes, tariff responses,
 * weather dependence and AR(1) noise, written in the ingest CSV formats.
 */

namespace drsim::synthdata {

/// Consumption behaviour shared by the households of one archetype (kWh per half-hour).
struct ArchetypeSpec {
    std::string name;
    Vector base_shape = Vector::Zero(kHalfHours);
    double temperature_sensitivity = 0.0;  ///< added per degree below the comfort temperature
    double comfort_temperature = 15.0;
    double working_day_offset = 0.0;       ///< added at every half-hour of a working day
    double delta_low = 0.0;                ///< shift at each half-hour of a Low window
    double delta_high = 0.0;               ///< shift at each half-hour of a High window
    double rebound = 0.0;                  ///< fraction of the window energy change taken back outside it
    int side_width = 0;                    ///< half-hours either side of a window shifted by delta / 2
    std::array<double, kTariffCount> noise_std{0.05, 0.05, 0.05};  ///< Low, Normal, High
    double rho = 0.5;                      ///< lag-1 autocorrelation of the half-hourly noise

    void validate() const {
        if (base_shape.size() != kHalfHours) throw ConfigError("archetype '" + name + "': base shape needs " + std::to_string(kHalfHours) + " values");
        if ((base_shape.array() < 0.0).any()) throw ConfigError("archetype '" + name + "': base shape must be non-negative");
        if (rebound < 0.0 || rebound > 1.0) throw ConfigError("archetype '" + name + "': rebound must lie in [0, 1]");
        if (!(rho > -1.0 && rho < 1.0)) throw ConfigError("archetype '" + name + "': rho must lie in (-1, 1)");
        if (side_width < 0) throw ConfigError("archetype '" + name + "': negative side width");
        for (double s : noise_std)
            if (s < 0.0) throw ConfigError("archetype '" + name + "': negative noise std");
    }

    double delta(Tariff p) const { return p == Tariff::Low ? delta_low : p == Tariff::High ? delta_high : 0.0; }
};

namespace detail {

inline Vector bump(double centre, double width, double height) {
    Vector v(kHalfHours);
    for (int h = 0; h < kHalfHours; ++h) v[h] = height * std::exp(-0.5 * std::pow((h - centre) / width, 2));
    return v;
}

}  // namespace detail

/// Four archetypes with clearly different daily shapes and tariff responses.
inline std::vector<ArchetypeSpec> default_archetypes() {
    std::vector<ArchetypeSpec> a(4);
    a[0].name = "morning";
    a[0].base_shape = Vector::Constant(kHalfHours, 0.2) + detail::bump(15, 3, 0.45) + detail::bump(38, 3, 0.2);
    a[0].temperature_sensitivity = 0.01;
    a[0].working_day_offset = 0.02;
    a[0].delta_low = 0.15;
    a[0].delta_high = -0.1;
    a[0].rebound = 0.5;
    a[0].side_width = 1;

    a[1].name = "evening";
    a[1].base_shape = Vector::Constant(kHalfHours, 0.2) + detail::bump(38, 3, 0.6);
    a[1].temperature_sensitivity = 0.015;
    a[1].delta_low = 0.05;
    a[1].delta_high = -0.18;
    a[1].rebound = 0.3;

    a[2].name = "daytime";
    a[2].base_shape = Vector::Constant(kHalfHours, 0.2) + detail::bump(26, 7, 0.3);
    a[2].temperature_sensitivity = 0.02;
    a[2].working_day_offset = -0.03;
    a[2].delta_low = 0.25;
    a[2].delta_high = -0.05;
    a[2].rebound = 0.6;
    a[2].side_width = 2;

    a[3].name = "night";
    a[3].base_shape = Vector::Constant(kHalfHours, 0.2) + detail::bump(4, 4, 0.45);
    a[3].temperature_sensitivity = 0.03;
    a[3].rho = 0.7;
    return a;
}

struct WeatherModel {
    double mean = 11.0;               ///< annual mean, degrees C
    double seasonal_amplitude = 7.0;  ///< coldest around 1 January
    double diurnal_amplitude = 3.0;   ///< warmest mid-afternoon
    double ar = 0.95;                 ///< hourly AR(1) coefficient of the weather noise
    double noise_std = 1.5;           ///< stationary std of the weather noise
};

/**
 * On a `special_fraction` of days the ToU schedule carries one Low or High window. A
 * `scenario_share` of those windows are the fixed morning Low (half-hours 10-19) or
 * evening High (40-44) windows; the others have random start and length.
 */
struct TariffPolicy {
    double special_fraction = 0.3;
    double scenario_share = 0.5;
    double low_share = 0.5;
};

/// 0-based half-hours of the fixed scenario windows.
inline constexpr int kLowWindowBegin = 9, kLowWindowEnd = 19;
inline constexpr int kHighWindowBegin = 39, kHighWindowEnd = 44;

struct PopulationSettings {
    std::vector<ArchetypeSpec> archetypes = default_archetypes();
    std::vector<int> counts{50, 50, 50, 50};
    int days = 365;
    Date first_day = make_date(2013, 1, 1);
    double std_fraction = 0.0;  ///< share of households on the flat (Std) tariff
    double scale_spread = 0.2;  ///< log-sd of the per-household consumption multiplier
    WeatherModel weather;
    TariffPolicy tariffs;
    std::uint64_t seed = 0;

    void validate() const {
        if (archetypes.empty()) throw ConfigError("at least one archetype is required");
        if (counts.size() != archetypes.size()) throw ConfigError("one household count per archetype is required");
        for (int c : counts)
            if (c < 0) throw ConfigError("negative household count");
        if (days < 30) throw ConfigError("at least 30 days are required, got " + std::to_string(days));
        for (const auto& a : archetypes) a.validate();
        if (std_fraction < 0.0 || std_fraction > 1.0) throw ConfigError("std_fraction must lie in [0, 1]");
        if (scale_spread < 0.0) throw ConfigError("scale_spread must be non-negative");
        const auto& t = tariffs;
        if (t.special_fraction < 0.0 || t.special_fraction > 1.0 || t.scenario_share < 0.0 || t.scenario_share > 1.0 || t.low_share < 0.0 ||
            t.low_share > 1.0)
            throw ConfigError("tariff policy fractions must lie in [0, 1]");
    }
};

struct SyntheticHousehold {
    std::string id;
    Group group = Group::Tou;
    int archetype = 0;   ///< 0-based index into the archetypes
    double scale = 1.0;  ///< multiplies the whole mean structure and the noise
};

struct SyntheticPopulation {
    std::vector<ArchetypeSpec> archetypes;
    std::vector<SyntheticHousehold> households;
    std::vector<Date> dates;
    std::vector<dataio::TemperatureReading> weather;  ///< hourly
    Matrix temperature;                               ///< T x H, interpolated from `weather`
    std::vector<dataio::TariffProfile> schedule;      ///< common ToU schedule
    std::vector<dataio::DayGrid> grids;               ///< one per household, tariffs as seen by it
    std::size_t clamped_means = 0;
    std::size_t clamped_readings = 0;

    int days() const { return static_cast<int>(dates.size()); }
};

/// Maximal runs of a special tariff, as [begin, end) half-hour ranges.
struct Window {
    Tariff tariff;
    int begin, end;
};

inline std::vector<Window> special_windows(std::span<const Tariff> profile) {
    std::vector<Window> out;
    const int n = static_cast<int>(profile.size());
    for (int h = 0; h < n;) {
        const Tariff p = profile[static_cast<std::size_t>(h)];
        int e = h + 1;
        while (e < n && profile[static_cast<std::size_t>(e)] == p) ++e;
        if (is_special(p)) out.push_back({p, h, e});
        h = e;
    }
    return out;
}

/**
 * Expected consumption of one household-day. Each special window shifts its half-hours
 * by delta, the `side_width` half-hours next to it by delta / 2, and takes back
 * `rebound` x (window energy change) spread evenly over the half-hours outside it.
 * Negative values are set to zero and counted in `clamped`.
 */
inline Vector mean_profile(const ArchetypeSpec& a, double scale, std::span<const double> temperature, int working_day,
                           std::span<const Tariff> tariffs, std::size_t* clamped = nullptr) {
    Vector m(kHalfHours);
    for (int h = 0; h < kHalfHours; ++h)
        m[h] = a.base_shape[h] + a.temperature_sensitivity * std::max(0.0, a.comfort_temperature - temperature[static_cast<std::size_t>(h)]) +
               a.working_day_offset * working_day;
    for (const auto& w : special_windows(tariffs)) {
        const double d = a.delta(w.tariff);
        const int len = w.end - w.begin;
        for (int h = w.begin; h < w.end; ++h) m[h] += d;
        for (int k = 1; k <= a.side_width; ++k) {
            if (w.begin - k >= 0) m[w.begin - k] += 0.5 * d;
            if (w.end - 1 + k < kHalfHours) m[w.end - 1 + k] += 0.5 * d;
        }
        if (len < kHalfHours) {
            const double back = a.rebound * d * len / static_cast<double>(kHalfHours - len);
            for (int h = 0; h < kHalfHours; ++h)
                if (h < w.begin || h >= w.end) m[h] -= back;
        }
    }
    m *= scale;
    for (double& v : m)
        if (v < 0.0) {
            v = 0.0;
            if (clamped) ++*clamped;
        }
    return m;
}

/// Hourly temperatures: annual and daily cycles plus AR(1) noise.
inline std::vector<dataio::TemperatureReading> simulate_weather(const WeatherModel& w, Date first_day, int days, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double innovation = w.noise_std * std::sqrt(1.0 - w.ar * w.ar);
    const Date jan1 = make_date(static_cast<int>(std::chrono::year_month_day{first_day}.year()), 1, 1);
    double noise = w.noise_std * normal(rng);
    std::vector<dataio::TemperatureReading> out;
    for (int t = 0; t < days; ++t) {
        const double doy = static_cast<double>((first_day - jan1).count() + t);
        for (int hour = 0; hour < 24; ++hour) {
            const double seasonal = -w.seasonal_amplitude * std::cos(2.0 * std::numbers::pi * (doy + hour / 24.0) / 365.25);
            const double diurnal = -w.diurnal_amplitude * std::cos(2.0 * std::numbers::pi * (hour - 3) / 24.0);
            out.push_back({dataio::slot_of(first_day + std::chrono::days{t}, 2 * hour), w.mean + seasonal + diurnal + noise});
            noise = w.ar * noise + innovation * normal(rng);
        }
    }
    return out;
}

inline std::vector<dataio::TariffProfile> simulate_schedule(const TariffPolicy& policy, int days, std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<dataio::TariffProfile> sched(static_cast<std::size_t>(days));
    for (auto& day : sched) {
        day.fill(Tariff::Normal);
        if (u(rng) >= policy.special_fraction) continue;
        const bool low = u(rng) < policy.low_share;
        int begin, end;
        if (u(rng) < policy.scenario_share) {
            begin = low ? kLowWindowBegin : kHighWindowBegin;
            end = low ? kLowWindowEnd : kHighWindowEnd;
        } else {
            const int len = low ? std::uniform_int_distribution<int>(4, 12)(rng) : std::uniform_int_distribution<int>(3, 8)(rng);
            begin = std::uniform_int_distribution<int>(0, kHalfHours - len)(rng);
            end = begin + len;
        }
        std::fill(day.begin() + begin, day.begin() + end, low ? Tariff::Low : Tariff::High);
    }
    return sched;
}

/**
 * Simulates the population. Households are listed archetype by archetype; Std households
 * see the flat tariff and do not respond to the schedule. The noise of each household is
 * one AR(1) series running through all its half-hours, scaled by the tariff in force.
 */
inline SyntheticPopulation generate_population(const PopulationSettings& s) {
    s.validate();
    SyntheticPopulation pop;
    pop.archetypes = s.archetypes;
    for (int t = 0; t < s.days; ++t) pop.dates.push_back(s.first_day + std::chrono::days{t});
    pop.weather = simulate_weather(s.weather, s.first_day, s.days, derive_seed(s.seed, "synth-weather"));
    pop.temperature = dataio::half_hourly_temperature(pop.weather, s.first_day, s.days);
    pop.schedule = simulate_schedule(s.tariffs, s.days, derive_seed(s.seed, "synth-tariffs"));

    dataio::TariffProfile flat;
    flat.fill(Tariff::Flat);
    std::vector<int> working(static_cast<std::size_t>(s.days));
    for (int t = 0; t < s.days; ++t) working[static_cast<std::size_t>(t)] = is_working_day(pop.dates[static_cast<std::size_t>(t)]) ? 1 : 0;

    int serial = 0;
    for (std::size_t a = 0; a < s.archetypes.size(); ++a)
        for (int c = 0; c < s.counts[a]; ++c, ++serial) {
            const auto& spec = s.archetypes[a];
            Rng rng(derive_seed(s.seed, "synth-household", static_cast<std::uint64_t>(serial)));
            std::normal_distribution<double> normal(0.0, 1.0);
            std::uniform_real_distribution<double> u(0.0, 1.0);
            SyntheticHousehold hh;
            char id[16];
            std::snprintf(id, sizeof id, "H%04d", serial + 1);
            hh.id = id;
            hh.archetype = static_cast<int>(a);
            hh.group = u(rng) < s.std_fraction ? Group::Std : Group::Tou;
            hh.scale = std::exp(s.scale_spread * normal(rng));

            dataio::DayGrid grid;
            grid.consumption.resize(s.days, kHalfHours);
            grid.tariffs = hh.group == Group::Tou ? pop.schedule : std::vector<dataio::TariffProfile>(static_cast<std::size_t>(s.days), flat);
            const double innovation = std::sqrt(1.0 - spec.rho * spec.rho);
            double noise = normal(rng);
            for (int t = 0; t < s.days; ++t) {
                const auto& tariffs = grid.tariffs[static_cast<std::size_t>(t)];
                const Vector tau = pop.temperature.row(t).transpose();
                const Vector m = mean_profile(spec, hh.scale, std::span<const double>(tau.data(), kHalfHours), working[static_cast<std::size_t>(t)],
                                              tariffs, &pop.clamped_means);
                for (int h = 0; h < kHalfHours; ++h) {
                    const double sd = spec.noise_std[static_cast<std::size_t>(tariff_index(tariffs[static_cast<std::size_t>(h)]))] * hh.scale;
                    double y = m[h] + sd * noise;
                    if (y < 0.0) {
                        y = 0.0;
                        ++pop.clamped_readings;
                    }
                    grid.consumption(t, h) = y;
                    noise = spec.rho * noise + innovation * normal(rng);
                }
            }
            pop.households.push_back(std::move(hh));
            pop.grids.push_back(std::move(grid));
        }
    return pop;
}

// ---------------------------------------------------------------------------
// Export

inline void write_records(std::ostream& out, const SyntheticPopulation& pop) {
    out << "household_id,timestamp,kwh,tariff,group\n";
    for (std::size_t i = 0; i < pop.households.size(); ++i) {
        const auto& hh = pop.households[i];
        const auto& g = pop.grids[i];
        const auto group = to_string(hh.group);
        for (int t = 0; t < pop.days(); ++t)
            for (int h = 0; h < kHalfHours; ++h)
                out << hh.id << ',' << dataio::format_timestamp(dataio::slot_of(pop.dates[static_cast<std::size_t>(t)], h)) << ','
                    << csv::num(g.consumption(t, h)) << ',' << to_string(g.tariffs[static_cast<std::size_t>(t)][static_cast<std::size_t>(h)]) << ','
                    << group << '\n';
    }
}

inline void write_weather(std::ostream& out, const SyntheticPopulation& pop) {
    out << "timestamp,temp_c\n";
    for (const auto& r : pop.weather) out << dataio::format_timestamp(r.slot) << ',' << csv::num(r.celsius) << '\n';
}

/// Planted parameters of one household; the deltas are in the household's own kWh.
struct TruthRow {
    std::string household_id;
    int archetype = 0;  ///< 1-based
    double delta_low = 0.0, delta_high = 0.0, rebound = 0.0;
};

inline std::vector<TruthRow> ground_truth(const SyntheticPopulation& pop) {
    std::vector<TruthRow> rows;
    for (const auto& hh : pop.households) {
        const auto& a = pop.archetypes[static_cast<std::size_t>(hh.archetype)];
        const bool responds = hh.group == Group::Tou;
        rows.push_back({hh.id, hh.archetype + 1, responds ? hh.scale * a.delta_low : 0.0, responds ? hh.scale * a.delta_high : 0.0,
                        responds ? a.rebound : 0.0});
    }
    return rows;
}

inline void write_ground_truth(std::ostream& out, std::span<const TruthRow> rows) {
    out << "household_id,archetype,delta_low,delta_high,rebound\n";
    for (const auto& r : rows)
        out << r.household_id << ',' << r.archetype << ',' << csv::num(r.delta_low) << ',' << csv::num(r.delta_high) << ',' << csv::num(r.rebound) << '\n';
}

inline std::vector<TruthRow> read_ground_truth(std::istream& in) {
    csv::Reader reader(in, {"household_id", "archetype", "delta_low", "delta_high", "rebound"});
    std::vector<TruthRow> rows;
    std::vector<std::string_view> f;
    while (reader.next(f)) {
        const auto line = reader.line();
        rows.push_back({std::string(f[0]), static_cast<int>(csv::parse_int(f[1], line)), csv::parse_double(f[2], line), csv::parse_double(f[3], line),
                        csv::parse_double(f[4], line)});
    }
    return rows;
}

}  // namespace drsim::synthdata
