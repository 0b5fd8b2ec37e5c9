#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

/**
 * @file core.hpp
 * @brief Shared vocabulary: half-hour resolution, tariffs, calendar dates, errors and seeding.
 */

namespace drsim {

/// Half-hourly readings per day.
inline constexpr int kHalfHours = 48;

/// Number of distinct tariffs in a ToU program (Low, Normal, High).
inline constexpr int kTariffCount = 3;

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One day of half-hourly consumption in kWh per half-hour; index 0 covers 00:00-00:30.
using DailyProfile = std::vector<double>;

enum class Tariff : std::uint8_t { Low = 0, Normal = 1, High = 2, Flat = 3 };

inline constexpr std::array<Tariff, kTariffCount> kTouTariffs{Tariff::Low, Tariff::Normal, Tariff::High};

enum class Group : std::uint8_t { Tou, Std };

// Errors. Every failure the library reports derives from drsim::Error so the CLI can
// translate it into a single machine-readable line.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what) : std::runtime_error(what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

/// Malformed input. `line_number` is 0 when the input is not line oriented.
struct ParseError : Error {
    ParseError(const std::string& what, std::size_t line)
        : Error("parse_error", "line " + std::to_string(line) + ": " + what), line_number(line) {}
    explicit ParseError(const std::string& what) : Error("parse_error", what), line_number(0) {}
    std::size_t line_number;
};

struct ValidationError : Error {
    explicit ValidationError(const std::string& what) : Error("validation_error", what) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error("config_error", what) {}
};

struct NumericalError : Error {
    explicit NumericalError(const std::string& what) : Error("numerical_error", what) {}
};

inline std::string_view to_string(Tariff p) {
    switch (p) {
        case Tariff::Low: return "LOW";
        case Tariff::Normal: return "NORMAL";
        case Tariff::High: return "HIGH";
        case Tariff::Flat: return "FLAT";
    }
    return "?";
}

inline Tariff parse_tariff(std::string_view s) {
    if (s == "LOW") return Tariff::Low;
    if (s == "NORMAL") return Tariff::Normal;
    if (s == "HIGH") return Tariff::High;
    if (s == "FLAT") return Tariff::Flat;
    throw ValidationError("unknown tariff label '" + std::string(s) + "'");
}

inline std::string_view to_string(Group g) { return g == Group::Tou ? "TOU" : "STD"; }

inline Group parse_group(std::string_view s) {
    if (s == "TOU") return Group::Tou;
    if (s == "STD") return Group::Std;
    throw ValidationError("unknown group '" + std::string(s) + "'");
}

inline bool is_special(Tariff p) { return p == Tariff::Low || p == Tariff::High; }

/// Index of a ToU tariff into a (Low, Normal, High) block; Flat maps to Normal.
inline int tariff_index(Tariff p) { return p == Tariff::Flat ? 1 : static_cast<int>(p); }

// ---------------------------------------------------------------------------
// Calendar

using Date = std::chrono::sys_days;

inline Date make_date(int y, unsigned m, unsigned d) {
    return Date{std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{d}};
}

inline std::string format_date(Date d) {
    const std::chrono::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

inline Date parse_date(std::string_view s) {
    int y = 0;
    unsigned m = 0, d = 0;
    if (s.size() < 10 || std::sscanf(std::string(s.substr(0, 10)).c_str(), "%d-%u-%u", &y, &m, &d) != 3)
        throw ValidationError("malformed date '" + std::string(s) + "'");
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) throw ValidationError("invalid date '" + std::string(s) + "'");
    return Date{ymd};
}

inline bool is_working_day(Date d) {
    const std::chrono::weekday wd{d};
    return wd != std::chrono::Saturday && wd != std::chrono::Sunday;
}

inline unsigned month_of(Date d) { return static_cast<unsigned>(std::chrono::year_month_day{d}.month()); }

// ---------------------------------------------------------------------------
// Seeding

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives an independent stream seed for a named stage from the master seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view stage, std::uint64_t index = 0) {
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : stage) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
    return splitmix64(splitmix64(seed ^ h) + index);
}

using Rng = std::mt19937_64;

/// Overwrites every coefficient with an independent standard normal draw (storage order).
template <class Derived>
void fill_standard_normal(Rng& rng, Eigen::DenseBase<Derived>& m) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = normal(rng);
}

inline Vector standard_normal(Rng& rng, Eigen::Index n) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
    return v;
}

}  // namespace drsim
