#include <cmath>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "drsim/dataio.hpp"

using namespace drsim;
using namespace drsim::dataio;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string toy_csv(int days, int drop_every = 0) {
    std::ostringstream os;
    os << "household_id,timestamp,kwh,tariff,group\n";
    const Date d0 = make_date(2013, 1, 1);
    int k = 0;
    for (const char* id : {"A", "B"})
        for (int t = 0; t < days; ++t)
            for (int h = 0; h < kHalfHours; ++h, ++k) {
                const bool missing = drop_every > 0 && std::string(id) == "B" && k % drop_every == 0;
                os << id << ',' << format_timestamp(slot_of(d0 + std::chrono::days{t}, h)) << ',' << (missing ? "" : "0.5") << ','
                   << (std::string(id) == "A" ? (h >= 10 && h < 20 ? "LOW" : "NORMAL") : "FLAT") << ',' << (std::string(id) == "A" ? "TOU" : "STD")
                   << '\n';
            }
    return os.str();
}

// Independent oracle: straight line through (x0, y0) and (x1, y1).
double line(double x0, double y0, double x1, double y1, double x) { return y0 + (y1 - y0) * (x - x0) / (x1 - x0); }

}  // namespace

TEST(Ingest, CompleteToyFileHasTwoHouseholdsAndNoFlags) {
    std::istringstream in(toy_csv(2));
    const auto set = ingest_records(in);
    ASSERT_EQ(set.households.size(), 2u);
    EXPECT_EQ(set.day_count, 2);
    for (const auto& hh : set.households) {
        EXPECT_FALSE(hh.excluded);
        EXPECT_DOUBLE_EQ(hh.coverage, 1.0);
    }
    EXPECT_EQ(set.households[0].group, Group::Tou);
    EXPECT_EQ(set.households[1].group, Group::Std);
}

TEST(Ingest, NinetyPercentCoverageIsFlagged) {
    std::istringstream in(toy_csv(5, 10));  // every 10th reading of B missing
    const auto set = ingest_records(in);
    EXPECT_FALSE(set.households[0].excluded);
    EXPECT_TRUE(set.households[1].excluded);
    EXPECT_NEAR(set.households[1].coverage, 0.9, 0.01);
}

TEST(Ingest, NegativeConsumptionIsRejected) {
    std::istringstream in("household_id,timestamp,kwh,tariff,group\nA,2013-01-01T00:00,-0.1,NORMAL,TOU\n");
    EXPECT_THROW(ingest_records(in), ValidationError);
}

TEST(Ingest, UnknownTariffIsAValidationError) {
    std::istringstream in("household_id,timestamp,kwh,tariff,group\nA,2013-01-01T00:00,0.1,CHEAP,TOU\n");
    try {
        ingest_records(in);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line_number, 2u);
        EXPECT_NE(std::string(e.what()).find("CHEAP"), std::string::npos);
    }
}

TEST(Ingest, MalformedRowReportsLineNumber) {
    std::istringstream in("household_id,timestamp,kwh,tariff,group\nA,2013-01-01T00:00,0.1,NORMAL,TOU\nA,2013-01-01T00:30,0.1\n");
    try {
        ingest_records(in);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line_number, 3u);
    }
}

TEST(Ingest, TimestampsMustBeHalfHourAligned) {
    std::istringstream in("household_id,timestamp,kwh,tariff,group\nA,2013-01-01T00:15,0.1,NORMAL,TOU\n");
    EXPECT_THROW(ingest_records(in), ParseError);
    std::istringstream dup("household_id,timestamp,kwh,tariff,group\nA,2013-01-01T00:00,0.1,NORMAL,TOU\nA,2013-01-01T00:00,0.2,NORMAL,TOU\n");
    EXPECT_THROW(ingest_records(dup), ValidationError);
}

TEST(RepairGaps, MidpointOfSingleGap) {
    std::vector<double> y{1.0, kNaN, 3.0};
    repair_series(y);
    EXPECT_DOUBLE_EQ(y[1], 2.0);
}

TEST(RepairGaps, ThreeMissingHalfHoursAreLinear) {
    std::vector<double> y{1.0, kNaN, kNaN, kNaN, 5.0};
    repair_series(y);
    for (int i = 1; i <= 3; ++i) EXPECT_DOUBLE_EQ(y[static_cast<std::size_t>(i)], line(0, 1.0, 4, 5.0, i));
    EXPECT_DOUBLE_EQ(y[1], 2.0);
    EXPECT_DOUBLE_EQ(y[3], 4.0);
}

TEST(RepairGaps, MissingDayBetweenIdenticalDaysIsCopied) {
    const int H = kHalfHours;
    std::vector<double> y(3 * H);
    for (int h = 0; h < H; ++h) {
        y[static_cast<std::size_t>(h)] = y[static_cast<std::size_t>(2 * H + h)] = 0.1 * h;
        y[static_cast<std::size_t>(H + h)] = kNaN;
    }
    repair_series(y);
    for (int h = 0; h < H; ++h) EXPECT_DOUBLE_EQ(y[static_cast<std::size_t>(H + h)], 0.1 * h);
}

TEST(RepairGaps, LongGapInterpolatesBetweenNeighbouringDays) {
    const int H = kHalfHours;
    std::vector<double> y(4 * H, kNaN);
    for (int h = 0; h < H; ++h) {
        y[static_cast<std::size_t>(h)] = 1.0;
        y[static_cast<std::size_t>(3 * H + h)] = 4.0;
    }
    repair_series(y);
    EXPECT_DOUBLE_EQ(y[static_cast<std::size_t>(H + 5)], line(0, 1.0, 3, 4.0, 1));
    EXPECT_DOUBLE_EQ(y[static_cast<std::size_t>(2 * H + 5)], line(0, 1.0, 3, 4.0, 2));
}

TEST(RepairGaps, EdgeGapCopiesNearestCompleteDay) {
    const int H = kHalfHours;
    std::vector<double> y(2 * H);
    for (int h = 0; h < H; ++h) y[static_cast<std::size_t>(H + h)] = h;
    for (int h = 0; h < 3; ++h) y[static_cast<std::size_t>(h)] = kNaN;
    for (int h = 3; h < H; ++h) y[static_cast<std::size_t>(h)] = 100.0;
    repair_series(y);
    EXPECT_DOUBLE_EQ(y[0], 0.0);
    EXPECT_DOUBLE_EQ(y[2], 2.0);
}

TEST(RepairGaps, EntirelyMissingHouseholdIsUnrecoverable) {
    std::vector<double> y(10, kNaN);
    EXPECT_THROW(repair_series(y), ValidationError);
}

TEST(RepairGaps, IsIdempotentOnRandomGapPatterns) {
    Rng rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> y(5 * kHalfHours);
        for (auto& v : y) v = u(rng) < 0.3 ? kNaN : u(rng);
        if (u(rng) < 0.5)
            for (int h = 0; h < 60; ++h) y[static_cast<std::size_t>(70 + h)] = kNaN;
        y[100] = 0.5;
        repair_series(y);
        for (double v : y) ASSERT_TRUE(std::isfinite(v));
        auto again = y;
        repair_series(again);
        EXPECT_EQ(again, y);
    }
}

TEST(RepairGaps, RecordSetRepairFillsEverySlot) {
    std::istringstream in(toy_csv(3, 7));
    const auto fixed = repair_gaps(ingest_records(in));
    for (const auto& hh : fixed.households) {
        ASSERT_EQ(hh.readings.size(), static_cast<std::size_t>(3 * kHalfHours));
        for (const auto& r : hh.readings) ASSERT_TRUE(r.kwh.has_value());
    }
    const auto again = repair_gaps(fixed);
    for (std::size_t i = 0; i < fixed.households.size(); ++i)
        for (std::size_t k = 0; k < fixed.households[i].readings.size(); ++k)
            EXPECT_EQ(*again.households[i].readings[k].kwh, *fixed.households[i].readings[k].kwh);
}

TEST(SmoothTemperature, ConstantSeriesIsFixedPoint) {
    const Matrix tau = Matrix::Constant(3, kHalfHours, 10.0);
    for (double a : {0.0, 0.5, 0.998, 1.0}) {
        const auto s = smooth_temperature(tau, a);
        EXPECT_TRUE((s.per_half_hour.array() == 10.0).all());
        EXPECT_TRUE((s.daily.array() == 10.0).all());
    }
}

TEST(SmoothTemperature, HandRecursion) {
    Matrix tau(1, 2);
    tau << 0.0, 1.0;
    const auto s = smooth_temperature(tau, 0.5);
    EXPECT_DOUBLE_EQ(s.per_half_hour(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(s.per_half_hour(0, 1), 0.5);
    EXPECT_DOUBLE_EQ(kDefaultSmoothing, 0.998);
}

TEST(SmoothTemperature, RejectsOutOfRangeParameter) {
    EXPECT_THROW(smooth_temperature(Matrix::Zero(1, 2), 1.5), ConfigError);
    EXPECT_THROW(smooth_temperature(Matrix::Zero(1, 2), -0.1), ConfigError);
}

TEST(SmoothTemperature, StaysWithinRawRange) {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix tau = Matrix::Random(10, kHalfHours) * 15.0;
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const auto s = smooth_temperature(tau, u(rng));
        EXPECT_GE(s.per_half_hour.minCoeff(), tau.minCoeff());
        EXPECT_LE(s.per_half_hour.maxCoeff(), tau.maxCoeff());
    }
}

TEST(Calendar, WeekendsAndPositionInYear) {
    std::vector<Date> dates;
    for (int t = 0; t < 365; ++t) dates.push_back(make_date(2013, 1, 1) + std::chrono::days{t});
    const auto cal = build_calendar(dates);
    EXPECT_EQ(cal.working_day[4], 0);  // 2013-01-05 is a Saturday
    EXPECT_EQ(cal.working_day[5], 0);
    EXPECT_EQ(cal.working_day[6], 1);
    EXPECT_DOUBLE_EQ(cal.position_in_year[0], 0.0);
    EXPECT_DOUBLE_EQ(cal.position_in_year[364], 1.0);
    EXPECT_DOUBLE_EQ(cal.position_in_year[182], 182.0 / 364.0);  // day 183
    for (int t = 1; t < 365; ++t) EXPECT_GT(cal.position_in_year[t], cal.position_in_year[t - 1]);
}

TEST(Calendar, NonContiguousDatesRejected) {
    std::vector<Date> dates{make_date(2013, 1, 1), make_date(2013, 1, 3)};
    EXPECT_THROW(build_calendar(dates), ValidationError);
}

TEST(TemperaturePca, ExactThreeDimensionalSubspace) {
    Rng rng(11);
    const Matrix basis = Matrix::Random(3, 49);
    Matrix coords(40, 3);
    for (Eigen::Index i = 0; i < coords.size(); ++i) coords.data()[i] = standard_normal(rng, 1)[0];
    const Matrix rows = (coords * basis).rowwise() + Eigen::RowVectorXd::Constant(49, 5.0);
    const auto pca = TemperaturePca::fit(rows);
    EXPECT_NEAR(pca.explained_variance_ratio().head(3).sum(), 1.0, 1e-12);
    EXPECT_EQ(TemperaturePca::kComponents, 3);
}

TEST(TemperaturePca, IsotropicNoiseSplitsVarianceEvenly) {
    Rng rng(5);
    Matrix rows(20000, 4);
    for (Eigen::Index i = 0; i < rows.size(); ++i) rows.data()[i] = standard_normal(rng, 1)[0];
    const auto pca = TemperaturePca::fit(rows);
    for (int c = 0; c < 4; ++c) EXPECT_NEAR(pca.explained_variance_ratio()[c], 0.25, 0.02);
}

TEST(TemperaturePca, RankDeficientInputListsRank) {
    Matrix rows = Matrix::Zero(10, 5);
    for (int i = 0; i < 10; ++i) rows(i, 0) = rows(i, 1) = i;
    try {
        TemperaturePca::fit(rows);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("rank 1"), std::string::npos);
    }
}

TEST(TemperaturePca, PropertiesOnRandomInputs) {
    for (int seed = 0; seed < 5; ++seed) {
        std::srand(static_cast<unsigned>(seed));
        const Matrix rows = Matrix::Random(30, 49) * 4.0;
        const auto pca = TemperaturePca::fit(rows);
        const Matrix& v = pca.directions();
        EXPECT_LT((v.transpose() * v - Matrix::Identity(v.cols(), v.cols())).norm(), 1e-10);
        const Vector& ev = pca.explained_variance_ratio();
        for (Eigen::Index i = 1; i < ev.size(); ++i) EXPECT_LE(ev[i], ev[i - 1] + 1e-15);
        for (int i = 0; i < 30; ++i) {
            const Vector r = rows.row(i).transpose();
            EXPECT_LT((pca.reconstruct(r, pca.component_count()) - r).norm() / r.norm(), 1e-10);
            for (double c : pca.transform(r)) {
                EXPECT_GE(c, 0.0);
                EXPECT_LE(c, 1.0);
            }
        }
    }
}

TEST(Partition, SizesAndDeterminism) {
    const auto p = partition_days(365, 0.75, 42);
    EXPECT_EQ(p.train.size(), 273u);
    EXPECT_EQ(p.test.size(), 92u);
    EXPECT_EQ(partition_days(4, 0.75, 1).train.size(), 3u);
    const auto q = partition_days(365, 0.75, 42);
    EXPECT_EQ(p.train, q.train);
    EXPECT_EQ(p.test, q.test);
    std::vector<int> all = p.train;
    all.insert(all.end(), p.test.begin(), p.test.end());
    std::sort(all.begin(), all.end());
    for (int i = 0; i < 365; ++i) EXPECT_EQ(all[static_cast<std::size_t>(i)], i);
    EXPECT_THROW(partition_days(10, 1.0, 1), ConfigError);
}

TEST(ConditionalVector, LayoutAndIndicators) {
    TariffProfile normal;
    normal.fill(Tariff::Normal);
    const auto x = build_conditional_vector({0.1, 0.2, 0.3}, 0.5, 1, normal);
    ASSERT_EQ(x.size(), 101);
    EXPECT_EQ(conditional_dimension(), 101);
    EXPECT_EQ(x.tail(96).sum(), 0.0);
    EXPECT_DOUBLE_EQ(x[0], 0.1);
    EXPECT_DOUBLE_EQ(x[3], 0.5);
    EXPECT_DOUBLE_EQ(x[4], 1.0);

    TariffProfile low = normal;
    for (int h = 9; h <= 18; ++h) low[static_cast<std::size_t>(h)] = Tariff::Low;  // half-hours 10..19
    const auto y = build_conditional_vector({0, 0, 0}, 0, 0, low);
    EXPECT_EQ(y.segment(5, 48).sum(), 10.0);
    EXPECT_EQ(y.segment(53, 48).sum(), 0.0);
    EXPECT_EQ(y[5 + 9], 1.0);
    EXPECT_EQ(y[5 + 19], 0.0);

    for (int n : {1, 2, 7, 48}) {
        std::vector<Tariff> p(static_cast<std::size_t>(n), Tariff::High);
        EXPECT_EQ(build_conditional_vector({0, 0, 0}, 0, 0, p).size(), 5 + 2 * n);
    }
}

TEST(GamFeatures, ProjectionOfDayFeatures) {
    std::vector<Date> dates;
    for (int t = 0; t < 20; ++t) dates.push_back(make_date(2013, 3, 1) + std::chrono::days{t});
    Matrix tau(20, kHalfHours);
    for (int t = 0; t < 20; ++t)
        for (int h = 0; h < kHalfHours; ++h) tau(t, h) = 5.0 + t * 0.3 + 4.0 * std::sin(h / 7.0 + t) + 0.1 * ((t * 7 + h * 3) % 5);
    const auto f = build_day_features(dates, tau, 0.9, 0.75, 1);
    const auto x = build_gam_features(f, 3, 17);
    ASSERT_EQ(x.size(), 4u);
    EXPECT_EQ(x[0], f.temperature(3, 17));
    EXPECT_EQ(x[1], f.smoothed.daily[3]);
    EXPECT_EQ(x[2], static_cast<double>(f.calendar.working_day[3]));
    EXPECT_EQ(x[3], f.calendar.position_in_year[3]);
    EXPECT_THROW(build_gam_features(f, 3, 48), std::out_of_range);
    EXPECT_THROW(build_gam_features(f, 3, -1), std::out_of_range);
    EXPECT_EQ(build_conditional_vector(f, 3, TariffProfile{}).size(), 101);
}

TEST(Temperature, HourlyToHalfHourlyIsLinear) {
    std::istringstream in("timestamp,temp_c\n2013-01-01T00:00,0\n2013-01-01T01:00,2\n2013-01-01T02:00,4\n");
    const auto r = ingest_temperature(in);
    const Matrix tau = half_hourly_temperature(r, make_date(2013, 1, 1), 1);
    EXPECT_DOUBLE_EQ(tau(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(tau(0, 1), 1.0);
    EXPECT_DOUBLE_EQ(tau(0, 2), 2.0);
    EXPECT_DOUBLE_EQ(tau(0, 3), 3.0);
    EXPECT_DOUBLE_EQ(tau(0, 47), 4.0);
}
