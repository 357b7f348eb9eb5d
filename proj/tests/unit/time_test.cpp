#include "stormlog/time.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <random>

#include "stormlog/value.hpp"

using namespace stormlog;

TEST(Time, CivilDates) {
  EXPECT_EQ(time::from_civil(1970, 1, 1), 0);
  EXPECT_EQ(time::from_civil(2019, 6, 26), 1561507200000);
  EXPECT_EQ(time::from_civil(2000, 3, 1) - time::from_civil(2000, 2, 28), 2 * time::kMillisPerDay);
  EXPECT_EQ(time::from_civil(1969, 12, 31), -time::kMillisPerDay);
}

TEST(Time, FloorDivRoundsDown) {
  EXPECT_EQ(time::floor_div(7, 2), 3);
  EXPECT_EQ(time::floor_div(-7, 2), -4);
  EXPECT_EQ(time::floor_div(-8, 2), -4);
  EXPECT_EQ(time::day_start(-1), -time::kMillisPerDay);
}

TEST(Time, IsoRoundTrip) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 10'000; ++i) {
    std::int64_t t = static_cast<std::int64_t>(rng() % 4'000'000'000'000ULL);
    ASSERT_EQ(time::parse_iso8601(time::format_iso8601(t)), t);
    ASSERT_EQ(time::day_start(t) + *time::parse_time_of_day(time::format_time_of_day(t)), t);
    ASSERT_EQ(time::parse_date(time::format_date(t)), time::day_start(t));
  }
}

TEST(Time, IsoVariants) {
  auto base = time::from_civil(2019, 6, 26) + 10 * time::kMillisPerHour;
  EXPECT_EQ(time::parse_iso8601("2019-06-26T10:00:00Z"), base);
  EXPECT_EQ(time::parse_iso8601("2019-06-26 10:00:00.5"), base + 500);
  EXPECT_EQ(time::parse_iso8601("2019-06-26T12:00:00.123456+02:00"), base + 123);
  EXPECT_EQ(time::parse_iso8601("2019-06-26T09:30:00-0030"), base);
  EXPECT_EQ(time::parse_iso8601("2019-02-30T00:00:00Z"), std::nullopt);
  EXPECT_EQ(time::parse_iso8601("2019-06-26T24:00:00Z"), std::nullopt);
  EXPECT_EQ(time::parse_time_of_day("23:59:59.999"), time::kMillisPerDay - 1);
  EXPECT_EQ(time::parse_time_of_day("24:00:00.000"), std::nullopt);
  EXPECT_EQ(time::parse_instant("1561507200000"), time::from_civil(2019, 6, 26));
  EXPECT_EQ(time::format_date_dotted(base), "2019.06.26");
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(150.0), "150.0");
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(12.5), "12.5");
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> d(0, 1e9);
  for (int i = 0; i < 10'000; ++i) {
    double x = d(rng);
    auto s = format_double(x);
    ASSERT_EQ(std::strtod(s.c_str(), nullptr), x) << s;
    ASSERT_NE(s.find('.'), std::string::npos) << s;
  }
}
