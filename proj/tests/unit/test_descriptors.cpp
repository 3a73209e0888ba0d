#include <cmath>
#include <random>

#include "doctest.h"
#include "smet/descriptors.hpp"
#include "smet/error.hpp"

using namespace smet;

namespace {
const Timestamp t0 = parse_timestamp("2023-01-03 08:00:00");
const Duration hour{3600};
}  // namespace

TEST_CASE("segment_series tiling and remainder") {
    std::vector<double> x(10);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i + 1);
    auto s = segment_series(x, t0, hour, 5);
    REQUIRE(s.size() == 2);
    CHECK(s[0].values == std::vector<double>{1, 2, 3, 4, 5});
    CHECK(s[1].values == std::vector<double>{6, 7, 8, 9, 10});
    CHECK(s[1].index == 2);
    CHECK(s[1].start == t0 + 5 * hour);
    CHECK(s[1].end - s[1].start == 4 * hour);

    std::vector<double> y(672, 0.0);
    CHECK(segment_series(y, t0, hour, 96).size() == 7);

    std::vector<double> z{1, 2, 3, 4, 5, 6, 7};
    auto r = segment_series(z, t0, hour, 3);
    REQUIRE(r.size() == 2);
    CHECK(r[1].values.back() == 6);

    CHECK_THROWS_AS(segment_series(z, t0, hour, 8), SegmentTooLong);
}

TEST_CASE("segment reconstruction is bitwise") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n;
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> x(37 + rep);
        for (auto& v : x) v = n(rng);
        const std::size_t S = 2 + rep % 9;
        auto segs = segment_series(x, t0, hour, S);
        std::vector<double> cat;
        for (const auto& s : segs) cat.insert(cat.end(), s.values.begin(), s.values.end());
        REQUIRE(cat.size() == (x.size() / S) * S);
        CHECK(std::equal(cat.begin(), cat.end(), x.begin()));
    }
}

TEST_CASE("stat_descriptor examples") {
    auto a = stat_descriptor(std::vector<double>{1, 2, 3, 4});
    CHECK(a.mean == 2.5);
    CHECK(a.std == doctest::Approx(std::sqrt(1.25)));
    CHECK(a.change == 3.0);
    auto b = stat_descriptor(std::vector<double>{5, 5, 5});
    CHECK(b.mean == 5.0);
    CHECK(b.std == 0.0);
    CHECK(b.change == 0.0);
    auto c = stat_descriptor(std::vector<double>{3, 1});
    CHECK(c.mean == 2.0);
    CHECK(c.std == 1.0);
    CHECK(c.change == -2.0);
}

TEST_CASE("stat_descriptor translation and scale covariance") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n;
    std::uniform_real_distribution<double> u(0.1, 5.0);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<double> x(24);
        for (auto& v : x) v = n(rng);
        const double c = 3.0 * n(rng), k = u(rng);
        auto base = stat_descriptor(x);
        std::vector<double> shifted = x, scaled = x;
        for (auto& v : shifted) v += c;
        for (auto& v : scaled) v *= k;
        auto s = stat_descriptor(shifted);
        auto m = stat_descriptor(scaled);
        CHECK(std::abs(s.mean - (base.mean + c)) <= 1e-12);
        CHECK(std::abs(s.std - base.std) <= 1e-12);
        CHECK(std::abs(s.change - base.change) <= 1e-12);
        CHECK(std::abs(m.mean - k * base.mean) <= 1e-12);
        CHECK(std::abs(m.std - k * base.std) <= 1e-12);
        CHECK(std::abs(m.change - k * base.change) <= 1e-12);
    }
}

TEST_CASE("timestamp descriptor formatting") {
    CHECK(render_timestamp_descriptor(t0, parse_timestamp("2023-01-03 12:00:00")) ==
          "The time range of this sequence is from 03-Jan-2023 08:00 to 03-Jan-2023 12:00");
    CHECK(render_timestamp_descriptor(t0, t0) ==
          "The time range of this sequence is from 03-Jan-2023 08:00 to 03-Jan-2023 08:00");
    CHECK(render_timestamp_descriptor(parse_timestamp("2020-12-31 23:00:00"), parse_timestamp("2021-01-01 03:00:00")) ==
          "The time range of this sequence is from 31-Dec-2020 23:00 to 01-Jan-2021 03:00");
}

TEST_CASE("prompt rendering") {
    const std::string ts = render_timestamp_descriptor(t0, parse_timestamp("2023-01-03 12:00:00"));
    auto p = render_prompt(ts, StatDescriptor{2.5, 1.1180, 3.0});
    CHECK(p.stat_text == "Mean is 2.5000, standard deviation is 1.1180, change is 3.0000.");
    CHECK(p.prompt == ts + " " + p.stat_text);
    auto z = render_prompt(ts, StatDescriptor{});
    CHECK(z.stat_text == "Mean is 0.0000, standard deviation is 0.0000, change is 0.0000.");
    auto neg = render_prompt(ts, StatDescriptor{-0.00001, 0.0, -2.0});
    CHECK(neg.stat_text == "Mean is 0.0000, standard deviation is 0.0000, change is -2.0000.");
}

TEST_CASE("prompt determinism") {
    std::vector<double> x{0.25, -1.5, 3.75, 2.0, 0.125, 9.0};
    auto a = describe_segments(segment_series(x, t0, hour, 3));
    auto b = describe_segments(segment_series(x, t0, hour, 3));
    REQUIRE(a.size() == 2);
    CHECK(a[0].prompt == b[0].prompt);
    CHECK(a[1].prompt == b[1].prompt);
    CHECK(a[1].segment_index == 2);
    CHECK(a[0].prompt.rfind("The time range of this sequence is from 03-Jan-2023 08:00 to 03-Jan-2023 10:00", 0) == 0);
}
