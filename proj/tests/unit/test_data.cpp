#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "helpers.hpp"
#include "smet/data.hpp"
#include "smet/error.hpp"

using namespace smet;

namespace {

std::string hourly_csv(std::size_t rows, std::size_t cols, const std::string& start = "2016-07-01 00:00:00") {
    std::string s = "date";
    for (std::size_t c = 0; c < cols; ++c) s += ",c" + std::to_string(c);
    s += "\n";
    const auto t0 = parse_timestamp(start);
    for (std::size_t r = 0; r < rows; ++r) {
        s += format_timestamp(t0 + std::chrono::hours(r));
        for (std::size_t c = 0; c < cols; ++c) s += "," + std::to_string(r * 0.5 + c);
        s += "\n";
    }
    return s;
}

}  // namespace

TEST_CASE("timestamps round trip") {
    const auto t = parse_timestamp("2023-01-03 08:00:00");
    CHECK(format_timestamp(t) == "2023-01-03 08:00:00");
    CHECK(parse_timestamp("2023-01-03 08:00") == t);
    CHECK_THROWS_AS(parse_timestamp("yesterday"), ParseError);
}

TEST_CASE("load_csv: minimal hourly file") {
    auto p = testutil::write_text("four.csv", hourly_csv(4, 1));
    auto f = load_csv(p);
    CHECK(f.length() == 4);
    CHECK(f.channels() == 1);
    CHECK(f.freq == std::chrono::hours(1));
    CHECK(f.values(3, 0) == doctest::Approx(1.5));
}

TEST_CASE("load_csv: ETTh1-shaped frame") {
    auto p = testutil::write_text("etth1.csv", hourly_csv(17420, 7));
    auto f = load_csv(p);
    CHECK(f.length() == 17420);
    CHECK(f.channels() == 7);
}

TEST_CASE("load_csv: errors") {
    // rows and columns are 1-based file positions, header included
    SUBCASE("missing hour") {
        std::string s = "date,OT\n2016-07-01 00:00:00,1\n2016-07-01 01:00:00,2\n2016-07-01 03:00:00,3\n";
        CHECK_THROWS_AS(load_csv(testutil::write_text("gap.csv", s)), MalformedSeries);
    }
    SUBCASE("non-numeric cell names row and column") {
        std::string s = "date,a,b\n2016-07-01 00:00:00,1,2\n2016-07-01 01:00:00,1,oops\n";
        try {
            load_csv(testutil::write_text("bad.csv", s));
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("row 3") != std::string::npos);
            CHECK(msg.find("column 3") != std::string::npos);
        }
    }
    SUBCASE("single row") {
        CHECK_THROWS_AS(load_csv(testutil::write_text("one.csv", hourly_csv(1, 1))), TooShort);
    }
}

TEST_CASE("csv write/load round trip is exact") {
    auto f = testutil::random_frame(50, 3, 11);
    auto p = testutil::temp_path("rt.csv");
    write_csv(f, p);
    auto g = load_csv(p);
    CHECK(g.values == f.values);
    CHECK(g.names == f.names);
    CHECK(g.start == f.start);
}

TEST_CASE("make_splits: Table-1 style counts") {
    SUBCASE("ETTh1 shape") {
        auto f = testutil::random_frame(17420, 7, 1);
        auto s = make_splits(f, {8545, 2881, 2881, 672}, 96);
        CHECK(s.train.begin == 0);
        CHECK(s.train.end == 8545);
        CHECK(s.val.end == 11426);
        CHECK(s.test.end == 14307);
        CHECK(s.val_samples == 2881 - 96 + 1);
        CHECK(s.test_samples == 2881 - 96 + 1);
    }
    SUBCASE("ETTm1 shape") {
        auto f = testutil::random_frame(69680, 1, 1);
        auto s = make_splits(f, {34465, 11521, 11521, 672}, 96);
        CHECK(s.train.end == 34465);
        CHECK(s.val.end == 45986);
        CHECK(s.test.end == 57507);
    }
    SUBCASE("ranges tile without gaps") {
        auto f = testutil::random_frame(100, 1, 1);
        auto s = make_splits(f, {50, 20, 30, 8}, 4);
        CHECK(s.train.begin == 0);
        CHECK(s.val.begin == s.train.end);
        CHECK(s.test.begin == s.val.end);
        CHECK(s.test.end == 100);
    }
    SUBCASE("too short") {
        auto f = testutil::random_frame(20, 1, 1);
        CHECK_THROWS_AS(make_splits(f, {10, 2, 2, 8}, 4), SplitTooShort);
        CHECK_THROWS_AS(make_splits(f, {12, 12, 12, 8}, 4), SplitTooShort);
    }
}

TEST_CASE("normalize: hand z-score") {
    TimeSeriesFrame f;
    f.values = Matrix(3, 1);
    f.values.data = {2, 4, 6};
    auto st = compute_stats(f, {0, 3});
    CHECK(st.mean[0] == doctest::Approx(4.0));
    CHECK(st.std[0] == doctest::Approx(1.63299).epsilon(1e-5));
    auto n = normalize(f, st);
    CHECK(n.values(0, 0) == doctest::Approx(-1.2247).epsilon(1e-4));
    CHECK(n.values(1, 0) == 0.0);
    CHECK(n.values(2, 0) == doctest::Approx(1.2247).epsilon(1e-4));
}

TEST_CASE("normalize: constant channel rejected, channel mismatch rejected") {
    TimeSeriesFrame f;
    f.values = Matrix(4, 2, 3.0);
    f.values(1, 1) = 1.0;
    CHECK_THROWS_AS(compute_stats(f, {0, 4}), DegenerateChannel);
    NormStats st{{0.0}, {1.0}};
    CHECK_THROWS_AS(normalize(f, st), ShapeError);
    CHECK_THROWS_AS(denormalize(f, st), ShapeError);
}

TEST_CASE("normalize: round trip and train moments") {
    auto f = testutil::random_frame(100, 3, 5);
    for (auto& x : f.values.data) x = 10.0 + 3.0 * x;
    auto st = compute_stats(f, {0, 100});
    auto n = normalize(f, st);
    auto back = denormalize(n, st);
    double worst = 0.0;
    for (std::size_t i = 0; i < f.values.size(); ++i)
        worst = std::max(worst, std::abs(back.values.data[i] - f.values.data[i]));
    CHECK(worst <= 1e-9);
    auto st2 = compute_stats(n, {0, 100});
    for (std::size_t v = 0; v < 3; ++v) {
        CHECK(std::abs(st2.mean[v]) < 1e-12);
        CHECK(std::abs(st2.std[v] - 1.0) < 1e-12);
    }
}

TEST_CASE("sample_windows: hand counts") {
    auto f1 = testutil::random_frame(20, 1, 2);
    auto f2 = testutil::random_frame(14, 2, 2);
    CHECK(sample_windows(f1, {0, 12}, 8, 4, 1).size() == 1);
    CHECK(sample_windows(f2, {0, 14}, 8, 4, 1).size() == 6);
    CHECK(sample_windows(f1, {0, 20}, 8, 4, 4).size() == 3);
}

TEST_CASE("sample_windows: contexts and targets are contiguous") {
    auto f = testutil::random_frame(30, 2, 3);
    auto ws = sample_windows(f, {2, 30}, 6, 3, 2);
    for (const auto& w : ws) {
        const auto row0 = static_cast<std::size_t>((w.start - f.start) / f.freq);
        for (std::size_t i = 0; i < 6; ++i) CHECK(w.context[i] == f.values(row0 + i, w.channel));
        for (std::size_t i = 0; i < 3; ++i) CHECK(w.target[i] == f.values(row0 + 6 + i, w.channel));
    }
    CHECK(ws.front().channel == 0);
    CHECK(ws.back().channel == 1);
}

TEST_CASE("window count matches brute force over the small grid") {
    auto f = testutil::random_frame(50, 1, 4);
    std::size_t checked = 0;
    for (std::size_t len = 1; len <= 50; ++len)
        for (std::size_t c = 1; c <= 16; ++c)
            for (std::size_t h = 1; h <= 8; ++h)
                for (std::size_t stride = 1; stride <= 8; ++stride) {
                    std::size_t brute = 0;
                    for (std::size_t s = 0; s + c + h <= len; s += stride) ++brute;
                    REQUIRE(window_count(len, c, h, stride) == brute);
                    if (brute > 0) REQUIRE(sample_windows(f, {0, len}, c, h, stride).size() == brute);
                    ++checked;
                }
    CHECK(checked == 50 * 16 * 8 * 8);
}

TEST_CASE("channel permutation permutes the sample stream") {
    auto f = testutil::random_frame(40, 3, 9);
    const std::vector<std::size_t> perm{2, 0, 1};
    TimeSeriesFrame g = f;
    for (std::size_t t = 0; t < 40; ++t)
        for (std::size_t v = 0; v < 3; ++v) g.values(t, v) = f.values(t, perm[v]);
    auto a = sample_windows(f, {0, 40}, 8, 4, 3);
    auto b = sample_windows(g, {0, 40}, 8, 4, 3);
    REQUIRE(a.size() == b.size());
    const std::size_t per = a.size() / 3;
    for (std::size_t v = 0; v < 3; ++v)
        for (std::size_t i = 0; i < per; ++i) {
            const auto& wb = b[v * per + i];
            const auto& wa = a[perm[v] * per + i];
            CHECK(wb.context == wa.context);
            CHECK(wb.target == wa.target);
            CHECK(wb.start == wa.start);
        }
}

TEST_CASE("split windows borrow history and count split_len - F + 1") {
    auto f = testutil::random_frame(60, 1, 6);
    auto ws = sample_split_windows(f, {30, 45}, 10, 5, 1);
    CHECK(ws.size() == 15 - 5 + 1);
    CHECK(ws.front().start == f.timestamp(20));
    CHECK(ws.front().target.front() == f.values(30, 0));
    CHECK(ws.back().target.back() == f.values(44, 0));
}
