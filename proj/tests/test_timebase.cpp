#include <cstdlib>
#include <random>

#include "doctest.h"
#include "picosync/timebase.hpp"

using namespace picosync;

namespace {
constexpr DurationFs P{5'000'000};
}

TEST_CASE("normalize carries and borrows whole periods") {
    CHECK(normalize({3, 7'000'000}, P) == Timestamp{4, 2'000'000});
    CHECK(normalize({3, 0}, P) == Timestamp{3, 0});
    CHECK(normalize({1, -6'000'000}, P) == Timestamp{0, -1'000'000});
    CHECK(normalize({0, -4'999'999}, P) == Timestamp{0, -4'999'999});
    CHECK(normalize({2, 15'000'000}, P) == Timestamp{5, 0});
}

TEST_CASE("normalize rejects times before the epoch") {
    CHECK_THROWS_WITH_AS(normalize({0, -5'000'000}, P), "time before epoch", TimebaseError);
    CHECK_THROWS_AS(normalize({1, -11'000'000}, P), TimebaseError);
    CHECK_THROWS_AS(normalize({1, 0}, DurationFs{0}), TimebaseError);
}

TEST_CASE("diff_fs examples") {
    CHECK(diff_fs({2, 100}, {2, 100}, P).value == 0);
    CHECK(diff_fs({3, 0}, {2, 0}, P).value == 5'000'000);
    CHECK(diff_fs({10, -250'000}, {9, 250'000}, P).value == 4'500'000);
}

TEST_CASE("diff_fs overflow is an error") {
    const std::uint64_t slots = (std::uint64_t{1} << 62) / 5'000'000 + 1;
    CHECK_THROWS_AS(diff_fs({slots, 0}, {0, 0}, P), TimebaseError);
    CHECK_NOTHROW(diff_fs({slots - 1, 0}, {0, 0}, P));
}

TEST_CASE("a day at 200 MHz stays exact") {
    const std::uint64_t day = 24ull * 3600 * 200'000'000;
    const Timestamp a{day, 1};
    const Timestamp b{day, 0};
    CHECK(diff_fs(a, b, P).value == 1);
    CHECK(absolute_fs(a, P) == static_cast<__int128>(day) * 5'000'000 + 1);
    const Timebase tb(P);
    CHECK(tb.seconds(Timestamp{day, 0}) == doctest::Approx(86400.0));
}

TEST_CASE("shift moves by exact durations") {
    const Timebase tb(P);
    const Timestamp a = tb.shift({5, 4'000'000}, DurationFs{2'000'000});
    CHECK(tb.absolute(a) == 31'000'000);
    CHECK(std::abs(a.offset_fs) < P.value);
    const Timestamp b = tb.shift({5, 0}, DurationFs{-12'000'000});
    CHECK(tb.absolute(b) == 13'000'000);
    CHECK(std::abs(b.offset_fs) < P.value);
    CHECK_THROWS_AS(tb.shift({0, 0}, DurationFs{-6'000'000}), TimebaseError);
}

TEST_CASE("round_fs rounds to nearest") {
    CHECK(round_fs(1.4).value == 1);
    CHECK(round_fs(-1.6).value == -2);
    CHECK(round_fs(2.5e6).value == 2'500'000);
}

TEST_CASE("property: antisymmetry, additivity and normalization are exact") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::uint64_t> slot(1'000'000, 400'000'000'000ull);
    std::uniform_int_distribution<std::int64_t> off(-900'000'000, 900'000'000);
    const Timebase tb(P);
    for (int i = 0; i < 20000; ++i) {
        const Timestamp a{slot(rng), off(rng)}, b{slot(rng), off(rng)}, c{slot(rng), off(rng)};
        const auto ab = tb.diff(a, b), ba = tb.diff(b, a);
        REQUIRE(ab.value == -ba.value);
        REQUIRE(tb.diff(a, c).value == (ab + tb.diff(b, c)).value);
        const Timestamp n = tb.normalize(a);
        REQUIRE(tb.absolute(n) == tb.absolute(a));
        REQUIRE(tb.normalize(n) == n);
        REQUIRE((n.offset_fs > -P.value && n.offset_fs < P.value));
        const DurationFs d{off(rng)};
        REQUIRE(tb.absolute(tb.shift(a, d)) == tb.absolute(a) + d.value);
    }
}
