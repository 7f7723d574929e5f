#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "fxv/fixedpoint.hpp"

using namespace fxv;

namespace {

std::vector<FixedValue> all_values(const FixedFormat& fmt) {
    std::vector<FixedValue> out;
    for (int64_t raw = fmt.raw_min(); raw <= fmt.raw_max(); ++raw)
        out.emplace_back(raw, fmt);
    return out;
}

constexpr RoundingMode kModes[] = {RoundingMode::NearestEven, RoundingMode::Truncate,
                                   RoundingMode::Floor};

}  // namespace

TEST_CASE("format ranges") {
    FixedFormat f15(1, 5);
    CHECK(f15.v_max() == Catch::Approx(1.96875).epsilon(0));
    CHECK(f15.v_min() == -2.0);
    CHECK(f15.raw_min() == -64);
    CHECK(f15.raw_max() == 63);

    // Eq-derived reference points
    CHECK(FixedFormat(4, 10).v_max() == 15.9990234375);
    CHECK(FixedFormat(1, 5).v_min() == -2.0);
    CHECK(FixedFormat(0, 0).v_max() == 0.0);  // sign bit only
    CHECK(FixedFormat(0, 0).v_min() == -1.0);

    CHECK_THROWS_AS(FixedFormat(-1, 5), FormatError);
    CHECK_THROWS_AS(FixedFormat(40, 40), FormatError);
    CHECK(FixedFormat(7, 6).total_bits() == 14);
}

TEST_CASE("format string round trip") {
    CHECK(to_string(FixedFormat(4, 10)) == "4,10");
    auto f = parse_format("4,10");
    CHECK(f.int_bits == 4);
    CHECK(f.frac_bits == 10);
    CHECK_THROWS_AS(parse_format("4;10"), FormatError);
    CHECK_THROWS_AS(parse_format("4,x"), FormatError);
    CHECK_THROWS_AS(parse_format("4,10,2"), FormatError);
}

TEST_CASE("quantize basics") {
    FixedFormat f15(1, 5);
    // 0.3 * 32 = 9.6 rounds to 10
    CHECK(quantize(0.3, f15, RoundingMode::NearestEven).raw == 10);
    CHECK(quantize(0.3, f15, RoundingMode::NearestEven).value() == 0.3125);
    for (auto m : kModes) CHECK(quantize(0.0, FixedFormat(3, 7), m).raw == 0);
    // saturation at v_max
    CHECK(quantize(1.97, f15, RoundingMode::NearestEven, OverflowMode::Saturate).value() ==
          1.96875);
    CHECK(quantize(5.0, f15, RoundingMode::NearestEven, OverflowMode::Saturate).value() ==
          1.96875);
    CHECK(quantize(-5.0, f15, RoundingMode::NearestEven, OverflowMode::Saturate).value() == -2.0);
    CHECK_THROWS_AS(quantize(5.0, f15, RoundingMode::NearestEven), OverflowError);
    CHECK_THROWS_AS(quantize(std::nan(""), f15, RoundingMode::NearestEven), Error);

    // ties to even: 0.015625 * 32 = 0.5 -> 0; 0.046875 * 32 = 1.5 -> 2
    CHECK(quantize(0.015625, f15, RoundingMode::NearestEven).raw == 0);
    CHECK(quantize(0.046875, f15, RoundingMode::NearestEven).raw == 2);
    // truncation toward zero vs floor on negatives
    CHECK(quantize(-0.33, f15, RoundingMode::Truncate).raw == -10);
    CHECK(quantize(-0.33, f15, RoundingMode::Floor).raw == -11);
}

TEST_CASE("arithmetic examples") {
    FixedFormat f15(1, 5);
    FixedValue vmax(63, f15), one(32, f15), half(16, f15);

    auto wrap = fx_add(vmax, one, OverflowMode::Wraparound);
    CHECK(wrap.value.value() == -1.03125);
    CHECK(wrap.event.has_value());
    CHECK(wrap.event->value() == 2.96875);

    auto sat = fx_add(vmax, one, OverflowMode::Saturate);
    CHECK(sat.value.value() == 1.96875);
    CHECK(sat.event.has_value());

    auto prod = fx_mul(half, half, OverflowMode::Detect);
    CHECK_FALSE(prod.event.has_value());
    CHECK(prod.value.value() == 0.25);

    FixedValue a(10, f15), b(32, f15);
    auto q = fx_div(a, b, OverflowMode::Detect);
    CHECK(q.value.value() == 0.3125);
    CHECK_THROWS_AS(fx_div(a, FixedValue(0, f15), OverflowMode::Detect), Error);
    CHECK_THROWS_AS(fx_add(a, FixedValue(1, FixedFormat(2, 5)), OverflowMode::Detect),
                    FormatError);
}

TEST_CASE("round trip for every representable value") {
    for (auto fmt : {FixedFormat(1, 3), FixedFormat(2, 4), FixedFormat(0, 6)}) {
        for (const auto& v : all_values(fmt)) {
            for (auto m : kModes) {
                CHECK(quantize(v.value(), fmt, m).raw == v.raw);
            }
        }
    }
}

TEST_CASE("quantize monotone and error-bounded") {
    FixedFormat fmt(2, 6);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> dist(-6.0, 6.0);
    for (int i = 0; i < 5000; ++i) {
        double x = dist(rng), y = dist(rng);
        if (x > y) std::swap(x, y);
        for (auto m : kModes) {
            auto qx = quantize(x, fmt, m, OverflowMode::Saturate);
            auto qy = quantize(y, fmt, m, OverflowMode::Saturate);
            CHECK(qx.raw <= qy.raw);
        }
        if (x >= fmt.v_min() && x <= fmt.v_max()) {
            double step = std::ldexp(1.0, -fmt.frac_bits);
            CHECK(std::abs(quantize(x, fmt, RoundingMode::NearestEven, OverflowMode::Saturate)
                               .value() -
                           x) <= step / 2.0 + 1e-15);
            double terr = quantize(x, fmt, RoundingMode::Truncate, OverflowMode::Saturate)
                              .value() -
                          x;
            CHECK(std::abs(terr) <= step);                 // one-sided toward zero
            CHECK((x >= 0 ? terr <= 0 : terr >= 0));
            double ferr =
                quantize(x, fmt, RoundingMode::Floor, OverflowMode::Saturate).value() - x;
            CHECK(ferr <= 0);
            CHECK(ferr > -step);
        }
    }
}

TEST_CASE("wraparound is periodic in the format span") {
    FixedFormat fmt(1, 3);
    double span = 4.0;  // 2^(m+1)
    for (const auto& v : all_values(fmt)) {
        for (int k = -3; k <= 3; ++k) {
            auto w = quantize(v.value() + span * k, fmt, RoundingMode::NearestEven,
                              OverflowMode::Wraparound);
            CHECK(w.raw == v.raw);
        }
    }
}

TEST_CASE("saturate and wraparound agree with detect when nothing overflows") {
    FixedFormat fmt(1, 3);
    const auto values = all_values(fmt);
    int clean = 0;
    for (const auto& a : values) {
        for (const auto& b : values) {
            struct Op {
                FxResult (*f)(const FixedValue&, const FixedValue&, OverflowMode);
            };
            auto run = [&](auto&& op) {
                auto detect = op(OverflowMode::Detect);
                auto sat = op(OverflowMode::Saturate);
                auto wrap = op(OverflowMode::Wraparound);
                CHECK(detect.event.has_value() == sat.event.has_value());
                CHECK(detect.event.has_value() == wrap.event.has_value());
                if (!detect.event) {
                    ++clean;
                    CHECK(detect.value.raw == sat.value.raw);
                    CHECK(detect.value.raw == wrap.value.raw);
                }
            };
            run([&](OverflowMode m) { return fx_add(a, b, m); });
            run([&](OverflowMode m) { return fx_sub(a, b, m); });
            run([&](OverflowMode m) { return fx_mul(a, b, m); });
            if (b.raw != 0) run([&](OverflowMode m) { return fx_div(a, b, m); });
        }
    }
    CHECK(clean > 1000);
}

TEST_CASE("integer arithmetic matches the double-path quantizer") {
    // products and sums of <1,3> values are exact in double, so quantizing
    // the real result must land on the same raw value the wide-integer path
    // produces
    FixedFormat fmt(1, 3);
    for (auto m : kModes) {
        for (const auto& a : all_values(fmt)) {
            for (const auto& b : all_values(fmt)) {
                auto sum = fx_add(a, b, OverflowMode::Saturate);
                CHECK(sum.value.raw ==
                      quantize(a.value() + b.value(), fmt, m, OverflowMode::Saturate).raw);
                auto prod = fx_mul(a, b, OverflowMode::Saturate, m);
                CHECK(prod.value.raw ==
                      quantize(a.value() * b.value(), fmt, m, OverflowMode::Saturate).raw);
            }
        }
    }
}

TEST_CASE("multiplication re-rounding follows the mode") {
    FixedFormat fmt(1, 3);
    FixedValue a(3, fmt), b(3, fmt);  // 0.375^2 = 0.140625 = 1.125 eighths
    CHECK(fx_mul(a, b, OverflowMode::Detect, RoundingMode::NearestEven).value.raw == 1);
    CHECK(fx_mul(a, b, OverflowMode::Detect, RoundingMode::Truncate).value.raw == 1);
    FixedValue c(-3, fmt);
    CHECK(fx_mul(a, c, OverflowMode::Detect, RoundingMode::Truncate).value.raw == -1);
    CHECK(fx_mul(a, c, OverflowMode::Detect, RoundingMode::Floor).value.raw == -2);
    // tie: 0.25 * 0.75 = 1.5 eighths -> even = 2
    CHECK(fx_mul(FixedValue(2, fmt), FixedValue(6, fmt), OverflowMode::Detect,
                 RoundingMode::NearestEven)
              .value.raw == 2);
}
