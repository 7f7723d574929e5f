#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "fxv/stability.hpp"

using namespace fxv;

namespace {

// Expand prod (z - r_i) for real roots; test-only helper.
std::vector<double> poly_from_real_roots(const std::vector<double>& roots) {
    std::vector<double> c{1.0};
    for (double r : roots) {
        std::vector<double> next(c.size() + 1, 0.0);
        for (std::size_t i = 0; i < c.size(); ++i) {
            next[i] += c[i];
            next[i + 1] -= c[i] * r;
        }
        c = std::move(next);
    }
    return c;
}

QuantizedFilter iir_with_denominator(const std::vector<double>& a) {
    FixedFormat fmt(4, 10);
    TransferFunction tf{{1.0}, a, 48000.0};
    return quantize_filter(tf, fmt, RoundingMode::NearestEven);
}

}  // namespace

TEST_CASE("jury table construction") {
    // rows of V^(0) are the coefficients and their reversal
    auto t1 = build_jury_table(CharPoly{{1, 0, 0}});
    REQUIRE(t1.blocks.size() == 1);
    CHECK(t1.blocks[0].row1 == std::vector<double>{1, 0, 0});
    CHECK(t1.blocks[0].row2 == std::vector<double>{0, 0, 1});

    auto t2 = build_jury_table(CharPoly{{2, 1, 0.5}});
    CHECK(t2.blocks[0].row1 == std::vector<double>{2, 1, 0.5});
    CHECK(t2.blocks[0].row2 == std::vector<double>{0.5, 1, 2});

    // one hand application of the reduction for a cubic:
    // b_j = a_j - a_{3-j} * (a_3 / a_0)
    auto t3 = build_jury_table(CharPoly{{1.0, -0.6, -0.01, 0.03}});
    REQUIRE(t3.blocks.size() == 2);
    const auto& row = t3.blocks[1].row1;
    CHECK(row[0] == Catch::Approx(0.9991).margin(1e-12));
    CHECK(row[1] == Catch::Approx(-0.5997).margin(1e-12));
    CHECK(row[2] == Catch::Approx(0.008).margin(1e-12));
    CHECK(row[3] == 0.0);  // window shrinks by one per level
    CHECK(t3.blocks[1].row2[0] == Catch::Approx(0.008).margin(1e-12));
    CHECK(t3.blocks[1].row2[2] == Catch::Approx(0.9991).margin(1e-12));

    CHECK_THROWS_AS(build_jury_table(CharPoly{{1, -0.5}}), ConfigError);
    CHECK_THROWS_AS(build_jury_table(CharPoly{{0.0, 1, 1}}), ConfigError);
}

TEST_CASE("jury conditions on factored cases") {
    {
        CharPoly p{{1.0, -0.5}};  // root 0.5
        auto c = jury_conditions(p, JuryTable{});
        CHECK(c.r1);  // S(1) = 0.5 > 0
        CHECK(c.r2);  // (-1)(-1.5) > 0
        CHECK(c.r3);  // 0.5 < 1
        CHECK(c.all());
    }
    {
        CharPoly p{{1.0, -3.0, 2.0}};  // roots 1 and 2
        auto c = jury_conditions(p, build_jury_table(p));
        CHECK_FALSE(c.r1);  // S(1) = 0
        CHECK_FALSE(c.all());
    }
    {
        CharPoly p{{1.0, -0.2, -0.08}};  // roots 0.4 and -0.2
        auto c = jury_conditions(p, build_jury_table(p));
        CHECK(c.all());
        CHECK(root_magnitude_oracle(p) == Catch::Approx(0.4).margin(1e-9));
    }
    {
        // roots at modulus 1.1 slip past S(1), S(-1) and |a_N| < |a_0|;
        // only the deep table condition rejects them
        CharPoly p{{1.0, -1.4, 1.54, -0.363}};
        auto c = jury_conditions(p, build_jury_table(p));
        CHECK(c.r1);
        CHECK(c.r2);
        CHECK(c.r3);
        CHECK_FALSE(c.r4);
    }
}

TEST_CASE("root magnitude oracle") {
    CHECK(root_magnitude_oracle(CharPoly{{1, -3, 2}}) == Catch::Approx(2.0).margin(1e-10));
    CHECK(root_magnitude_oracle(CharPoly{{1, -0.5}}) == Catch::Approx(0.5).margin(1e-12));
    CHECK(root_magnitude_oracle(CharPoly{{1, -0.2, -0.08}}) ==
          Catch::Approx(0.4).margin(1e-10));
    // trailing zeros deflate as roots at the origin
    CHECK(root_magnitude_oracle(CharPoly{{1, -0.5, 0.0, 0.0}}) ==
          Catch::Approx(0.5).margin(1e-10));
    CHECK(root_magnitude_oracle(CharPoly{{5.0}}) == 0.0);
    std::vector<double> big(34, 1.0);
    CHECK_THROWS_AS(root_magnitude_oracle(CharPoly{big}), ComputeError);
}

TEST_CASE("check_stability verdicts") {
    FixedFormat f15(1, 5);
    {
        auto qf = quantize_filter({{1.0}, {1.0}, 48000.0}, f15, RoundingMode::NearestEven);
        auto v = check_stability(qf);
        CHECK(v.stable());
        CHECK_FALSE(v.failed_condition.has_value());
    }
    {
        // pole exactly on the unit circle
        auto qf = quantize_filter({{1.0}, {1.0, -1.0}, 48000.0}, f15, RoundingMode::NearestEven);
        auto v = check_stability(qf);
        CHECK(v.status == StabilityStatus::Marginal);
    }
    {
        auto tf = design_butterworth2(DesignKind::Lowpass, 9600.0, 48000.0);
        auto qf = quantize_filter(tf, FixedFormat(4, 10), RoundingMode::NearestEven);
        auto v = check_stability(qf);
        CHECK(v.stable());
        REQUIRE(v.oracle_max_root.has_value());
        CHECK(*v.oracle_max_root < 1.0);
    }
    {
        auto qf = iir_with_denominator({1.0, -1.5});  // pole at 1.5
        auto v = check_stability(qf);
        CHECK(v.status == StabilityStatus::Unstable);
        REQUIRE(v.failed_condition.has_value());
        CHECK(*v.failed_condition == JuryConditionName::R1);
    }
}

TEST_CASE("jury agrees with the root oracle on random polynomials") {
    std::mt19937_64 rng(20170903);
    std::uniform_real_distribution<double> coeff(-2.0, 2.0);
    std::uniform_int_distribution<int> deg(1, 6);
    int checked = 0;
    for (int trial = 0; trial < 1500; ++trial) {
        const int n = deg(rng);
        std::vector<double> c(static_cast<std::size_t>(n) + 1);
        for (auto& x : c) x = coeff(rng);
        while (std::abs(c[0]) < 0.1) c[0] = coeff(rng);
        CharPoly p{c};
        const double mx = root_magnitude_oracle(p);
        if (std::abs(mx - 1.0) <= 1e-6) continue;  // marginal band excluded
        JuryTable table = n >= 2 ? build_jury_table(p) : JuryTable{};
        auto cond = jury_conditions(p, table);
        REQUIRE_FALSE(cond.indeterminate);
        CHECK(cond.all() == (mx < 1.0));
        ++checked;
    }
    CHECK(checked >= 1000);
}

TEST_CASE("verdict is invariant under positive scaling") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> coeff(-2.0, 2.0);
    std::uniform_real_distribution<double> scale(0.05, 20.0);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<double> c(4);
        for (auto& x : c) x = coeff(rng);
        while (std::abs(c[0]) < 0.1) c[0] = coeff(rng);
        CharPoly p{c};
        CharPoly q{c};
        const double lambda = scale(rng);
        for (auto& x : q.coeffs) x *= lambda;
        auto cp = jury_conditions(p, build_jury_table(p));
        auto cq = jury_conditions(q, build_jury_table(q));
        CHECK(cp.all() == cq.all());
        CHECK(cp.indeterminate == cq.indeterminate);
    }
}

TEST_CASE("reversing a strictly stable polynomial flips the verdict") {
    std::mt19937_64 rng(123);
    std::uniform_real_distribution<double> root(-0.95, 0.95);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> roots(3);
        for (auto& r : roots) r = root(rng);
        bool nonzero = true;
        for (double r : roots) nonzero = nonzero && std::abs(r) > 0.01;
        if (!nonzero) continue;
        auto c = poly_from_real_roots(roots);
        CharPoly p{c};
        std::vector<double> rev(c.rbegin(), c.rend());
        CharPoly q{rev};
        auto cp = jury_conditions(p, build_jury_table(p));
        auto cq = jury_conditions(q, build_jury_table(q));
        CHECK(cp.all());
        CHECK_FALSE(cq.all());
        CHECK(root_magnitude_oracle(q) > 1.0);
    }
}
