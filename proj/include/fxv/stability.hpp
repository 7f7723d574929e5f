// Jury stability test on the quantized characteristic polynomial, with an
// independent root-magnitude oracle (simultaneous iteration) for
// cross-validation and marginality detection.
//
// Note on the test: the classic condition set is used throughout -
// S(1) > 0, (-1)^N S(-1) > 0, |a_N| < |a_0|, and positivity of the
// first-column entries produced by the reciprocal-polynomial reduction
// b_j = v1j - v2j * (v21/v11), carried one level past the printed table so
// the deepest 3-entry row's |last| < |first| constraint is included. Some
// presentations swap the reduction ratio or stop a level early; those
// variants misclassify e.g. z^3 - 1.4 z^2 + 1.54 z - 0.363 (roots at
// modulus 1.1), which the oracle-agreement tests would catch.
#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "fxv/filter.hpp"
#include "fxv/fixedpoint.hpp"

namespace fxv {

// S(z) = a_0 z^N + a_1 z^(N-1) + ... + a_N, a_0 != 0. For an IIR filter the
// coefficients are the denominator list read back from quantization.
struct CharPoly {
    std::vector<double> coeffs;

    int degree() const { return static_cast<int>(coeffs.size()) - 1; }

    void validate() const {
        if (coeffs.empty()) throw ConfigError("characteristic polynomial: empty");
        if (coeffs[0] == 0.0) throw ConfigError("characteristic polynomial: a_0 must be nonzero");
    }

    double eval(double z) const {
        double r = 0.0;
        for (double c : coeffs) r = r * z + c;
        return r;
    }

    static CharPoly from_quantized(const QuantizedFilter& qf) { return CharPoly{qf.a_values()}; }
};

// Blocks V^(0)..V^(N-2); each row has N+1 slots with zeros beyond the
// shrinking window (block k is nonzero in the first N+1-k columns).
// Row 2 of each block is the reversal of row 1 within the window.
struct JuryTable {
    struct Block {
        std::vector<double> row1;
        std::vector<double> row2;
    };
    std::vector<Block> blocks;
    // Engaged when a reduction pivot (v11 of some block) was exactly zero;
    // holds the block index that could not be built.
    std::optional<int> zero_pivot_block;
};

inline JuryTable build_jury_table(const CharPoly& p) {
    p.validate();
    const int n = p.degree();
    if (n < 2) throw ConfigError("build_jury_table: degree must be >= 2");
    const std::size_t width = p.coeffs.size();
    JuryTable table;
    std::vector<double> row = p.coeffs;
    std::size_t window = width;
    for (int k = 0; k <= n - 2; ++k) {
        JuryTable::Block blk;
        blk.row1 = row;
        blk.row1.resize(width, 0.0);
        blk.row2.assign(width, 0.0);
        for (std::size_t j = 0; j < window; ++j) blk.row2[j] = blk.row1[window - 1 - j];
        table.blocks.push_back(std::move(blk));
        if (k == n - 2) break;
        const double v11 = row[0];
        const double v21 = row[window - 1];
        if (v11 == 0.0) {
            table.zero_pivot_block = k;
            break;
        }
        const double mult = v21 / v11;
        std::vector<double> next(window - 1, 0.0);
        for (std::size_t j = 0; j + 1 < window; ++j)
            next[j] = row[j] - row[window - 1 - j] * mult;
        row = std::move(next);
        window -= 1;
    }
    return table;
}

struct JuryConditions {
    bool r1 = false;  // S(1) > 0
    bool r2 = false;  // (-1)^N S(-1) > 0
    bool r3 = false;  // |a_N| < |a_0|
    bool r4 = false;  // reduction chain positivity
    // A zero pivot or an exactly-zero chain entry; the verdict is marginal.
    bool indeterminate = false;

    bool all() const { return r1 && r2 && r3 && r4; }
};

// Evaluates the four conditions on a sign-normalized polynomial (a_0 > 0
// is forced by negating, which preserves roots).
inline JuryConditions jury_conditions(const CharPoly& poly, const JuryTable& table) {
    poly.validate();
    CharPoly p = poly;
    if (p.coeffs[0] < 0.0)
        for (double& c : p.coeffs) c = -c;
    const int n = p.degree();
    JuryConditions cond;
    cond.r1 = p.eval(1.0) > 0.0;
    const double s_m1 = p.eval(-1.0);
    cond.r2 = ((n % 2 == 0) ? s_m1 : -s_m1) > 0.0;
    cond.r3 = std::abs(p.coeffs[n]) < std::abs(p.coeffs[0]);
    if (n < 2) {
        cond.r4 = true;
        return cond;
    }
    if (table.zero_pivot_block) {
        cond.indeterminate = true;
        return cond;
    }
    // First-column positivity of every derived block, then one further
    // reduction of the deepest (3-entry) row. The table may have been built
    // from the unnormalized coefficients; entries flip sign with a_0.
    const double sgn = poly.coeffs[0] < 0.0 ? -1.0 : 1.0;
    cond.r4 = true;
    for (std::size_t k = 1; k < table.blocks.size(); ++k) {
        const double lead = sgn * table.blocks[k].row1[0];
        if (lead == 0.0) {
            cond.indeterminate = true;
            return cond;
        }
        if (lead < 0.0) cond.r4 = false;
    }
    const auto& deep = table.blocks.back().row1;
    const std::size_t window = p.coeffs.size() - (table.blocks.size() - 1);
    const double first = deep[0], last = deep[window - 1];
    if (first == 0.0 || std::abs(last) == std::abs(first)) {
        cond.indeterminate = true;
        return cond;
    }
    if (!(std::abs(last) < std::abs(first))) cond.r4 = false;
    return cond;
}

// Maximum root modulus by Durand-Kerner simultaneous iteration. Exact-zero
// trailing coefficients are deflated as roots at the origin first.
inline double root_magnitude_oracle(const CharPoly& p) {
    p.validate();
    if (p.degree() > 32) throw ComputeError("root_magnitude_oracle: degree > 32");
    std::vector<double> c = p.coeffs;
    while (c.size() > 1 && c.back() == 0.0) c.pop_back();
    const int n = static_cast<int>(c.size()) - 1;
    if (n == 0) return 0.0;
    if (n == 1) return std::abs(c[1] / c[0]);
    std::vector<std::complex<double>> mon(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) mon[i] = c[i] / c[0];
    auto eval = [&](std::complex<double> z) {
        std::complex<double> r = 0.0;
        for (const auto& cc : mon) r = r * z + cc;
        return r;
    };
    double radius = 0.0;
    for (std::size_t i = 1; i < mon.size(); ++i) radius = std::max(radius, std::abs(mon[i]));
    radius = std::max(1.0, 1.0 + radius);
    const std::complex<double> seed(0.4, 0.9);
    std::vector<std::complex<double>> x(n);
    std::complex<double> acc = 1.0;
    for (int i = 0; i < n; ++i) {
        acc *= seed;
        x[i] = acc * (radius / std::abs(seed));
    }
    const int max_iter = 400;
    double moved = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        moved = 0.0;
        for (int i = 0; i < n; ++i) {
            std::complex<double> denom = 1.0;
            for (int j = 0; j < n; ++j)
                if (j != i) denom *= (x[i] - x[j]);
            if (denom == 0.0) denom = 1e-30;
            const std::complex<double> delta = eval(x[i]) / denom;
            x[i] -= delta;
            moved = std::max(moved, std::abs(delta) / std::max(1.0, std::abs(x[i])));
        }
        if (moved < 1e-13) break;
    }
    // Multiple roots stall at their cluster limit; accept small residual
    // motion, fail loudly otherwise.
    if (moved >= 1e-7)
        throw ComputeError("root_magnitude_oracle: no convergence after " +
                           std::to_string(max_iter) + " iterations");
    double mx = 0.0;
    for (const auto& r : x) mx = std::max(mx, std::abs(r));
    return mx;
}

enum class StabilityStatus { Stable, Unstable, Marginal };

enum class JuryConditionName { R1, R2, R3, R4 };

inline const char* to_string(JuryConditionName c) {
    switch (c) {
        case JuryConditionName::R1: return "R1";
        case JuryConditionName::R2: return "R2";
        case JuryConditionName::R3: return "R3";
        case JuryConditionName::R4: return "R4";
    }
    return "?";
}

struct StabilityVerdict {
    StabilityStatus status = StabilityStatus::Stable;
    // Present iff status == Unstable.
    std::optional<JuryConditionName> failed_condition;
    JuryTable jury_table;
    std::optional<double> oracle_max_root;
    std::string note;

    bool stable() const { return status == StabilityStatus::Stable; }
};

// Verdict on the quantized denominator. FIR filters are trivially stable.
// Marginal cases (zero Jury pivot, or max root modulus within 1e-9 of the
// unit circle per the oracle) are reported distinctly.
inline StabilityVerdict check_stability(const QuantizedFilter& qf) {
    StabilityVerdict verdict;
    if (qf.is_fir()) {
        verdict.note = "FIR: no poles";
        return verdict;
    }
    CharPoly p = CharPoly::from_quantized(qf);
    p.validate();
    const int n = p.degree();
    if (n >= 2) verdict.jury_table = build_jury_table(p);
    JuryConditions cond = jury_conditions(p, verdict.jury_table);
    try {
        verdict.oracle_max_root = root_magnitude_oracle(p);
    } catch (const ComputeError& e) {
        verdict.note = e.what();
    }
    if (verdict.oracle_max_root && std::abs(*verdict.oracle_max_root - 1.0) <= 1e-9) {
        verdict.status = StabilityStatus::Marginal;
        verdict.note = "pole within 1e-9 of the unit circle";
        return verdict;
    }
    if (cond.indeterminate) {
        verdict.status = StabilityStatus::Marginal;
        if (verdict.note.empty()) verdict.note = "zero pivot in the Jury reduction";
        return verdict;
    }
    if (cond.all()) {
        verdict.status = StabilityStatus::Stable;
        return verdict;
    }
    verdict.status = StabilityStatus::Unstable;
    if (!cond.r1)
        verdict.failed_condition = JuryConditionName::R1;
    else if (!cond.r2)
        verdict.failed_condition = JuryConditionName::R2;
    else if (!cond.r3)
        verdict.failed_condition = JuryConditionName::R3;
    else
        verdict.failed_condition = JuryConditionName::R4;
    return verdict;
}

}  // namespace fxv
