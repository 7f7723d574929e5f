// Exact <m,n> fixed-point arithmetic: one sign bit, m integer bits, n
// fractional bits. A value is raw * 2^-n with raw a signed step count.
// All operations are pure; results are computed on wide integers so that
// every intermediate is exact before re-rounding.
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace fxv {

// 128-bit signed integer used for products and accumulators.
using WideRaw = __int128;

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid or mismatched fixed-point formats.
class FormatError : public Error {
public:
    using Error::Error;
};

// Malformed parameters, job documents or filter definitions.
class ConfigError : public Error {
public:
    using Error::Error;
};

// A value that cannot be represented (e.g. a coefficient outside
// [v_min, v_max]).
class RangeError : public Error {
public:
    using Error::Error;
};

// Filter-spec band invariant violations (missing frequencies, unordered
// pairs, inconsistent gains).
class SpecError : public Error {
public:
    using Error::Error;
};

// A computation that could not complete: non-convergent iteration,
// insufficient truncation, search budget exceeded, inapplicable strategy.
class ComputeError : public Error {
public:
    using Error::Error;
};

enum class RoundingMode {
    NearestEven,  // round to nearest, ties to even
    Truncate,     // toward zero
    Floor         // toward negative infinity
};

enum class OverflowMode {
    Detect,      // out-of-range results are reported, never stored
    Saturate,    // clamp to [v_min, v_max]
    Wraparound   // reduce modulo 2^(m+1) into [v_min, v_max]
};

inline const char* to_string(RoundingMode m) {
    switch (m) {
        case RoundingMode::NearestEven: return "nearest";
        case RoundingMode::Truncate: return "truncate";
        case RoundingMode::Floor: return "floor";
    }
    return "?";
}

inline const char* to_string(OverflowMode m) {
    switch (m) {
        case OverflowMode::Detect: return "detect";
        case OverflowMode::Saturate: return "saturate";
        case OverflowMode::Wraparound: return "wraparound";
    }
    return "?";
}

struct FixedFormat {
    int int_bits = 0;   // m
    int frac_bits = 0;  // n

    FixedFormat() = default;
    FixedFormat(int m, int n) : int_bits(m), frac_bits(n) {
        if (m < 0 || n < 0 || m + n + 1 > 64)
            throw FormatError("invalid fixed-point format <" + std::to_string(m) + "," +
                              std::to_string(n) + ">: need m >= 0, n >= 0, m+n+1 <= 64");
    }

    int total_bits() const { return int_bits + frac_bits + 1; }

    // Raw step counts span [-2^(m+n), 2^(m+n) - 1].
    int64_t raw_min() const {
        return static_cast<int64_t>(-(WideRaw(1) << (int_bits + frac_bits)));
    }
    int64_t raw_max() const {
        return static_cast<int64_t>((WideRaw(1) << (int_bits + frac_bits)) - 1);
    }

    // v_max = 2^m - 2^-n, v_min = -2^m.
    double v_max() const { return std::ldexp(static_cast<double>(raw_max()), -frac_bits); }
    double v_min() const { return std::ldexp(static_cast<double>(raw_min()), -frac_bits); }

    friend bool operator==(const FixedFormat&, const FixedFormat&) = default;
};

inline double v_max(const FixedFormat& f) { return f.v_max(); }
inline double v_min(const FixedFormat& f) { return f.v_min(); }

// CLI/JSON rendering of <m,n> is "m,n".
inline std::string to_string(const FixedFormat& f) {
    return std::to_string(f.int_bits) + "," + std::to_string(f.frac_bits);
}

inline FixedFormat parse_format(const std::string& s) {
    auto comma = s.find(',');
    if (comma == std::string::npos)
        throw FormatError("format must be \"m,n\", got \"" + s + "\"");
    try {
        size_t pos1 = 0, pos2 = 0;
        int m = std::stoi(s.substr(0, comma), &pos1);
        int n = std::stoi(s.substr(comma + 1), &pos2);
        if (pos1 != comma || pos2 != s.size() - comma - 1)
            throw FormatError("format must be \"m,n\", got \"" + s + "\"");
        return FixedFormat(m, n);
    } catch (const std::invalid_argument&) {
        throw FormatError("format must be \"m,n\", got \"" + s + "\"");
    } catch (const std::out_of_range&) {
        throw FormatError("format out of range: \"" + s + "\"");
    }
}

struct FixedValue {
    int64_t raw = 0;
    FixedFormat format;

    FixedValue() = default;
    FixedValue(int64_t r, FixedFormat f) : raw(r), format(f) {}

    // raw * 2^-n; exact in double for m+n <= 52.
    double value() const { return std::ldexp(static_cast<double>(raw), -format.frac_bits); }
};

inline bool same_format(const FixedValue& a, const FixedValue& b) {
    return a.format == b.format;
}

// An excursion outside [v_min, v_max]. wide_raw is the unclamped result in
// steps of 2^-wide_frac_bits.
struct OverflowEvent {
    WideRaw wide_raw = 0;
    int wide_frac_bits = 0;
    FixedFormat format;
    bool above = false;  // violated v_max (else v_min)

    double value() const { return std::ldexp(static_cast<double>(wide_raw), -wide_frac_bits); }
};

class OverflowError : public Error {
public:
    OverflowError(const std::string& msg, OverflowEvent ev) : Error(msg), event(ev) {}
    OverflowEvent event;
};

// Result of an arithmetic operation. `event` is engaged iff the exact
// result left [v_min, v_max]; `value` then holds the mode-dependent result
// (saturated for Detect and Saturate, wrapped for Wraparound).
struct FxResult {
    FixedValue value;
    std::optional<OverflowEvent> event;
};

namespace detail {

// Floor-division quotient and nonnegative remainder.
inline void floor_divmod(WideRaw num, WideRaw den, WideRaw& q, WideRaw& r) {
    q = num / den;
    r = num % den;
    if (r != 0 && ((num < 0) != (den < 0))) {
        q -= 1;
        r += den;
    }
}

// Rounded division num/den (den != 0) under the given mode.
inline WideRaw round_div(WideRaw num, WideRaw den, RoundingMode mode) {
    if (den < 0) {
        num = -num;
        den = -den;
    }
    WideRaw qf, rf;
    floor_divmod(num, den, qf, rf);
    switch (mode) {
        case RoundingMode::Floor:
            return qf;
        case RoundingMode::Truncate:
            return (qf < 0 && rf != 0) ? qf + 1 : qf;
        case RoundingMode::NearestEven: {
            WideRaw twice = 2 * rf;
            if (twice > den) return qf + 1;
            if (twice < den) return qf;
            return (qf % 2 == 0) ? qf : qf + 1;  // tie: pick even
        }
    }
    return qf;
}

inline WideRaw round_shift(WideRaw v, int shift, RoundingMode mode) {
    if (shift == 0) return v;
    return round_div(v, WideRaw(1) << shift, mode);
}

// Reduce w modulo the format span into [raw_min, raw_max].
inline WideRaw wrap_raw(WideRaw w, const FixedFormat& f) {
    const WideRaw lo = f.raw_min();
    const WideRaw span = WideRaw(1) << (f.int_bits + f.frac_bits + 1);
    WideRaw r = (w - lo) % span;
    if (r < 0) r += span;
    return r + lo;
}

inline FxResult range_handle(WideRaw w, const FixedFormat& f, OverflowMode mode) {
    const WideRaw lo = f.raw_min(), hi = f.raw_max();
    if (w >= lo && w <= hi) return {FixedValue(static_cast<int64_t>(w), f), std::nullopt};
    OverflowEvent ev{w, f.frac_bits, f, w > hi};
    int64_t raw;
    if (mode == OverflowMode::Wraparound)
        raw = static_cast<int64_t>(wrap_raw(w, f));
    else
        raw = static_cast<int64_t>(w > hi ? hi : lo);
    return {FixedValue(raw, f), ev};
}

// Round a finite double to an integer per mode, carefully enough that the
// result is exact for any double that fits the formats we support.
inline double round_integral(double s, RoundingMode mode) {
    switch (mode) {
        case RoundingMode::Floor:
            return std::floor(s);
        case RoundingMode::Truncate:
            return std::trunc(s);
        case RoundingMode::NearestEven: {
            double f = std::floor(s);
            double d = s - f;
            if (d > 0.5) return f + 1;
            if (d < 0.5) return f;
            return (std::fmod(f, 2.0) == 0.0) ? f : f + 1;
        }
    }
    return s;
}

}  // namespace detail

// Quantize a real to the format. Out-of-range results follow `omode`;
// Detect raises OverflowError.
inline FixedValue quantize(double x, const FixedFormat& fmt, RoundingMode rmode,
                           OverflowMode omode = OverflowMode::Detect) {
    if (!std::isfinite(x)) throw Error("quantize: input not finite");
    double scaled = std::ldexp(x, fmt.frac_bits);
    double rounded = detail::round_integral(scaled, rmode);
    WideRaw w;
    if (std::abs(rounded) < std::ldexp(1.0, 126)) {
        w = static_cast<WideRaw>(rounded);
    } else {
        // Far outside any representable range; only the wrap residue matters.
        double span = std::ldexp(1.0, fmt.int_bits + fmt.frac_bits + 1);
        w = static_cast<WideRaw>(std::fmod(rounded, span));
    }
    auto res = detail::range_handle(w, fmt, omode);
    if (res.event && omode == OverflowMode::Detect)
        throw OverflowError("quantize: " + std::to_string(x) + " outside [v_min, v_max] of <" +
                                to_string(fmt) + ">",
                            *res.event);
    return res.value;
}

inline FxResult fx_add(const FixedValue& a, const FixedValue& b, OverflowMode mode) {
    if (!same_format(a, b)) throw FormatError("fx_add: operand formats differ");
    return detail::range_handle(WideRaw(a.raw) + WideRaw(b.raw), a.format, mode);
}

inline FxResult fx_sub(const FixedValue& a, const FixedValue& b, OverflowMode mode) {
    if (!same_format(a, b)) throw FormatError("fx_sub: operand formats differ");
    return detail::range_handle(WideRaw(a.raw) - WideRaw(b.raw), a.format, mode);
}

// Exact wide product, re-rounded to n fractional bits, then range-handled.
inline FxResult fx_mul(const FixedValue& a, const FixedValue& b, OverflowMode mode,
                       RoundingMode rmode = RoundingMode::NearestEven) {
    if (!same_format(a, b)) throw FormatError("fx_mul: operand formats differ");
    WideRaw wide = WideRaw(a.raw) * WideRaw(b.raw);  // 2n fractional bits
    WideRaw rounded = detail::round_shift(wide, a.format.frac_bits, rmode);
    return detail::range_handle(rounded, a.format, mode);
}

inline FxResult fx_div(const FixedValue& a, const FixedValue& b, OverflowMode mode,
                       RoundingMode rmode = RoundingMode::NearestEven) {
    if (!same_format(a, b)) throw FormatError("fx_div: operand formats differ");
    if (b.raw == 0) throw Error("fx_div: division by zero");
    WideRaw num = WideRaw(a.raw) << a.format.frac_bits;
    WideRaw rounded = detail::round_div(num, WideRaw(b.raw), rmode);
    return detail::range_handle(rounded, a.format, mode);
}

}  // namespace fxv
