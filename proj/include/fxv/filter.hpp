// Transfer functions, coefficient quantization, direct-form-I state and
// impulse responses, plus the small closed-form designers used to build
// test fixtures.
#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "fxv/fixedpoint.hpp"

namespace fxv {

// b and a are z^-1 polynomial coefficients, b_0..b_M and a_0..a_N with
// a_0 != 0. FIR iff every a_i for i >= 1 is zero.
struct TransferFunction {
    std::vector<double> b{1.0};
    std::vector<double> a{1.0};
    double sample_rate_hz = 1.0;

    bool is_fir() const {
        for (std::size_t i = 1; i < a.size(); ++i)
            if (a[i] != 0.0) return false;
        return true;
    }

    void validate() const {
        if (b.empty() || a.empty()) throw ConfigError("transfer function: empty coefficient list");
        if (a[0] == 0.0) throw ConfigError("transfer function: a[0] must be nonzero");
        if (!(sample_rate_hz > 0.0)) throw ConfigError("transfer function: fs_hz must be > 0");
        for (double c : b)
            if (!std::isfinite(c)) throw ConfigError("transfer function: non-finite b coefficient");
        for (double c : a)
            if (!std::isfinite(c)) throw ConfigError("transfer function: non-finite a coefficient");
    }
};

struct QuantizedFilter {
    std::vector<FixedValue> b_q;
    std::vector<FixedValue> a_q;
    FixedFormat format;
    TransferFunction origin;

    std::vector<double> b_values() const {
        std::vector<double> v;
        v.reserve(b_q.size());
        for (const auto& q : b_q) v.push_back(q.value());
        return v;
    }
    std::vector<double> a_values() const {
        std::vector<double> v;
        v.reserve(a_q.size());
        for (const auto& q : a_q) v.push_back(q.value());
        return v;
    }
    bool is_fir() const {
        for (std::size_t i = 1; i < a_q.size(); ++i)
            if (a_q[i].raw != 0) return false;
        return true;
    }
};

// Direct-form-I delay lines, all-zero initial state.
struct StateDF1 {
    std::vector<FixedValue> x_hist;  // x[n-1..n-M]
    std::vector<FixedValue> y_hist;  // y[n-1..n-N]

    StateDF1(std::size_t num_taps, std::size_t den_taps, FixedFormat fmt)
        : x_hist(num_taps > 0 ? num_taps - 1 : 0, FixedValue(0, fmt)),
          y_hist(den_taps > 0 ? den_taps - 1 : 0, FixedValue(0, fmt)) {}

    void push_input(FixedValue x) {
        if (x_hist.empty()) return;
        for (std::size_t i = x_hist.size() - 1; i > 0; --i) x_hist[i] = x_hist[i - 1];
        x_hist[0] = x;
    }
    void push_output(FixedValue y) {
        if (y_hist.empty()) return;
        for (std::size_t i = y_hist.size() - 1; i > 0; --i) y_hist[i] = y_hist[i - 1];
        y_hist[0] = y;
    }
};

// Element-wise quantization; a coefficient outside [v_min, v_max] is a hard
// error naming the offending index.
inline QuantizedFilter quantize_filter(const TransferFunction& tf, const FixedFormat& fmt,
                                       RoundingMode rmode) {
    tf.validate();
    QuantizedFilter qf;
    qf.format = fmt;
    qf.origin = tf;
    auto quantize_list = [&](const std::vector<double>& src, const char* name) {
        std::vector<FixedValue> out;
        out.reserve(src.size());
        for (std::size_t i = 0; i < src.size(); ++i) {
            try {
                out.push_back(quantize(src[i], fmt, rmode, OverflowMode::Detect));
            } catch (const OverflowError&) {
                throw RangeError("coefficient out of range: " + std::string(name) + "[" +
                                 std::to_string(i) + "] = " + std::to_string(src[i]) +
                                 " does not fit <" + to_string(fmt) + ">");
            }
        }
        return out;
    };
    qf.b_q = quantize_list(tf.b, "b");
    qf.a_q = quantize_list(tf.a, "a");
    return qf;
}

namespace detail {

// Difference equation y[n] = (sum b_i x[n-i] - sum_{j>=1} a_j y[n-j]) / a_0
// run in double precision with unit impulse input and zero initial state.
inline std::vector<double> impulse_response_real(const std::vector<double>& b,
                                                 const std::vector<double>& a, std::size_t count) {
    std::vector<double> h(count, 0.0);
    for (std::size_t n = 0; n < count; ++n) {
        double acc = (n < b.size()) ? b[n] : 0.0;  // x is the unit impulse
        for (std::size_t j = 1; j < a.size() && j <= n; ++j) acc -= a[j] * h[n - j];
        h[n] = acc / a[0];
    }
    return h;
}

inline std::vector<double> poly_mul(const std::vector<double>& p, const std::vector<double>& q) {
    std::vector<double> r(p.size() + q.size() - 1, 0.0);
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = 0; j < q.size(); ++j) r[i + j] += p[i] * q[j];
    return r;
}

}  // namespace detail

inline std::vector<double> impulse_response(const TransferFunction& tf, std::size_t count) {
    tf.validate();
    if (count < 1) throw ConfigError("impulse_response: count must be >= 1");
    return detail::impulse_response_real(tf.b, tf.a, count);
}

// Same recursion with the quantized coefficients read back as reals; the
// datapath stays in double precision so only coefficient error shows up.
inline std::vector<double> impulse_response_quantized(const QuantizedFilter& qf,
                                                      std::size_t count) {
    if (count < 1) throw ConfigError("impulse_response_quantized: count must be >= 1");
    return detail::impulse_response_real(qf.b_values(), qf.a_values(), count);
}

// Polynomial product of two sections sharing a sample rate.
inline TransferFunction cascade(const TransferFunction& f, const TransferFunction& g) {
    f.validate();
    g.validate();
    if (f.sample_rate_hz != g.sample_rate_hz)
        throw ConfigError("cascade: sample rates differ");
    return TransferFunction{detail::poly_mul(f.b, g.b), detail::poly_mul(f.a, g.a),
                            f.sample_rate_hz};
}

enum class DesignKind { Lowpass, Highpass };

// Second-order Butterworth biquad via the bilinear transform. Unity gain at
// DC (lowpass) / Nyquist (highpass); |H| = 1/sqrt(2) at fc.
inline TransferFunction design_butterworth2(DesignKind kind, double fc_hz, double fs_hz) {
    if (!(fs_hz > 0.0) || !(fc_hz > 0.0) || !(fc_hz < fs_hz / 2.0))
        throw ConfigError("design_butterworth2: need 0 < fc < fs/2");
    const double k = std::tan(std::numbers::pi * fc_hz / fs_hz);
    const double q = 1.0 / std::sqrt(2.0);
    const double norm = 1.0 / (1.0 + k / q + k * k);
    TransferFunction tf;
    tf.sample_rate_hz = fs_hz;
    tf.a = {1.0, 2.0 * (k * k - 1.0) * norm, (1.0 - k / q + k * k) * norm};
    if (kind == DesignKind::Lowpass) {
        const double b0 = k * k * norm;
        tf.b = {b0, 2.0 * b0, b0};
    } else {
        tf.b = {norm, -2.0 * norm, norm};
    }
    return tf;
}

inline TransferFunction design_fir_movingavg(std::size_t taps, double fs_hz = 48000.0) {
    if (taps < 1) throw ConfigError("design_fir_movingavg: taps must be >= 1");
    TransferFunction tf;
    tf.sample_rate_hz = fs_hz;
    tf.b.assign(taps, 1.0 / static_cast<double>(taps));
    tf.a = {1.0};
    return tf;
}

enum class WindowKind { Hann };

// Windowed-sinc lowpass, order even, order+1 symmetric taps.
inline TransferFunction design_fir_window(WindowKind kind, std::size_t order, double fc_hz,
                                          double fs_hz) {
    if (kind != WindowKind::Hann) throw ConfigError("design_fir_window: unsupported window");
    if (order < 2 || order % 2 != 0)
        throw ConfigError("design_fir_window: order must be even and >= 2");
    if (!(fs_hz > 0.0) || !(fc_hz > 0.0) || !(fc_hz < fs_hz / 2.0))
        throw ConfigError("design_fir_window: need 0 < fc < fs/2");
    const double wc = 2.0 * std::numbers::pi * fc_hz / fs_hz;
    const auto mid = static_cast<double>(order) / 2.0;
    TransferFunction tf;
    tf.sample_rate_hz = fs_hz;
    tf.a = {1.0};
    tf.b.resize(order + 1);
    for (std::size_t i = 0; i <= order; ++i) {
        const double x = static_cast<double>(i) - mid;
        const double ideal =
            (x == 0.0) ? wc / std::numbers::pi : std::sin(wc * x) / (std::numbers::pi * x);
        const double w =
            0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                  static_cast<double>(order)));
        tf.b[i] = ideal * w;
    }
    return tf;
}

}  // namespace fxv
