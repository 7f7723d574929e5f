// Sampled frequency response H_k = sum_n h[n] e^{-j(2pi/N)kn} and the
// magnitude/phase verification predicates for lowpass, highpass and
// bandpass specifications. Gains are given in dB and compared in linear
// magnitude; only the k = 0..N/2 half grid is checked (real coefficients).
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdio>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fxv/filter.hpp"
#include "fxv/fixedpoint.hpp"

namespace fxv {

inline double db_to_linear(double db) { return std::pow(10.0, db / 20.0); }
inline double linear_to_db(double lin) { return 20.0 * std::log10(lin); }

enum class ResponseSource { Ideal, Fixed };

struct FrequencyResponse {
    std::size_t grid_n = 0;
    std::vector<std::complex<double>> bins;  // H_k for k = 0..N-1
    ResponseSource source = ResponseSource::Ideal;

    double omega(std::size_t k) const {
        return 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(grid_n);
    }
    double magnitude(std::size_t k) const { return std::abs(bins[k]); }
    double phase(std::size_t k) const { return std::arg(bins[k]); }
    std::size_t half_size() const { return grid_n / 2 + 1; }
};

// Direct evaluation; h is zero-padded to N. The (k*n) mod N twiddle lookup
// keeps every term's argument reduction exact.
inline FrequencyResponse sampled_dtft(const std::vector<double>& h, std::size_t grid_n,
                                      ResponseSource source = ResponseSource::Ideal) {
    if (grid_n < 1) throw ConfigError("sampled_dtft: N must be >= 1");
    if (h.size() > grid_n)
        throw ConfigError("sampled_dtft: len(h) = " + std::to_string(h.size()) +
                          " exceeds N = " + std::to_string(grid_n));
    std::vector<std::complex<double>> twiddle(grid_n);
    for (std::size_t r = 0; r < grid_n; ++r) {
        const double ang =
            -2.0 * std::numbers::pi * static_cast<double>(r) / static_cast<double>(grid_n);
        twiddle[r] = {std::cos(ang), std::sin(ang)};
    }
    FrequencyResponse resp;
    resp.grid_n = grid_n;
    resp.source = source;
    resp.bins.assign(grid_n, {0.0, 0.0});
    for (std::size_t k = 0; k < grid_n; ++k) {
        std::complex<double> acc = 0.0;
        for (std::size_t n = 0; n < h.size(); ++n) acc += h[n] * twiddle[(k * n) % grid_n];
        resp.bins[k] = acc;
    }
    return resp;
}

enum class ResponseMethod { ImpulseTruncation, RationalEval };

namespace detail {

inline FrequencyResponse rational_response(const std::vector<double>& b,
                                           const std::vector<double>& a, std::size_t grid_n,
                                           ResponseSource source) {
    FrequencyResponse resp;
    resp.grid_n = grid_n;
    resp.source = source;
    resp.bins.assign(grid_n, {0.0, 0.0});
    for (std::size_t k = 0; k < grid_n; ++k) {
        const double w =
            2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(grid_n);
        const std::complex<double> z(std::cos(-w), std::sin(-w));  // e^{-jw}
        std::complex<double> num = 0.0, den = 0.0;
        for (std::size_t i = b.size(); i-- > 0;) num = num * z + b[i];
        for (std::size_t i = a.size(); i-- > 0;) den = den * z + a[i];
        resp.bins[k] = num / den;
    }
    return resp;
}

// Geometric-decay tail bound from the last two decades of samples. Returns
// an estimate of sum_{n>=N} |h[n]| or nullopt when no decay is evident.
inline std::optional<double> tail_bound(const std::vector<double>& h) {
    const std::size_t n = h.size();
    const std::size_t dec = std::max<std::size_t>(1, n / 10);
    double a1 = 0.0, a2 = 0.0;
    for (std::size_t i = n - 2 * dec; i < n - dec; ++i) a1 = std::max(a1, std::abs(h[i]));
    for (std::size_t i = n - dec; i < n; ++i) a2 = std::max(a2, std::abs(h[i]));
    if (a2 == 0.0) return 0.0;
    if (a1 == 0.0 || a2 >= a1) return std::nullopt;
    const double ratio = std::pow(a2 / a1, 1.0 / static_cast<double>(dec));
    return a2 * ratio / (1.0 - ratio);
}

inline FrequencyResponse truncation_response(const std::vector<double>& b,
                                             const std::vector<double>& a, std::size_t grid_n,
                                             ResponseSource source, bool fir) {
    const std::vector<double> h = impulse_response_real(b, a, grid_n);
    for (double x : h)
        if (!std::isfinite(x))
            throw ComputeError("impulse response diverged (unstable filter)");
    FrequencyResponse resp = sampled_dtft(h, grid_n, source);
    if (!fir) {
        double max_mag = 0.0;
        for (std::size_t k = 0; k < resp.half_size(); ++k)
            max_mag = std::max(max_mag, resp.magnitude(k));
        const auto tail = tail_bound(h);
        if (!tail || (max_mag > 0.0 && *tail >= 1e-6 * max_mag))
            throw ComputeError(
                "impulse truncation insufficient at N = " + std::to_string(grid_n) +
                "; the impulse response has not decayed (unstable filter or N too small)");
    }
    return resp;
}

}  // namespace detail

inline FrequencyResponse response_of(const TransferFunction& tf, std::size_t grid_n,
                                     ResponseMethod method = ResponseMethod::ImpulseTruncation) {
    tf.validate();
    if (method == ResponseMethod::RationalEval)
        return detail::rational_response(tf.b, tf.a, grid_n, ResponseSource::Ideal);
    return detail::truncation_response(tf.b, tf.a, grid_n, ResponseSource::Ideal, tf.is_fir());
}

inline FrequencyResponse response_of(const QuantizedFilter& qf, std::size_t grid_n,
                                     ResponseMethod method = ResponseMethod::ImpulseTruncation) {
    if (method == ResponseMethod::RationalEval)
        return detail::rational_response(qf.b_values(), qf.a_values(), grid_n,
                                         ResponseSource::Fixed);
    return detail::truncation_response(qf.b_values(), qf.a_values(), grid_n,
                                       ResponseSource::Fixed, qf.is_fir());
}

enum class BandKind { Lowpass, Highpass, Bandpass };

inline const char* to_string(BandKind k) {
    switch (k) {
        case BandKind::Lowpass: return "lowpass";
        case BandKind::Highpass: return "highpass";
        case BandKind::Bandpass: return "bandpass";
    }
    return "?";
}

// Digital frequencies in rad/sample; any may be absent. For bandpass, wp/wp2
// and wr/wr2 hold the ordered pairs. A magnitude clause is active only when
// both its frequency and its gain are present.
struct FilterSpecBand {
    BandKind kind = BandKind::Lowpass;
    std::optional<double> wp, wp2;
    std::optional<double> wr, wr2;
    std::optional<double> wc;
    std::optional<double> ap_db, ar_db, ac_db;
    std::optional<double> phase_threshold_rad;

    bool has_passband() const { return wp && ap_db && (kind != BandKind::Bandpass || wp2); }
    bool has_stopband() const { return wr && ar_db && (kind != BandKind::Bandpass || wr2); }
    bool has_cutoff() const { return wc && ac_db && kind != BandKind::Bandpass; }

    void validate() const {
        auto in_range = [](const std::optional<double>& w, const char* name) {
            if (w && !(*w > 0.0 && *w < std::numbers::pi))
                throw SpecError(std::string("spec: ") + name + " must lie in (0, pi)");
        };
        in_range(wp, "wp");
        in_range(wp2, "wp2");
        in_range(wr, "wr");
        in_range(wr2, "wr2");
        in_range(wc, "wc");
        if (ap_db && ar_db && !(*ap_db > *ar_db))
            throw SpecError("spec: Ap must exceed Ar (passband floor above stopband ceiling)");
        if (kind == BandKind::Bandpass) {
            if (wp && wp2 && !(*wp < *wp2)) throw SpecError("spec: need wp1 < wp2");
            if (wr && wr2 && !(*wr < *wr2)) throw SpecError("spec: need wr1 < wr2");
            if (wr && wp && !(*wr < *wp)) throw SpecError("spec: need wr1 < wp1");
            if (wp2 && wr2 && !(*wp2 < *wr2)) throw SpecError("spec: need wp2 < wr2");
        } else {
            if (wp2 || wr2) throw SpecError("spec: frequency pairs are bandpass-only");
        }
        if (!has_passband() && !has_stopband() && !has_cutoff())
            throw SpecError("spec: no active magnitude clause (frequency or gain missing)");
    }
};

enum class MagStatus { S, FP, FS, FC };
enum class PhaseStatus { S, F };

inline const char* to_string(MagStatus s) {
    switch (s) {
        case MagStatus::S: return "S";
        case MagStatus::FP: return "FP";
        case MagStatus::FS: return "FS";
        case MagStatus::FC: return "FC";
    }
    return "?";
}

inline const char* to_string(PhaseStatus s) {
    return s == PhaseStatus::S ? "S" : "F";
}

struct MagnitudeWitness {
    std::size_t k = 0;
    double omega = 0.0;
    double observed_mag = 0.0;
    double bound_linear = 0.0;
    double bound_db = 0.0;
    std::string bound_name;  // "Ap" | "Ar" | "Ac"
};

struct MagnitudeVerdict {
    MagStatus status = MagStatus::S;
    std::optional<MagnitudeWitness> witness;  // present iff status != S
};

namespace detail {

struct MagClause {
    MagStatus fail_status;
    double lo, hi;        // closed bin-frequency interval; lo == hi for the cutoff bin
    bool fail_if_below;   // violation when |H_k| < bound (else when >)
    double bound_linear;
    double bound_db;
    const char* bound_name;
};

inline MagnitudeVerdict scan_clauses(const FrequencyResponse& resp,
                                     const std::vector<MagClause>& clauses) {
    const std::size_t half = resp.half_size();
    for (std::size_t k = 0; k < half; ++k) {
        const double w = resp.omega(k);
        const double mag = resp.magnitude(k);
        for (const auto& c : clauses) {
            if (w < c.lo || w > c.hi) continue;
            const bool violated = c.fail_if_below ? (mag < c.bound_linear) : (mag > c.bound_linear);
            if (violated)
                return {c.fail_status,
                        MagnitudeWitness{k, w, mag, c.bound_linear, c.bound_db,
                                         c.bound_name}};
        }
    }
    return {};
}

inline double cutoff_bin_freq(const FrequencyResponse& resp, double wc) {
    const auto n = static_cast<double>(resp.grid_n);
    auto k = static_cast<long>(std::lround(wc * n / (2.0 * std::numbers::pi)));
    k = std::clamp<long>(k, 0, static_cast<long>(resp.grid_n / 2));
    return resp.omega(static_cast<std::size_t>(k));
}

}  // namespace detail

// Lowpass: passband [0, wp] must stay at or above lin(Ap); the bin nearest
// wc must not exceed lin(Ac); stopband [wr, pi] must stay at or below
// lin(Ar). When several bands fail, the lowest-frequency violation wins.
inline MagnitudeVerdict check_magnitude_lp(const FrequencyResponse& resp,
                                           const FilterSpecBand& spec) {
    if (spec.kind != BandKind::Lowpass) throw SpecError("check_magnitude_lp: spec kind mismatch");
    spec.validate();
    std::vector<detail::MagClause> clauses;
    if (spec.has_passband())
        clauses.push_back({MagStatus::FP, 0.0, *spec.wp, true, db_to_linear(*spec.ap_db),
                           *spec.ap_db, "Ap"});
    if (spec.has_cutoff()) {
        const double wk = detail::cutoff_bin_freq(resp, *spec.wc);
        clauses.push_back(
            {MagStatus::FC, wk, wk, false, db_to_linear(*spec.ac_db), *spec.ac_db, "Ac"});
    }
    if (spec.has_stopband())
        clauses.push_back({MagStatus::FS, *spec.wr, std::numbers::pi, false,
                           db_to_linear(*spec.ar_db), *spec.ar_db, "Ar"});
    if (clauses.empty()) throw SpecError("check_magnitude_lp: required frequency absent");
    return detail::scan_clauses(resp, clauses);
}

// Highpass mirror: stopband [0, wr] at or below lin(Ar); the wc bin must not
// fall below lin(Ac); passband [wp, pi] at or above lin(Ap).
inline MagnitudeVerdict check_magnitude_hp(const FrequencyResponse& resp,
                                           const FilterSpecBand& spec) {
    if (spec.kind != BandKind::Highpass) throw SpecError("check_magnitude_hp: spec kind mismatch");
    spec.validate();
    std::vector<detail::MagClause> clauses;
    if (spec.has_stopband())
        clauses.push_back(
            {MagStatus::FS, 0.0, *spec.wr, false, db_to_linear(*spec.ar_db), *spec.ar_db, "Ar"});
    if (spec.has_cutoff()) {
        const double wk = detail::cutoff_bin_freq(resp, *spec.wc);
        clauses.push_back(
            {MagStatus::FC, wk, wk, true, db_to_linear(*spec.ac_db), *spec.ac_db, "Ac"});
    }
    if (spec.has_passband())
        clauses.push_back({MagStatus::FP, *spec.wp, std::numbers::pi, true,
                           db_to_linear(*spec.ap_db), *spec.ap_db, "Ap"});
    if (clauses.empty()) throw SpecError("check_magnitude_hp: required frequency absent");
    return detail::scan_clauses(resp, clauses);
}

// Bandpass: |H| at or below lin(Ar) on [0, wr1] and [wr2, pi]; at or above
// lin(Ap) on [wp1, wp2].
inline MagnitudeVerdict check_magnitude_bp(const FrequencyResponse& resp,
                                           const FilterSpecBand& spec) {
    if (spec.kind != BandKind::Bandpass) throw SpecError("check_magnitude_bp: spec kind mismatch");
    spec.validate();
    std::vector<detail::MagClause> clauses;
    if (spec.has_stopband()) {
        const double lin = db_to_linear(*spec.ar_db);
        clauses.push_back({MagStatus::FS, 0.0, *spec.wr, false, lin, *spec.ar_db, "Ar"});
        clauses.push_back({MagStatus::FS, *spec.wr2, std::numbers::pi, false, lin, *spec.ar_db,
                           "Ar"});
    }
    if (spec.has_passband())
        clauses.push_back({MagStatus::FP, *spec.wp, *spec.wp2, true, db_to_linear(*spec.ap_db),
                           *spec.ap_db, "Ap"});
    if (clauses.empty()) throw SpecError("check_magnitude_bp: required frequency pair absent");
    return detail::scan_clauses(resp, clauses);
}

inline MagnitudeVerdict check_magnitude(const FrequencyResponse& resp,
                                        const FilterSpecBand& spec) {
    switch (spec.kind) {
        case BandKind::Lowpass: return check_magnitude_lp(resp, spec);
        case BandKind::Highpass: return check_magnitude_hp(resp, spec);
        case BandKind::Bandpass: return check_magnitude_bp(resp, spec);
    }
    throw SpecError("check_magnitude: unknown kind");
}

struct PhaseWitness {
    std::size_t k = 0;
    double omega = 0.0;
    double delta_rad = 0.0;
    double threshold_rad = 0.0;
};

struct PhaseVerdict {
    PhaseStatus status = PhaseStatus::S;
    std::optional<PhaseWitness> witness;
    double max_abs_delta = 0.0;
};

// Wrap-aware phase comparison over the half grid, restricted to `band`
// when given (defaults to the full [0, pi] grid). Deltas are mapped into
// (-pi, pi]; the witness is the first violating bin.
inline PhaseVerdict check_phase(const FrequencyResponse& ideal, const FrequencyResponse& fixed,
                                double threshold_rad,
                                std::optional<std::pair<double, double>> band = std::nullopt) {
    if (ideal.grid_n != fixed.grid_n) throw SpecError("check_phase: grid sizes differ");
    if (!(threshold_rad > 0.0)) throw SpecError("check_phase: threshold must be > 0");
    PhaseVerdict verdict;
    for (std::size_t k = 0; k < ideal.half_size(); ++k) {
        const double w = ideal.omega(k);
        if (band && (w < band->first || w > band->second)) continue;
        double delta = std::remainder(ideal.phase(k) - fixed.phase(k), 2.0 * std::numbers::pi);
        if (delta <= -std::numbers::pi) delta = std::numbers::pi;
        verdict.max_abs_delta = std::max(verdict.max_abs_delta, std::abs(delta));
        if (std::abs(delta) > threshold_rad && verdict.status == PhaseStatus::S) {
            verdict.status = PhaseStatus::F;
            verdict.witness = PhaseWitness{k, w, delta, threshold_rad};
        }
    }
    return verdict;
}

// CSV rows "k,freq_hz,mag_ideal_db,mag_fixed_db,phase_ideal_rad,phase_fixed_rad"
// over the half grid. Magnitudes are floored at -400 dB so zero bins stay
// finite in the output.
inline void write_response_csv(std::ostream& os, const FrequencyResponse& ideal,
                               const FrequencyResponse& fixed, double fs_hz) {
    if (ideal.grid_n != fixed.grid_n)
        throw ConfigError("write_response_csv: grid sizes differ");
    auto db_floor = [](double mag) { return std::max(-400.0, linear_to_db(mag)); };
    os << "k,freq_hz,mag_ideal_db,mag_fixed_db,phase_ideal_rad,phase_fixed_rad\n";
    char line[256];
    for (std::size_t k = 0; k < ideal.half_size(); ++k) {
        const double freq =
            static_cast<double>(k) * fs_hz / static_cast<double>(ideal.grid_n);
        std::snprintf(line, sizeof line, "%zu,%.12g,%.12g,%.12g,%.12g,%.12g\n", k, freq,
                      db_floor(ideal.magnitude(k)), db_floor(fixed.magnitude(k)),
                      ideal.phase(k), fixed.phase(k));
        os << line;
    }
}

}  // namespace fxv
