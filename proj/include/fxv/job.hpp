// Job ingestion, pass orchestration and report emission. A job is a single
// JSON document: {"filter": {...}, "spec": {...}, "fixedpoint": {...}} plus
// run parameters; "filter" and "spec" may also be strings naming sibling
// JSON files. Frequencies are given in Hz and converted to rad/sample via
// w = 2*pi*f/fs. Reports are deterministic for a given config and seed,
// wall-time fields aside.
#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fxv/filter.hpp"
#include "fxv/fixedpoint.hpp"
#include "fxv/overflow.hpp"
#include "fxv/response.hpp"
#include "fxv/stability.hpp"

namespace fxv {

using nlohmann::json;

inline constexpr int kJobSchemaVersion = 1;
inline constexpr int kReportSchemaVersion = 1;

enum class PassKind { Stability, Magnitude, Phase, Overflow };

inline const char* to_string(PassKind p) {
    switch (p) {
        case PassKind::Stability: return "stability";
        case PassKind::Magnitude: return "magnitude";
        case PassKind::Phase: return "phase";
        case PassKind::Overflow: return "overflow";
    }
    return "?";
}

inline PassKind parse_pass(const std::string& s) {
    if (s == "stability") return PassKind::Stability;
    if (s == "magnitude") return PassKind::Magnitude;
    if (s == "phase") return PassKind::Phase;
    if (s == "overflow") return PassKind::Overflow;
    throw ConfigError("unknown pass \"" + s + "\"");
}

inline RoundingMode parse_rounding(const std::string& s) {
    if (s == "nearest") return RoundingMode::NearestEven;
    if (s == "truncate") return RoundingMode::Truncate;
    if (s == "floor") return RoundingMode::Floor;
    throw ConfigError("unknown rounding mode \"" + s + "\"");
}

inline OverflowMode parse_overflow_mode(const std::string& s) {
    if (s == "detect") return OverflowMode::Detect;
    if (s == "saturate") return OverflowMode::Saturate;
    if (s == "wraparound") return OverflowMode::Wraparound;
    throw ConfigError("unknown overflow mode \"" + s + "\"");
}

struct JobConfig {
    TransferFunction filter;
    FilterSpecBand spec;
    FixedFormat format{4, 10};
    RoundingMode rounding = RoundingMode::NearestEven;
    OverflowMode overflow_mode = OverflowMode::Detect;
    std::vector<PassKind> passes;
    std::size_t grid_n = 1024;
    std::size_t bound_k = 8;
    SearchStrategy strategy = SearchStrategy::Directed;
    std::uint64_t seed = kDefaultSearchSeed;
    bool phase_full_grid = false;
    std::optional<std::string> report_path;
    std::optional<std::string> csv_path;

    bool has_pass(PassKind p) const {
        for (auto q : passes)
            if (q == p) return true;
        return false;
    }

    void validate() const {
        filter.validate();
        spec.validate();
        if (passes.empty()) throw ConfigError("job: at least one pass must be selected");
        if (grid_n < 2) throw ConfigError("job: grid_n must be >= 2");
        if (bound_k < 1) throw ConfigError("job: bound_k must be >= 1");
        if (has_pass(PassKind::Phase) && !spec.phase_threshold_rad)
            throw ConfigError(
                "job: the phase pass requires spec.phase_threshold_rad (no default exists)");
    }
};

namespace jobdetail {

inline void expect_keys(const json& obj, const std::set<std::string>& allowed,
                        const std::string& path) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("job schema: unknown field " + path + "." + it.key());
}

inline const json* find(const json& obj, const std::string& key) {
    auto it = obj.find(key);
    return it == obj.end() || it->is_null() ? nullptr : &*it;
}

inline double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError("job schema: expected number at " + path);
    return v.get<double>();
}

inline std::string as_string(const json& v, const std::string& path) {
    if (!v.is_string()) throw ConfigError("job schema: expected string at " + path);
    return v.get<std::string>();
}

inline std::optional<double> opt_number(const json& obj, const std::string& key,
                                        const std::string& path) {
    const json* v = find(obj, key);
    if (!v) return std::nullopt;
    return as_number(*v, path + "." + key);
}

inline std::optional<std::uint64_t> opt_uint(const json& obj, const std::string& key,
                                             const std::string& path) {
    const json* v = find(obj, key);
    if (!v) return std::nullopt;
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0))
        throw ConfigError("job schema: expected non-negative integer at " + path + "." + key);
    return v->get<std::uint64_t>();
}

inline std::optional<std::string> opt_string(const json& obj, const std::string& key,
                                             const std::string& path) {
    const json* v = find(obj, key);
    if (!v) return std::nullopt;
    return as_string(*v, path + "." + key);
}

// A frequency field is a scalar or a 2-array (bandpass pairs).
struct FreqField {
    std::optional<double> lo, hi;
};

inline FreqField freq_field(const json& obj, const std::string& key, const std::string& path) {
    const json* v = find(obj, key);
    if (!v) return {};
    const std::string p = path + "." + key;
    if (v->is_number()) return {v->get<double>(), std::nullopt};
    if (v->is_array() && v->size() == 2 && (*v)[0].is_number() && (*v)[1].is_number())
        return {(*v)[0].get<double>(), (*v)[1].get<double>()};
    throw ConfigError("job schema: expected number or [lo, hi] at " + p);
}

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("JSON parse error in " + path + ": " + e.what());
    }
    return j;
}

// Inline object, or a string naming a JSON file next to the job file.
inline json resolve_section(const json& v, const std::string& key,
                            const std::filesystem::path& base) {
    if (v.is_object()) return v;
    if (v.is_string()) {
        std::filesystem::path p = v.get<std::string>();
        if (p.is_relative()) p = base / p;
        return load_json_file(p.string());
    }
    throw ConfigError("job schema: expected object or file path at ." + key);
}

}  // namespace jobdetail

inline TransferFunction transfer_function_from_json(const json& j, const std::string& path) {
    using namespace jobdetail;
    if (!j.is_object()) throw ConfigError("job schema: expected object at " + path);
    expect_keys(j, {"b", "a", "fs_hz"}, path);
    TransferFunction tf;
    auto read_list = [&](const char* key) {
        const json* v = find(j, key);
        if (!v || !v->is_array() || v->empty())
            throw ConfigError("job schema: expected non-empty array at " + path + "." + key);
        std::vector<double> out;
        for (std::size_t i = 0; i < v->size(); ++i)
            out.push_back(as_number((*v)[i], path + "." + key + "[" + std::to_string(i) + "]"));
        return out;
    };
    tf.b = read_list("b");
    tf.a = read_list("a");
    const json* fs = find(j, "fs_hz");
    if (!fs) throw ConfigError("job schema: missing " + path + ".fs_hz");
    tf.sample_rate_hz = as_number(*fs, path + ".fs_hz");
    tf.validate();
    return tf;
}

inline json transfer_function_to_json(const TransferFunction& tf) {
    return json{{"b", tf.b}, {"a", tf.a}, {"fs_hz", tf.sample_rate_hz}};
}

inline FilterSpecBand spec_from_json(const json& j, double fs_hz, const std::string& path) {
    using namespace jobdetail;
    if (!j.is_object()) throw ConfigError("job schema: expected object at " + path);
    expect_keys(j,
                {"kind", "wp_hz", "wr_hz", "wc_hz", "ap_db", "ar_db", "ac_db",
                 "phase_threshold_rad"},
                path);
    FilterSpecBand spec;
    const auto kind = opt_string(j, "kind", path);
    if (!kind) throw ConfigError("job schema: missing " + path + ".kind");
    if (*kind == "lowpass")
        spec.kind = BandKind::Lowpass;
    else if (*kind == "highpass")
        spec.kind = BandKind::Highpass;
    else if (*kind == "bandpass")
        spec.kind = BandKind::Bandpass;
    else
        throw ConfigError("job schema: " + path + ".kind must be lowpass|highpass|bandpass");
    const double to_rad = 2.0 * std::numbers::pi / fs_hz;
    auto read_freq = [&](const char* key, std::optional<double>& lo, std::optional<double>* hi) {
        auto f = freq_field(j, key, path);
        if (f.lo) lo = *f.lo * to_rad;
        if (f.hi) {
            if (!hi) throw ConfigError("job schema: " + path + "." + key +
                                       " pair is bandpass-only");
            *hi = *f.hi * to_rad;
        }
    };
    const bool bp = spec.kind == BandKind::Bandpass;
    read_freq("wp_hz", spec.wp, bp ? &spec.wp2 : nullptr);
    read_freq("wr_hz", spec.wr, bp ? &spec.wr2 : nullptr);
    read_freq("wc_hz", spec.wc, nullptr);
    spec.ap_db = opt_number(j, "ap_db", path);
    spec.ar_db = opt_number(j, "ar_db", path);
    spec.ac_db = opt_number(j, "ac_db", path);
    spec.phase_threshold_rad = opt_number(j, "phase_threshold_rad", path);
    spec.validate();
    return spec;
}

// Parses and fully resolves a job document; defaults are applied here.
inline JobConfig parse_job(const std::string& job_path) {
    using namespace jobdetail;
    const json doc = load_json_file(job_path);
    if (!doc.is_object()) throw ConfigError("job schema: top level must be an object");
    expect_keys(doc,
                {"schema_version", "filter", "spec", "fixedpoint", "passes", "grid_n", "bound_k",
                 "strategy", "seed", "report_path", "csv_path", "phase_full_grid"},
                "$");
    if (const json* sv = find(doc, "schema_version")) {
        if (!sv->is_number_integer() || sv->get<int>() != kJobSchemaVersion)
            throw ConfigError("job schema: unsupported schema_version");
    }
    const auto base = std::filesystem::path(job_path).parent_path();
    JobConfig job;
    const json* filter = find(doc, "filter");
    if (!filter) throw ConfigError("job schema: missing .filter");
    job.filter =
        transfer_function_from_json(resolve_section(*filter, "filter", base), ".filter");
    const json* spec = find(doc, "spec");
    if (!spec) throw ConfigError("job schema: missing .spec");
    job.spec = spec_from_json(resolve_section(*spec, "spec", base), job.filter.sample_rate_hz,
                              ".spec");
    if (const json* fp = find(doc, "fixedpoint")) {
        if (!fp->is_object()) throw ConfigError("job schema: expected object at .fixedpoint");
        expect_keys(*fp, {"format", "rounding", "overflow"}, ".fixedpoint");
        if (auto s = opt_string(*fp, "format", ".fixedpoint")) job.format = parse_format(*s);
        if (auto s = opt_string(*fp, "rounding", ".fixedpoint")) job.rounding = parse_rounding(*s);
        if (auto s = opt_string(*fp, "overflow", ".fixedpoint"))
            job.overflow_mode = parse_overflow_mode(*s);
    }
    if (const json* passes = find(doc, "passes")) {
        if (!passes->is_array()) throw ConfigError("job schema: expected array at .passes");
        for (const auto& p : *passes)
            job.passes.push_back(parse_pass(as_string(p, ".passes[]")));
    } else {
        job.passes = {PassKind::Stability, PassKind::Magnitude, PassKind::Overflow};
        if (job.spec.phase_threshold_rad)
            job.passes.insert(job.passes.begin() + 2, PassKind::Phase);
    }
    if (auto v = opt_uint(doc, "grid_n", "$")) job.grid_n = static_cast<std::size_t>(*v);
    if (auto v = opt_uint(doc, "bound_k", "$")) job.bound_k = static_cast<std::size_t>(*v);
    if (auto s = opt_string(doc, "strategy", "$")) job.strategy = parse_strategy(*s);
    if (auto v = opt_uint(doc, "seed", "$")) job.seed = *v;
    if (const json* fg = find(doc, "phase_full_grid")) {
        if (!fg->is_boolean()) throw ConfigError("job schema: expected bool at .phase_full_grid");
        job.phase_full_grid = fg->get<bool>();
    }
    job.report_path = opt_string(doc, "report_path", "$");
    job.csv_path = opt_string(doc, "csv_path", "$");
    job.validate();
    return job;
}

namespace jobdetail {

inline json json_wide(WideRaw w) {
    if (w >= WideRaw(INT64_MIN) && w <= WideRaw(INT64_MAX)) return static_cast<std::int64_t>(w);
    // Decimal string for values beyond 64 bits.
    bool neg = w < 0;
    unsigned __int128 u = neg ? static_cast<unsigned __int128>(-(w + 1)) + 1
                              : static_cast<unsigned __int128>(w);
    std::string digits;
    while (u > 0) {
        digits.insert(digits.begin(), static_cast<char>('0' + static_cast<int>(u % 10)));
        u /= 10;
    }
    if (digits.empty()) digits = "0";
    return (neg ? "-" : "") + digits;
}

inline json witness_to_json(const MagnitudeWitness& w, double fs_hz, std::size_t grid_n) {
    return json{{"bin", w.k},
                {"omega_rad", w.omega},
                {"freq_hz", static_cast<double>(w.k) * fs_hz / static_cast<double>(grid_n)},
                {"observed_mag", w.observed_mag},
                {"observed_db", std::max(-400.0, linear_to_db(w.observed_mag))},
                {"bound_name", w.bound_name},
                {"bound_db", w.bound_db},
                {"bound_linear", w.bound_linear}};
}

inline json counterexample_to_json(const OverflowCounterexample& ce) {
    json inputs = json::array();
    for (const auto& v : ce.inputs) inputs.push_back(json{{"raw", v.raw}, {"value", v.value()}});
    return json{{"inputs", inputs},
                {"step", ce.step},
                {"site", to_string(ce.site)},
                {"term_index", ce.term_index},
                {"wide_raw", json_wide(ce.wide_raw)},
                {"wide_frac_bits", ce.wide_frac_bits},
                {"wide_value", ce.wide_value()},
                {"bound", ce.above ? "v_max" : "v_min"}};
}

}  // namespace jobdetail

struct RunResult {
    json report;
    int exit_code = 0;
    std::optional<FrequencyResponse> ideal_response;
    std::optional<FrequencyResponse> fixed_response;
    double fs_hz = 0.0;
};

// Runs the selected passes in the fixed order stability -> magnitude ->
// phase -> overflow. A quantized-unstable (or marginal) IIR downgrades the
// magnitude and phase passes to skipped. Exit codes: 0 all pass, 1 at least
// one violation, 2 usage/config error (raised before a report exists),
// 3 indeterminate (marginal stability, non-convergent computation).
inline RunResult run_job(const JobConfig& job) {
    job.validate();
    RunResult rr;
    rr.fs_hz = job.filter.sample_rate_hz;
    json results = json::object();
    json timing = json::object();
    bool any_violation = false;
    bool any_indeterminate = false;

    const QuantizedFilter qf = quantize_filter(job.filter, job.format, job.rounding);

    using clock = std::chrono::steady_clock;
    auto ms_since = [](clock::time_point t0) {
        return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    };

    // The stability gate is evaluated for any IIR filter even when the
    // stability pass is not selected; magnitude and phase depend on it.
    std::optional<StabilityVerdict> stability;
    if (!qf.is_fir() || job.has_pass(PassKind::Stability)) stability = check_stability(qf);

    if (job.has_pass(PassKind::Stability)) {
        auto t0 = clock::now();
        const auto& v = *stability;
        json entry;
        switch (v.status) {
            case StabilityStatus::Stable: entry["status"] = "S"; break;
            case StabilityStatus::Unstable:
                entry["status"] = "F";
                any_violation = true;
                break;
            case StabilityStatus::Marginal:
                entry["status"] = "M";
                any_indeterminate = true;
                break;
        }
        entry["failed_condition"] =
            v.failed_condition ? json(to_string(*v.failed_condition)) : json(nullptr);
        entry["oracle_max_root"] = v.oracle_max_root ? json(*v.oracle_max_root) : json(nullptr);
        if (!v.note.empty()) entry["note"] = v.note;
        results["stability"] = std::move(entry);
        timing["stability"] = ms_since(t0);
    }

    const bool gate_open = !stability || stability->status == StabilityStatus::Stable;
    const char* gate_reason = !gate_open
                                  ? (stability->status == StabilityStatus::Marginal
                                         ? "quantized filter marginally stable"
                                         : "quantized filter unstable")
                                  : "";
    if (!gate_open && stability->status == StabilityStatus::Unstable) any_violation = true;

    const bool need_responses =
        job.has_pass(PassKind::Magnitude) || job.has_pass(PassKind::Phase) || job.csv_path;
    if (need_responses && gate_open) {
        try {
            rr.ideal_response = response_of(job.filter, job.grid_n);
            rr.fixed_response = response_of(qf, job.grid_n);
        } catch (const ComputeError& e) {
            json entry{{"indeterminate", true}, {"reason", e.what()}};
            if (job.has_pass(PassKind::Magnitude)) results["magnitude"] = entry;
            if (job.has_pass(PassKind::Phase)) results["phase"] = entry;
            any_indeterminate = true;
        }
    }

    if (job.has_pass(PassKind::Magnitude) && !results.contains("magnitude")) {
        auto t0 = clock::now();
        if (!gate_open) {
            results["magnitude"] = json{{"skipped", true}, {"reason", gate_reason}};
        } else {
            const MagnitudeVerdict v = check_magnitude(*rr.fixed_response, job.spec);
            json entry{{"status", to_string(v.status)}};
            entry["witness"] = v.witness ? jobdetail::witness_to_json(*v.witness, rr.fs_hz,
                                                                      job.grid_n)
                                         : json(nullptr);
            if (v.status != MagStatus::S) any_violation = true;
            results["magnitude"] = std::move(entry);
        }
        timing["magnitude"] = ms_since(t0);
    }

    if (job.has_pass(PassKind::Phase) && !results.contains("phase")) {
        auto t0 = clock::now();
        if (!gate_open) {
            results["phase"] = json{{"skipped", true}, {"reason", gate_reason}};
        } else {
            std::optional<std::pair<double, double>> band;
            if (!job.phase_full_grid) {
                const auto& s = job.spec;
                if (s.kind == BandKind::Lowpass && s.wp) band = {{0.0, *s.wp}};
                if (s.kind == BandKind::Highpass && s.wp) band = {{*s.wp, std::numbers::pi}};
                if (s.kind == BandKind::Bandpass && s.wp && s.wp2) band = {{*s.wp, *s.wp2}};
            }
            const PhaseVerdict v = check_phase(*rr.ideal_response, *rr.fixed_response,
                                               *job.spec.phase_threshold_rad, band);
            json entry{{"status", to_string(v.status)},
                       {"max_abs_delta_rad", v.max_abs_delta}};
            entry["witness"] =
                v.witness ? json{{"bin", v.witness->k},
                                 {"omega_rad", v.witness->omega},
                                 {"freq_hz", static_cast<double>(v.witness->k) * rr.fs_hz /
                                                 static_cast<double>(job.grid_n)},
                                 {"delta_rad", v.witness->delta_rad},
                                 {"threshold_rad", v.witness->threshold_rad}}
                          : json(nullptr);
            if (v.status != PhaseStatus::S) any_violation = true;
            results["phase"] = std::move(entry);
        }
        timing["phase"] = ms_since(t0);
    }

    if (job.has_pass(PassKind::Overflow)) {
        auto t0 = clock::now();
        try {
            SimOptions opt{job.overflow_mode, job.rounding, false};
            const OverflowSearchResult sr =
                search_overflow(qf, job.bound_k, job.strategy, opt, job.seed);
            json entry{{"status", sr.violation_found ? "F" : "S"},
                       {"strategy", to_string(sr.strategy)},
                       {"bound_k", sr.horizon},
                       {"sequences_examined", sr.sequences_examined}};
            entry["counterexample"] = sr.counterexample
                                          ? jobdetail::counterexample_to_json(*sr.counterexample)
                                          : json(nullptr);
            if (sr.violation_found) any_violation = true;
            results["overflow"] = std::move(entry);
        } catch (const ComputeError& e) {
            results["overflow"] = json{{"indeterminate", true}, {"reason", e.what()}};
            any_indeterminate = true;
        }
        timing["overflow"] = ms_since(t0);
    }

    json passes = json::array();
    for (auto p : job.passes) passes.push_back(to_string(p));
    rr.report = json{{"schema_version", kReportSchemaVersion},
                     {"config",
                      {{"format", to_string(job.format)},
                       {"grid_n", job.grid_n},
                       {"bound_k", job.bound_k},
                       {"seed", job.seed},
                       {"rounding", to_string(job.rounding)},
                       {"overflow_mode", to_string(job.overflow_mode)},
                       {"strategy", to_string(job.strategy)},
                       {"phase_full_grid", job.phase_full_grid},
                       {"passes", passes}}},
                     {"results", results},
                     {"timing_ms", timing}};
    rr.exit_code = any_violation ? 1 : (any_indeterminate ? 3 : 0);
    rr.report["exit_code"] = rr.exit_code;
    return rr;
}

// Plot-ready CSV for the magnitude/phase grid; requires that the run
// computed responses (i.e. the magnitude or phase pass ran unskipped).
inline void emit_response_csv(const RunResult& rr, const std::string& path) {
    if (!rr.ideal_response || !rr.fixed_response)
        throw ConfigError("emit_response_csv: no response grid available (magnitude pass did "
                          "not run)");
    std::ofstream out(path);
    if (!out) throw ConfigError("emit_response_csv: cannot open " + path);
    write_response_csv(out, *rr.ideal_response, *rr.fixed_response, rr.fs_hz);
}

inline void write_report(const RunResult& rr, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("write_report: cannot open " + path);
    out << rr.report.dump(2) << "\n";
}

}  // namespace fxv
