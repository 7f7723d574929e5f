// Bounded overflow verification on the fixed-point direct-form-I datapath.
// Products are exact wide values (2n fractional bits) range-checked before
// accumulation; the accumulator itself is wide and never rounded; the
// output register is re-rounded to the format and checked. Exhaustive
// search is a complete decision procedure within its horizon; analytic
// search is complete for FIR; directed search is sound but incomplete.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fxv/filter.hpp"
#include "fxv/fixedpoint.hpp"
#include "fxv/stability.hpp"

namespace fxv {

enum class SearchStrategy { Exhaustive, AnalyticFir, Directed };

inline const char* to_string(SearchStrategy s) {
    switch (s) {
        case SearchStrategy::Exhaustive: return "exhaustive";
        case SearchStrategy::AnalyticFir: return "analytic";
        case SearchStrategy::Directed: return "directed";
    }
    return "?";
}

inline SearchStrategy parse_strategy(const std::string& s) {
    if (s == "exhaustive") return SearchStrategy::Exhaustive;
    if (s == "analytic" || s == "analytic_fir") return SearchStrategy::AnalyticFir;
    if (s == "directed") return SearchStrategy::Directed;
    throw ConfigError("unknown strategy \"" + s + "\"");
}

enum class ViolationSite { ProductB, ProductA, Output };

inline const char* to_string(ViolationSite s) {
    switch (s) {
        case ViolationSite::ProductB: return "b_term";
        case ViolationSite::ProductA: return "a_term";
        case ViolationSite::Output: return "output";
    }
    return "?";
}

struct OverflowCounterexample {
    std::vector<FixedValue> inputs;  // the violating prefix, in time order
    std::size_t step = 0;
    ViolationSite site = ViolationSite::Output;
    std::size_t term_index = 0;  // tap index for product sites
    WideRaw wide_raw = 0;        // unclamped value, 2^-wide_frac_bits steps
    int wide_frac_bits = 0;
    bool above = false;          // violated v_max (else v_min)

    double wide_value() const {
        return std::ldexp(static_cast<double>(wide_raw), -wide_frac_bits);
    }
};

struct SimOptions {
    OverflowMode mode = OverflowMode::Detect;
    RoundingMode rounding = RoundingMode::NearestEven;
    // Restrict range checks to the product terms (the stored output is
    // still computed but not checked).
    bool products_only = false;
};

struct ProductRecord {
    ViolationSite side = ViolationSite::ProductB;
    std::size_t term_index = 0;
    WideRaw exact = 0;        // 2n fractional bits
    WideRaw after_mode = 0;   // value accumulated (clamped/wrapped if needed)
    bool out_of_range = false;
};

struct StepRecord {
    std::vector<ProductRecord> products;
    WideRaw accumulator = 0;   // 2n fractional bits, before output rounding
    WideRaw output_wide = 0;   // n fractional bits, rounded but unclamped
    FixedValue output;
};

struct BoundedRun {
    std::vector<FixedValue> inputs;
    std::vector<StepRecord> trace;
};

namespace detail {

// One direct-form-I step over raw integers. Bounds for the exact products
// live in 2n-fractional-bit units; the rounded output is checked in
// n-fractional-bit units.
class Df1Stepper {
public:
    Df1Stepper(const QuantizedFilter& qf, SimOptions opt)
        : opt_(opt),
          fmt_(qf.format),
          state_(qf.b_q.size(), qf.a_q.size(), qf.format),
          a0_raw_(qf.a_q.empty() ? 1 : qf.a_q[0].raw) {
        if (a0_raw_ == 0)
            throw ConfigError("simulate: quantized a[0] is zero; filter not realizable");
        for (const auto& v : qf.b_q) b_raw_.push_back(v.raw);
        for (const auto& v : qf.a_q) a_raw_.push_back(v.raw);
        lo2n_ = WideRaw(fmt_.raw_min()) << fmt_.frac_bits;
        hi2n_ = WideRaw(fmt_.raw_max()) << fmt_.frac_bits;
    }

    struct Violation {
        ViolationSite site;
        std::size_t term_index;
        WideRaw wide_raw;
        int wide_frac_bits;
        bool above;
    };

    // Advances one step; `record` may be null for search workloads.
    std::optional<Violation> step(int64_t x_raw, FixedValue& out, StepRecord* record) {
        WideRaw acc = 0;
        std::optional<Violation> first;
        auto handle_product = [&](ViolationSite side, std::size_t idx, WideRaw exact) {
            WideRaw used = exact;
            bool oor = exact < lo2n_ || exact > hi2n_;
            if (oor) {
                if (!first && opt_.mode == OverflowMode::Detect)
                    first = Violation{side, idx, exact, 2 * fmt_.frac_bits, exact > hi2n_};
                if (opt_.mode == OverflowMode::Saturate)
                    used = exact > hi2n_ ? hi2n_ : lo2n_;
                else if (opt_.mode == OverflowMode::Wraparound)
                    used = wrap2n(exact);
            }
            if (record) record->products.push_back({side, idx, exact, used, oor});
            return used;
        };
        for (std::size_t i = 0; i < b_raw_.size() && !stop(first); ++i) {
            const int64_t xi = (i == 0) ? x_raw : history_x(i - 1);
            acc += handle_product(ViolationSite::ProductB, i, WideRaw(b_raw_[i]) * WideRaw(xi));
        }
        for (std::size_t j = 1; j < a_raw_.size() && !stop(first); ++j)
            acc -= handle_product(ViolationSite::ProductA, j,
                                  WideRaw(a_raw_[j]) * WideRaw(history_y(j - 1)));
        if (stop(first)) return first;
        // y_raw = round(acc / a0) in n-fractional-bit units.
        const WideRaw y_wide = fxv::detail::round_div(acc, WideRaw(a0_raw_), opt_.rounding);
        int64_t y_raw;
        if (y_wide < fmt_.raw_min() || y_wide > fmt_.raw_max()) {
            if (!opt_.products_only && opt_.mode == OverflowMode::Detect && !first)
                first = Violation{ViolationSite::Output, 0, y_wide, fmt_.frac_bits,
                                  y_wide > fmt_.raw_max()};
            if (opt_.mode == OverflowMode::Wraparound)
                y_raw = static_cast<int64_t>(fxv::detail::wrap_raw(y_wide, fmt_));
            else
                y_raw = static_cast<int64_t>(y_wide > fmt_.raw_max() ? fmt_.raw_max()
                                                                     : fmt_.raw_min());
        } else {
            y_raw = static_cast<int64_t>(y_wide);
        }
        out = FixedValue(y_raw, fmt_);
        if (record) {
            record->accumulator = acc;
            record->output_wide = y_wide;
            record->output = out;
        }
        if (first) return first;
        state_.push_input(FixedValue(x_raw, fmt_));
        state_.push_output(out);
        return std::nullopt;
    }

    const StateDF1& state() const { return state_; }
    void set_state(const StateDF1& s) { state_ = s; }

private:
    bool stop(const std::optional<Violation>& v) const {
        return v.has_value() && opt_.mode == OverflowMode::Detect;
    }
    int64_t history_x(std::size_t back) const {
        return back < state_.x_hist.size() ? state_.x_hist[back].raw : 0;
    }
    int64_t history_y(std::size_t back) const {
        return back < state_.y_hist.size() ? state_.y_hist[back].raw : 0;
    }
    WideRaw wrap2n(WideRaw v) const {
        const WideRaw span = WideRaw(1) << (fmt_.int_bits + 1 + 2 * fmt_.frac_bits);
        const WideRaw lo = WideRaw(fmt_.raw_min()) << fmt_.frac_bits;
        WideRaw r = (v - lo) % span;
        if (r < 0) r += span;
        return r + lo;
    }

    SimOptions opt_;
    FixedFormat fmt_;
    StateDF1 state_;
    std::vector<int64_t> b_raw_, a_raw_;
    int64_t a0_raw_;
    WideRaw lo2n_, hi2n_;
};

}  // namespace detail

struct SimulationOutcome {
    BoundedRun run;
    std::optional<OverflowCounterexample> violation;
};

// Runs the sequence from zero state. In Detect mode the run stops at the
// first out-of-range product or output and the counterexample holds the
// violating prefix; Saturate/Wraparound complete the run under their
// per-operation semantics.
inline SimulationOutcome simulate_fixed(const QuantizedFilter& qf,
                                        const std::vector<FixedValue>& inputs,
                                        SimOptions opt = {}) {
    detail::Df1Stepper stepper(qf, opt);
    SimulationOutcome outcome;
    outcome.run.inputs = inputs;
    for (std::size_t n = 0; n < inputs.size(); ++n) {
        if (!(inputs[n].format == qf.format))
            throw FormatError("simulate_fixed: input format mismatch");
        StepRecord rec;
        FixedValue out;
        auto violation = stepper.step(inputs[n].raw, out, &rec);
        outcome.run.trace.push_back(std::move(rec));
        if (violation && opt.mode == OverflowMode::Detect) {
            OverflowCounterexample ce;
            ce.inputs.assign(inputs.begin(), inputs.begin() + static_cast<long>(n) + 1);
            ce.step = n;
            ce.site = violation->site;
            ce.term_index = violation->term_index;
            ce.wide_raw = violation->wide_raw;
            ce.wide_frac_bits = violation->wide_frac_bits;
            ce.above = violation->above;
            outcome.violation = std::move(ce);
            return outcome;
        }
    }
    return outcome;
}

struct WorstCaseFir {
    std::vector<FixedValue> inputs;  // time order; input[len-1-i] pairs tap i
    double peak = 0.0;               // resulting output register value
    bool overflow = false;
};

// Sign-matched extreme inputs maximize every product and the accumulated
// output simultaneously; both range directions and the extreme products
// are checked, which makes the existence answer complete for FIR.
inline WorstCaseFir worst_case_fir(const QuantizedFilter& qf,
                                   RoundingMode rounding = RoundingMode::NearestEven) {
    if (!qf.is_fir()) throw ComputeError("worst_case_fir: filter is not FIR");
    const FixedFormat fmt = qf.format;
    const int64_t x_hi = fmt.raw_max(), x_lo = fmt.raw_min();
    const WideRaw hi2n = WideRaw(fmt.raw_max()) << fmt.frac_bits;
    const WideRaw lo2n = WideRaw(fmt.raw_min()) << fmt.frac_bits;
    const std::size_t taps = qf.b_q.size();
    WorstCaseFir wc;
    wc.inputs.reserve(taps);
    WideRaw acc_max = 0, acc_min = 0;
    bool product_oor = false;
    for (std::size_t i = 0; i < taps; ++i) {
        const int64_t b = qf.b_q[i].raw;
        const int64_t x_match = b >= 0 ? x_hi : x_lo;
        const int64_t x_anti = b >= 0 ? x_lo : x_hi;
        const WideRaw p_max = WideRaw(b) * WideRaw(x_match);
        const WideRaw p_min = WideRaw(b) * WideRaw(x_anti);
        acc_max += p_max;
        acc_min += p_min;
        product_oor = product_oor || p_max > hi2n || p_min < lo2n;
        wc.inputs.push_back(FixedValue(x_match, fmt));
    }
    // input[len-1-i] reaches tap i at the final step
    std::reverse(wc.inputs.begin(), wc.inputs.end());
    const WideRaw y_max = fxv::detail::round_div(acc_max, WideRaw(qf.a_q[0].raw), rounding);
    const WideRaw y_min = fxv::detail::round_div(acc_min, WideRaw(qf.a_q[0].raw), rounding);
    wc.peak = std::ldexp(static_cast<double>(y_max), -fmt.frac_bits);
    wc.overflow = product_oor || y_max > fmt.raw_max() || y_min < fmt.raw_min();
    return wc;
}

struct OverflowSearchResult {
    bool violation_found = false;
    std::optional<OverflowCounterexample> counterexample;
    SearchStrategy strategy = SearchStrategy::Exhaustive;
    std::size_t horizon = 0;
    std::uint64_t sequences_examined = 0;
};

namespace detail {

// Ordering used to normalize reported counterexamples: minimal step, then
// lexicographically smallest input prefix by raw value.
inline bool ce_less(const OverflowCounterexample& a, const OverflowCounterexample& b) {
    if (a.step != b.step) return a.step < b.step;
    for (std::size_t i = 0; i < a.inputs.size() && i < b.inputs.size(); ++i) {
        if (a.inputs[i].raw != b.inputs[i].raw) return a.inputs[i].raw < b.inputs[i].raw;
    }
    return a.inputs.size() < b.inputs.size();
}

inline OverflowCounterexample replay_violation(const QuantizedFilter& qf,
                                               const std::vector<FixedValue>& inputs,
                                               const SimOptions& base) {
    SimOptions detect = base;
    detect.mode = OverflowMode::Detect;
    auto outcome = simulate_fixed(qf, inputs, detect);
    if (!outcome.violation)
        throw ComputeError("overflow search: candidate failed to replay");
    return *outcome.violation;
}

inline OverflowSearchResult search_exhaustive(const QuantizedFilter& qf, std::size_t horizon,
                                              const SimOptions& base) {
    const FixedFormat fmt = qf.format;
    const int bits_per_step = fmt.int_bits + fmt.frac_bits + 1;
    if (static_cast<std::size_t>(bits_per_step) * horizon > 24)
        throw ComputeError("exhaustive search budget exceeded: (2^" +
                           std::to_string(bits_per_step) + ")^" + std::to_string(horizon) +
                           " sequences; reduce the bound or the format");
    OverflowSearchResult result;
    result.strategy = SearchStrategy::Exhaustive;
    result.horizon = horizon;
    SimOptions detect = base;
    detect.mode = OverflowMode::Detect;
    const int64_t lo = fmt.raw_min(), hi = fmt.raw_max();
    std::optional<OverflowCounterexample> best;
    std::vector<FixedValue> prefix;
    prefix.reserve(horizon);
    // Depth-first over input prefixes in ascending raw order. A violating
    // prefix dominates its whole subtree (every extension violates at the
    // same step), so the subtree is pruned; the first counterexample found
    // at a given depth is the lex-least one. Tracking the best (step,
    // prefix) pair over the scan yields the global minimum. One stepper per
    // depth is reused to keep the inner loop allocation-free.
    std::vector<detail::Df1Stepper> steppers(horizon, detail::Df1Stepper(qf, detect));
    std::vector<StateDF1> stack(horizon + 1,
                                StateDF1(qf.b_q.size(), qf.a_q.size(), fmt));
    std::function<void(std::size_t)> dfs = [&](std::size_t depth) {
        if (depth == horizon) return;
        if (best && best->step == 0) return;  // nothing can beat step 0
        for (int64_t raw = lo; raw <= hi; ++raw) {
            auto& stepper = steppers[depth];
            stepper.set_state(stack[depth]);
            FixedValue out;
            auto violation = stepper.step(raw, out, nullptr);
            ++result.sequences_examined;
            prefix.push_back(FixedValue(raw, fmt));
            if (violation) {
                if (!best || depth < best->step) {
                    OverflowCounterexample ce;
                    ce.inputs = prefix;
                    ce.step = depth;
                    ce.site = violation->site;
                    ce.term_index = violation->term_index;
                    ce.wide_raw = violation->wide_raw;
                    ce.wide_frac_bits = violation->wide_frac_bits;
                    ce.above = violation->above;
                    best = std::move(ce);
                }
            } else if (depth + 1 < horizon) {
                stack[depth + 1] = stepper.state();
                dfs(depth + 1);
            }
            prefix.pop_back();
            if (best && best->step == 0) return;
        }
    };
    dfs(0);
    if (best) {
        result.violation_found = true;
        result.counterexample = std::move(best);
    }
    return result;
}

inline OverflowSearchResult search_analytic(const QuantizedFilter& qf, std::size_t horizon,
                                            const SimOptions& base) {
    if (!qf.is_fir())
        throw ComputeError("strategy inapplicable: analytic search requires an FIR filter");
    OverflowSearchResult result;
    result.strategy = SearchStrategy::AnalyticFir;
    result.horizon = horizon;
    // Within a horizon shorter than the tap count only the first `horizon`
    // taps can meet a nonzero input, so the worst case is taken over that
    // prefix filter.
    QuantizedFilter probe = qf;
    if (horizon < probe.b_q.size())
        probe.b_q.resize(horizon, FixedValue(0, qf.format));
    auto wc = worst_case_fir(probe, base.rounding);
    result.sequences_examined = 2;
    if (wc.overflow) {
        result.violation_found = true;
        result.counterexample = replay_violation(qf, wc.inputs, base);
    } else {
        // The positive direction is clean; confirm the negative one.
        std::vector<FixedValue> anti;
        const int64_t x_hi = qf.format.raw_max(), x_lo = qf.format.raw_min();
        for (std::size_t i = 0; i < probe.b_q.size(); ++i)
            anti.push_back(FixedValue(probe.b_q[i].raw >= 0 ? x_lo : x_hi, qf.format));
        std::reverse(anti.begin(), anti.end());
        SimOptions detect = base;
        detect.mode = OverflowMode::Detect;
        auto outcome = simulate_fixed(qf, anti, detect);
        if (outcome.violation) {
            result.violation_found = true;
            result.counterexample = outcome.violation;
        }
    }
    return result;
}

inline OverflowSearchResult search_directed(const QuantizedFilter& qf, std::size_t horizon,
                                            const SimOptions& base, std::uint64_t seed,
                                            int restarts) {
    OverflowSearchResult result;
    result.strategy = SearchStrategy::Directed;
    result.horizon = horizon;
    const FixedFormat fmt = qf.format;
    const int64_t lo = fmt.raw_min(), hi = fmt.raw_max();
    SimOptions sat = base;
    sat.mode = OverflowMode::Saturate;  // keep runs alive while scoring

    // Score = worst excursion ratio across the checked sites; > 1 means the
    // detect-mode replay violates. The output is scored after rounding, the
    // same quantity the range check sees.
    auto score_of = [&](const std::vector<FixedValue>& inputs) {
        auto outcome = simulate_fixed(qf, inputs, sat);
        const double vmax2n = std::ldexp(static_cast<double>(fmt.raw_max()), fmt.frac_bits);
        const double vmin2n = std::ldexp(static_cast<double>(fmt.raw_min()), fmt.frac_bits);
        const auto vmax_n = static_cast<double>(fmt.raw_max());
        const auto vmin_n = static_cast<double>(fmt.raw_min());
        double worst = 0.0;
        for (const auto& step : outcome.run.trace) {
            for (const auto& p : step.products) {
                const auto v = static_cast<double>(p.exact);
                worst = std::max(worst, v > 0 ? v / vmax2n : v / vmin2n);
            }
            const auto y = static_cast<double>(step.output_wide);
            if (!base.products_only)
                worst = std::max(worst, y > 0 ? y / vmax_n : y / vmin_n);
        }
        return worst;
    };

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int64_t> any_raw(lo, hi);
    std::optional<OverflowCounterexample> best;
    const std::size_t taps = qf.b_q.size();
    for (int restart = 0; restart < restarts; ++restart) {
        std::vector<FixedValue> cur(horizon, FixedValue(0, fmt));
        if (restart == 0) {
            // sign-matched seed against the b taps, repeated
            for (std::size_t i = 0; i < horizon; ++i) {
                const std::size_t tap = (horizon - 1 - i) % std::max<std::size_t>(taps, 1);
                cur[i] = FixedValue(qf.b_q[tap].raw >= 0 ? hi : lo, fmt);
            }
        } else if (restart == 1) {
            for (auto& v : cur) v = FixedValue(hi, fmt);
        } else if (restart == 2) {
            for (auto& v : cur) v = FixedValue(lo, fmt);
        } else {
            for (auto& v : cur) v = FixedValue(any_raw(rng), fmt);
        }
        double cur_score = score_of(cur);
        bool improved = true;
        while (improved && cur_score <= 1.0) {
            improved = false;
            for (std::size_t pos = 0; pos < horizon && !improved; ++pos) {
                const int64_t orig = cur[pos].raw;
                const int64_t candidates[4] = {hi, lo, std::min(hi, orig + 1),
                                               std::max(lo, orig - 1)};
                for (int64_t cand : candidates) {
                    if (cand == orig) continue;
                    cur[pos] = FixedValue(cand, fmt);
                    const double s = score_of(cur);
                    ++result.sequences_examined;
                    if (s > cur_score) {
                        cur_score = s;
                        improved = true;
                        break;
                    }
                    cur[pos] = FixedValue(orig, fmt);
                }
            }
        }
        if (cur_score > 1.0) {
            auto ce = replay_violation(qf, cur, base);
            if (!best || ce_less(ce, *best)) best = std::move(ce);
        }
    }
    if (best) {
        result.violation_found = true;
        result.counterexample = std::move(best);
    }
    return result;
}

}  // namespace detail

inline constexpr std::uint64_t kDefaultSearchSeed = 1729;
inline constexpr int kDefaultDirectedRestarts = 64;

inline OverflowSearchResult search_overflow(const QuantizedFilter& qf, std::size_t horizon,
                                            SearchStrategy strategy, SimOptions opt = {},
                                            std::uint64_t seed = kDefaultSearchSeed,
                                            int restarts = kDefaultDirectedRestarts) {
    if (horizon < 1) throw ConfigError("search_overflow: bound must be >= 1");
    switch (strategy) {
        case SearchStrategy::Exhaustive: return detail::search_exhaustive(qf, horizon, opt);
        case SearchStrategy::AnalyticFir: return detail::search_analytic(qf, horizon, opt);
        case SearchStrategy::Directed:
            return detail::search_directed(qf, horizon, opt, seed, restarts);
    }
    throw ConfigError("search_overflow: unknown strategy");
}

}  // namespace fxv
