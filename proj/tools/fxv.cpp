// fxv - fixed-point digital filter verifier.
//
//   fxv verify --job job.json [--report out.json] [--emit-csv grid.csv] ...
//
// Verifies a quantized filter against its design spec: magnitude and phase
// response, Jury stability, and bounded overflow search. Exit codes:
// 0 all selected passes hold, 1 at least one violation, 2 usage or config
// error, 3 indeterminate (marginal stability, non-convergent computation).
#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fxv/job.hpp"

namespace {

void print_summary(const fxv::RunResult& rr) {
    const auto& results = rr.report["results"];
    for (const char* name : {"stability", "magnitude", "phase", "overflow"}) {
        if (!results.contains(name)) continue;
        const auto& entry = results[name];
        std::printf("%-10s", name);
        if (entry.contains("skipped")) {
            std::printf("skipped (%s)\n", entry["reason"].get<std::string>().c_str());
            continue;
        }
        if (entry.contains("indeterminate")) {
            std::printf("indeterminate (%s)\n", entry["reason"].get<std::string>().c_str());
            continue;
        }
        std::printf("%s", entry["status"].get<std::string>().c_str());
        if (std::string(name) == "stability" && !entry["oracle_max_root"].is_null())
            std::printf("  (max|root| = %.6g)", entry["oracle_max_root"].get<double>());
        if (std::string(name) == "magnitude" && !entry["witness"].is_null()) {
            const auto& w = entry["witness"];
            std::printf("  @ bin %llu, %.4g Hz: |H| = %.6g vs %s = %g dB",
                        static_cast<unsigned long long>(w["bin"].get<std::uint64_t>()),
                        w["freq_hz"].get<double>(), w["observed_mag"].get<double>(),
                        w["bound_name"].get<std::string>().c_str(), w["bound_db"].get<double>());
        }
        if (std::string(name) == "phase" && !entry["witness"].is_null()) {
            const auto& w = entry["witness"];
            std::printf("  @ bin %llu: |dphi| = %.6g rad > %.6g rad",
                        static_cast<unsigned long long>(w["bin"].get<std::uint64_t>()),
                        std::abs(w["delta_rad"].get<double>()),
                        w["threshold_rad"].get<double>());
        }
        if (std::string(name) == "overflow" && !entry["counterexample"].is_null()) {
            const auto& ce = entry["counterexample"];
            std::printf("  @ step %llu (%s %llu): wide value %.10g vs %s",
                        static_cast<unsigned long long>(ce["step"].get<std::uint64_t>()),
                        ce["site"].get<std::string>().c_str(),
                        static_cast<unsigned long long>(ce["term_index"].get<std::uint64_t>()),
                        ce["wide_value"].get<double>(),
                        ce["bound"].get<std::string>().c_str());
        }
        std::printf("\n");
    }
    std::printf("exit: %d\n", rr.exit_code);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fixed-point digital filter verifier"};
    app.require_subcommand(1);

    auto* verify = app.add_subcommand("verify", "run verification passes on a job file");
    std::string job_path;
    std::string passes_csv, format_str, strategy_str, rounding_str, overflow_str;
    std::string csv_path, report_path;
    std::uint64_t seed = 0;
    std::size_t grid_n = 0, bound_k = 0;
    bool phase_full_grid = false;
    verify->add_option("--job", job_path, "job JSON file")->required();
    verify->add_option("--passes", passes_csv,
                       "comma-separated subset of magnitude,phase,stability,overflow");
    verify->add_option("--format", format_str, "fixed-point format m,n");
    verify->add_option("--grid", grid_n, "DTFT grid size N");
    verify->add_option("--bound", bound_k, "overflow search horizon K");
    verify->add_option("--strategy", strategy_str, "exhaustive|analytic|directed");
    verify->add_option("--rounding", rounding_str, "nearest|truncate|floor");
    verify->add_option("--overflow-mode", overflow_str, "detect|saturate|wraparound");
    verify->add_option("--emit-csv", csv_path, "write the response grid as CSV");
    verify->add_option("--report", report_path, "write the JSON report");
    auto* seed_opt =
        verify->add_option("--seed", seed, "search seed")->envname("FXV_SEED");
    verify->add_flag("--phase-full-grid", phase_full_grid,
                     "compare phase over the full grid instead of the passband");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        fxv::JobConfig job = fxv::parse_job(job_path);
        if (!passes_csv.empty()) {
            job.passes.clear();
            std::string token;
            for (char c : passes_csv + ",") {
                if (c == ',') {
                    if (!token.empty()) job.passes.push_back(fxv::parse_pass(token));
                    token.clear();
                } else {
                    token += c;
                }
            }
        }
        if (!format_str.empty()) job.format = fxv::parse_format(format_str);
        if (grid_n != 0) job.grid_n = grid_n;
        if (bound_k != 0) job.bound_k = bound_k;
        if (!strategy_str.empty()) job.strategy = fxv::parse_strategy(strategy_str);
        if (!rounding_str.empty()) job.rounding = fxv::parse_rounding(rounding_str);
        if (!overflow_str.empty()) job.overflow_mode = fxv::parse_overflow_mode(overflow_str);
        if (seed_opt->count() > 0) job.seed = seed;
        if (phase_full_grid) job.phase_full_grid = true;
        if (!report_path.empty()) job.report_path = report_path;
        if (!csv_path.empty()) job.csv_path = csv_path;
        job.validate();

        fxv::RunResult rr = fxv::run_job(job);
        print_summary(rr);
        if (job.report_path) fxv::write_report(rr, *job.report_path);
        if (job.csv_path) {
            if (rr.ideal_response && rr.fixed_response)
                fxv::emit_response_csv(rr, *job.csv_path);
            else
                std::cerr << "note: no response grid was computed; CSV not written\n";
        }
        return rr.exit_code;
    } catch (const fxv::ComputeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const fxv::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}
