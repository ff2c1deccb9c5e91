#pragma once

// Wall-clock latency of a request pipeline: warm-up calls, then timed runs
// on a monotonic clock, reported per run and as their arithmetic mean.

#include <chrono>
#include <cstddef>
#include <functional>
#include <ostream>
#include <vector>

namespace kgrec::eval {

inline constexpr double kBaselineMs = 2000.0;

struct LatencyRun {
    std::chrono::steady_clock::time_point t_s;
    std::chrono::steady_clock::time_point t_e;
    double ms = 0.0;
};

struct LatencyReport {
    std::vector<LatencyRun> runs;
    double mean_ms = 0.0;

    bool passed(double baseline_ms = kBaselineMs) const noexcept { return mean_ms < baseline_ms; }
};

// `request` receives the run index (warm-up runs get indices too, after the
// timed ones, so a sampler can stay deterministic).
LatencyReport latency_bench(const std::function<void(std::size_t)>& request, std::size_t runs = 100,
                            std::size_t warmup = 5);

// `run,ms` lines, then `mean_ms,<v>` and `baseline_pass,<true|false>`.
void write_latency_report(std::ostream& out, const LatencyReport& report, double baseline_ms = kBaselineMs);

}  // namespace kgrec::eval
