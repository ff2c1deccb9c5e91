#include "kgrec/latency.hpp"

#include "kgrec/errors.hpp"

namespace kgrec::eval {

LatencyReport latency_bench(const std::function<void(std::size_t)>& request, std::size_t runs, std::size_t warmup) {
    if (runs == 0) throw InvalidConfig("latency bench needs at least one run");
    for (std::size_t i = 0; i < warmup; ++i) request(runs + i);

    LatencyReport report;
    report.runs.reserve(runs);
    double sum = 0.0;
    for (std::size_t i = 0; i < runs; ++i) {
        LatencyRun run;
        run.t_s = std::chrono::steady_clock::now();
        request(i);
        run.t_e = std::chrono::steady_clock::now();
        run.ms = std::chrono::duration<double, std::milli>(run.t_e - run.t_s).count();
        sum += run.ms;
        report.runs.push_back(run);
    }
    report.mean_ms = sum / static_cast<double>(runs);
    return report;
}

void write_latency_report(std::ostream& out, const LatencyReport& report, double baseline_ms) {
    for (std::size_t i = 0; i < report.runs.size(); ++i) out << i + 1 << ',' << report.runs[i].ms << '\n';
    out << "mean_ms," << report.mean_ms << '\n';
    out << "baseline_pass," << (report.passed(baseline_ms) ? "true" : "false") << '\n';
}

}  // namespace kgrec::eval
