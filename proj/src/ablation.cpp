#include "kgrec/ablation.hpp"

#include <array>
#include <cmath>

namespace kgrec::eval {

namespace {

constexpr std::array<AblationRow, 6> kRows{{
    {"baseline", {false, false, false}},
    {"baseline+movie", {true, false, false}},
    {"baseline+user", {false, true, false}},
    {"baseline+user+movie", {true, true, false}},
    {"baseline+poster", {false, false, true}},
    {"baseline+movie+user+poster", {true, true, true}},
}};

// train_auc, train_acc, eval_auc, eval_acc, test_auc, test_acc
std::array<std::optional<double>, 6> columns(const AblationRun& run) {
    return {run.train.auc, run.train.acc, run.eval.auc, run.eval.acc, run.test.auc, run.test.acc};
}

void write_cell(std::ostream& out, const std::optional<double>& v) {
    out << ',';
    if (v) out << *v;
}

template <typename Reduce>
void write_reduced(std::ostream& out, std::span<const AblationRow> rows, std::span<const AblationRun> runs,
                   Reduce reduce) {
    out << kAblationHeader << '\n';
    for (const auto& row : rows) {
        out << row.name;
        for (std::size_t c = 0; c < 6; ++c) {
            std::vector<double> values;
            for (const auto& run : runs) {
                if (run.config != row.name) continue;
                if (auto v = columns(run)[c]) values.push_back(*v);
            }
            write_cell(out, reduce(values));
        }
        out << '\n';
    }
}

}  // namespace

std::span<const AblationRow> ablation_rows() { return kRows; }

std::optional<mkr::SideInfoConfig> config_for_row(std::string_view name) {
    for (const auto& row : kRows) {
        if (row.name == name) return row.config;
    }
    return std::nullopt;
}

std::vector<AblationRun> run_ablation(const prep::PreparedDataset& data, std::span<const AblationRow> rows,
                                      const AblationOptions& options) {
    std::vector<AblationRun> runs;
    const auto vocab = mkr::vocab_from(data);
    for (std::uint64_t seed : options.seeds) {
        const prep::SplitDataset splits = prep::split_622(data.interactions, seed);
        for (const auto& row : rows) {
            mkr::Hyperparams hyper = options.hyper;
            hyper.seed = seed;
            mkr::MkrModel model = mkr::build_model(data.counts(), hyper, row.config);
            model.vocab = vocab;
            const auto kg = mkr::select_kg_triples(data, row.config);
            mkr::train(model, splits, kg);

            AblationRun run;
            run.config = std::string(row.name);
            run.seed = seed;
            run.train = mkr::evaluate_rows(model, splits.train);
            run.eval = mkr::evaluate_rows(model, splits.eval);
            run.test = mkr::evaluate_rows(model, splits.test);
            if (options.on_run) options.on_run(run);
            runs.push_back(std::move(run));
        }
    }
    return runs;
}

void write_ablation_csv(std::ostream& out, std::span<const AblationRow> rows, std::span<const AblationRun> runs) {
    write_reduced(out, rows, runs, [](const std::vector<double>& v) -> std::optional<double> {
        if (v.empty()) return std::nullopt;
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    });
}

void write_ablation_sd_csv(std::ostream& out, std::span<const AblationRow> rows, std::span<const AblationRun> runs) {
    write_reduced(out, rows, runs, [](const std::vector<double>& v) -> std::optional<double> {
        if (v.size() < 2) return std::nullopt;
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        return std::sqrt(ss / static_cast<double>(v.size() - 1));
    });
}

void write_ablation_runs_csv(std::ostream& out, std::span<const AblationRun> runs) {
    out << "config,seed" << kAblationHeader.substr(kAblationHeader.find(',')) << '\n';
    for (const auto& run : runs) {
        out << run.config << ',' << run.seed;
        for (const auto& v : columns(run)) write_cell(out, v);
        out << '\n';
    }
}

}  // namespace kgrec::eval
