#pragma once

// Side-information ablation: one fresh model per (row, seed), trained on the
// seed's 6:2:2 split and scored on all three splits.

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgrec/metrics.hpp"
#include "kgrec/mkr.hpp"
#include "kgrec/preprocess.hpp"

namespace kgrec::eval {

struct AblationRow {
    std::string_view name;
    mkr::SideInfoConfig config;
};

// baseline, baseline+movie, baseline+user, baseline+user+movie,
// baseline+poster, baseline+movie+user+poster.
std::span<const AblationRow> ablation_rows();
std::optional<mkr::SideInfoConfig> config_for_row(std::string_view name);

struct AblationRun {
    std::string config;
    std::uint64_t seed = 0;
    MetricsReport train;
    MetricsReport eval;
    MetricsReport test;
};

struct AblationOptions {
    mkr::Hyperparams hyper;  // hyper.seed is replaced by each run's seed
    std::vector<std::uint64_t> seeds{0};
    std::function<void(const AblationRun&)> on_run;
};

std::vector<AblationRun> run_ablation(const prep::PreparedDataset& data, std::span<const AblationRow> rows,
                                      const AblationOptions& options);

inline constexpr std::string_view kAblationHeader = "config,train_auc,train_acc,eval_auc,eval_acc,test_auc,test_acc";

// Per-row mean over seeds, in row order. Missing AUCs are left blank.
void write_ablation_csv(std::ostream& out, std::span<const AblationRow> rows, std::span<const AblationRun> runs);
// Per-row sample standard deviation over seeds (blank for a single seed).
void write_ablation_sd_csv(std::ostream& out, std::span<const AblationRow> rows, std::span<const AblationRun> runs);
// Every run, with a seed column after the config label.
void write_ablation_runs_csv(std::ostream& out, std::span<const AblationRun> runs);

}  // namespace kgrec::eval
