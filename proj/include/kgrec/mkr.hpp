#pragma once

// The two-tower multi-task recommender: an RS tower scoring user-item pairs
// and a KGE tower predicting tail entities, coupled through cross-compress
// units that share the item and head-entity representations.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kgrec/metrics.hpp"
#include "kgrec/numeric/trace.hpp"
#include "kgrec/preprocess.hpp"

namespace kgrec::mkr {

struct SideInfoConfig {
    bool use_movie_kg = false;
    bool use_user_features = false;
    bool use_poster = false;

    // The KGE tower exists when any KG triples are used.
    bool kg_enabled() const noexcept { return use_movie_kg || use_poster; }

    friend bool operator==(const SideInfoConfig&, const SideInfoConfig&) = default;
};

struct Hyperparams {
    std::size_t dim = 8;
    double learning_rate = 1e-3;
    double l2 = 1e-6;
    std::size_t batch_size = 4096;
    std::size_t epochs = 20;
    std::size_t kge_interval = 3;  // KGE pass on epochs 1, 1 + k, 1 + 2k, ...
    std::uint64_t seed = 0;
    std::size_t cc_layers = 1;
    std::size_t mlp_layers = 1;  // hidden ReLU layers in the user and relation stacks
    double rs_weight = 1.0;
    double kg_weight = 1.0;

    friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

// Id vocabularies carried with the weights so a checkpoint can answer
// predictions on source ids.
struct ModelVocab {
    prep::UserTable users;
    prep::Vocabulary items;
};

ModelVocab vocab_from(const prep::PreparedDataset& data);

struct MkrModel {
    Hyperparams hyper;
    SideInfoConfig config;
    prep::Counts counts;
    numeric::ParamStore params;
    ModelVocab vocab;
};

// Seeded initialization: Xavier-uniform dense and cross-compress weights,
// N(0, 0.01) embeddings, zero biases. Disabled components are absent.
// Throws InvalidConfig.
MkrModel build_model(const prep::Counts& counts, const Hyperparams& hyper, const SideInfoConfig& config);

// Inputs of the RS tower; gender/age/job are read only with user features.
struct RsBatch {
    std::vector<std::uint32_t> users;
    std::vector<std::uint32_t> genders;
    std::vector<std::uint32_t> ages;
    std::vector<std::uint32_t> jobs;
    std::vector<std::uint32_t> items;
    std::vector<double> labels;

    std::size_t size() const noexcept { return items.size(); }
};

// Fills the user feature columns from the model's user table.
RsBatch make_rs_batch(const MkrModel& model, std::span<const prep::Interaction> rows);

struct KgBatch {
    std::vector<std::uint32_t> heads;
    std::vector<std::uint32_t> relations;
    std::vector<std::uint32_t> tails;
    std::vector<std::uint32_t> corrupt_tails;

    std::size_t size() const noexcept { return heads.size(); }
};

// Graph-building forward passes. rs_logits returns b x 1 logits u . v;
// kge_tails returns the b x d predicted tail vectors.
numeric::Var rs_logits(numeric::ForwardTrace& trace, MkrModel& model, const RsBatch& batch);
numeric::Var kge_tails(numeric::ForwardTrace& trace, MkrModel& model, std::span<const std::uint32_t> heads,
                       std::span<const std::uint32_t> relations);

// Inference: probabilities strictly inside (0, 1).
std::vector<double> rs_forward(const MkrModel& model, const RsBatch& batch);
numeric::Matrix kge_forward(const MkrModel& model, std::span<const std::uint32_t> heads,
                            std::span<const std::uint32_t> relations);

// RS probabilities from an explicit pre-stack user representation (one
// d-wide row per item), i.e. the summed user and side-info embeddings.
std::vector<double> rs_forward_from_base(const MkrModel& model, const numeric::Matrix& user_base,
                                         std::span<const std::uint32_t> items);

struct LossTerms {
    double rs = 0.0;
    double kg = 0.0;
    double reg = 0.0;
    double total = 0.0;  // rs_weight * rs + kg_weight * kg + reg
    std::uint64_t kink_signature = 0;
};

// L_RS is mean binary cross-entropy, L_KG = -mean s(t_hat . t) + mean
// s(t_hat . t_corrupt), L_REG = (l2 / 2) * sum theta^2. A null batch drops
// its term. With `with_grad` the parameter grads are overwritten with
// d(total)/d(theta).
LossTerms compute_loss(MkrModel& model, const RsBatch* rs, const KgBatch* kg, bool with_grad);

struct EpochRecord {
    std::size_t epoch = 0;
    double rs_loss = 0.0;  // L_RS averaged over the epoch's train rows
    std::size_t rs_batches = 0;
    std::optional<double> kg_loss;
    eval::MetricsReport eval;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    // SHA-256 over eval then test rows, before and after training.
    std::string holdout_hash_before;
    std::string holdout_hash_after;
};

// RS minibatches every epoch over the seeded-shuffled train split; a full
// KGE pass every kge_interval epochs. Eval/test rows are only scored.
TrainResult train(MkrModel& model, const prep::SplitDataset& splits, std::span<const prep::EncodedTriple> kg_triples,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

// Scores `rows` with the current parameters.
std::vector<double> score_rows(const MkrModel& model, std::span<const prep::Interaction> rows);
eval::MetricsReport evaluate_rows(const MkrModel& model, std::span<const prep::Interaction> rows);

// KG triples used by a configuration: has_poster triples with use_poster,
// every other relation with use_movie_kg, and only triples whose head is an
// item.
std::vector<prep::EncodedTriple> select_kg_triples(const prep::PreparedDataset& data, const SideInfoConfig& config);

}  // namespace kgrec::mkr
