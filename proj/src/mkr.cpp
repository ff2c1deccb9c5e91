#include "kgrec/mkr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "kgrec/errors.hpp"
#include "kgrec/ingest.hpp"
#include "kgrec/numeric/layers.hpp"
#include "kgrec/numeric/optim.hpp"
#include "kgrec/numeric/rng.hpp"

namespace kgrec::mkr {

using numeric::Activation;
using numeric::ForwardTrace;
using numeric::Matrix;
using numeric::Parameter;
using numeric::Var;

namespace {

// Offsets the training stream from the initialization stream.
constexpr std::uint64_t kTrainStream = 0x9E3779B97F4A7C15ULL;
constexpr double kMinProbability = 1e-12;

Matrix xavier(numeric::Rng& rng, std::size_t fan_in, std::size_t fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix m(fan_in, fan_out);
    for (double& v : m.values()) v = rng.uniform(-limit, limit);
    return m;
}

Matrix gaussian(numeric::Rng& rng, std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (double& v : m.values()) v = rng.normal(0.0, 0.01);
    return m;
}

std::string layer_name(std::string_view stack, std::size_t l, std::string_view leaf) {
    return std::string(stack) + "." + std::to_string(l) + "." + std::string(leaf);
}

void require_positive(std::size_t n, std::string_view what) {
    if (n == 0) throw InvalidConfig(std::string(what) + " must be positive");
}

numeric::CrossCompressParams cc_params(MkrModel& model, std::size_t l) {
    auto& p = model.params;
    return {p.at(layer_name("cc", l, "w_vv")), p.at(layer_name("cc", l, "w_ev")), p.at(layer_name("cc", l, "w_ve")),
            p.at(layer_name("cc", l, "w_ee")), p.at(layer_name("cc", l, "b_v")),  p.at(layer_name("cc", l, "b_e"))};
}

Var relu_stack(ForwardTrace& trace, MkrModel& model, Var x, std::string_view stack) {
    for (std::size_t l = 0; l < model.hyper.mlp_layers; ++l) {
        x = numeric::dense(trace, x, model.params.at(layer_name(stack, l, "w")), model.params.at(layer_name(stack, l, "b")),
                           Activation::Relu);
    }
    return x;
}

// (v', e') after the cross-compress layers for item/head indices.
std::pair<Var, Var> shared_item_entity(ForwardTrace& trace, MkrModel& model, std::span<const std::uint32_t> items) {
    Var v = numeric::embedding_lookup(trace, model.params.at("item_emb"), items);
    Var e = numeric::embedding_lookup(trace, model.params.at("entity_emb"), items);
    for (std::size_t l = 0; l < model.hyper.cc_layers; ++l) std::tie(v, e) = numeric::cross_compress(trace, v, e, cc_params(model, l));
    return {v, e};
}

Var item_tower(ForwardTrace& trace, MkrModel& model, std::span<const std::uint32_t> items) {
    if (!model.config.kg_enabled()) return numeric::embedding_lookup(trace, model.params.at("item_emb"), items);
    return shared_item_entity(trace, model, items).first;
}

// Inference never records, so no gradient buffer is written through the
// mutable reference.
MkrModel& for_inference(const MkrModel& model) { return const_cast<MkrModel&>(model); }

double to_probability(double logit) {
    return std::clamp(numeric::sigmoid(logit), kMinProbability, 1.0 - kMinProbability);
}

}  // namespace

ModelVocab vocab_from(const prep::PreparedDataset& data) { return {data.users, data.dicts.items}; }

MkrModel build_model(const prep::Counts& counts, const Hyperparams& hyper, const SideInfoConfig& config) {
    require_positive(hyper.dim, "dim");
    require_positive(hyper.batch_size, "batch size");
    require_positive(hyper.kge_interval, "kge interval");
    require_positive(hyper.cc_layers, "cc layers");
    if (!(hyper.learning_rate > 0.0)) throw InvalidConfig("learning rate must be positive");
    if (!(hyper.l2 >= 0.0)) throw InvalidConfig("l2 must be non-negative");
    require_positive(counts.n_user, "user count");
    require_positive(counts.n_item, "item count");
    if (config.use_user_features) {
        require_positive(counts.n_gender, "gender count");
        require_positive(counts.n_age, "age count");
        require_positive(counts.n_job, "job count");
    }
    if (config.kg_enabled()) {
        require_positive(counts.n_relation, "relation count");
        if (counts.n_entity < counts.n_item) throw InvalidConfig("fewer entities than items");
    }

    MkrModel model;
    model.hyper = hyper;
    model.config = config;
    model.counts = counts;
    numeric::Rng rng(hyper.seed);
    const std::size_t d = hyper.dim;
    auto& p = model.params;
    auto add_stack = [&](std::string_view stack) {
        for (std::size_t l = 0; l < hyper.mlp_layers; ++l) {
            p.add(layer_name(stack, l, "w"), xavier(rng, d, d));
            p.add(layer_name(stack, l, "b"), Matrix(1, d));
        }
    };

    p.add("user_emb", gaussian(rng, counts.n_user, d));
    p.add("item_emb", gaussian(rng, counts.n_item, d));
    if (config.use_user_features) {
        p.add("gender_emb", gaussian(rng, counts.n_gender, d));
        p.add("age_emb", gaussian(rng, counts.n_age, d));
        p.add("job_emb", gaussian(rng, counts.n_job, d));
        add_stack("user_mlp");
    }
    if (config.kg_enabled()) {
        p.add("entity_emb", gaussian(rng, counts.n_entity, d));
        p.add("relation_emb", gaussian(rng, counts.n_relation, d));
        for (std::size_t l = 0; l < hyper.cc_layers; ++l) {
            for (const char* w : {"w_vv", "w_ev", "w_ve", "w_ee"}) p.add(layer_name("cc", l, w), xavier(rng, d, 1));
            p.add(layer_name("cc", l, "b_v"), Matrix(1, d));
            p.add(layer_name("cc", l, "b_e"), Matrix(1, d));
        }
        add_stack("relation_mlp");
        p.add("tail_mlp.w", xavier(rng, 2 * d, d));
        p.add("tail_mlp.b", Matrix(1, d));
    }
    return model;
}

RsBatch make_rs_batch(const MkrModel& model, std::span<const prep::Interaction> rows) {
    RsBatch batch;
    batch.users.reserve(rows.size());
    batch.items.reserve(rows.size());
    batch.labels.reserve(rows.size());
    const auto& features = model.vocab.users.features;
    for (const auto& r : rows) {
        batch.users.push_back(r.user);
        batch.items.push_back(r.item);
        batch.labels.push_back(static_cast<double>(r.label));
        if (model.config.use_user_features) {
            if (r.user >= features.size()) {
                throw IndexOutOfRange("user " + std::to_string(r.user) + " has no feature row");
            }
            batch.genders.push_back(features[r.user].gender);
            batch.ages.push_back(features[r.user].age);
            batch.jobs.push_back(features[r.user].job);
        }
    }
    return batch;
}

Var rs_logits(ForwardTrace& trace, MkrModel& model, const RsBatch& batch) {
    numeric::require_shape(batch.users.size() == batch.items.size(), "rs batch: users and items differ in length");
    Var u = numeric::embedding_lookup(trace, model.params.at("user_emb"), batch.users);
    if (model.config.use_user_features) {
        numeric::require_shape(batch.genders.size() == batch.size() && batch.ages.size() == batch.size() &&
                                   batch.jobs.size() == batch.size(),
                               "rs batch: user feature columns differ in length");
        u = numeric::add(trace, u, numeric::embedding_lookup(trace, model.params.at("gender_emb"), batch.genders));
        u = numeric::add(trace, u, numeric::embedding_lookup(trace, model.params.at("age_emb"), batch.ages));
        u = numeric::add(trace, u, numeric::embedding_lookup(trace, model.params.at("job_emb"), batch.jobs));
        u = relu_stack(trace, model, u, "user_mlp");
    }
    Var v = item_tower(trace, model, batch.items);
    return numeric::row_dot(trace, u, v);
}

Var kge_tails(ForwardTrace& trace, MkrModel& model, std::span<const std::uint32_t> heads,
              std::span<const std::uint32_t> relations) {
    if (!model.config.kg_enabled()) throw InvalidConfig("the model has no KGE tower");
    numeric::require_shape(heads.size() == relations.size(), "kge batch: heads and relations differ in length");
    Var h = shared_item_entity(trace, model, heads).second;
    Var r = numeric::embedding_lookup(trace, model.params.at("relation_emb"), relations);
    r = relu_stack(trace, model, r, "relation_mlp");
    Var hr = numeric::concat_cols(trace, h, r);
    return numeric::dense(trace, hr, model.params.at("tail_mlp.w"), model.params.at("tail_mlp.b"), Activation::Identity);
}

std::vector<double> rs_forward(const MkrModel& model, const RsBatch& batch) {
    ForwardTrace trace(false);
    Var logits = rs_logits(trace, for_inference(model), batch);
    std::vector<double> out(logits->value.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = to_probability(logits->value[i]);
    return out;
}

Matrix kge_forward(const MkrModel& model, std::span<const std::uint32_t> heads, std::span<const std::uint32_t> relations) {
    ForwardTrace trace(false);
    return kge_tails(trace, for_inference(model), heads, relations)->value;
}

std::vector<double> rs_forward_from_base(const MkrModel& model, const Matrix& user_base,
                                         std::span<const std::uint32_t> items) {
    numeric::require_shape(user_base.rows() == items.size() && user_base.cols() == model.hyper.dim,
                           "user base " + user_base.shape_string() + " for " + std::to_string(items.size()) + " items");
    ForwardTrace trace(false);
    MkrModel& m = for_inference(model);
    Var u = trace.constant(user_base);
    if (model.config.use_user_features) u = relu_stack(trace, m, u, "user_mlp");
    Var v = item_tower(trace, m, items);
    Var logits = numeric::row_dot(trace, u, v);
    std::vector<double> out(items.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = to_probability(logits->value[i]);
    return out;
}

LossTerms compute_loss(MkrModel& model, const RsBatch* rs, const KgBatch* kg, bool with_grad) {
    if (with_grad) model.params.zero_grad();
    ForwardTrace trace(with_grad);
    Var zero = trace.constant(Matrix(1, 1));
    Var rs_term = zero;
    Var kg_term = zero;
    if (rs) {
        Var logits = rs_logits(trace, model, *rs);
        rs_term = numeric::bce_with_logits(trace, logits, rs->labels);
    }
    if (kg) {
        numeric::require_shape(kg->size() > 0 && kg->tails.size() == kg->size() && kg->corrupt_tails.size() == kg->size(),
                               "kg batch: empty or ragged");
        Var predicted = kge_tails(trace, model, kg->heads, kg->relations);
        Parameter& entities = model.params.at("entity_emb");
        Var t = numeric::embedding_lookup(trace, entities, kg->tails);
        Var tc = numeric::embedding_lookup(trace, entities, kg->corrupt_tails);
        Var pos = numeric::mean(trace, numeric::sigmoid(trace, numeric::row_dot(trace, predicted, t)));
        Var neg = numeric::mean(trace, numeric::sigmoid(trace, numeric::row_dot(trace, predicted, tc)));
        kg_term = numeric::weighted_sum(trace, pos, -1.0, neg, 1.0);
    }
    Var total = numeric::weighted_sum(trace, rs_term, model.hyper.rs_weight, kg_term, model.hyper.kg_weight);

    LossTerms terms;
    terms.rs = rs_term->value[0];
    terms.kg = kg_term->value[0];
    terms.reg = numeric::l2_penalty(model.params, model.hyper.l2);
    terms.total = total->value[0] + terms.reg;
    terms.kink_signature = trace.kink_signature();
    if (with_grad) {
        trace.backward(total);
        numeric::add_l2_gradient(model.params, model.hyper.l2);
    }
    return terms;
}

std::vector<double> score_rows(const MkrModel& model, std::span<const prep::Interaction> rows) {
    std::vector<double> out;
    out.reserve(rows.size());
    const std::size_t step = std::max<std::size_t>(model.hyper.batch_size, 1);
    for (std::size_t start = 0; start < rows.size(); start += step) {
        auto chunk = rows.subspan(start, std::min(step, rows.size() - start));
        auto probs = rs_forward(model, make_rs_batch(model, chunk));
        out.insert(out.end(), probs.begin(), probs.end());
    }
    return out;
}

eval::MetricsReport evaluate_rows(const MkrModel& model, std::span<const prep::Interaction> rows) {
    if (rows.empty()) return {};
    auto scores = score_rows(model, rows);
    std::vector<std::uint8_t> labels;
    std::vector<std::uint32_t> users;
    labels.reserve(rows.size());
    users.reserve(rows.size());
    for (const auto& r : rows) {
        labels.push_back(r.label);
        users.push_back(r.user);
    }
    auto report = eval::evaluate(scores, labels);
    report.ndcg = eval::mean_user_ndcg(users, scores, labels, 10);
    return report;
}

namespace {

std::string holdout_hash(const prep::SplitDataset& splits) {
    std::vector<prep::Interaction> rows(splits.eval);
    rows.insert(rows.end(), splits.test.begin(), splits.test.end());
    return prep::hash_interactions(rows);
}

}  // namespace

TrainResult train(MkrModel& model, const prep::SplitDataset& splits, std::span<const prep::EncodedTriple> kg_triples,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
    const Hyperparams& hyper = model.hyper;
    if (splits.train.empty()) throw InvalidConfig("train split is empty");
    const bool use_kg = model.config.kg_enabled();
    if (use_kg && kg_triples.empty()) throw InvalidConfig("KG side information enabled but no triples selected");

    TrainResult result;
    result.holdout_hash_before = holdout_hash(splits);

    numeric::Rng rng(hyper.seed ^ kTrainStream);
    auto rs_opt = numeric::make_adam_state(model.params);
    auto kg_opt = numeric::make_adam_state(model.params);
    std::vector<std::size_t> rs_order(splits.train.size());
    std::iota(rs_order.begin(), rs_order.end(), std::size_t{0});
    std::vector<std::size_t> kg_order(kg_triples.size());
    std::iota(kg_order.begin(), kg_order.end(), std::size_t{0});

    std::vector<prep::Interaction> rows;
    for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
        EpochRecord record;
        record.epoch = epoch;

        rng.shuffle(rs_order);
        double rs_sum = 0.0;
        for (std::size_t start = 0; start < rs_order.size(); start += hyper.batch_size) {
            const std::size_t end = std::min(start + hyper.batch_size, rs_order.size());
            rows.clear();
            for (std::size_t k = start; k < end; ++k) rows.push_back(splits.train[rs_order[k]]);
            RsBatch batch = make_rs_batch(model, rows);
            LossTerms terms = compute_loss(model, &batch, nullptr, true);
            numeric::adam_step(model.params, rs_opt, hyper.learning_rate);
            rs_sum += terms.rs * static_cast<double>(rows.size());
            ++record.rs_batches;
        }
        record.rs_loss = rs_sum / static_cast<double>(rs_order.size());

        if (use_kg && (epoch - 1) % hyper.kge_interval == 0) {
            rng.shuffle(kg_order);
            double kg_sum = 0.0;
            for (std::size_t start = 0; start < kg_order.size(); start += hyper.batch_size) {
                const std::size_t end = std::min(start + hyper.batch_size, kg_order.size());
                KgBatch batch;
                for (std::size_t k = start; k < end; ++k) {
                    const auto& t = kg_triples[kg_order[k]];
                    batch.heads.push_back(t.head);
                    batch.relations.push_back(t.relation);
                    batch.tails.push_back(t.tail);
                    batch.corrupt_tails.push_back(static_cast<std::uint32_t>(rng.uniform_index(model.counts.n_entity)));
                }
                LossTerms terms = compute_loss(model, nullptr, &batch, true);
                numeric::adam_step(model.params, kg_opt, hyper.learning_rate);
                kg_sum += terms.kg * static_cast<double>(batch.size());
            }
            record.kg_loss = kg_sum / static_cast<double>(kg_order.size());
        }

        record.eval = evaluate_rows(model, splits.eval);
        if (on_epoch) on_epoch(record);
        result.history.push_back(std::move(record));
    }

    result.holdout_hash_after = holdout_hash(splits);
    return result;
}

std::vector<prep::EncodedTriple> select_kg_triples(const prep::PreparedDataset& data, const SideInfoConfig& config) {
    std::vector<prep::EncodedTriple> out;
    const std::size_t n_item = data.dicts.items.size();
    for (const auto& t : data.kg) {
        if (t.head >= n_item) continue;
        const bool poster = data.dicts.relations.label(t.relation) == ingest::relation::kHasPoster;
        if (poster ? config.use_poster : config.use_movie_kg) out.push_back(t);
    }
    return out;
}

}  // namespace kgrec::mkr
