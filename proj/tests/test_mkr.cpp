#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "kgrec/ablation.hpp"
#include "kgrec/checkpoint.hpp"
#include "kgrec/errors.hpp"
#include "kgrec/mkr.hpp"
#include "kgrec/numeric/gradcheck.hpp"
#include "kgrec/predict.hpp"
#include "support.hpp"

using namespace kgrec;
using mkr::SideInfoConfig;
using numeric::Matrix;

namespace {

constexpr SideInfoConfig kAll{true, true, true};

prep::Counts toy_counts() {
    prep::Counts c;
    c.n_user = 3;
    c.n_item = 4;
    c.n_entity = 7;
    c.n_relation = 2;
    c.n_gender = 2;
    c.n_age = 2;
    c.n_job = 3;
    return c;
}

mkr::Hyperparams hyper_d(std::size_t d) {
    mkr::Hyperparams h;
    h.dim = d;
    return h;
}

std::set<std::string> names(const mkr::MkrModel& m) {
    auto v = m.params.names();
    return {v.begin(), v.end()};
}

void set(mkr::MkrModel& m, std::string_view name, std::initializer_list<double> values) {
    auto& p = m.params.at(name).value;
    ASSERT_EQ(p.size(), values.size()) << name;
    std::copy(values.begin(), values.end(), p.values().begin());
}

// Split with every row in train plus a fixed two-class holdout.
prep::SplitDataset train_only(std::vector<prep::Interaction> train, const prep::Counts& counts) {
    prep::SplitDataset s;
    s.train = std::move(train);
    s.eval = {{0, 0, 1}, {0, 1, 0}};
    s.test = {{1, 0, 0}, {1, 1, 1}};
    s.counts = counts;
    return s;
}

}  // namespace

// ---------------------------------------------------------------- building

TEST(BuildModel, ShapesFollowCounts) {
    auto m = mkr::build_model(toy_counts(), hyper_d(8), kAll);
    EXPECT_EQ(m.params.at("user_emb").value.shape_string(), Matrix(3, 8).shape_string());
    EXPECT_EQ(m.params.at("item_emb").value.rows(), 4u);
    EXPECT_EQ(m.params.at("entity_emb").value.rows(), 7u);
    EXPECT_EQ(m.params.at("relation_emb").value.rows(), 2u);
    EXPECT_EQ(m.params.at("job_emb").value.rows(), 3u);
    EXPECT_EQ(m.params.at("tail_mlp.w").value.rows(), 16u);
    EXPECT_EQ(m.params.at("tail_mlp.w").value.cols(), 8u);
    EXPECT_EQ(m.params.at("cc.0.w_vv").value.cols(), 1u);
}

TEST(BuildModel, MovieLensShapesAtDimEight) {
    // 3883 items and four relations, with item and relation tables sized
    // from the counts alone
    prep::Counts c;
    c.n_user = 6040;
    c.n_item = 3883;
    c.n_entity = 3883 + 100;
    c.n_relation = 4;
    auto m = mkr::build_model(c, hyper_d(8), {true, false, false});
    EXPECT_EQ(m.params.at("item_emb").value.rows(), 3883u);
    EXPECT_EQ(m.params.at("item_emb").value.cols(), 8u);
    EXPECT_EQ(m.params.at("relation_emb").value.rows(), 4u);
    EXPECT_EQ(m.params.at("relation_emb").value.cols(), 8u);
}

TEST(BuildModel, ClosedFormParameterCountAtDimOne) {
    prep::Counts c{1, 1, 1, 1, 1, 1, 1};
    auto m = mkr::build_model(c, hyper_d(1), kAll);
    // user, item: 2; gender/age/job: 3; user_mlp w+b: 2; entity, relation: 2;
    // cc four weights + two biases: 6; relation_mlp: 2; tail 2x1 + 1: 3
    EXPECT_EQ(m.params.total_values(), 20u);

    const std::size_t d = 3, L = 2, C = 2;
    mkr::Hyperparams h = hyper_d(d);
    h.mlp_layers = L;
    h.cc_layers = C;
    const auto k = toy_counts();
    auto big = mkr::build_model(k, h, kAll);
    const std::size_t expected = d * (k.n_user + k.n_item + k.n_gender + k.n_age + k.n_job + k.n_entity + k.n_relation) +
                                 2 * L * (d * d + d) + C * 6 * d + (2 * d * d + d);
    EXPECT_EQ(big.params.total_values(), expected);
}

TEST(BuildModel, SameSeedSameInit) {
    auto a = mkr::build_model(toy_counts(), hyper_d(4), kAll);
    auto b = mkr::build_model(toy_counts(), hyper_d(4), kAll);
    EXPECT_EQ(a.params, b.params);
    auto h = hyper_d(4);
    h.seed = 1;
    EXPECT_FALSE(a.params == mkr::build_model(toy_counts(), h, kAll).params);
}

TEST(BuildModel, InvalidConfigs) {
    EXPECT_THROW(mkr::build_model(toy_counts(), hyper_d(0), kAll), InvalidConfig);
    auto c = toy_counts();
    c.n_entity = 2;
    EXPECT_THROW(mkr::build_model(c, hyper_d(4), kAll), InvalidConfig);
    EXPECT_NO_THROW(mkr::build_model(c, hyper_d(4), {false, true, false}));
    c.n_gender = 0;
    EXPECT_THROW(mkr::build_model(c, hyper_d(4), {false, true, false}), InvalidConfig);
    auto h = hyper_d(4);
    h.learning_rate = 0.0;
    EXPECT_THROW(mkr::build_model(toy_counts(), h, {}), InvalidConfig);
}

TEST(BuildModel, SideInfoOnlyAddsParameters) {
    const auto base = names(mkr::build_model(toy_counts(), hyper_d(4), {}));
    EXPECT_EQ(base, (std::set<std::string>{"user_emb", "item_emb"}));
    std::vector<mkr::MkrModel> models;
    for (const auto& row : eval::ablation_rows()) models.push_back(mkr::build_model(toy_counts(), hyper_d(4), row.config));
    for (std::size_t a = 0; a < models.size(); ++a) {
        EXPECT_TRUE(std::ranges::includes(names(models[a]), base));
        for (std::size_t b = 0; b < models.size(); ++b) {
            const auto& ca = models[a].config;
            const auto& cb = models[b].config;
            const bool flags_subset = (!ca.use_movie_kg || cb.use_movie_kg) && (!ca.use_user_features || cb.use_user_features) &&
                                      (!ca.use_poster || cb.use_poster);
            if (flags_subset) {
                EXPECT_TRUE(std::ranges::includes(names(models[b]), names(models[a])));
            }
        }
    }
}

// ----------------------------------------------------------------- forward

TEST(RsForward, ZeroParametersGiveHalf) {
    auto m = mkr::build_model(toy_counts(), hyper_d(4), kAll);
    kgrec::testing::fill_params(m, 0.0);
    mkr::RsBatch b{{0, 1, 2}, {0, 1, 0}, {1, 0, 1}, {2, 1, 0}, {0, 3, 2}, {1, 0, 1}};
    auto p = mkr::rs_forward(m, b);
    ASSERT_EQ(p.size(), 3u);
    for (double x : p) EXPECT_EQ(x, 0.5);
}

TEST(RsForward, BaselineIsSigmoidOfDot) {
    auto m = mkr::build_model(toy_counts(), hyper_d(4), {});
    mkr::RsBatch b;
    b.users = {0, 2, 1};
    b.items = {3, 0, 0};
    auto p = mkr::rs_forward(m, b);
    for (std::size_t i = 0; i < 3; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < 4; ++j) dot += m.params.at("user_emb").value(b.users[i], j) * m.params.at("item_emb").value(b.items[i], j);
        EXPECT_NEAR(p[i], 1.0 / (1.0 + std::exp(-dot)), 1e-15);
    }
}

TEST(RsForward, ProbabilitiesStrictlyInside) {
    auto m = mkr::build_model(toy_counts(), hyper_d(2), {});
    kgrec::testing::fill_params(m, 100.0);
    mkr::RsBatch b;
    b.users = {0};
    b.items = {0};
    const double p = mkr::rs_forward(m, b)[0];
    EXPECT_LT(p, 1.0);
    EXPECT_GT(p, 0.0);
}

TEST(RsForward, OutOfRangeIndex) {
    auto m = mkr::build_model(toy_counts(), hyper_d(2), {});
    mkr::RsBatch b;
    b.users = {0};
    b.items = {4};
    EXPECT_THROW(mkr::rs_forward(m, b), IndexOutOfRange);
}

TEST(KgeForward, ShapeAndZeroParams) {
    auto m = mkr::build_model(toy_counts(), hyper_d(5), kAll);
    const std::uint32_t heads[] = {0, 1, 3}, rels[] = {1, 0, 1};
    auto t = mkr::kge_forward(m, heads, rels);
    EXPECT_EQ(t.rows(), 3u);
    EXPECT_EQ(t.cols(), 5u);
    kgrec::testing::fill_params(m, 0.0);
    EXPECT_EQ(mkr::kge_forward(m, heads, rels), Matrix(3, 5));
}

TEST(KgeForward, NoTowerWithoutKg) {
    auto m = mkr::build_model(toy_counts(), hyper_d(2), {false, true, false});
    const std::uint32_t one[] = {0};
    EXPECT_THROW(mkr::kge_forward(m, one, one), InvalidConfig);
}

TEST(Forward, ScalarPipelineAtDimOne) {
    prep::Counts c{1, 1, 2, 1, 0, 0, 0};
    auto m = mkr::build_model(c, hyper_d(1), {true, false, false});
    set(m, "user_emb", {0.7});
    set(m, "item_emb", {2.0});
    set(m, "entity_emb", {-0.5, 0.3});
    set(m, "relation_emb", {1.5});
    set(m, "cc.0.w_vv", {0.2});
    set(m, "cc.0.w_ev", {-0.4});
    set(m, "cc.0.w_ve", {0.9});
    set(m, "cc.0.w_ee", {0.1});
    set(m, "cc.0.b_v", {0.05});
    set(m, "cc.0.b_e", {-0.02});
    set(m, "relation_mlp.0.w", {-0.6});
    set(m, "relation_mlp.0.b", {1.3});
    set(m, "tail_mlp.w", {0.8, -1.1});
    set(m, "tail_mlp.b", {0.25});

    const double C = 2.0 * -0.5;
    const double v_out = C * 0.2 + C * -0.4 + 0.05;
    const double e_out = C * 0.9 + C * 0.1 - 0.02;
    const double r = std::max(0.0, 1.5 * -0.6 + 1.3);
    const double tail = e_out * 0.8 + r * -1.1 + 0.25;

    const std::uint32_t zero[] = {0};
    EXPECT_NEAR(mkr::kge_forward(m, zero, zero)(0, 0), tail, 1e-15);
    mkr::RsBatch b;
    b.users = {0};
    b.items = {0};
    EXPECT_NEAR(mkr::rs_forward(m, b)[0], 1.0 / (1.0 + std::exp(-0.7 * v_out)), 1e-15);
}

// -------------------------------------------------------------------- loss

TEST(Loss, ZeroParamsBalancedBatch) {
    auto toy = kgrec::testing::make_toy_instance();
    kgrec::testing::fill_params(toy.model, 0.0);
    auto t = mkr::compute_loss(toy.model, &toy.rs, nullptr, false);
    EXPECT_NEAR(t.rs, std::log(2.0), 1e-15);
    EXPECT_EQ(t.reg, 0.0);
    EXPECT_EQ(t.kg, 0.0);
}

TEST(Loss, NoRegNoKgIsRsOnly) {
    auto toy = kgrec::testing::make_toy_instance();
    toy.model.hyper.l2 = 0.0;
    auto t = mkr::compute_loss(toy.model, &toy.rs, nullptr, false);
    EXPECT_EQ(t.total, t.rs);
}

TEST(Loss, TermsCombineWithWeights) {
    auto toy = kgrec::testing::make_toy_instance();
    toy.model.hyper.rs_weight = 0.5;
    toy.model.hyper.kg_weight = 2.0;
    auto t = mkr::compute_loss(toy.model, &toy.rs, &toy.kg, false);
    EXPECT_NEAR(t.total, 0.5 * t.rs + 2.0 * t.kg + t.reg, 1e-12);
    EXPECT_GE(t.kg, -1.0);
    EXPECT_LE(t.kg, 1.0);
}

TEST(Loss, FullGradientMatchesFiniteDifference) {
    for (std::uint64_t seed : {0u, 1u, 2u}) {
        auto toy = kgrec::testing::make_toy_instance(seed);
        auto loss = [&](bool with_grad) {
            auto t = mkr::compute_loss(toy.model, &toy.rs, &toy.kg, with_grad);
            return numeric::LossProbe{t.total, t.kink_signature};
        };
        auto rep = numeric::finite_diff_check(loss, toy.model.params);
        EXPECT_LT(rep.max_rel_error, 1e-4) << "seed " << seed << " worst " << rep.worst_param << "[" << rep.worst_index << "]";
        EXPECT_GT(rep.checked, toy.model.params.total_values() / 2);
    }
}

// ---------------------------------------------------------------- training

TEST(Train, BatchCountIsCeilRowsOverBatch) {
    auto planted = kgrec::testing::make_planted(5, 4, 0);
    std::vector<prep::Interaction> ten(planted.rows.begin(), planted.rows.begin() + 10);
    auto h = hyper_d(4);
    h.batch_size = 4;
    h.epochs = 1;
    auto m = mkr::build_model(planted.counts, h, {});
    auto r = mkr::train(m, train_only(ten, planted.counts), {});
    ASSERT_EQ(r.history.size(), 1u);
    EXPECT_EQ(r.history[0].rs_batches, 3u);
    EXPECT_FALSE(r.history[0].kg_loss);
}

TEST(Train, KgePassFollowsInterval) {
    auto planted = kgrec::testing::make_planted(4, 4, 1);
    planted.counts.n_entity = 6;
    planted.counts.n_relation = 1;
    std::vector<prep::EncodedTriple> kg = {{0, 0, 4}, {1, 0, 5}, {2, 0, 4}};
    auto h = hyper_d(4);
    h.epochs = 7;
    h.kge_interval = 3;
    auto m = mkr::build_model(planted.counts, h, {true, false, false});
    auto r = mkr::train(m, train_only(planted.rows, planted.counts), kg);
    std::vector<std::size_t> with_kg;
    for (const auto& e : r.history) {
        if (e.kg_loss) with_kg.push_back(e.epoch);
    }
    EXPECT_EQ(with_kg, (std::vector<std::size_t>{1, 4, 7}));
}

TEST(Train, KgEnabledWithoutTriplesRejected) {
    auto planted = kgrec::testing::make_planted(4, 4, 1);
    planted.counts.n_entity = 4;
    planted.counts.n_relation = 1;
    auto m = mkr::build_model(planted.counts, hyper_d(4), {true, false, false});
    EXPECT_THROW(mkr::train(m, train_only(planted.rows, planted.counts), {}), InvalidConfig);
}

TEST(Train, LossNonIncreasingOnPlantedData) {
    auto planted = kgrec::testing::make_planted(20, 20, 0);
    auto splits = prep::split_622(planted.rows, 0);
    splits.counts = planted.counts;
    auto m = mkr::build_model(planted.counts, mkr::Hyperparams{}, {});
    auto r = mkr::train(m, splits, {});
    ASSERT_GE(r.history.size(), 5u);
    int upticks = 0;
    for (std::size_t e = 1; e < 5; ++e) upticks += r.history[e].rs_loss > r.history[e - 1].rs_loss;
    EXPECT_LE(upticks, 1);
    for (const auto& e : r.history) EXPECT_TRUE(e.eval.auc.has_value());
}

TEST(Train, HoldoutRowsNeverTouchParameters) {
    // user 3 occurs only in eval/test; with no L2 its embedding row must
    // come out of training bitwise unchanged
    prep::Counts c;
    c.n_user = 4;
    c.n_item = 3;
    std::vector<prep::Interaction> train = {{0, 0, 1}, {0, 1, 0}, {1, 2, 1}, {1, 0, 0}, {2, 1, 1}, {2, 2, 0}};
    prep::SplitDataset s{train, {{3, 0, 1}, {3, 1, 0}}, {{3, 2, 1}, {0, 2, 0}}, c};
    auto h = hyper_d(4);
    h.l2 = 0.0;
    h.epochs = 5;
    h.learning_rate = 0.05;
    auto m = mkr::build_model(c, h, {});
    const auto before = m.params.at("user_emb").value;
    auto r = mkr::train(m, s, {});
    const auto& after = m.params.at("user_emb").value;
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(after(3, j), before(3, j));
    EXPECT_NE(after(0, 0), before(0, 0));
    EXPECT_EQ(r.holdout_hash_before, r.holdout_hash_after);
}

TEST(Train, SameSeedSameCheckpointBytes) {
    auto planted = kgrec::testing::make_planted(8, 6, 3);
    auto splits = prep::split_622(planted.rows, 0);
    auto h = hyper_d(4);
    h.epochs = 3;
    h.batch_size = 7;
    auto a = mkr::build_model(planted.counts, h, {});
    auto b = mkr::build_model(planted.counts, h, {});
    mkr::train(a, splits, {});
    mkr::train(b, splits, {});
    EXPECT_EQ(mkr::encode_checkpoint(a), mkr::encode_checkpoint(b));
}

// ------------------------------------------------------------- checkpoint

TEST(Checkpoint, RoundTripIsBitwise) {
    auto toy = kgrec::testing::make_toy_instance(4);
    toy.model.hyper.rs_weight = 0.3;
    const auto path = kgrec::testing::scratch_dir("ckpt") / "m.mkr";
    mkr::save_checkpoint(toy.model, path);
    auto back = mkr::load_checkpoint(path);
    EXPECT_EQ(back.params, toy.model.params);
    EXPECT_EQ(back.hyper, toy.model.hyper);
    EXPECT_EQ(back.config, toy.model.config);
    EXPECT_EQ(back.counts, toy.model.counts);
    EXPECT_EQ(back.vocab.users.users, toy.model.vocab.users.users);
    EXPECT_EQ(back.vocab.users.features, toy.model.vocab.users.features);
    EXPECT_EQ(back.vocab.items, toy.model.vocab.items);
    EXPECT_EQ(mkr::encode_checkpoint(back), mkr::encode_checkpoint(toy.model));
}

TEST(Checkpoint, TruncatedFile) {
    const auto bytes = mkr::encode_checkpoint(kgrec::testing::make_toy_instance().model);
    for (std::size_t keep : {bytes.size() - 1, bytes.size() / 2, std::size_t{10}}) {
        EXPECT_THROW(mkr::decode_checkpoint(std::string_view(bytes).substr(0, keep)), ChecksumMismatch) << keep;
    }
}

TEST(Checkpoint, VersionBumped) {
    auto bytes = mkr::encode_checkpoint(kgrec::testing::make_toy_instance().model);
    bytes[4] = static_cast<char>(bytes[4] + 1);  // version follows the 4-byte magic
    EXPECT_THROW(mkr::decode_checkpoint(bytes), VersionMismatch);
}

TEST(Checkpoint, FlippedPayloadByte) {
    auto bytes = mkr::encode_checkpoint(kgrec::testing::make_toy_instance().model);
    bytes[bytes.size() - 20] ^= 0x01;
    EXPECT_THROW(mkr::decode_checkpoint(bytes), ChecksumMismatch);
}

TEST(Checkpoint, BadMagicAndMissingFile) {
    auto bytes = mkr::encode_checkpoint(kgrec::testing::make_toy_instance().model);
    bytes[0] = 'X';
    EXPECT_THROW(mkr::decode_checkpoint(bytes), IoError);
    EXPECT_THROW(mkr::load_checkpoint(kgrec::testing::scratch_dir("ckpt") / "absent.mkr"), IoError);
}

// ---------------------------------------------------------------- predict

TEST(GetUserInfo, KnownAndUnknown) {
    auto toy = kgrec::testing::make_toy_instance();
    const auto& users = toy.model.vocab.users;
    // user "2" has features (1, 1, 1)
    EXPECT_EQ(mkr::get_user_info(users, "2"), (mkr::UserInfo{"F", "18", "1"}));
    const std::string u(ingest::kUnknown);
    EXPECT_EQ(mkr::get_user_info(users, "99"), (mkr::UserInfo{u, u, u}));
    EXPECT_EQ(users.users.size(), 5u);
    EXPECT_FALSE(users.users.find("99"));
}

TEST(Predict, ZeroModelGivesHalf) {
    auto toy = kgrec::testing::make_toy_instance();
    kgrec::testing::fill_params(toy.model, 0.0);
    EXPECT_EQ(mkr::predict_score(toy.model, "1", "3"), 0.5);
    EXPECT_EQ(mkr::predict_score(toy.model, "ghost", "3", mkr::Fallback{"25", "2"}), 0.5);
}

TEST(Predict, KnownUserMatchesRsForward) {
    auto toy = kgrec::testing::make_toy_instance();
    prep::Interaction row{2, 4, 0};
    const double direct = mkr::rs_forward(toy.model, mkr::make_rs_batch(toy.model, std::span(&row, 1)))[0];
    EXPECT_EQ(mkr::predict_score(toy.model, "3", "5"), direct);
}

TEST(Predict, Errors) {
    auto toy = kgrec::testing::make_toy_instance();
    EXPECT_THROW(mkr::predict_score(toy.model, "1", "nope"), UnknownItem);
    EXPECT_THROW(mkr::predict_score(toy.model, "ghost", "1"), MissingFallback);
    EXPECT_THROW(mkr::predict_score(toy.model, "ghost", "1", mkr::Fallback{"99", "1"}), InvalidConfig);
    EXPECT_THROW(mkr::predict_score(toy.model, "ghost", "1", mkr::Fallback{"18", "99"}), InvalidConfig);
}

TEST(Predict, FallbackDiffersFromKnownUserAndTracksAge) {
    auto toy = kgrec::testing::make_toy_instance(6);
    auto splits = train_only({{0, 0, 1}, {0, 3, 0}, {1, 1, 1}, {1, 4, 0}, {2, 2, 1}, {2, 0, 0}, {3, 3, 1}, {4, 2, 0}},
                             toy.model.counts);
    toy.model.hyper.epochs = 5;
    toy.model.hyper.learning_rate = 0.01;
    std::vector<prep::EncodedTriple> kg = {{0, 0, 5}, {1, 0, 6}, {2, 1, 7}, {3, 1, 8}};
    mkr::train(toy.model, splits, kg);

    const double known = mkr::predict_score(toy.model, "2", "2");
    const double fb18 = mkr::predict_score(toy.model, "ghost", "2", mkr::Fallback{"18", "1"});
    const double fb25 = mkr::predict_score(toy.model, "ghost", "2", mkr::Fallback{"25", "1"});
    EXPECT_NE(known, fb18);
    EXPECT_NE(fb18, fb25);
    for (double p : {known, fb18, fb25}) {
        EXPECT_GT(p, 0.0);
        EXPECT_LT(p, 1.0);
    }
}

TEST(Predict, BaselineFallbackUsesMeanUser) {
    auto m = mkr::build_model(toy_counts(), hyper_d(3), {});
    for (const char* u : {"a", "b", "c"}) m.vocab.users.users.intern(u);
    for (const char* i : {"i0", "i1", "i2", "i3"}) m.vocab.items.intern(i);
    const auto& U = m.params.at("user_emb").value;
    const auto& V = m.params.at("item_emb").value;
    double dot = 0.0;
    for (std::size_t j = 0; j < 3; ++j) dot += (U(0, j) + U(1, j) + U(2, j)) / 3.0 * V(1, j);
    EXPECT_NEAR(mkr::predict_score(m, "zzz", "i1", mkr::Fallback{"x", "y"}), 1.0 / (1.0 + std::exp(-dot)), 1e-15);
}
