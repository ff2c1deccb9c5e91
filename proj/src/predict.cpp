#include "kgrec/predict.hpp"

#include "kgrec/errors.hpp"
#include "kgrec/ingest.hpp"

namespace kgrec::mkr {

namespace {

// Column mean of an embedding table, as a 1 x d row.
numeric::Matrix column_mean(const numeric::Matrix& table) {
    numeric::Matrix out(1, table.cols());
    for (std::size_t r = 0; r < table.rows(); ++r) {
        for (std::size_t j = 0; j < table.cols(); ++j) out[j] += table(r, j);
    }
    for (double& v : out.values()) v /= static_cast<double>(table.rows());
    return out;
}

std::uint32_t category(const prep::Vocabulary& vocab, std::string_view value, std::string_view field) {
    auto idx = vocab.find(value);
    if (!idx) throw InvalidConfig("unknown " + std::string(field) + " category '" + std::string(value) + "'");
    return *idx;
}

}  // namespace

UserInfo get_user_info(const prep::UserTable& users, std::string_view user_id) {
    auto idx = users.users.find(user_id);
    if (!idx || *idx >= users.features.size()) {
        const std::string unknown(ingest::kUnknown);
        return {unknown, unknown, unknown};
    }
    const auto& f = users.features[*idx];
    return {users.genders.label(f.gender), users.ages.label(f.age), users.jobs.label(f.job)};
}

double predict_score(const MkrModel& model, std::string_view user_id, std::string_view item_id,
                     const std::optional<Fallback>& fallback) {
    auto item = model.vocab.items.find(item_id);
    if (!item) throw UnknownItem(std::string(item_id));
    const std::uint32_t items[1] = {*item};

    if (auto user = model.vocab.users.users.find(user_id)) {
        prep::Interaction row{*user, *item, 0};
        return rs_forward(model, make_rs_batch(model, std::span(&row, 1)))[0];
    }

    if (!fallback) throw MissingFallback();
    numeric::Matrix base = column_mean(model.params.at("user_emb").value);
    if (model.config.use_user_features) {
        const auto& users = model.vocab.users;
        const std::uint32_t age = category(users.ages, fallback->age, "age");
        const std::uint32_t job = category(users.jobs, fallback->job, "job");
        const numeric::Matrix gender = column_mean(model.params.at("gender_emb").value);
        const auto age_row = model.params.at("age_emb").value.row(age);
        const auto job_row = model.params.at("job_emb").value.row(job);
        for (std::size_t j = 0; j < base.cols(); ++j) base[j] += gender[j] + age_row[j] + job_row[j];
    }
    return rs_forward_from_base(model, base, items)[0];
}

}  // namespace kgrec::mkr
