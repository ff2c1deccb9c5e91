#pragma once

// Single-pair prediction on source ids, with the age/job fallback for users
// the model has never seen.

#include <optional>
#include <string>
#include <string_view>

#include "kgrec/mkr.hpp"

namespace kgrec::mkr {

struct UserInfo {
    std::string gender;
    std::string age;
    std::string job;

    friend bool operator==(const UserInfo&, const UserInfo&) = default;
};

// Stored categories of a known user; UNKNOWN for each field otherwise.
UserInfo get_user_info(const prep::UserTable& users, std::string_view user_id);

struct Fallback {
    std::string age;
    std::string job;
};

// Known users go through rs_forward. An unknown user is scored with the
// mean user and mean gender embeddings plus the embeddings of the supplied
// age and job. Throws UnknownItem, MissingFallback, or InvalidConfig for a
// fallback category outside the vocabulary.
double predict_score(const MkrModel& model, std::string_view user_id, std::string_view item_id,
                     const std::optional<Fallback>& fallback = std::nullopt);

}  // namespace kgrec::mkr
