#pragma once

// Id dictionaries, user-feature encoding, rating binarization, negative
// sampling and the 6:2:2 split, plus the TSV files that carry the encoded
// dataset between the `preprocess` and `train` commands.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kgrec/ingest.hpp"
#include "kgrec/kg_store.hpp"

namespace kgrec::prep {

// Dense first-appearance interning of strings.
class Vocabulary {
public:
    std::uint32_t intern(std::string_view label);
    std::optional<std::uint32_t> find(std::string_view label) const;
    const std::string& label(std::uint32_t index) const { return labels_.at(index); }
    std::size_t size() const noexcept { return labels_.size(); }
    const std::vector<std::string>& labels() const noexcept { return labels_; }

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.labels_ == b.labels_; }

private:
    std::vector<std::string> labels_;
    std::unordered_map<std::string, std::uint32_t> index_;
};

// An item and the entity label it is interned under.
struct ItemKey {
    std::string source_id;
    std::string entity_label;
};

struct Dictionaries {
    Vocabulary items;      // source item id -> dense index
    Vocabulary relations;  // relation label -> dense index
    Vocabulary entities;   // entity label -> dense index; items occupy [0, items.size())
};

struct EncodedTriple {
    std::uint32_t head = 0;
    std::uint32_t relation = 0;
    std::uint32_t tail = 0;

    friend bool operator==(const EncodedTriple&, const EncodedTriple&) = default;
};

struct KgEncoding {
    Dictionaries dicts;
    std::vector<EncodedTriple> triples;
};

// Items are interned first, so item index == entity index for items.
KgEncoding preprocess_kg(std::span<const kg::TripleDescriptor> triples, std::span<const ItemKey> items = {});

struct UserFeatures {
    std::uint32_t gender = 0;
    std::uint32_t age = 0;
    std::uint32_t job = 0;

    friend bool operator==(const UserFeatures&, const UserFeatures&) = default;
};

struct UserTable {
    Vocabulary users;
    Vocabulary genders;
    Vocabulary ages;
    Vocabulary jobs;
    std::vector<UserFeatures> features;  // indexed by user index

    // Throws UnknownUser.
    const UserFeatures& lookup(std::string_view source_user_id) const;
};

UserTable preprocess_user_info(std::span<const ingest::UserRecord> users);

struct Interaction {
    std::uint32_t user = 0;
    std::uint32_t item = 0;
    std::uint8_t label = 0;

    friend bool operator==(const Interaction&, const Interaction&) = default;
    friend auto operator<=>(const Interaction&, const Interaction&) = default;
};

struct RatingEncoding {
    std::vector<Interaction> positives;
    // Every (user, item) pair the user rated, regardless of threshold.
    std::vector<std::vector<std::uint32_t>> rated_by_user;
    std::size_t dropped_unknown_item = 0;
    std::size_t dropped_unknown_user = 0;
    std::size_t below_threshold = 0;
};

RatingEncoding preprocess_rating(std::span<const ingest::RatingRecord> ratings, const Dictionaries& dicts,
                                 const UserTable& users, double threshold);

// Per user, floor(ratio * positives) items drawn uniformly without
// replacement from items the user never rated. `rated_by_user` defaults to
// the positives themselves when empty.
std::vector<Interaction> negative_sample(std::span<const Interaction> positives, std::size_t n_item, double ratio,
                                         std::uint64_t seed,
                                         std::span<const std::vector<std::uint32_t>> rated_by_user = {});

struct Counts {
    std::size_t n_user = 0;
    std::size_t n_item = 0;
    std::size_t n_entity = 0;
    std::size_t n_relation = 0;
    std::size_t n_gender = 0;
    std::size_t n_age = 0;
    std::size_t n_job = 0;

    friend bool operator==(const Counts&, const Counts&) = default;
};

struct SplitDataset {
    std::vector<Interaction> train;
    std::vector<Interaction> eval;
    std::vector<Interaction> test;
    Counts counts;
};

// Seeded Fisher-Yates shuffle, then a 60/20/20 cut (train = floor(0.6 n),
// eval = floor(0.2 n), test = the rest). Throws TooFewRows below 5 rows.
SplitDataset split_622(std::span<const Interaction> interactions, std::uint64_t seed);

// Everything `train` needs, as written by `preprocess`.
struct PreparedDataset {
    Dictionaries dicts;
    UserTable users;
    std::vector<EncodedTriple> kg;
    std::vector<Interaction> interactions;  // positives then sampled negatives
    std::string dataset;                     // "movielens" / "bookcrossing" / "custom"

    Counts counts() const;
};

struct PrepareOptions {
    double threshold = 4.0;
    double negative_ratio = 1.0;
    std::uint64_t seed = 0;
};

struct PrepareStats {
    std::size_t positives = 0;
    std::size_t negatives = 0;
    std::size_t dropped_unknown_item = 0;
    std::size_t dropped_unknown_user = 0;
    std::size_t below_threshold = 0;
};

PreparedDataset prepare(std::span<const ingest::UserRecord> users, std::span<const ItemKey> items,
                        std::span<const kg::TripleDescriptor> triples,
                        std::span<const ingest::RatingRecord> ratings, const PrepareOptions& options,
                        PrepareStats* stats = nullptr);

std::vector<ItemKey> movie_items(std::span<const ingest::MovieRecord> movies);
std::vector<ItemKey> book_items(std::span<const ingest::BookRecord> books);

// kg_final.tsv, user_final.tsv, ratings_final.tsv plus the dictionary files.
void save_prepared(const PreparedDataset& data, const std::filesystem::path& directory);
PreparedDataset load_prepared(const std::filesystem::path& directory);

// Order-sensitive SHA-256 over (user, item, label) rows, hex encoded.
std::string hash_interactions(std::span<const Interaction> rows);

std::string sha256_file(const std::filesystem::path& path);

}  // namespace kgrec::prep
