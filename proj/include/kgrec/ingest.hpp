#pragma once

// Dataset readers (MovieLens-1M, Book-Crossing), the movie/book triple
// extractors, poster encoding and side-information file loading.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgrec/kg_store.hpp"

namespace kgrec::ingest {

inline constexpr std::string_view kUnknown = "UNKNOWN";

namespace relation {
inline constexpr std::string_view kDirectedBy = "directed_by";
inline constexpr std::string_view kWrittenBy = "written_by";
inline constexpr std::string_view kStars = "stars";
inline constexpr std::string_view kHasGenre = "has_genre";
inline constexpr std::string_view kHasPoster = "has_poster";
inline constexpr std::string_view kPublishedBy = "published_by";
}  // namespace relation

struct MovieRecord {
    std::int64_t movie_id = 0;
    std::string title;
    std::vector<std::string> genres;
    std::vector<std::string> directors;
    std::vector<std::string> writers;
    std::vector<std::string> actors;
    std::optional<std::string> poster;  // base-64 text
};

struct BookRecord {
    std::string isbn;
    std::string title;
    std::string author;
    std::string year;
    std::string publisher;
};

// Categories are kept as their source spelling ("M", "25", "4"); the
// preprocessor assigns dense indices.
struct UserRecord {
    std::string user_id;
    std::string gender;
    std::string age;
    std::string job;
};

struct RatingRecord {
    std::string user_id;
    std::string item_id;
    double rating = 0.0;
    std::optional<std::int64_t> timestamp;
};

struct MovieLensData {
    std::vector<UserRecord> users;
    std::vector<MovieRecord> movies;
    std::vector<RatingRecord> ratings;
};

struct BookCrossingData {
    std::vector<UserRecord> users;
    std::vector<BookRecord> books;
    std::vector<RatingRecord> ratings;
};

struct MovieLensOptions {
    // Defaults to <dir>/movie_credits.csv when present.
    std::optional<std::filesystem::path> credits;
    // Directory of <movie_id>.<ext> poster images; defaults to <dir>/posters.
    std::optional<std::filesystem::path> posters;
};

MovieLensData load_movielens(const std::filesystem::path& directory, const MovieLensOptions& options = {});
BookCrossingData load_bookcrossing(const std::filesystem::path& directory);

// Entity labels used for items in the knowledge graph.
std::string movie_label(std::int64_t movie_id);
std::string book_label(std::string_view isbn);

std::vector<kg::TripleDescriptor> extract_movie_triples(const MovieRecord& record);
std::vector<kg::TripleDescriptor> extract_book_triples(const BookRecord& record);

// Maps a free-form age to the MovieLens age buckets; <5, >110 or
// unparseable values map to kUnknown.
std::string age_bucket(std::string_view raw_age);

std::string encode_poster(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> decode_poster(std::string_view text);

std::vector<kg::TripleDescriptor> load_side_info_file(const std::filesystem::path& path, kg::Dialect format);
std::vector<kg::TripleDescriptor> load_side_info_files(std::span<const std::filesystem::path> paths,
                                                       kg::Dialect format);

// Whole-file read; Latin-1 input is transcoded to UTF-8.
std::string read_text_file(const std::filesystem::path& path);
std::string read_latin1_file(const std::filesystem::path& path);
std::string latin1_to_utf8(std::string_view bytes);

}  // namespace kgrec::ingest
