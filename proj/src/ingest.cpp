#include "kgrec/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <openssl/evp.h>

#include "kgrec/csv.hpp"
#include "kgrec/errors.hpp"

namespace kgrec::ingest {

namespace fs = std::filesystem;

namespace {

std::vector<std::string_view> split(std::string_view s, std::string_view sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + sep.size();
    }
}

std::vector<std::string> split_multi(std::string_view s) {
    std::vector<std::string> out;
    if (s.empty()) return out;
    for (auto part : split(s, "|")) {
        while (!part.empty() && part.front() == ' ') part.remove_prefix(1);
        while (!part.empty() && part.back() == ' ') part.remove_suffix(1);
        if (!part.empty()) out.emplace_back(part);
    }
    return out;
}

template <typename Int>
std::optional<Int> parse_int(std::string_view s) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
    Int value{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return value;
}

// Calls fn(line_number, line) for every non-empty line.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        fn(line_no, line);
    }
}

fs::path require_file(const fs::path& directory, std::string_view name) {
    fs::path p = directory / name;
    if (!fs::is_regular_file(p)) throw MissingFile(p.string());
    return p;
}

std::vector<UserRecord> parse_movielens_users(const fs::path& path) {
    const std::string file = path.filename().string();
    std::vector<UserRecord> users;
    std::unordered_set<std::string> seen;
    for_each_line(read_latin1_file(path), [&](std::size_t line_no, std::string_view line) {
        auto f = split(line, "::");
        if (f.size() != 5) throw RowFormatError(file, line_no, "expected 5 '::'-separated fields");
        if (!parse_int<std::int64_t>(f[0])) throw RowFormatError(file, line_no, "bad UserID");
        if (f[1] != "M" && f[1] != "F") throw RowFormatError(file, line_no, "gender must be M or F");
        if (!parse_int<int>(f[2])) throw RowFormatError(file, line_no, "bad age code");
        if (!parse_int<int>(f[3])) throw RowFormatError(file, line_no, "bad occupation code");
        UserRecord u{std::string(f[0]), std::string(f[1]), std::string(f[2]), std::string(f[3])};
        if (!seen.insert(u.user_id).second) throw RowFormatError(file, line_no, "duplicate UserID");
        users.push_back(std::move(u));
    });
    return users;
}

std::vector<MovieRecord> parse_movielens_movies(const fs::path& path) {
    const std::string file = path.filename().string();
    std::vector<MovieRecord> movies;
    std::unordered_set<std::int64_t> seen;
    for_each_line(read_latin1_file(path), [&](std::size_t line_no, std::string_view line) {
        auto f = split(line, "::");
        if (f.size() != 3) throw RowFormatError(file, line_no, "expected 3 '::'-separated fields");
        auto id = parse_int<std::int64_t>(f[0]);
        if (!id) throw RowFormatError(file, line_no, "bad MovieID");
        if (!seen.insert(*id).second) throw RowFormatError(file, line_no, "duplicate MovieID");
        MovieRecord m;
        m.movie_id = *id;
        m.title = std::string(f[1]);
        m.genres = split_multi(f[2]);
        movies.push_back(std::move(m));
    });
    return movies;
}

std::vector<RatingRecord> parse_movielens_ratings(const fs::path& path) {
    const std::string file = path.filename().string();
    std::vector<RatingRecord> ratings;
    for_each_line(read_latin1_file(path), [&](std::size_t line_no, std::string_view line) {
        auto f = split(line, "::");
        if (f.size() != 4) throw RowFormatError(file, line_no, "expected 4 '::'-separated fields");
        auto user = parse_int<std::int64_t>(f[0]);
        auto movie = parse_int<std::int64_t>(f[1]);
        auto rating = parse_int<int>(f[2]);
        auto ts = parse_int<std::int64_t>(f[3]);
        if (!user || !movie) throw RowFormatError(file, line_no, "bad id");
        if (!rating || *rating < 1 || *rating > 5) throw RowFormatError(file, line_no, "rating must be an integer in 1-5");
        if (!ts) throw RowFormatError(file, line_no, "bad timestamp");
        ratings.push_back({std::string(f[0]), std::string(f[1]), static_cast<double>(*rating), ts});
    });
    return ratings;
}

void apply_credits(const fs::path& path, std::vector<MovieRecord>& movies) {
    const std::string file = path.filename().string();
    std::unordered_map<std::int64_t, std::size_t> by_id;
    for (std::size_t i = 0; i < movies.size(); ++i) by_id.emplace(movies[i].movie_id, i);

    std::string text = read_text_file(path);
    csv::Reader reader(text);
    auto header = reader.next();
    if (!header || header->fields != std::vector<std::string>{"movie_id", "directors", "writers", "actors"}) {
        throw RowFormatError(file, 1, "header must be 'movie_id,directors,writers,actors'");
    }
    while (true) {
        std::optional<csv::Record> rec;
        try {
            rec = reader.next();
        } catch (const ParseError& e) {
            throw RowFormatError(file, e.line(), e.reason());
        }
        if (!rec) break;
        if (rec->fields.size() != 4) throw RowFormatError(file, rec->line, "expected 4 columns");
        auto id = parse_int<std::int64_t>(rec->fields[0]);
        if (!id) throw RowFormatError(file, rec->line, "bad movie_id");
        auto it = by_id.find(*id);
        if (it == by_id.end()) continue;  // credits for movies outside the dataset
        MovieRecord& m = movies[it->second];
        m.directors = split_multi(rec->fields[1]);
        m.writers = split_multi(rec->fields[2]);
        m.actors = split_multi(rec->fields[3]);
    }
}

void apply_posters(const fs::path& dir, std::vector<MovieRecord>& movies) {
    std::unordered_map<std::int64_t, std::size_t> by_id;
    for (std::size_t i = 0; i < movies.size(); ++i) by_id.emplace(movies[i].movie_id, i);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& p : files) {
        auto id = parse_int<std::int64_t>(p.stem().string());
        if (!id) continue;
        auto it = by_id.find(*id);
        if (it == by_id.end()) continue;
        std::string bytes = read_text_file(p);
        movies[it->second].poster = encode_poster(
            std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
    }
}

std::vector<csv::Record> read_bx_table(const fs::path& path, std::size_t min_fields) {
    const std::string file = path.filename().string();
    std::string text = read_latin1_file(path);
    std::vector<csv::Record> records;
    try {
        records = csv::read_all(text, {.delimiter = ';', .backslash_escapes = true});
    } catch (const ParseError& e) {
        throw RowFormatError(file, e.line(), e.reason());
    }
    if (records.empty()) throw RowFormatError(file, 1, "missing header");
    records.erase(records.begin());
    for (const auto& r : records) {
        if (r.fields.size() < min_fields) {
            throw RowFormatError(file, r.line,
                                 "expected at least " + std::to_string(min_fields) + " ';'-separated fields");
        }
    }
    return records;
}

}  // namespace

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingFile(path.string());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::string latin1_to_utf8(std::string_view bytes) {
    std::string out;
    out.reserve(bytes.size());
    for (unsigned char c : bytes) {
        if (c < 0x80) {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back(static_cast<char>(0xC0 | (c >> 6)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
        }
    }
    return out;
}

std::string read_latin1_file(const fs::path& path) { return latin1_to_utf8(read_text_file(path)); }

MovieLensData load_movielens(const fs::path& directory, const MovieLensOptions& options) {
    fs::path users = require_file(directory, "users.dat");
    fs::path movies = require_file(directory, "movies.dat");
    fs::path ratings = require_file(directory, "ratings.dat");

    MovieLensData data;
    data.users = parse_movielens_users(users);
    data.movies = parse_movielens_movies(movies);
    data.ratings = parse_movielens_ratings(ratings);

    fs::path credits = options.credits.value_or(directory / "movie_credits.csv");
    if (options.credits && !fs::is_regular_file(credits)) throw MissingFile(credits.string());
    if (fs::is_regular_file(credits)) apply_credits(credits, data.movies);

    fs::path posters = options.posters.value_or(directory / "posters");
    if (options.posters && !fs::is_directory(posters)) throw MissingFile(posters.string());
    if (fs::is_directory(posters)) apply_posters(posters, data.movies);
    return data;
}

BookCrossingData load_bookcrossing(const fs::path& directory) {
    fs::path users_path = require_file(directory, "BX-Users.csv");
    fs::path books_path = require_file(directory, "BX-Books.csv");
    fs::path ratings_path = require_file(directory, "BX-Book-Ratings.csv");

    BookCrossingData data;
    for (auto& r : read_bx_table(users_path, 3)) {
        data.users.push_back({r.fields[0], std::string(kUnknown), age_bucket(r.fields[2]), std::string(kUnknown)});
    }
    for (auto& r : read_bx_table(books_path, 5)) {
        data.books.push_back({r.fields[0], r.fields[1], r.fields[2], r.fields[3], r.fields[4]});
    }
    const std::string ratings_file = ratings_path.filename().string();
    for (auto& r : read_bx_table(ratings_path, 3)) {
        auto rating = parse_int<int>(r.fields[2]);
        if (!rating || *rating < 0 || *rating > 10) {
            throw RowFormatError(ratings_file, r.line, "rating must be an integer in 0-10");
        }
        data.ratings.push_back({r.fields[0], r.fields[1], static_cast<double>(*rating), std::nullopt});
    }
    return data;
}

std::string movie_label(std::int64_t movie_id) { return "movie:" + std::to_string(movie_id); }

std::string book_label(std::string_view isbn) { return "book:" + std::string(isbn); }

std::vector<kg::TripleDescriptor> extract_movie_triples(const MovieRecord& record) {
    std::vector<kg::TripleDescriptor> out;
    const std::string head = movie_label(record.movie_id);
    auto emit = [&](std::string_view rel, std::string_view prefix, const std::vector<std::string>& values) {
        for (const auto& v : values) out.push_back({head, std::string(rel), std::string(prefix) + v});
    };
    emit(relation::kDirectedBy, "person:", record.directors);
    emit(relation::kWrittenBy, "person:", record.writers);
    emit(relation::kStars, "person:", record.actors);
    emit(relation::kHasGenre, "genre:", record.genres);
    if (record.poster && !record.poster->empty()) {
        out.push_back({head, std::string(relation::kHasPoster), *record.poster});
    }
    return out;
}

std::vector<kg::TripleDescriptor> extract_book_triples(const BookRecord& record) {
    std::vector<kg::TripleDescriptor> out;
    const std::string head = book_label(record.isbn);
    if (!record.author.empty()) out.push_back({head, std::string(relation::kWrittenBy), "person:" + record.author});
    if (!record.publisher.empty()) {
        out.push_back({head, std::string(relation::kPublishedBy), "publisher:" + record.publisher});
    }
    return out;
}

std::string age_bucket(std::string_view raw_age) {
    auto age = parse_int<int>(raw_age);
    if (!age || *age < 5 || *age > 110) return std::string(kUnknown);
    if (*age < 18) return "1";
    if (*age < 25) return "18";
    if (*age < 35) return "25";
    if (*age < 45) return "35";
    if (*age < 50) return "45";
    if (*age < 56) return "50";
    return "56";
}

std::string encode_poster(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) return {};
    std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
    int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                            static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::vector<std::uint8_t> decode_poster(std::string_view text) {
    if (text.empty()) return {};
    if (text.size() % 4 != 0) throw Error("base-64 text length must be a multiple of 4");
    std::vector<std::uint8_t> out(3 * text.size() / 4);
    int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                            static_cast<int>(text.size()));
    if (n < 0) throw Error("invalid base-64 text");
    std::size_t padding = 0;
    if (text.back() == '=') ++padding;
    if (text.size() >= 2 && text[text.size() - 2] == '=') ++padding;
    out.resize(static_cast<std::size_t>(n) - padding);
    return out;
}

std::vector<kg::TripleDescriptor> load_side_info_file(const fs::path& path, kg::Dialect format) {
    return kg::read_triples(read_text_file(path), format);
}

std::vector<kg::TripleDescriptor> load_side_info_files(std::span<const fs::path> paths, kg::Dialect format) {
    std::vector<kg::TripleDescriptor> out;
    for (const auto& p : paths) {
        auto part = load_side_info_file(p, format);
        out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    return out;
}

}  // namespace kgrec::ingest
