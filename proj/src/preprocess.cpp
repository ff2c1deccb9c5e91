#include "kgrec/preprocess.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <unordered_set>

#include <openssl/evp.h>

#include "kgrec/errors.hpp"
#include "kgrec/numeric/rng.hpp"

namespace kgrec::prep {

namespace fs = std::filesystem;

// --------------------------------------------------------------- Vocabulary

std::uint32_t Vocabulary::intern(std::string_view label) {
    std::string key(label);
    if (auto it = index_.find(key); it != index_.end()) return it->second;
    auto idx = static_cast<std::uint32_t>(labels_.size());
    index_.emplace(key, idx);
    labels_.push_back(std::move(key));
    return idx;
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view label) const {
    if (auto it = index_.find(std::string(label)); it != index_.end()) return it->second;
    return std::nullopt;
}

// -------------------------------------------------------------- dictionaries

KgEncoding preprocess_kg(std::span<const kg::TripleDescriptor> triples, std::span<const ItemKey> items) {
    KgEncoding out;
    for (const auto& item : items) {
        std::uint32_t i = out.dicts.items.intern(item.source_id);
        std::uint32_t e = out.dicts.entities.intern(item.entity_label);
        if (i != e) throw InvalidConfig("item '" + item.source_id + "' does not map to a fresh entity");
    }
    out.triples.reserve(triples.size());
    for (const auto& t : triples) {
        EncodedTriple enc;
        enc.head = out.dicts.entities.intern(t.head);
        enc.relation = out.dicts.relations.intern(t.relation);
        enc.tail = out.dicts.entities.intern(t.tail);
        out.triples.push_back(enc);
    }
    return out;
}

const UserFeatures& UserTable::lookup(std::string_view source_user_id) const {
    auto idx = users.find(source_user_id);
    if (!idx) throw UnknownUser(std::string(source_user_id));
    return features[*idx];
}

UserTable preprocess_user_info(std::span<const ingest::UserRecord> users) {
    UserTable table;
    for (const auto& u : users) {
        std::uint32_t idx = table.users.intern(u.user_id);
        if (idx < table.features.size()) continue;  // duplicate id keeps its first row
        table.features.push_back({table.genders.intern(u.gender), table.ages.intern(u.age), table.jobs.intern(u.job)});
    }
    return table;
}

RatingEncoding preprocess_rating(std::span<const ingest::RatingRecord> ratings, const Dictionaries& dicts,
                                 const UserTable& users, double threshold) {
    RatingEncoding out;
    out.rated_by_user.resize(users.users.size());
    std::unordered_set<std::uint64_t> seen_positive;
    for (const auto& r : ratings) {
        auto u = users.users.find(r.user_id);
        if (!u) {
            ++out.dropped_unknown_user;
            continue;
        }
        auto i = dicts.items.find(r.item_id);
        if (!i) {
            ++out.dropped_unknown_item;
            continue;
        }
        out.rated_by_user[*u].push_back(*i);
        if (r.rating >= threshold) {
            const std::uint64_t key = (static_cast<std::uint64_t>(*u) << 32) | *i;
            if (seen_positive.insert(key).second) out.positives.push_back({*u, *i, 1});
        } else {
            ++out.below_threshold;
        }
    }
    for (auto& items : out.rated_by_user) {
        std::sort(items.begin(), items.end());
        items.erase(std::unique(items.begin(), items.end()), items.end());
    }
    return out;
}

std::vector<Interaction> negative_sample(std::span<const Interaction> positives, std::size_t n_item, double ratio,
                                         std::uint64_t seed, std::span<const std::vector<std::uint32_t>> rated_by_user) {
    if (!(ratio > 0.0)) throw InvalidConfig("negative ratio must be > 0");
    std::map<std::uint32_t, std::size_t> positives_per_user;
    for (const auto& p : positives) ++positives_per_user[p.user];

    std::vector<std::vector<std::uint32_t>> own_rated;
    if (rated_by_user.empty()) {
        std::uint32_t max_user = positives_per_user.empty() ? 0 : positives_per_user.rbegin()->first;
        own_rated.resize(positives_per_user.empty() ? 0 : max_user + 1);
        for (const auto& p : positives) own_rated[p.user].push_back(p.item);
        for (auto& v : own_rated) {
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
        }
        rated_by_user = own_rated;
    }

    numeric::Rng rng(seed);
    std::vector<Interaction> out;
    for (const auto& [user, count] : positives_per_user) {
        static const std::vector<std::uint32_t> kNone;
        const auto& rated = user < rated_by_user.size() ? rated_by_user[user] : kNone;
        const auto wanted = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(count)));
        const std::size_t available = n_item > rated.size() ? n_item - rated.size() : 0;
        auto is_rated = [&](std::uint32_t item) { return std::binary_search(rated.begin(), rated.end(), item); };

        if (wanted >= available) {
            for (std::uint32_t item = 0; item < n_item; ++item) {
                if (!is_rated(item)) out.push_back({user, item, 0});
            }
        } else if (available > 2 * wanted) {
            std::unordered_set<std::uint32_t> chosen;
            while (chosen.size() < wanted) {
                auto item = static_cast<std::uint32_t>(rng.uniform_index(n_item));
                if (is_rated(item) || !chosen.insert(item).second) continue;
                out.push_back({user, item, 0});
            }
        } else {
            std::vector<std::uint32_t> pool;
            pool.reserve(available);
            for (std::uint32_t item = 0; item < n_item; ++item) {
                if (!is_rated(item)) pool.push_back(item);
            }
            for (std::size_t k = 0; k < wanted; ++k) {
                std::size_t j = k + static_cast<std::size_t>(rng.uniform_index(pool.size() - k));
                std::swap(pool[k], pool[j]);
                out.push_back({user, pool[k], 0});
            }
        }
    }
    return out;
}

SplitDataset split_622(std::span<const Interaction> interactions, std::uint64_t seed) {
    const std::size_t n = interactions.size();
    if (n < 5) throw TooFewRows(n);
    std::vector<Interaction> rows(interactions.begin(), interactions.end());
    numeric::Rng rng(seed);
    rng.shuffle(rows);
    const std::size_t n_train = n * 6 / 10;
    const std::size_t n_eval = n * 2 / 10;
    SplitDataset out;
    out.train.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.eval.assign(rows.begin() + static_cast<std::ptrdiff_t>(n_train),
                    rows.begin() + static_cast<std::ptrdiff_t>(n_train + n_eval));
    out.test.assign(rows.begin() + static_cast<std::ptrdiff_t>(n_train + n_eval), rows.end());
    return out;
}

// ------------------------------------------------------------------ pipeline

Counts PreparedDataset::counts() const {
    return {users.users.size(),   dicts.items.size(), dicts.entities.size(), dicts.relations.size(),
            users.genders.size(), users.ages.size(),  users.jobs.size()};
}

std::vector<ItemKey> movie_items(std::span<const ingest::MovieRecord> movies) {
    std::vector<ItemKey> out;
    out.reserve(movies.size());
    for (const auto& m : movies) out.push_back({std::to_string(m.movie_id), ingest::movie_label(m.movie_id)});
    return out;
}

std::vector<ItemKey> book_items(std::span<const ingest::BookRecord> books) {
    std::vector<ItemKey> out;
    std::unordered_set<std::string> seen;
    out.reserve(books.size());
    for (const auto& b : books) {
        if (!seen.insert(b.isbn).second) continue;
        out.push_back({b.isbn, ingest::book_label(b.isbn)});
    }
    return out;
}

PreparedDataset prepare(std::span<const ingest::UserRecord> users, std::span<const ItemKey> items,
                        std::span<const kg::TripleDescriptor> triples, std::span<const ingest::RatingRecord> ratings,
                        const PrepareOptions& options, PrepareStats* stats) {
    std::vector<ItemKey> normalized_items;
    normalized_items.reserve(items.size());
    for (const auto& item : items) normalized_items.push_back({item.source_id, kg::normalize_label(item.entity_label)});

    kg::KnowledgeGraph graph;
    for (const auto& t : triples) graph.add_triple(t.head, t.relation, t.tail);
    std::vector<kg::TripleDescriptor> descriptors;
    descriptors.reserve(graph.triple_count());
    for (const auto& t : graph.triples()) descriptors.push_back(graph.describe(t));

    PreparedDataset out;
    auto encoded = preprocess_kg(descriptors, normalized_items);
    out.dicts = std::move(encoded.dicts);
    out.kg = std::move(encoded.triples);
    out.users = preprocess_user_info(users);

    auto rated = preprocess_rating(ratings, out.dicts, out.users, options.threshold);
    auto negatives = negative_sample(rated.positives, out.dicts.items.size(), options.negative_ratio, options.seed,
                                     rated.rated_by_user);
    if (stats) {
        stats->positives = rated.positives.size();
        stats->negatives = negatives.size();
        stats->dropped_unknown_item = rated.dropped_unknown_item;
        stats->dropped_unknown_user = rated.dropped_unknown_user;
        stats->below_threshold = rated.below_threshold;
    }
    out.interactions = std::move(rated.positives);
    out.interactions.insert(out.interactions.end(), negatives.begin(), negatives.end());
    return out;
}

// ---------------------------------------------------------------------- TSV

namespace {

std::string tsv_escape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '\\': out += "\\\\"; break;
            case '\t': out += "\\t"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

std::string tsv_unescape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '\\' || i + 1 == s.size()) {
            out.push_back(s[i]);
            continue;
        }
        char n = s[++i];
        out.push_back(n == 't' ? '\t' : n == 'n' ? '\n' : n == 'r' ? '\r' : n);
    }
    return out;
}

class TsvWriter {
public:
    explicit TsvWriter(const fs::path& path) : path_(path), out_(path, std::ios::binary) {
        if (!out_) throw IoError("cannot write " + path.string());
    }
    std::ofstream& stream() { return out_; }
    void close() {
        out_.close();
        if (!out_) throw IoError("error writing " + path_.string());
    }

private:
    fs::path path_;
    std::ofstream out_;
};

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find('\t', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

// Calls fn(line_no, fields) for each non-empty line, requiring `width` fields.
template <typename Fn>
void read_tsv(const fs::path& path, std::size_t width, Fn&& fn) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingFile(path.string());
    std::string line;
    std::size_t line_no = 0;
    const std::string file = path.filename().string();
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_tabs(line);
        if (fields.size() != width) {
            throw RowFormatError(file, line_no, "expected " + std::to_string(width) + " tab-separated fields");
        }
        fn(line_no, fields);
    }
}

std::uint32_t parse_index(std::string_view s, const fs::path& path, std::size_t line_no) {
    std::uint32_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        throw RowFormatError(path.filename().string(), line_no, "bad index '" + std::string(s) + "'");
    }
    return v;
}

void write_vocabulary(const fs::path& path, const Vocabulary& vocab) {
    TsvWriter w(path);
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        w.stream() << i << '\t' << tsv_escape(vocab.label(static_cast<std::uint32_t>(i))) << '\n';
    }
    w.close();
}

Vocabulary read_vocabulary(const fs::path& path) {
    Vocabulary vocab;
    read_tsv(path, 2, [&](std::size_t line_no, const auto& f) {
        std::uint32_t idx = parse_index(f[0], path, line_no);
        if (idx != vocab.size()) throw RowFormatError(path.filename().string(), line_no, "indices must be dense");
        if (vocab.intern(tsv_unescape(f[1])) != idx) {
            throw RowFormatError(path.filename().string(), line_no, "duplicate label");
        }
    });
    return vocab;
}

void require_below(std::uint32_t v, std::size_t n, const fs::path& path, std::size_t line_no) {
    if (v >= n) {
        throw RowFormatError(path.filename().string(), line_no,
                             "index " + std::to_string(v) + " out of range (size " + std::to_string(n) + ")");
    }
}

std::string hex(const unsigned char* digest, unsigned int n) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < n; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0xF]);
    }
    return out;
}

struct DigestCtx {
    DigestCtx() : ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
        if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("SHA-256 init failed");
    }
    void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx.get(), data, n); }
    std::string finish() {
        unsigned char digest[EVP_MAX_MD_SIZE];
        unsigned int n = 0;
        EVP_DigestFinal_ex(ctx.get(), digest, &n);
        return hex(digest, n);
    }
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx;
};

}  // namespace

void save_prepared(const PreparedDataset& data, const fs::path& directory) {
    fs::create_directories(directory);
    {
        TsvWriter w(directory / "kg_final.tsv");
        for (const auto& t : data.kg) w.stream() << t.head << '\t' << t.relation << '\t' << t.tail << '\n';
        w.close();
    }
    {
        TsvWriter w(directory / "user_final.tsv");
        for (std::size_t u = 0; u < data.users.features.size(); ++u) {
            const auto& f = data.users.features[u];
            w.stream() << u << '\t' << f.gender << '\t' << f.age << '\t' << f.job << '\n';
        }
        w.close();
    }
    {
        TsvWriter w(directory / "ratings_final.tsv");
        for (const auto& r : data.interactions) {
            w.stream() << r.user << '\t' << r.item << '\t' << static_cast<int>(r.label) << '\n';
        }
        w.close();
    }
    write_vocabulary(directory / "entities.tsv", data.dicts.entities);
    write_vocabulary(directory / "relations.tsv", data.dicts.relations);
    write_vocabulary(directory / "items.tsv", data.dicts.items);
    write_vocabulary(directory / "users.tsv", data.users.users);
    {
        TsvWriter w(directory / "user_vocab.tsv");
        auto dump = [&](std::string_view field, const Vocabulary& v) {
            for (std::size_t i = 0; i < v.size(); ++i) {
                w.stream() << field << '\t' << i << '\t' << tsv_escape(v.label(static_cast<std::uint32_t>(i))) << '\n';
            }
        };
        dump("gender", data.users.genders);
        dump("age", data.users.ages);
        dump("job", data.users.jobs);
        w.close();
    }
    {
        TsvWriter w(directory / "meta.tsv");
        w.stream() << "dataset\t" << tsv_escape(data.dataset) << '\n';
        w.close();
    }
}

PreparedDataset load_prepared(const fs::path& directory) {
    PreparedDataset data;
    data.dicts.entities = read_vocabulary(directory / "entities.tsv");
    data.dicts.relations = read_vocabulary(directory / "relations.tsv");
    data.dicts.items = read_vocabulary(directory / "items.tsv");
    data.users.users = read_vocabulary(directory / "users.tsv");
    if (data.dicts.items.size() > data.dicts.entities.size()) {
        throw RowFormatError("items.tsv", 1, "more items than entities");
    }

    const fs::path vocab_path = directory / "user_vocab.tsv";
    read_tsv(vocab_path, 3, [&](std::size_t line_no, const auto& f) {
        Vocabulary* v = f[0] == "gender" ? &data.users.genders
                        : f[0] == "age"  ? &data.users.ages
                        : f[0] == "job"  ? &data.users.jobs
                                         : nullptr;
        if (!v) throw RowFormatError(vocab_path.filename().string(), line_no, "unknown field '" + std::string(f[0]) + "'");
        std::uint32_t idx = parse_index(f[1], vocab_path, line_no);
        if (idx != v->size() || v->intern(tsv_unescape(f[2])) != idx) {
            throw RowFormatError(vocab_path.filename().string(), line_no, "indices must be dense and labels unique");
        }
    });

    const fs::path user_path = directory / "user_final.tsv";
    read_tsv(user_path, 4, [&](std::size_t line_no, const auto& f) {
        std::uint32_t u = parse_index(f[0], user_path, line_no);
        if (u != data.users.features.size()) throw RowFormatError(user_path.filename().string(), line_no, "users must be dense");
        UserFeatures feat{parse_index(f[1], user_path, line_no), parse_index(f[2], user_path, line_no),
                          parse_index(f[3], user_path, line_no)};
        require_below(feat.gender, data.users.genders.size(), user_path, line_no);
        require_below(feat.age, data.users.ages.size(), user_path, line_no);
        require_below(feat.job, data.users.jobs.size(), user_path, line_no);
        data.users.features.push_back(feat);
    });
    if (data.users.features.size() != data.users.users.size()) {
        throw RowFormatError(user_path.filename().string(), 0, "row count differs from users.tsv");
    }

    const fs::path kg_path = directory / "kg_final.tsv";
    read_tsv(kg_path, 3, [&](std::size_t line_no, const auto& f) {
        EncodedTriple t{parse_index(f[0], kg_path, line_no), parse_index(f[1], kg_path, line_no),
                        parse_index(f[2], kg_path, line_no)};
        require_below(t.head, data.dicts.entities.size(), kg_path, line_no);
        require_below(t.relation, data.dicts.relations.size(), kg_path, line_no);
        require_below(t.tail, data.dicts.entities.size(), kg_path, line_no);
        data.kg.push_back(t);
    });

    const fs::path ratings_path = directory / "ratings_final.tsv";
    read_tsv(ratings_path, 3, [&](std::size_t line_no, const auto& f) {
        Interaction r{parse_index(f[0], ratings_path, line_no), parse_index(f[1], ratings_path, line_no), 0};
        std::uint32_t label = parse_index(f[2], ratings_path, line_no);
        require_below(r.user, data.users.users.size(), ratings_path, line_no);
        require_below(r.item, data.dicts.items.size(), ratings_path, line_no);
        if (label > 1) throw RowFormatError(ratings_path.filename().string(), line_no, "label must be 0 or 1");
        r.label = static_cast<std::uint8_t>(label);
        data.interactions.push_back(r);
    });

    const fs::path meta_path = directory / "meta.tsv";
    if (fs::exists(meta_path)) {
        read_tsv(meta_path, 2, [&](std::size_t, const auto& f) {
            if (f[0] == "dataset") data.dataset = tsv_unescape(f[1]);
        });
    }
    return data;
}

std::string hash_interactions(std::span<const Interaction> rows) {
    DigestCtx ctx;
    for (const auto& r : rows) {
        unsigned char buf[9];
        for (int k = 0; k < 4; ++k) buf[k] = static_cast<unsigned char>(r.user >> (8 * k));
        for (int k = 0; k < 4; ++k) buf[4 + k] = static_cast<unsigned char>(r.item >> (8 * k));
        buf[8] = r.label;
        ctx.update(buf, sizeof buf);
    }
    return ctx.finish();
}

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingFile(path.string());
    DigestCtx ctx;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        if (in.gcount() > 0) ctx.update(buf, static_cast<std::size_t>(in.gcount()));
    }
    return ctx.finish();
}

}  // namespace kgrec::prep
