#include "kgrec/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

#include "kgrec/errors.hpp"

#ifndef KGREC_GIT_DESCRIBE
#define KGREC_GIT_DESCRIBE "unknown"
#endif

namespace kgrec::mkr {

namespace {

constexpr std::string_view kMagic = "MKR1";

std::uint32_t crc32_of(std::string_view bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in chunks.
    constexpr std::size_t kChunk = 1u << 30;
    for (std::size_t off = 0; off < bytes.size(); off += kChunk) {
        const std::size_t n = std::min(kChunk, bytes.size() - off);
        crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + off), static_cast<uInt>(n));
    }
    return static_cast<std::uint32_t>(crc);
}

class Writer {
public:
    void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int k = 0; k < 4; ++k) u8(static_cast<std::uint8_t>(v >> (8 * k)));
    }
    void u64(std::uint64_t v) {
        for (int k = 0; k < 8; ++k) u8(static_cast<std::uint8_t>(v >> (8 * k)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(std::string_view s) {
        u64(s.size());
        out_.append(s);
    }
    void raw(std::string_view s) { out_.append(s); }
    std::string& bytes() { return out_; }

private:
    std::string out_;
};

class Reader {
public:
    explicit Reader(std::string_view in) : in_(in) {}

    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(in_[pos_++]);
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(u8()) << (8 * k);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v = 0;
        for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(u8()) << (8 * k);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::size_t size() {
        std::uint64_t n = u64();
        if (n > in_.size()) throw IoError("checkpoint: implausible length " + std::to_string(n));
        return static_cast<std::size_t>(n);
    }
    std::string str() {
        std::size_t n = size();
        need(n);
        std::string s(in_.substr(pos_, n));
        pos_ += n;
        return s;
    }
    std::size_t position() const noexcept { return pos_; }
    std::string_view rest() const noexcept { return in_.substr(pos_); }

private:
    void need(std::size_t n) const {
        if (in_.size() - pos_ < n) throw IoError("checkpoint: header runs past the payload");
    }

    std::string_view in_;
    std::size_t pos_ = 0;
};

void write_vocab(Writer& w, const prep::Vocabulary& v) {
    w.u64(v.size());
    for (const auto& label : v.labels()) w.str(label);
}

prep::Vocabulary read_vocab(Reader& r) {
    prep::Vocabulary v;
    const std::size_t n = r.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (v.intern(r.str()) != i) throw IoError("checkpoint: duplicate vocabulary entry");
    }
    return v;
}

}  // namespace

std::string encode_checkpoint(const MkrModel& model) {
    Writer w;
    w.raw(kMagic);
    w.u32(kCheckpointVersion);

    const Hyperparams& h = model.hyper;
    w.u64(h.dim);
    w.f64(h.learning_rate);
    w.f64(h.l2);
    w.u64(h.batch_size);
    w.u64(h.epochs);
    w.u64(h.kge_interval);
    w.u64(h.seed);
    w.u64(h.cc_layers);
    w.u64(h.mlp_layers);
    w.f64(h.rs_weight);
    w.f64(h.kg_weight);

    w.u8(model.config.use_movie_kg);
    w.u8(model.config.use_user_features);
    w.u8(model.config.use_poster);

    const prep::Counts& c = model.counts;
    for (std::size_t n : {c.n_user, c.n_item, c.n_entity, c.n_relation, c.n_gender, c.n_age, c.n_job}) w.u64(n);

    const prep::UserTable& users = model.vocab.users;
    write_vocab(w, users.users);
    write_vocab(w, model.vocab.items);
    write_vocab(w, users.genders);
    write_vocab(w, users.ages);
    write_vocab(w, users.jobs);
    w.u64(users.features.size());
    for (const auto& f : users.features) {
        w.u32(f.gender);
        w.u32(f.age);
        w.u32(f.job);
    }

    // Directory, then payload; offsets are relative to the payload start.
    w.u64(model.params.size());
    std::uint64_t offset = 0;
    for (const auto& p : model.params) {
        w.str(p.name);
        w.u64(p.value.rows());
        w.u64(p.value.cols());
        w.u64(offset);
        offset += p.value.size() * sizeof(double);
    }
    for (const auto& p : model.params) {
        for (double v : p.value.values()) w.f64(v);
    }
    w.u32(crc32_of(w.bytes()));
    return std::move(w.bytes());
}

MkrModel decode_checkpoint(std::string_view bytes) {
    if (bytes.substr(0, kMagic.size()) != kMagic) throw IoError("not a checkpoint (bad magic)");
    if (bytes.size() < kMagic.size() + 4) throw ChecksumMismatch("checkpoint truncated");
    // The version is checked before the CRC so a newer format reports as such.
    Reader r(bytes.substr(kMagic.size(), 4));
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw VersionMismatch("checkpoint version " + std::to_string(version) + ", expected " +
                              std::to_string(kCheckpointVersion));
    }
    if (bytes.size() < kMagic.size() + 8) throw ChecksumMismatch("checkpoint truncated");
    const std::string_view body = bytes.substr(0, bytes.size() - 4);
    Reader tail(bytes.substr(bytes.size() - 4));
    if (tail.u32() != crc32_of(body)) throw ChecksumMismatch("checkpoint CRC-32 does not match its contents");

    Reader b(body);
    for (std::size_t k = 0; k < kMagic.size() + 4; ++k) b.u8();

    Hyperparams h;
    h.dim = b.u64();
    h.learning_rate = b.f64();
    h.l2 = b.f64();
    h.batch_size = b.u64();
    h.epochs = b.u64();
    h.kge_interval = b.u64();
    h.seed = b.u64();
    h.cc_layers = b.u64();
    h.mlp_layers = b.u64();
    h.rs_weight = b.f64();
    h.kg_weight = b.f64();

    SideInfoConfig config;
    config.use_movie_kg = b.u8() != 0;
    config.use_user_features = b.u8() != 0;
    config.use_poster = b.u8() != 0;

    prep::Counts c;
    for (std::size_t* n : {&c.n_user, &c.n_item, &c.n_entity, &c.n_relation, &c.n_gender, &c.n_age, &c.n_job}) {
        *n = b.u64();
    }

    // Sizes come from the (checksummed) header; build_model re-validates them.
    MkrModel model = build_model(c, h, config);
    prep::UserTable& users = model.vocab.users;
    users.users = read_vocab(b);
    model.vocab.items = read_vocab(b);
    users.genders = read_vocab(b);
    users.ages = read_vocab(b);
    users.jobs = read_vocab(b);
    const std::size_t n_features = b.size();
    for (std::size_t i = 0; i < n_features; ++i) {
        prep::UserFeatures f;
        f.gender = b.u32();
        f.age = b.u32();
        f.job = b.u32();
        users.features.push_back(f);
    }

    const std::size_t n_mat = b.size();
    if (n_mat != model.params.size()) {
        throw IoError("checkpoint has " + std::to_string(n_mat) + " matrices, model expects " +
                      std::to_string(model.params.size()));
    }
    struct Entry {
        numeric::Parameter* param;
        std::uint64_t offset;
    };
    std::vector<Entry> entries;
    for (std::size_t i = 0; i < n_mat; ++i) {
        std::string name = b.str();
        const std::uint64_t rows = b.u64();
        const std::uint64_t cols = b.u64();
        const std::uint64_t offset = b.u64();
        numeric::Parameter* p = model.params.find(name);
        if (!p) throw IoError("checkpoint matrix '" + name + "' is not part of the model");
        if (p->value.rows() != rows || p->value.cols() != cols) {
            throw IoError("checkpoint matrix '" + name + "' has the wrong shape");
        }
        entries.push_back({p, offset});
    }
    const std::string_view payload = b.rest();
    for (const auto& e : entries) {
        const std::size_t n = e.param->value.size() * sizeof(double);
        if (e.offset > payload.size() || payload.size() - e.offset < n) {
            throw IoError("checkpoint matrix '" + e.param->name + "' runs past the payload");
        }
        Reader m(payload.substr(static_cast<std::size_t>(e.offset), n));
        for (double& v : e.param->value.values()) v = m.f64();
    }
    return model;
}

void save_checkpoint(const MkrModel& model, const std::filesystem::path& path) {
    const std::string bytes = encode_checkpoint(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();
    if (!out) throw IoError("error writing " + path.string());
}

MkrModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read checkpoint " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

std::string_view build_version() noexcept { return KGREC_GIT_DESCRIBE; }

}  // namespace kgrec::mkr
