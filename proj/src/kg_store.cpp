#include "kgrec/kg_store.hpp"

#include <algorithm>
#include <array>
#include <memory>
#include <tuple>

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "kgrec/csv.hpp"
#include "kgrec/errors.hpp"

namespace kgrec::kg {

namespace {

constexpr std::string_view kCsvHeader = "head,relation,tail";

bool is_ascii_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_ascii_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_ascii_space(s.back())) s.remove_suffix(1);
    return s;
}

bool is_iri_safe(unsigned char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' ||
           c == ':' || c == '/' || c == '.' || c == '#' || c == '-';
}

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
}

const icu::Normalizer2& nfc() {
    static const icu::Normalizer2* instance = [] {
        UErrorCode status = U_ZERO_ERROR;
        const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(status);
        if (U_FAILURE(status)) throw Error("ICU NFC normalizer unavailable");
        return n;
    }();
    return *instance;
}

void validate_utf8(std::string_view s) {
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(s.data());
    const auto length = static_cast<std::int32_t>(s.size());
    std::int32_t i = 0;
    while (i < length) {
        UChar32 cp;
        U8_NEXT(bytes, i, length, cp);
        if (cp < 0) throw InvalidLabel("malformed UTF-8");
    }
}

// Splits the N-Triples body of one line into exactly three decoded terms.
std::array<std::string, 3> parse_ntriples_line(std::string_view line, std::size_t line_no) {
    std::array<std::string, 3> terms;
    std::size_t pos = 0;
    auto skip_spaces = [&] {
        while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
    };
    for (std::size_t k = 0; k < 3; ++k) {
        skip_spaces();
        if (pos >= line.size() || line[pos] != '<') {
            throw ParseError(line_no, "expected 3 IRI terms, found " + std::to_string(k));
        }
        std::size_t close = line.find('>', pos + 1);
        if (close == std::string_view::npos) throw ParseError(line_no, "missing '>' terminator");
        try {
            terms[k] = percent_decode(line.substr(pos + 1, close - pos - 1));
        } catch (const InvalidLabel& e) {
            throw ParseError(line_no, e.what());
        }
        pos = close + 1;
    }
    skip_spaces();
    if (pos >= line.size() || line[pos] != '.') throw ParseError(line_no, "missing '.' terminator");
    ++pos;
    skip_spaces();
    if (pos < line.size() && line[pos] != '#') throw ParseError(line_no, "trailing characters after '.'");
    return terms;
}

TripleDescriptor normalized_descriptor(std::string_view h, std::string_view r, std::string_view t,
                                       std::size_t line_no) {
    try {
        return {normalize_label(h), normalize_label(r), normalize_label(t)};
    } catch (const Error& e) {
        throw ParseError(line_no, e.what());
    }
}

std::vector<TripleDescriptor> read_ntriples(std::string_view text) {
    std::vector<TripleDescriptor> out;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        std::string_view body = trim(line);
        if (body.empty() || body.front() == '#') continue;
        auto terms = parse_ntriples_line(body, line_no);
        out.push_back(normalized_descriptor(terms[0], terms[1], terms[2], line_no));
    }
    return out;
}

std::vector<TripleDescriptor> read_property_csv(std::string_view text) {
    csv::Reader reader(text);
    auto header = reader.next();
    if (!header) throw ParseError(1, "missing header '" + std::string(kCsvHeader) + "'");
    if (header->fields != std::vector<std::string>{"head", "relation", "tail"}) {
        throw ParseError(header->line, "header must be exactly '" + std::string(kCsvHeader) + "'");
    }
    std::vector<TripleDescriptor> out;
    while (auto rec = reader.next()) {
        if (rec->fields.size() != 3) {
            throw ParseError(rec->line,
                             "expected 3 columns, found " + std::to_string(rec->fields.size()));
        }
        out.push_back(normalized_descriptor(rec->fields[0], rec->fields[1], rec->fields[2], rec->line));
    }
    return out;
}

std::string dot_escape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

}  // namespace

std::string_view dialect_name(Dialect d) {
    switch (d) {
        case Dialect::NTriples: return "ntriples";
        case Dialect::PropertyCsv: return "property-csv";
    }
    return "?";
}

std::optional<Dialect> dialect_from_name(std::string_view name) {
    if (name == "ntriples" || name == "nt" || name == "rdf") return Dialect::NTriples;
    if (name == "property-csv" || name == "csv" || name == "neo4j") return Dialect::PropertyCsv;
    return std::nullopt;
}

std::optional<Dialect> dialect_from_path(std::string_view path) {
    auto ends_with = [&](std::string_view suffix) {
        return path.size() >= suffix.size() && path.substr(path.size() - suffix.size()) == suffix;
    };
    if (ends_with(".nt")) return Dialect::NTriples;
    if (ends_with(".csv")) return Dialect::PropertyCsv;
    return std::nullopt;
}

std::string normalize_label(std::string_view raw) {
    std::string_view s = trim(raw);
    if (s.empty()) throw EmptyLabel();
    bool ascii = std::all_of(s.begin(), s.end(), [](char c) {
        return static_cast<unsigned char>(c) < 0x80;
    });
    if (ascii) return std::string(s);

    validate_utf8(s);
    UErrorCode status = U_ZERO_ERROR;
    auto text = icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<std::int32_t>(s.size())));
    if (nfc().isNormalized(text, status) && U_SUCCESS(status)) return std::string(s);
    status = U_ZERO_ERROR;
    icu::UnicodeString normalized = nfc().normalize(text, status);
    if (U_FAILURE(status)) throw InvalidLabel("NFC normalization failed");
    std::string out;
    normalized.toUTF8String(out);
    return out;
}

std::string percent_encode(std::string_view label) {
    static constexpr char kHex[] = "0123456789ABCDEF";
    std::string out;
    out.reserve(label.size());
    for (unsigned char c : label) {
        if (is_iri_safe(c)) {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back('%');
            out.push_back(kHex[c >> 4]);
            out.push_back(kHex[c & 0xF]);
        }
    }
    return out;
}

std::string percent_decode(std::string_view iri) {
    std::string out;
    out.reserve(iri.size());
    for (std::size_t i = 0; i < iri.size(); ++i) {
        if (iri[i] != '%') {
            out.push_back(iri[i]);
            continue;
        }
        if (i + 2 >= iri.size()) throw InvalidLabel("bad escape: truncated %-sequence");
        int hi = hex_value(iri[i + 1]);
        int lo = hex_value(iri[i + 2]);
        if (hi < 0 || lo < 0) throw InvalidLabel("bad escape: non-hex digit after '%'");
        out.push_back(static_cast<char>((hi << 4) | lo));
        i += 2;
    }
    return out;
}

// ------------------------------------------------------------ KnowledgeGraph

std::size_t KnowledgeGraph::TripleHash::operator()(const Triple& t) const noexcept {
    std::uint64_t h = t.head.value;
    h = h * 0x9E3779B97F4A7C15ULL ^ t.relation.value;
    h = h * 0x9E3779B97F4A7C15ULL ^ t.tail.value;
    return static_cast<std::size_t>(h ^ (h >> 29));
}

EntityIndex KnowledgeGraph::intern_normalized_entity(std::string label) {
    if (auto it = entity_index_.find(label); it != entity_index_.end()) return {it->second};
    auto idx = static_cast<std::uint32_t>(entities_.size());
    entity_index_.emplace(label, idx);
    entities_.push_back(std::move(label));
    return {idx};
}

RelationIndex KnowledgeGraph::intern_normalized_relation(std::string label) {
    if (auto it = relation_index_.find(label); it != relation_index_.end()) return {it->second};
    auto idx = static_cast<std::uint32_t>(relations_.size());
    relation_index_.emplace(label, idx);
    relations_.push_back(std::move(label));
    return {idx};
}

EntityIndex KnowledgeGraph::intern_entity(std::string_view label) {
    return intern_normalized_entity(normalize_label(label));
}

RelationIndex KnowledgeGraph::intern_relation(std::string_view label) {
    return intern_normalized_relation(normalize_label(label));
}

Triple KnowledgeGraph::add_triple(std::string_view head, std::string_view relation,
                                  std::string_view tail) {
    // Normalize all three first so a bad label leaves the graph untouched.
    std::string h = normalize_label(head);
    std::string r = normalize_label(relation);
    std::string t = normalize_label(tail);
    Triple triple{intern_normalized_entity(std::move(h)), intern_normalized_relation(std::move(r)),
                  intern_normalized_entity(std::move(t))};
    if (triple_set_.insert(triple).second) triples_.push_back(triple);
    return triple;
}

std::optional<EntityIndex> KnowledgeGraph::find_entity(std::string_view label) const {
    if (auto it = entity_index_.find(label); it != entity_index_.end()) return EntityIndex{it->second};
    return std::nullopt;
}

std::optional<RelationIndex> KnowledgeGraph::find_relation(std::string_view label) const {
    if (auto it = relation_index_.find(label); it != relation_index_.end()) return RelationIndex{it->second};
    return std::nullopt;
}

TripleDescriptor KnowledgeGraph::describe(const Triple& t) const {
    return {entity_label(t.head), relation_label(t.relation), entity_label(t.tail)};
}

bool operator==(const KnowledgeGraph& a, const KnowledgeGraph& b) {
    if (a.entity_count() != b.entity_count() || a.relation_count() != b.relation_count() ||
        a.triple_count() != b.triple_count()) {
        return false;
    }
    for (const auto& label : a.entities_) {
        if (!b.find_entity(label)) return false;
    }
    for (const auto& label : a.relations_) {
        if (!b.find_relation(label)) return false;
    }
    for (const auto& t : a.triples_) {
        Triple mapped{*b.find_entity(a.entity_label(t.head)), *b.find_relation(a.relation_label(t.relation)),
                      *b.find_entity(a.entity_label(t.tail))};
        if (!b.contains(mapped)) return false;
    }
    return true;
}

// ------------------------------------------------------------------ dialects

std::vector<TripleDescriptor> read_triples(std::string_view text, Dialect dialect) {
    switch (dialect) {
        case Dialect::NTriples: return read_ntriples(text);
        case Dialect::PropertyCsv: return read_property_csv(text);
    }
    return {};
}

KnowledgeGraph parse(std::string_view text, Dialect dialect) {
    KnowledgeGraph graph;
    for (const auto& d : read_triples(text, dialect)) graph.add_triple(d.head, d.relation, d.tail);
    return graph;
}

std::string serialize(const KnowledgeGraph& graph, Dialect dialect, SerializeOptions options) {
    std::vector<TripleDescriptor> rows;
    rows.reserve(graph.triple_count());
    for (const auto& t : graph.triples()) rows.push_back(graph.describe(t));
    if (options.canonical) {
        std::sort(rows.begin(), rows.end(), [](const TripleDescriptor& x, const TripleDescriptor& y) {
            return std::tie(x.head, x.relation, x.tail) < std::tie(y.head, y.relation, y.tail);
        });
    }

    std::string out;
    if (dialect == Dialect::NTriples) {
        for (const auto& r : rows) {
            out += '<';
            out += percent_encode(r.head);
            out += "> <";
            out += percent_encode(r.relation);
            out += "> <";
            out += percent_encode(r.tail);
            out += "> .\n";
        }
    } else {
        out += kCsvHeader;
        out += '\n';
        for (const auto& r : rows) {
            out += csv::join({r.head, r.relation, r.tail});
            out += '\n';
        }
    }
    return out;
}

std::string convert(std::string_view text, Dialect from, Dialect to, SerializeOptions options) {
    return serialize(parse(text, from), to, options);
}

KnowledgeGraph fuse(const KnowledgeGraph& a, const KnowledgeGraph& b) {
    KnowledgeGraph out = a;
    for (const auto& label : b.entity_labels()) out.intern_entity(label);
    for (const auto& label : b.relation_labels()) out.intern_relation(label);
    for (const auto& t : b.triples()) {
        out.add_triple(b.entity_label(t.head), b.relation_label(t.relation), b.entity_label(t.tail));
    }
    return out;
}

std::string export_dot(const KnowledgeGraph& graph) {
    std::string out = "digraph kg {\n";
    for (std::size_t i = 0; i < graph.entity_count(); ++i) {
        out += "  n" + std::to_string(i) + " [label=\"" +
               dot_escape(graph.entity_label(EntityIndex{static_cast<std::uint32_t>(i)})) + "\"];\n";
    }
    for (const auto& t : graph.triples()) {
        out += "  n" + std::to_string(t.head.value) + " -> n" + std::to_string(t.tail.value) +
               " [label=\"" + dot_escape(graph.relation_label(t.relation)) + "\"];\n";
    }
    out += "}\n";
    return out;
}

}  // namespace kgrec::kg
