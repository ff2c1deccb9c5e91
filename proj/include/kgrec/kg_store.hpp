#pragma once

// In-memory knowledge graph: interned entity and relation tables plus an
// insertion-ordered set of (head, relation, tail) triples. Two text dialects
// (N-Triples subset and a 3-column property CSV) round-trip through
// parse/serialize; fuse merges graphs on exact (normalized) label identity.

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace kgrec::kg {

template <typename Tag>
struct Index {
    std::uint32_t value = 0;

    friend constexpr bool operator==(Index, Index) = default;
    friend constexpr auto operator<=>(Index, Index) = default;
};

using EntityIndex = Index<struct EntityTag>;
using RelationIndex = Index<struct RelationTag>;

struct EntityRef {
    EntityIndex index;
    std::string_view label;
};

struct RelationRef {
    RelationIndex index;
    std::string_view label;
};

struct Triple {
    EntityIndex head;
    RelationIndex relation;
    EntityIndex tail;

    friend constexpr bool operator==(const Triple&, const Triple&) = default;
};

// Label-level triple, as read from a file before interning.
struct TripleDescriptor {
    std::string head;
    std::string relation;
    std::string tail;

    friend bool operator==(const TripleDescriptor&, const TripleDescriptor&) = default;
};

enum class Dialect { NTriples, PropertyCsv };

std::string_view dialect_name(Dialect d);
std::optional<Dialect> dialect_from_name(std::string_view name);
// Picks a dialect from a file extension (.nt / .csv).
std::optional<Dialect> dialect_from_path(std::string_view path);

// Trims ASCII whitespace and NFC-normalizes. Throws EmptyLabel when nothing
// is left and InvalidLabel on malformed UTF-8.
std::string normalize_label(std::string_view raw);

class KnowledgeGraph {
public:
    // Interns the three labels and inserts the triple once. Re-adding an
    // existing triple returns the stored one.
    Triple add_triple(std::string_view head, std::string_view relation, std::string_view tail);

    EntityIndex intern_entity(std::string_view label);
    RelationIndex intern_relation(std::string_view label);

    std::optional<EntityIndex> find_entity(std::string_view label) const;
    std::optional<RelationIndex> find_relation(std::string_view label) const;
    bool contains(const Triple& t) const { return triple_set_.contains(t); }

    EntityRef entity(EntityIndex i) const { return {i, entities_.at(i.value)}; }
    RelationRef relation(RelationIndex i) const { return {i, relations_.at(i.value)}; }
    const std::string& entity_label(EntityIndex i) const { return entities_.at(i.value); }
    const std::string& relation_label(RelationIndex i) const { return relations_.at(i.value); }

    std::size_t entity_count() const noexcept { return entities_.size(); }
    std::size_t relation_count() const noexcept { return relations_.size(); }
    std::size_t triple_count() const noexcept { return triples_.size(); }
    bool empty() const noexcept { return triples_.empty() && entities_.empty(); }

    const std::vector<std::string>& entity_labels() const noexcept { return entities_; }
    const std::vector<std::string>& relation_labels() const noexcept { return relations_; }
    const std::vector<Triple>& triples() const noexcept { return triples_; }

    TripleDescriptor describe(const Triple& t) const;

    // Set equality over entity labels, relation labels and labelled triples;
    // indices and insertion order are ignored.
    friend bool operator==(const KnowledgeGraph& a, const KnowledgeGraph& b);

private:
    struct TripleHash {
        std::size_t operator()(const Triple& t) const noexcept;
    };
    struct StringHash {
        using is_transparent = void;
        std::size_t operator()(std::string_view s) const noexcept {
            return std::hash<std::string_view>{}(s);
        }
    };
    using LabelMap = std::unordered_map<std::string, std::uint32_t, StringHash, std::equal_to<>>;

    EntityIndex intern_normalized_entity(std::string label);
    RelationIndex intern_normalized_relation(std::string label);

    std::vector<std::string> entities_;
    std::vector<std::string> relations_;
    LabelMap entity_index_;
    LabelMap relation_index_;
    std::vector<Triple> triples_;
    std::unordered_set<Triple, TripleHash> triple_set_;
};

// Reads the raw triples of a file in order, without deduplication.
// Throws ParseError with the 1-based line number.
std::vector<TripleDescriptor> read_triples(std::string_view text, Dialect dialect);

KnowledgeGraph parse(std::string_view text, Dialect dialect);

struct SerializeOptions {
    // Sort triples lexicographically by (head, relation, tail) labels.
    bool canonical = false;
};

std::string serialize(const KnowledgeGraph& graph, Dialect dialect, SerializeOptions options = {});

std::string convert(std::string_view text, Dialect from, Dialect to, SerializeOptions options = {});

// Result keeps all of `a` in order, then appends whatever `b` adds.
KnowledgeGraph fuse(const KnowledgeGraph& a, const KnowledgeGraph& b);

std::string export_dot(const KnowledgeGraph& graph);

// IRI-slot encoding used by the N-Triples dialect.
std::string percent_encode(std::string_view label);
std::string percent_decode(std::string_view iri);  // throws InvalidLabel on a bad escape

}  // namespace kgrec::kg
