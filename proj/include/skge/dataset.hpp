#ifndef SKGE_DATASET_HPP
#define SKGE_DATASET_HPP

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace skge {

using EntityId = int32_t;
using RelationId = int32_t;

struct RawTriple {
    std::string head;
    std::string relation;
    std::string tail;

    bool operator==(const RawTriple&) const = default;
};

struct Triple {
    EntityId h;
    RelationId r;
    EntityId t;

    bool operator==(const Triple&) const = default;
};

// Label <-> dense id maps for entities and relations, built over the union
// of all splits. Ids follow first appearance order, so identical input files
// always produce identical encodings.
class Vocab {
public:
    EntityId add_entity(const std::string& label);
    RelationId add_relation(const std::string& label);

    EntityId entity_id(const std::string& label) const;      // throws on unknown label
    RelationId relation_id(const std::string& label) const;  // throws on unknown label
    bool has_entity(const std::string& label) const { return entity_to_id_.count(label) > 0; }

    const std::string& entity_label(EntityId id) const { return entity_labels_.at(id); }
    const std::string& relation_label(RelationId id) const { return relation_labels_.at(id); }

    int64_t num_entities() const { return static_cast<int64_t>(entity_labels_.size()); }
    int64_t num_relations() const { return static_cast<int64_t>(relation_labels_.size()); }

private:
    std::unordered_map<std::string, EntityId> entity_to_id_;
    std::unordered_map<std::string, RelationId> relation_to_id_;
    std::vector<std::string> entity_labels_;
    std::vector<std::string> relation_labels_;
};

struct EncodedSplit {
    std::vector<Triple> triples;

    int64_t size() const { return static_cast<int64_t>(triples.size()); }
};

// Known-true triple index over train + valid + test, used by the filtered
// ranking protocol. Immutable once built.
class FilterIndex {
public:
    void add(const Triple& t);
    void finalize();  // sort + dedup the candidate lists

    // All known tails t with (h, r, t) true; empty span if none.
    std::span<const EntityId> known_tails(EntityId h, RelationId r) const;
    // All known heads h with (h, r, t) true; empty span if none.
    std::span<const EntityId> known_heads(RelationId r, EntityId t) const;

    bool contains(const Triple& t) const;
    int64_t total_triples() const { return total_; }

private:
    static uint64_t key(int32_t a, int32_t b) {
        return (static_cast<uint64_t>(static_cast<uint32_t>(a)) << 32) | static_cast<uint32_t>(b);
    }
    std::unordered_map<uint64_t, std::vector<EntityId>> tails_;  // (h,r) -> tails
    std::unordered_map<uint64_t, std::vector<EntityId>> heads_;  // (r,t) -> heads
    int64_t total_ = 0;
    bool finalized_ = false;
};

enum class RelationCategory { OneToOne, OneToN, NToOne, NToN };

const char* category_name(RelationCategory c);  // "1-to-1", "1-to-N", ...

struct StatsReport {
    int64_t entities = 0;
    int64_t relations = 0;
    int64_t train = 0;
    int64_t valid = 0;
    int64_t test = 0;

    std::string to_json() const;
    std::string to_table() const;
};

// One TSV file: one triple per line, three tab-separated non-empty fields.
// Reports line number and field count for malformed lines.
std::vector<RawTriple> load_triples(const std::string& path);

Vocab build_vocab(const std::vector<std::vector<RawTriple>>& splits);

// Label triples -> id triples, in input order. Unknown labels and duplicate
// triples within the split are errors.
EncodedSplit encode(const std::vector<RawTriple>& raw, const Vocab& vocab);
std::vector<RawTriple> decode(const EncodedSplit& split, const Vocab& vocab);

FilterIndex build_filter_index(const EncodedSplit& train, const EncodedSplit& valid,
                               const EncodedSplit& test);

StatsReport dataset_stats(const Vocab& vocab, const EncodedSplit& train,
                          const EncodedSplit& valid, const EncodedSplit& test);

// Relation cardinality categories from the training split only:
// tph = avg distinct tails per (h, r) pair, hpt = avg distinct heads per
// (r, t) pair; both thresholded at 1.5.
std::map<RelationId, RelationCategory> categorize_relations(const EncodedSplit& train);

// Convenience bundle: vocab over all three splits, encodings, filter index.
struct Dataset {
    Vocab vocab;
    EncodedSplit train;
    EncodedSplit valid;
    EncodedSplit test;
    FilterIndex filter;

    StatsReport stats() const { return dataset_stats(vocab, train, valid, test); }
};

Dataset load_dataset(const std::string& train_path, const std::string& valid_path,
                     const std::string& test_path);
// Expects <dir>/train.txt, <dir>/valid.txt, <dir>/test.txt.
Dataset load_dataset_dir(const std::string& dir);

}  // namespace skge

#endif  // SKGE_DATASET_HPP
