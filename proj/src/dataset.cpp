#include "skge/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace skge {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

uint64_t triple_key(const Triple& t) {
    // 21 bits per field is plenty for the benchmark vocabularies
    return (static_cast<uint64_t>(static_cast<uint32_t>(t.h)) << 42) ^
           (static_cast<uint64_t>(static_cast<uint32_t>(t.r)) << 21) ^
           static_cast<uint64_t>(static_cast<uint32_t>(t.t));
}

}  // namespace

EntityId Vocab::add_entity(const std::string& label) {
    auto it = entity_to_id_.find(label);
    if (it != entity_to_id_.end()) return it->second;
    EntityId id = static_cast<EntityId>(entity_labels_.size());
    entity_to_id_.emplace(label, id);
    entity_labels_.push_back(label);
    return id;
}

RelationId Vocab::add_relation(const std::string& label) {
    auto it = relation_to_id_.find(label);
    if (it != relation_to_id_.end()) return it->second;
    RelationId id = static_cast<RelationId>(relation_labels_.size());
    relation_to_id_.emplace(label, id);
    relation_labels_.push_back(label);
    return id;
}

EntityId Vocab::entity_id(const std::string& label) const {
    auto it = entity_to_id_.find(label);
    if (it == entity_to_id_.end())
        throw std::out_of_range("unknown entity label: \"" + label + "\"");
    return it->second;
}

RelationId Vocab::relation_id(const std::string& label) const {
    auto it = relation_to_id_.find(label);
    if (it == relation_to_id_.end())
        throw std::out_of_range("unknown relation label: \"" + label + "\"");
    return it->second;
}

std::vector<RawTriple> load_triples(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open triple file: " + path);
    std::vector<RawTriple> out;
    std::string line;
    int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        std::vector<std::string> fields;
        size_t start = 0;
        while (true) {
            size_t tab = line.find('\t', start);
            if (tab == std::string::npos) {
                fields.push_back(line.substr(start));
                break;
            }
            fields.push_back(line.substr(start, tab - start));
            start = tab + 1;
        }
        if (fields.size() != 3) {
            std::ostringstream msg;
            msg << path << ":" << line_no << ": expected 3 tab-separated fields, got "
                << fields.size();
            throw std::runtime_error(msg.str());
        }
        RawTriple t{trim(fields[0]), trim(fields[1]), trim(fields[2])};
        if (t.head.empty() || t.relation.empty() || t.tail.empty()) {
            std::ostringstream msg;
            msg << path << ":" << line_no << ": empty field after trimming";
            throw std::runtime_error(msg.str());
        }
        out.push_back(std::move(t));
    }
    if (in.bad()) throw std::runtime_error("I/O error while reading: " + path);
    return out;
}

Vocab build_vocab(const std::vector<std::vector<RawTriple>>& splits) {
    int64_t total = 0;
    for (const auto& s : splits) total += static_cast<int64_t>(s.size());
    if (total == 0) throw std::invalid_argument("build_vocab: no triples in any split");
    Vocab v;
    for (const auto& split : splits) {
        for (const auto& t : split) {
            v.add_entity(t.head);
            v.add_relation(t.relation);
            v.add_entity(t.tail);
        }
    }
    return v;
}

EncodedSplit encode(const std::vector<RawTriple>& raw, const Vocab& vocab) {
    EncodedSplit out;
    out.triples.reserve(raw.size());
    std::unordered_map<uint64_t, size_t> seen;
    seen.reserve(raw.size() * 2);
    for (size_t i = 0; i < raw.size(); ++i) {
        Triple t{};
        try {
            t = Triple{vocab.entity_id(raw[i].head), vocab.relation_id(raw[i].relation),
                       vocab.entity_id(raw[i].tail)};
        } catch (const std::out_of_range& e) {
            throw std::out_of_range(std::string(e.what()) + " (triple position " +
                                    std::to_string(i) + ")");
        }
        auto [it, inserted] = seen.emplace(triple_key(t), i);
        if (!inserted) {
            std::ostringstream msg;
            msg << "duplicate triple (" << raw[i].head << ", " << raw[i].relation << ", "
                << raw[i].tail << ") at positions " << it->second << " and " << i;
            throw std::runtime_error(msg.str());
        }
        out.triples.push_back(t);
    }
    return out;
}

std::vector<RawTriple> decode(const EncodedSplit& split, const Vocab& vocab) {
    std::vector<RawTriple> out;
    out.reserve(split.triples.size());
    for (const Triple& t : split.triples) {
        out.push_back({vocab.entity_label(t.h), vocab.relation_label(t.r),
                       vocab.entity_label(t.t)});
    }
    return out;
}

void FilterIndex::add(const Triple& t) {
    tails_[key(t.h, t.r)].push_back(t.t);
    heads_[key(t.r, t.t)].push_back(t.h);
    ++total_;
    finalized_ = false;
}

void FilterIndex::finalize() {
    for (auto& [k, v] : tails_) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    for (auto& [k, v] : heads_) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    finalized_ = true;
}

std::span<const EntityId> FilterIndex::known_tails(EntityId h, RelationId r) const {
    auto it = tails_.find(key(h, r));
    if (it == tails_.end()) return {};
    return it->second;
}

std::span<const EntityId> FilterIndex::known_heads(RelationId r, EntityId t) const {
    auto it = heads_.find(key(r, t));
    if (it == heads_.end()) return {};
    return it->second;
}

bool FilterIndex::contains(const Triple& t) const {
    auto span = known_tails(t.h, t.r);
    if (finalized_) return std::binary_search(span.begin(), span.end(), t.t);
    return std::find(span.begin(), span.end(), t.t) != span.end();
}

FilterIndex build_filter_index(const EncodedSplit& train, const EncodedSplit& valid,
                               const EncodedSplit& test) {
    FilterIndex idx;
    for (const auto* split : {&train, &valid, &test}) {
        for (const Triple& t : split->triples) idx.add(t);
    }
    idx.finalize();
    return idx;
}

StatsReport dataset_stats(const Vocab& vocab, const EncodedSplit& train,
                          const EncodedSplit& valid, const EncodedSplit& test) {
    StatsReport r;
    r.entities = vocab.num_entities();
    r.relations = vocab.num_relations();
    r.train = train.size();
    r.valid = valid.size();
    r.test = test.size();
    return r;
}

std::string StatsReport::to_json() const {
    nlohmann::json j{{"entities", entities},
                     {"relations", relations},
                     {"train", train},
                     {"valid", valid},
                     {"test", test}};
    return j.dump();
}

std::string StatsReport::to_table() const {
    std::ostringstream os;
    auto row = [&os](const char* name, int64_t value) {
        os << name;
        std::string v = std::to_string(value);
        for (size_t i = std::string(name).size() + v.size(); i < 20; ++i) os << ' ';
        os << v << '\n';
    };
    row("entities", entities);
    row("relations", relations);
    row("train", train);
    row("valid", valid);
    row("test", test);
    return os.str();
}

const char* category_name(RelationCategory c) {
    switch (c) {
        case RelationCategory::OneToOne: return "1-to-1";
        case RelationCategory::OneToN: return "1-to-N";
        case RelationCategory::NToOne: return "N-to-1";
        case RelationCategory::NToN: return "N-to-N";
    }
    return "?";
}

std::map<RelationId, RelationCategory> categorize_relations(const EncodedSplit& train) {
    if (train.triples.empty())
        throw std::invalid_argument("categorize_relations: empty training split");

    // relation -> (h -> distinct tails), (t -> distinct heads)
    std::map<RelationId, std::map<EntityId, std::unordered_set<EntityId>>> tails_per_head;
    std::map<RelationId, std::map<EntityId, std::unordered_set<EntityId>>> heads_per_tail;
    for (const Triple& t : train.triples) {
        tails_per_head[t.r][t.h].insert(t.t);
        heads_per_tail[t.r][t.t].insert(t.h);
    }

    constexpr double kThreshold = 1.5;
    std::map<RelationId, RelationCategory> out;
    for (const auto& [rel, by_head] : tails_per_head) {
        double tails = 0;
        for (const auto& [h, ts] : by_head) tails += static_cast<double>(ts.size());
        const double tph = tails / static_cast<double>(by_head.size());

        const auto& by_tail = heads_per_tail.at(rel);
        double heads = 0;
        for (const auto& [t, hs] : by_tail) heads += static_cast<double>(hs.size());
        const double hpt = heads / static_cast<double>(by_tail.size());

        RelationCategory cat;
        if (tph < kThreshold && hpt < kThreshold) cat = RelationCategory::OneToOne;
        else if (tph >= kThreshold && hpt < kThreshold) cat = RelationCategory::OneToN;
        else if (tph < kThreshold && hpt >= kThreshold) cat = RelationCategory::NToOne;
        else cat = RelationCategory::NToN;
        out.emplace(rel, cat);
    }
    return out;
}

Dataset load_dataset(const std::string& train_path, const std::string& valid_path,
                     const std::string& test_path) {
    auto raw_train = load_triples(train_path);
    auto raw_valid = load_triples(valid_path);
    auto raw_test = load_triples(test_path);
    Dataset ds;
    ds.vocab = build_vocab({raw_train, raw_valid, raw_test});
    ds.train = encode(raw_train, ds.vocab);
    ds.valid = encode(raw_valid, ds.vocab);
    ds.test = encode(raw_test, ds.vocab);
    ds.filter = build_filter_index(ds.train, ds.valid, ds.test);
    return ds;
}

Dataset load_dataset_dir(const std::string& dir) {
    std::string base = dir;
    if (!base.empty() && base.back() != '/') base += '/';
    return load_dataset(base + "train.txt", base + "valid.txt", base + "test.txt");
}

}  // namespace skge
