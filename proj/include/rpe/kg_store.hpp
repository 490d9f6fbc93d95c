#pragma once
// Knowledge-graph storage: vocabularies, triple sets, alignment seeds, and
// the relational-prototype augmentation shared by both model families.
//
// Prototype node ids form a contiguous block after the entity ids:
//   head prototype of r -> |E| + 2r,   tail prototype of r -> |E| + 2r + 1
// so a single embedding table indexed by node id can host both.

#include "rpe/common.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace rpe {

class Vocabulary {
public:
    // Returns the existing id or assigns the next dense id.
    Id intern(std::string_view label);
    std::optional<Id> find(std::string_view label) const;
    const std::string& label(Id id) const;
    std::size_t size() const noexcept { return labels_.size(); }
    const std::vector<std::string>& labels() const noexcept { return labels_; }

private:
    std::vector<std::string> labels_;
    std::unordered_map<std::string, Id> index_;
};

// Immutable once built; construct through KnowledgeGraphBuilder or the ingest functions.
class KnowledgeGraph {
public:
    const std::string& name() const noexcept { return name_; }
    const Vocabulary& entities() const noexcept { return entities_; }
    const Vocabulary& relations() const noexcept { return relations_; }
    const std::vector<Triple>& triples() const noexcept { return triples_; }
    std::size_t entity_count() const noexcept { return entities_.size(); }
    std::size_t relation_count() const noexcept { return relations_.size(); }
    std::size_t triple_count() const noexcept { return triples_.size(); }
    bool contains(const Triple& t) const { return triple_set_.contains(t); }
    // Lines dropped during ingestion because they repeated an earlier triple.
    std::size_t dropped_duplicates() const noexcept { return dropped_duplicates_; }

private:
    friend class KnowledgeGraphBuilder;
    std::string name_;
    Vocabulary entities_;
    Vocabulary relations_;
    std::vector<Triple> triples_;
    std::unordered_set<Triple, TripleHash> triple_set_;
    std::size_t dropped_duplicates_ = 0;
};

class KnowledgeGraphBuilder {
public:
    explicit KnowledgeGraphBuilder(std::string name = {});

    Id entity(std::string_view label) { return graph_.entities_.intern(label); }
    Id relation(std::string_view label) { return graph_.relations_.intern(label); }
    // Returns false (and counts a duplicate) when the triple is already present.
    bool add(std::string_view head, std::string_view relation, std::string_view tail);
    bool add(const Triple& ids);
    // Grows the entity vocabulary with decimal-string labels up to `count`.
    void reserve_numeric_entities(std::size_t count);
    void reserve_numeric_relations(std::size_t count);

    KnowledgeGraph build() &&;

private:
    KnowledgeGraph graph_;
};

enum class ColumnOrder { head_relation_tail, head_tail_relation };
enum class FieldKind { labels, ids };

// Describes how a TSV triple file is laid out.
struct TripleFormat {
    ColumnOrder order = ColumnOrder::head_relation_tail;
    FieldKind fields = FieldKind::labels;
};

KnowledgeGraph ingest_triples(const std::filesystem::path& path, const TripleFormat& format = {},
                              std::string name = {});

// Appends the triples of `path` into an existing builder; returns the parsed
// triples in file order (duplicates within the file removed).
std::vector<Triple> ingest_into(KnowledgeGraphBuilder& builder, const std::filesystem::path& path,
                                const TripleFormat& format, bool add_to_graph);

void write_triples(const KnowledgeGraph& kg, std::span<const Triple> triples,
                   const std::filesystem::path& path);

// Compressed sparse rows: item lists per node.
class Adjacency {
public:
    Adjacency() = default;
    explicit Adjacency(std::vector<std::vector<Id>> lists);
    std::span<const Id> operator[](std::size_t node) const {
        return {items_.data() + offsets_[node], items_.data() + offsets_[node + 1]};
    }
    std::size_t size() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }

private:
    std::vector<std::size_t> offsets_{0};
    std::vector<Id> items_;
};

class AugmentedGraph {
public:
    explicit AugmentedGraph(std::shared_ptr<const KnowledgeGraph> base);

    const KnowledgeGraph& base() const noexcept { return *base_; }
    std::shared_ptr<const KnowledgeGraph> base_ptr() const noexcept { return base_; }

    std::size_t entity_count() const noexcept { return base_->entity_count(); }
    std::size_t prototype_count() const noexcept { return 2 * base_->relation_count(); }
    std::size_t node_count() const noexcept { return entity_count() + prototype_count(); }

    Id proto_head_of(Id relation) const noexcept {
        return static_cast<Id>(entity_count() + 2 * relation);
    }
    Id proto_tail_of(Id relation) const noexcept {
        return static_cast<Id>(entity_count() + 2 * relation + 1);
    }
    Id proto_of(Id relation, Side side) const noexcept {
        return side == Side::head ? proto_head_of(relation) : proto_tail_of(relation);
    }
    bool is_prototype(Id node) const noexcept { return node >= entity_count(); }
    // Row of a prototype node inside a prototype-only table.
    std::size_t prototype_row(Id node) const noexcept { return node - entity_count(); }
    Id relation_of_prototype(Id node) const noexcept {
        return static_cast<Id>(prototype_row(node) / 2);
    }
    Side side_of_prototype(Id node) const noexcept {
        return prototype_row(node) % 2 == 0 ? Side::head : Side::tail;
    }

    // N_1(i): undirected one-hop entity neighbours, self excluded.
    std::span<const Id> entity_neighbors(Id entity) const { return entity_neighbors_[entity]; }
    // Prototype node ids attached to an entity.
    std::span<const Id> proto_neighbors_of_entity(Id entity) const { return proto_of_entity_[entity]; }
    // Entities attached to a prototype node id.
    std::span<const Id> entity_neighbors_of_proto(Id proto) const {
        return entities_of_proto_[prototype_row(proto)];
    }

private:
    std::shared_ptr<const KnowledgeGraph> base_;
    Adjacency entity_neighbors_;
    Adjacency proto_of_entity_;
    Adjacency entities_of_proto_;
};

AugmentedGraph augment_with_prototypes(std::shared_ptr<const KnowledgeGraph> kg);

// Number of distinct one-hop entity neighbours, self-loops excluded.
std::size_t degree_of(const KnowledgeGraph& kg, Id entity);
std::vector<std::size_t> degree_index(const KnowledgeGraph& kg);

using EntityPair = std::pair<Id, Id>;

struct AlignmentSeedSet {
    std::vector<EntityPair> pairs;
    double train_fraction = 0.30;
    std::vector<EntityPair> train;
    std::vector<EntityPair> test;
};

// Deterministic shuffled split; the train count is floor(n * fraction).
AlignmentSeedSet split_seeds(std::vector<EntityPair> pairs, double train_fraction, std::uint64_t seed);

struct AlignmentDataset {
    std::shared_ptr<const KnowledgeGraph> source;
    std::shared_ptr<const KnowledgeGraph> target;
    AlignmentSeedSet seeds;
};

struct AlignmentPaths {
    std::filesystem::path source_triples;
    std::filesystem::path target_triples;
    std::filesystem::path seed_pairs;
};

AlignmentDataset ingest_alignment_dataset(const AlignmentPaths& paths, double train_fraction,
                                          std::uint64_t seed, const TripleFormat& format = {});

void write_seed_pairs(const KnowledgeGraph& source, const KnowledgeGraph& target,
                      std::span<const EntityPair> pairs, const std::filesystem::path& path);

// Completion data: one vocabulary shared by all splits; the graph holds the training triples.
struct CompletionDataset {
    std::shared_ptr<const KnowledgeGraph> graph;
    std::vector<Triple> train;
    std::vector<Triple> valid;
    std::vector<Triple> test;
};

// Reads train.txt, valid.txt and test.txt from `dir` (valid/test optional).
CompletionDataset ingest_completion_dataset(const std::filesystem::path& dir,
                                            const TripleFormat& format = {});
void write_completion_dataset(const CompletionDataset& data, const std::filesystem::path& dir);

struct GraphStats {
    std::string name;
    std::size_t relation_count = 0;
    std::size_t entity_count = 0;
    std::size_t triple_count = 0;
};

struct DatasetStats {
    std::vector<GraphStats> graphs;
    std::optional<std::size_t> train_count;
    std::optional<std::size_t> valid_count;
    std::optional<std::size_t> test_count;
    std::optional<std::size_t> seed_pairs;
    std::optional<std::size_t> seed_train;
    std::optional<std::size_t> seed_test;

    std::string to_key_value() const;
    std::string to_json() const;
};

DatasetStats stats_of(const CompletionDataset& data);
DatasetStats stats_of(const AlignmentDataset& data);

}  // namespace rpe
