#pragma once
// Small generated datasets with planted category structure.

#include "rpe/kg_store.hpp"

namespace rpe {

// Relation r links heads from category 2r to tails from category 2r + 1.
// Heads are drawn with a Zipf skew inside their category; the tail sits a
// geometrically distributed offset away from the head's position in the
// next category, so the pattern is learnable but noisy.
struct CompletionFixtureSpec {
    std::size_t relations = 4;
    std::size_t category_size = 25;  // 2 * relations categories
    std::size_t triples_per_relation = 150;
    double zipf_exponent = 1.1;
    double offset_continue = 0.6;  // P(offset grows by one more step)
    double test_fraction = 0.10;
    std::uint64_t seed = 7;
};

CompletionDataset make_completion_fixture(const CompletionFixtureSpec& spec = {});

// Category of an entity in a completion fixture.
inline std::size_t fixture_category(Id entity, const CompletionFixtureSpec& spec) {
    return entity / spec.category_size;
}

// Two isomorphic graphs: the target is the source with entity ids permuted.
// Seeds list every entity pair; `seed_fraction` of them train.
struct AlignmentFixtureSpec {
    std::size_t relations = 5;
    std::size_t category_size = 15;  // 2 * relations categories
    std::size_t triples_per_relation = 60;
    double zipf_exponent = 0.8;
    double seed_fraction = 0.30;
    std::uint64_t seed = 11;
};

AlignmentDataset make_alignment_fixture(const AlignmentFixtureSpec& spec = {});

// Uniformly random triples over dense ids (labels are the decimal ids).
KnowledgeGraph random_graph(std::size_t entities, std::size_t relations, std::size_t triples, std::uint64_t seed);

}  // namespace rpe
