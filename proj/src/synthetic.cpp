#include "rpe/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace rpe {

namespace {

// Inverse-CDF sampling over fixed weights; avoids library distributions
// whose output differs between standard library implementations.
class WeightedIndex {
public:
    explicit WeightedIndex(std::vector<double> weights) : cdf_(std::move(weights)) {
        std::partial_sum(cdf_.begin(), cdf_.end(), cdf_.begin());
    }
    std::size_t operator()(Rng& rng) const {
        const double u = uniform01(rng) * cdf_.back();
        const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        return std::min(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
    }

private:
    std::vector<double> cdf_;
};

WeightedIndex zipf(std::size_t n, double exponent) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / std::pow(static_cast<double>(i + 1), exponent);
    return WeightedIndex(std::move(w));
}

void shuffle(std::vector<Triple>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

KnowledgeGraph build_graph(const std::string& name, const std::string& entity_prefix, std::size_t entities,
                           std::size_t relations, const std::vector<Triple>& triples) {
    KnowledgeGraphBuilder b(name);
    for (std::size_t e = 0; e < entities; ++e) b.entity(entity_prefix + std::to_string(e));
    for (std::size_t r = 0; r < relations; ++r) b.relation("r" + std::to_string(r));
    for (const auto& t : triples) b.add(t);
    return std::move(b).build();
}

}  // namespace

CompletionDataset make_completion_fixture(const CompletionFixtureSpec& spec) {
    if (spec.relations == 0 || spec.category_size < 2) throw Error(ErrorKind::usage, "fixture too small");
    const std::size_t cs = spec.category_size;
    const std::size_t n = 2 * spec.relations * cs;
    Rng rng = make_rng(spec.seed, "fixture/completion");
    const auto head_draw = zipf(cs, spec.zipf_exponent);

    std::set<Triple> seen;
    std::vector<Triple> triples;
    auto add = [&](Id h, Id r, Id t) {
        if (seen.insert({h, r, t}).second) triples.push_back({h, r, t});
    };
    for (Id r = 0; r < spec.relations; ++r) {
        const Id head_base = static_cast<Id>(2 * r * cs), tail_base = static_cast<Id>((2 * r + 1) * cs);
        std::size_t made = 0;
        for (std::size_t attempt = 0; made < spec.triples_per_relation && attempt < 50 * spec.triples_per_relation;
             ++attempt) {
            const std::size_t hp = head_draw(rng);
            std::size_t offset = 0;
            while (offset + 1 < cs && uniform01(rng) < spec.offset_continue) ++offset;
            const std::size_t before = triples.size();
            add(head_base + static_cast<Id>(hp), r, tail_base + static_cast<Id>((hp + offset) % cs));
            made += triples.size() - before;
        }
        // Every entity of both categories takes part at least once.
        std::vector<bool> used(2 * cs, false);
        for (const auto& t : triples) {
            if (t.relation != r) continue;
            used[t.head - head_base] = true;
            used[cs + t.tail - tail_base] = true;
        }
        for (std::size_t p = 0; p < cs; ++p) {
            if (!used[p]) add(head_base + static_cast<Id>(p), r, tail_base + static_cast<Id>(p));
            if (!used[cs + p]) add(head_base + static_cast<Id>(p), r, tail_base + static_cast<Id>(p));
        }
    }

    // Hold out triples whose entities keep at least one training triple.
    shuffle(triples, rng);
    std::vector<std::size_t> count(n, 0);
    for (const auto& t : triples) {
        ++count[t.head];
        ++count[t.tail];
    }
    const auto wanted = static_cast<std::size_t>(std::floor(spec.test_fraction * static_cast<double>(triples.size()) + 1e-9));
    CompletionDataset data;
    std::vector<Triple> train;
    for (const auto& t : triples) {
        if (data.test.size() < wanted && count[t.head] > 1 && count[t.tail] > 1) {
            --count[t.head];
            --count[t.tail];
            data.test.push_back(t);
        } else {
            train.push_back(t);
        }
    }
    auto graph = std::make_shared<const KnowledgeGraph>(build_graph("fixture-completion", "e", n, spec.relations, train));
    data.train = graph->triples();
    data.graph = std::move(graph);
    return data;
}

AlignmentDataset make_alignment_fixture(const AlignmentFixtureSpec& spec) {
    if (spec.relations == 0 || spec.category_size < 2) throw Error(ErrorKind::usage, "fixture too small");
    const std::size_t cs = spec.category_size;
    const std::size_t n = 2 * spec.relations * cs;
    Rng rng = make_rng(spec.seed, "fixture/alignment");
    const auto head_draw = zipf(cs, spec.zipf_exponent);

    std::set<Triple> seen;
    std::vector<Triple> triples;
    auto add = [&](Id h, Id r, Id t) {
        if (seen.insert({h, r, t}).second) triples.push_back({h, r, t});
    };
    for (Id r = 0; r < spec.relations; ++r) {
        const Id head_base = static_cast<Id>(2 * r * cs), tail_base = static_cast<Id>((2 * r + 1) * cs);
        std::size_t made = 0;
        for (std::size_t attempt = 0; made < spec.triples_per_relation && attempt < 50 * spec.triples_per_relation;
             ++attempt) {
            const std::size_t before = triples.size();
            add(head_base + static_cast<Id>(head_draw(rng)), r, tail_base + static_cast<Id>(uniform_index(rng, cs)));
            made += triples.size() - before;
        }
        std::vector<bool> used(2 * cs, false);
        for (const auto& t : triples) {
            if (t.relation != r) continue;
            used[t.head - head_base] = true;
            used[cs + t.tail - tail_base] = true;
        }
        for (std::size_t p = 0; p < cs; ++p) {
            if (!used[p]) add(head_base + static_cast<Id>(p), r, tail_base + static_cast<Id>(uniform_index(rng, cs)));
            if (!used[cs + p]) add(head_base + static_cast<Id>(uniform_index(rng, cs)), r, tail_base + static_cast<Id>(p));
        }
    }

    std::vector<Id> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[uniform_index(rng, i)]);
    std::vector<Triple> mapped;
    mapped.reserve(triples.size());
    for (const auto& t : triples) mapped.push_back({perm[t.head], t.relation, perm[t.tail]});
    // Target triples in their own id order so the file layout does not mirror the source.
    std::sort(mapped.begin(), mapped.end());

    AlignmentDataset data;
    data.source = std::make_shared<const KnowledgeGraph>(build_graph("fixture-source", "s", n, spec.relations, triples));
    data.target = std::make_shared<const KnowledgeGraph>(build_graph("fixture-target", "t", n, spec.relations, mapped));
    std::vector<EntityPair> pairs;
    for (Id i = 0; i < n; ++i) pairs.emplace_back(i, perm[i]);
    data.seeds = split_seeds(std::move(pairs), spec.seed_fraction, spec.seed);
    return data;
}

KnowledgeGraph random_graph(std::size_t entities, std::size_t relations, std::size_t triples, std::uint64_t seed) {
    if (entities == 0 || relations == 0) throw Error(ErrorKind::usage, "random graph needs entities and relations");
    Rng rng = make_rng(seed, "random-graph");
    KnowledgeGraphBuilder b("random");
    b.reserve_numeric_entities(entities);
    b.reserve_numeric_relations(relations);
    std::size_t added = 0;
    for (std::size_t attempt = 0; added < triples && attempt < 50 * triples + 100; ++attempt) {
        const Triple t{static_cast<Id>(uniform_index(rng, entities)), static_cast<Id>(uniform_index(rng, relations)),
                       static_cast<Id>(uniform_index(rng, entities))};
        if (b.add(t)) ++added;
    }
    return std::move(b).build();
}

}  // namespace rpe
