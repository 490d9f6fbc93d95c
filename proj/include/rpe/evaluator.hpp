#pragma once
// Measurement: filtered link-prediction ranking, alignment retrieval,
// Davies-Bouldin clustering index, long-tail buckets, and embedding export.

#include "rpe/common.hpp"
#include "rpe/embedding.hpp"
#include "rpe/kg_store.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rpe {

// How candidates scoring exactly like the answer are counted.
//   mean:        1 + higher + ceil(ties / 2)
//   optimistic:  1 + higher
//   pessimistic: 1 + higher + ties
enum class TiePolicy { mean, optimistic, pessimistic };

std::string to_string(TiePolicy p);
TiePolicy tie_policy_from_string(const std::string& s);

std::size_t rank_from_counts(std::size_t higher, std::size_t ties, TiePolicy policy);

struct RankingReport {
    double mrr = 0.0;
    std::map<int, double> hits;  // N -> fraction of queries ranked <= N
    std::vector<std::size_t> ranks;
    std::size_t query_count = 0;

    // Aggregates with an order-independent reduction: reciprocal ranks are
    // summed in ascending rank order from a histogram.
    static RankingReport from_ranks(std::vector<std::size_t> ranks, std::vector<int> hit_levels = {1, 3, 10});
    std::string to_json(bool include_ranks = false) const;
};

// A link-prediction query: predict `side` of `triple`; the other two slots are given.
struct Query {
    Triple triple;
    Side side = Side::tail;
    Id answer() const noexcept { return side == Side::head ? triple.head : triple.tail; }
};

// Union of all known triples (train, valid, test) for the filtered setting.
class KnownTriples {
public:
    KnownTriples() = default;
    void add(std::span<const Triple> triples);
    // Sorted entity ids e such that substituting e into the query slot yields a known triple.
    std::vector<Id> known_answers(const Query& q) const;

private:
    std::map<std::pair<Id, Id>, std::vector<Id>> tails_of_;  // (h, r) -> tails
    std::map<std::pair<Id, Id>, std::vector<Id>> heads_of_;  // (r, t) -> heads
};

// `scores[e]` is the plausibility of substituting entity e (higher is better).
std::size_t filtered_rank(const Query& q, std::span<const double> scores, const KnownTriples& known,
                          TiePolicy policy);
std::size_t filtered_rank(const Query& q, std::size_t entity_count,
                          const std::function<double(Id)>& score_fn, const KnownTriples& known,
                          TiePolicy policy);

// Fills one score per entity for a query.
using CandidateScorer = std::function<void(const Query&, std::span<double>)>;

// Head and tail query for every test triple.
std::vector<Query> completion_queries(std::span<const Triple> test);

RankingReport completion_report(std::span<const Triple> test, std::size_t entity_count,
                                const CandidateScorer& scorer, const KnownTriples& known,
                                TiePolicy policy = TiePolicy::mean, unsigned threads = 1);

// Dense real embeddings: one row per entity.
using EmbeddingMatrix = std::vector<std::vector<double>>;

// Ranks the true counterpart among every target-graph entity by Euclidean
// distance, in both directions; the report pools both directions.
RankingReport alignment_report(std::span<const EntityPair> test_pairs, const EmbeddingMatrix& source,
                               const EmbeddingMatrix& target, TiePolicy policy = TiePolicy::mean,
                               unsigned threads = 1);

// Per-direction ranks, source->target then target->source.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> alignment_ranks(
    std::span<const EntityPair> test_pairs, const EmbeddingMatrix& source, const EmbeddingMatrix& target,
    TiePolicy policy, unsigned threads);

// ---------------------------------------------------------------------------
// Categories and clustering
// ---------------------------------------------------------------------------

struct Category {
    Id relation = 0;
    Side side = Side::head;
    auto operator<=>(const Category&) const = default;
    // "<relation id>h" / "<relation id>t"
    std::string label() const;
};

enum class SideFilter { head, tail, both };

struct CategoryFilter {
    SideFilter sides = SideFilter::head;
    bool exclusive = true;         // drop entities carrying more than one considered category
    std::size_t min_members = 100; // keep categories with at least this many remaining members
};

struct CategoryView {
    std::vector<Category> categories;
    std::vector<std::vector<Id>> members;  // parallel to categories, ascending ids
};

class CategoryAssignment {
public:
    static CategoryAssignment from_graph(const KnowledgeGraph& kg);
    const std::vector<Category>& of(Id entity) const { return per_entity_[entity]; }
    std::size_t entity_count() const noexcept { return per_entity_.size(); }
    CategoryView view(const CategoryFilter& filter) const;

private:
    std::vector<std::vector<Category>> per_entity_;
};

using Cluster = std::vector<std::vector<double>>;

// DBI = mean_i max_{j != i} (S_i + S_j) / M_ij with S the mean Euclidean
// distance to the centroid and M the centroid distance. Throws on fewer
// than two clusters, an empty cluster, or coincident centroids.
double davies_bouldin(std::span<const Cluster> clusters, std::span<const std::string> names = {});

// Embedding of an entity when viewed as a member of a category.
using CategoryEmbedding = std::function<std::vector<double>(Id entity, const Category&)>;

double davies_bouldin(const CategoryView& view, const CategoryEmbedding& embed);

// ---------------------------------------------------------------------------
// Long tail
// ---------------------------------------------------------------------------

struct LongTailBucket {
    std::optional<std::size_t> max_links;  // nullopt = "all"
    std::size_t query_count = 0;
    std::optional<double> mrr_baseline;
    std::optional<double> mrr_rpe;
};

struct LongTailReport {
    std::vector<LongTailBucket> buckets;
    std::string to_json() const;
    std::string to_csv() const;
};

// `query_degree[q]` is the degree used to bucket query q; ranks are per query.
LongTailReport long_tail_report(std::span<const std::size_t> query_degree,
                                std::span<const std::size_t> baseline_ranks,
                                std::span<const std::size_t> rpe_ranks,
                                std::span<const std::size_t> thresholds = {});

// Degree of the answer-side entity of each completion query.
std::vector<std::size_t> answer_degrees(std::span<const Query> queries, std::span<const std::size_t> degrees);

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

// CSV rows: entity label, ';'-joined category labels, then the embedding
// floats at full precision. With a view, only its members are written,
// each with its single view category.
void export_embeddings_with_categories(const KnowledgeGraph& kg, const CategoryAssignment& assignment,
                                       const CategoryView* view, const CategoryEmbedding& embed,
                                       const std::filesystem::path& path);

struct ExportedRow {
    std::string label;
    std::vector<std::string> categories;
    std::vector<double> values;
};
std::vector<ExportedRow> read_exported_embeddings(const std::filesystem::path& path);

}  // namespace rpe
