#include "rpe/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "json.hpp"

namespace rpe {

std::string to_string(TiePolicy p) {
    switch (p) {
        case TiePolicy::mean: return "mean";
        case TiePolicy::optimistic: return "optimistic";
        case TiePolicy::pessimistic: return "pessimistic";
    }
    return "mean";
}

TiePolicy tie_policy_from_string(const std::string& s) {
    if (s == "mean") return TiePolicy::mean;
    if (s == "optimistic") return TiePolicy::optimistic;
    if (s == "pessimistic") return TiePolicy::pessimistic;
    throw Error(ErrorKind::usage, "unknown tie policy '" + s + "'");
}

std::size_t rank_from_counts(std::size_t higher, std::size_t ties, TiePolicy policy) {
    switch (policy) {
        case TiePolicy::optimistic: return 1 + higher;
        case TiePolicy::pessimistic: return 1 + higher + ties;
        case TiePolicy::mean: return 1 + higher + (ties + 1) / 2;
    }
    return 1 + higher;
}

// ---------------------------------------------------------------------------
// RankingReport
// ---------------------------------------------------------------------------

RankingReport RankingReport::from_ranks(std::vector<std::size_t> ranks, std::vector<int> hit_levels) {
    RankingReport report;
    report.query_count = ranks.size();
    std::map<std::size_t, std::size_t> histogram;
    for (std::size_t r : ranks) {
        if (r == 0) throw Error(ErrorKind::numeric, "rank 0 is invalid (ranks start at 1)");
        ++histogram[r];
    }
    if (!ranks.empty()) {
        double reciprocal_sum = 0.0;
        for (const auto& [r, count] : histogram) {
            reciprocal_sum += static_cast<double>(count) / static_cast<double>(r);
        }
        report.mrr = reciprocal_sum / static_cast<double>(ranks.size());
    }
    for (int n : hit_levels) {
        std::size_t within = 0;
        for (const auto& [r, count] : histogram) {
            if (r <= static_cast<std::size_t>(n)) within += count;
        }
        report.hits[n] = ranks.empty() ? 0.0 : static_cast<double>(within) / static_cast<double>(ranks.size());
    }
    report.ranks = std::move(ranks);
    return report;
}

std::string RankingReport::to_json(bool include_ranks) const {
    nlohmann::ordered_json j;
    j["mrr"] = mrr;
    nlohmann::ordered_json h;
    for (const auto& [n, v] : hits) h[std::to_string(n)] = v;
    j["hits"] = h;
    j["queries"] = query_count;
    if (include_ranks) j["ranks"] = ranks;
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// Filtered ranking
// ---------------------------------------------------------------------------

void KnownTriples::add(std::span<const Triple> triples) {
    for (const auto& t : triples) {
        tails_of_[{t.head, t.relation}].push_back(t.tail);
        heads_of_[{t.relation, t.tail}].push_back(t.head);
    }
    auto normalize = [](auto& index) {
        for (auto& [key, list] : index) {
            std::sort(list.begin(), list.end());
            list.erase(std::unique(list.begin(), list.end()), list.end());
        }
    };
    normalize(tails_of_);
    normalize(heads_of_);
}

std::vector<Id> KnownTriples::known_answers(const Query& q) const {
    if (q.side == Side::tail) {
        auto it = tails_of_.find({q.triple.head, q.triple.relation});
        return it == tails_of_.end() ? std::vector<Id>{} : it->second;
    }
    auto it = heads_of_.find({q.triple.relation, q.triple.tail});
    return it == heads_of_.end() ? std::vector<Id>{} : it->second;
}

std::size_t filtered_rank(const Query& q, std::span<const double> scores, const KnownTriples& known,
                          TiePolicy policy) {
    const Id answer = q.answer();
    if (answer >= scores.size()) throw Error(ErrorKind::data, "query answer outside the score table");
    const double target = scores[answer];
    const auto filtered = known.known_answers(q);
    std::size_t higher = 0, ties = 0;
    auto skip = filtered.begin();
    for (Id e = 0; e < scores.size(); ++e) {
        while (skip != filtered.end() && *skip < e) ++skip;
        if (e == answer || (skip != filtered.end() && *skip == e)) continue;
        if (scores[e] > target) {
            ++higher;
        } else if (scores[e] == target) {
            ++ties;
        }
    }
    return rank_from_counts(higher, ties, policy);
}

std::size_t filtered_rank(const Query& q, std::size_t entity_count,
                          const std::function<double(Id)>& score_fn, const KnownTriples& known,
                          TiePolicy policy) {
    std::vector<double> scores(entity_count);
    for (Id e = 0; e < entity_count; ++e) scores[e] = score_fn(e);
    return filtered_rank(q, scores, known, policy);
}

std::vector<Query> completion_queries(std::span<const Triple> test) {
    std::vector<Query> queries;
    queries.reserve(2 * test.size());
    for (const auto& t : test) {
        queries.push_back({t, Side::head});
        queries.push_back({t, Side::tail});
    }
    return queries;
}

RankingReport completion_report(std::span<const Triple> test, std::size_t entity_count,
                                const CandidateScorer& scorer, const KnownTriples& known,
                                TiePolicy policy, unsigned threads) {
    const auto queries = completion_queries(test);
    std::vector<std::size_t> ranks(queries.size());
    parallel_for(queries.size(), threads, [&](std::size_t i) {
        std::vector<double> scores(entity_count);
        scorer(queries[i], scores);
        ranks[i] = filtered_rank(queries[i], scores, known, policy);
    });
    return RankingReport::from_ranks(std::move(ranks));
}

// ---------------------------------------------------------------------------
// Alignment ranking
// ---------------------------------------------------------------------------

namespace {

double euclidean(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

std::size_t distance_rank(std::span<const double> anchor, const EmbeddingMatrix& candidates, Id truth,
                          TiePolicy policy) {
    const double target = euclidean(anchor, candidates[truth]);
    std::size_t closer = 0, ties = 0;
    for (Id e = 0; e < candidates.size(); ++e) {
        if (e == truth) continue;
        const double d = euclidean(anchor, candidates[e]);
        if (d < target) {
            ++closer;
        } else if (d == target) {
            ++ties;
        }
    }
    return rank_from_counts(closer, ties, policy);
}

}  // namespace

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> alignment_ranks(
    std::span<const EntityPair> test_pairs, const EmbeddingMatrix& source, const EmbeddingMatrix& target,
    TiePolicy policy, unsigned threads) {
    std::vector<std::size_t> forward(test_pairs.size()), backward(test_pairs.size());
    parallel_for(test_pairs.size(), threads, [&](std::size_t i) {
        const auto [a, b] = test_pairs[i];
        forward[i] = distance_rank(source.at(a), target, b, policy);
        backward[i] = distance_rank(target.at(b), source, a, policy);
    });
    return {std::move(forward), std::move(backward)};
}

RankingReport alignment_report(std::span<const EntityPair> test_pairs, const EmbeddingMatrix& source,
                               const EmbeddingMatrix& target, TiePolicy policy, unsigned threads) {
    auto [forward, backward] = alignment_ranks(test_pairs, source, target, policy, threads);
    forward.insert(forward.end(), backward.begin(), backward.end());
    return RankingReport::from_ranks(std::move(forward));
}

// ---------------------------------------------------------------------------
// Categories / DBI
// ---------------------------------------------------------------------------

std::string Category::label() const {
    return std::to_string(relation) + (side == Side::head ? "h" : "t");
}

CategoryAssignment CategoryAssignment::from_graph(const KnowledgeGraph& kg) {
    CategoryAssignment a;
    a.per_entity_.resize(kg.entity_count());
    for (const auto& t : kg.triples()) {
        a.per_entity_[t.head].push_back({t.relation, Side::head});
        a.per_entity_[t.tail].push_back({t.relation, Side::tail});
    }
    for (auto& cats : a.per_entity_) {
        std::sort(cats.begin(), cats.end());
        cats.erase(std::unique(cats.begin(), cats.end()), cats.end());
    }
    return a;
}

CategoryView CategoryAssignment::view(const CategoryFilter& filter) const {
    auto considered = [&filter](const Category& c) {
        return filter.sides == SideFilter::both || (filter.sides == SideFilter::head) == (c.side == Side::head);
    };
    std::map<Category, std::vector<Id>> members;
    for (Id e = 0; e < per_entity_.size(); ++e) {
        std::vector<Category> cats;
        for (const auto& c : per_entity_[e]) {
            if (considered(c)) cats.push_back(c);
        }
        if (filter.exclusive && cats.size() != 1) continue;
        for (const auto& c : cats) members[c].push_back(e);
    }
    CategoryView view;
    for (auto& [c, ids] : members) {
        if (ids.size() < filter.min_members) continue;
        view.categories.push_back(c);
        view.members.push_back(std::move(ids));
    }
    return view;
}

double davies_bouldin(std::span<const Cluster> clusters, std::span<const std::string> names) {
    const std::size_t k = clusters.size();
    if (k < 2) throw Error(ErrorKind::data, "Davies-Bouldin index needs at least two clusters");
    auto name = [&](std::size_t i) { return i < names.size() ? names[i] : "#" + std::to_string(i); };

    std::vector<std::vector<double>> centroids(k);
    std::vector<double> scatter(k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        if (clusters[i].empty()) throw Error(ErrorKind::data, "empty cluster " + name(i));
        const std::size_t dim = clusters[i].front().size();
        centroids[i].assign(dim, 0.0);
        for (const auto& x : clusters[i]) {
            for (std::size_t d = 0; d < dim; ++d) centroids[i][d] += x[d];
        }
        for (auto& c : centroids[i]) c /= static_cast<double>(clusters[i].size());
        for (const auto& x : clusters[i]) scatter[i] += euclidean(x, centroids[i]);
        scatter[i] /= static_cast<double>(clusters[i].size());
    }
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        double worst = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            if (i == j) continue;
            const double separation = euclidean(centroids[i], centroids[j]);
            if (separation == 0.0) {
                throw Error(ErrorKind::numeric, "coincident centroids for categories " + name(i) + " and " + name(j));
            }
            worst = std::max(worst, (scatter[i] + scatter[j]) / separation);
        }
        total += worst;
    }
    return total / static_cast<double>(k);
}

double davies_bouldin(const CategoryView& view, const CategoryEmbedding& embed) {
    std::vector<Cluster> clusters(view.categories.size());
    std::vector<std::string> names;
    for (std::size_t c = 0; c < view.categories.size(); ++c) {
        names.push_back(view.categories[c].label());
        for (Id e : view.members[c]) clusters[c].push_back(embed(e, view.categories[c]));
    }
    return davies_bouldin(clusters, names);
}

// ---------------------------------------------------------------------------
// Long tail
// ---------------------------------------------------------------------------

LongTailReport long_tail_report(std::span<const std::size_t> query_degree,
                                std::span<const std::size_t> baseline_ranks,
                                std::span<const std::size_t> rpe_ranks,
                                std::span<const std::size_t> thresholds) {
    if (baseline_ranks.size() != query_degree.size() || rpe_ranks.size() != query_degree.size()) {
        throw Error(ErrorKind::data, "long-tail inputs must have one entry per query");
    }
    static constexpr std::size_t kDefault[] = {5, 10, 20, 50};
    if (thresholds.empty()) thresholds = kDefault;

    auto mrr_of = [](std::span<const std::size_t> ranks, const std::vector<std::size_t>& idx)
        -> std::optional<double> {
        if (idx.empty()) return std::nullopt;
        std::vector<std::size_t> picked;
        picked.reserve(idx.size());
        for (auto i : idx) picked.push_back(ranks[i]);
        return RankingReport::from_ranks(std::move(picked)).mrr;
    };

    LongTailReport report;
    std::vector<std::optional<std::size_t>> limits(thresholds.begin(), thresholds.end());
    limits.push_back(std::nullopt);
    for (const auto& limit : limits) {
        std::vector<std::size_t> idx;
        for (std::size_t q = 0; q < query_degree.size(); ++q) {
            if (!limit || query_degree[q] <= *limit) idx.push_back(q);
        }
        report.buckets.push_back({limit, idx.size(), mrr_of(baseline_ranks, idx), mrr_of(rpe_ranks, idx)});
    }
    return report;
}

std::vector<std::size_t> answer_degrees(std::span<const Query> queries, std::span<const std::size_t> degrees) {
    std::vector<std::size_t> out;
    out.reserve(queries.size());
    for (const auto& q : queries) out.push_back(degrees[q.answer()]);
    return out;
}

std::string LongTailReport::to_json() const {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& b : buckets) {
        nlohmann::ordered_json row;
        row["max_links"] = b.max_links ? nlohmann::ordered_json(*b.max_links) : nlohmann::ordered_json("all");
        row["queries"] = b.query_count;
        row["mrr_baseline"] = b.mrr_baseline ? nlohmann::ordered_json(*b.mrr_baseline) : nlohmann::ordered_json();
        row["mrr_rpe"] = b.mrr_rpe ? nlohmann::ordered_json(*b.mrr_rpe) : nlohmann::ordered_json();
        j.push_back(row);
    }
    return j.dump(2);
}

std::string LongTailReport::to_csv() const {
    std::ostringstream out;
    out << std::setprecision(17) << "max_links,queries,mrr_baseline,mrr_rpe\n";
    for (const auto& b : buckets) {
        out << (b.max_links ? std::to_string(*b.max_links) : std::string("all")) << ',' << b.query_count << ',';
        if (b.mrr_baseline) out << *b.mrr_baseline;
        out << ',';
        if (b.mrr_rpe) out << *b.mrr_rpe;
        out << '\n';
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

void export_embeddings_with_categories(const KnowledgeGraph& kg, const CategoryAssignment& assignment,
                                       const CategoryView* view, const CategoryEmbedding& embed,
                                       const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    out << std::setprecision(17);
    auto write_row = [&](Id e, const std::vector<Category>& cats) {
        out << kg.entities().label(e) << ',';
        for (std::size_t i = 0; i < cats.size(); ++i) out << (i ? ";" : "") << cats[i].label();
        const auto values = embed(e, cats.front());
        for (double v : values) out << ',' << v;
        out << '\n';
    };
    if (view) {
        std::vector<std::pair<Id, Category>> rows;
        for (std::size_t c = 0; c < view->categories.size(); ++c) {
            for (Id e : view->members[c]) rows.emplace_back(e, view->categories[c]);
        }
        std::sort(rows.begin(), rows.end());
        for (const auto& [e, cat] : rows) write_row(e, {cat});
    } else {
        for (Id e = 0; e < assignment.entity_count(); ++e) {
            if (assignment.of(e).empty()) continue;
            write_row(e, assignment.of(e));
        }
    }
    if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

std::vector<ExportedRow> read_exported_embeddings(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
    std::vector<ExportedRow> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (fields.size() < 3) throw Error(ErrorKind::data, "malformed export row: " + line);
        ExportedRow row;
        row.label = fields[0];
        std::stringstream cats(fields[1]);
        while (std::getline(cats, f, ';')) row.categories.push_back(f);
        for (std::size_t i = 2; i < fields.size(); ++i) row.values.push_back(std::stod(fields[i]));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace rpe
