#include "doctest.h"
#include "support.hpp"

#include "rpe/evaluator.hpp"
#include "rpe/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <set>

using namespace rpe;

namespace {

// Independent ranker: enumerate every candidate triple.
std::size_t brute_rank(const Query& q, std::span<const double> scores, const std::set<Triple>& known,
                       TiePolicy policy = TiePolicy::mean) {
    const double own = scores[q.answer()];
    std::size_t higher = 0, ties = 0;
    for (Id e = 0; e < scores.size(); ++e) {
        if (e == q.answer()) continue;
        Triple t = q.triple;
        (q.side == Side::head ? t.head : t.tail) = e;
        if (known.contains(t)) continue;
        if (scores[e] > own) ++higher;
        if (scores[e] == own) ++ties;
    }
    switch (policy) {
        case TiePolicy::optimistic: return 1 + higher;
        case TiePolicy::pessimistic: return 1 + higher + ties;
        case TiePolicy::mean: break;
    }
    return 1 + higher + (ties + 1) / 2;
}

double dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

}  // namespace

TEST_SUITE("evaluator") {

TEST_CASE("tie policies") {
    CHECK(rank_from_counts(0, 0, TiePolicy::mean) == 1);
    CHECK(rank_from_counts(0, 1, TiePolicy::mean) == 2);
    CHECK(rank_from_counts(2, 3, TiePolicy::mean) == 5);
    CHECK(rank_from_counts(2, 3, TiePolicy::optimistic) == 3);
    CHECK(rank_from_counts(2, 3, TiePolicy::pessimistic) == 6);
    CHECK(tie_policy_from_string(to_string(TiePolicy::pessimistic)) == TiePolicy::pessimistic);
}

TEST_CASE("filtered rank by hand") {
    KnownTriples known;
    const std::vector<Triple> kt{{0, 0, 1}};
    known.add(kt);
    const Query q{{0, 0, 1}, Side::tail};
    const std::vector<double> unique{0.1, 0.9, 0.2};
    CHECK(filtered_rank(q, unique, known, TiePolicy::mean) == 1);
    const std::vector<double> tie{0.1, 0.5, 0.5};
    CHECK(filtered_rank(q, tie, known, TiePolicy::mean) == 2);

    // a known competitor is filtered out
    const std::vector<Triple> more{{0, 0, 2}};
    known.add(more);
    const std::vector<double> beaten{0.1, 0.5, 0.9};
    CHECK(filtered_rank(q, beaten, known, TiePolicy::mean) == 1);
}

TEST_CASE("filtered rank equals brute-force enumeration") {
    const auto kg = random_graph(20, 3, 80, 4);
    std::set<Triple> known_set(kg.triples().begin(), kg.triples().end());
    KnownTriples known;
    known.add(kg.triples());
    Rng rng(17);
    std::vector<double> scores(kg.entity_count());
    for (int trial = 0; trial < 1000; ++trial) {
        // coarse scores so ties occur often
        for (auto& s : scores) s = static_cast<double>(uniform_index(rng, 6));
        const Triple t = kg.triples()[uniform_index(rng, kg.triple_count())];
        const Query q{t, uniform_index(rng, 2) == 0 ? Side::head : Side::tail};
        for (const auto policy : {TiePolicy::mean, TiePolicy::optimistic, TiePolicy::pessimistic}) {
            CHECK(filtered_rank(q, scores, known, policy) == brute_rank(q, scores, known_set, policy));
        }
        const auto via_fn = filtered_rank(q, scores.size(), [&](Id e) { return scores[e]; }, known, TiePolicy::mean);
        CHECK(via_fn == brute_rank(q, scores, known_set));
    }
}

TEST_CASE("report arithmetic") {
    const auto r = RankingReport::from_ranks({1, 2, 4});
    CHECK(r.mrr == doctest::Approx(0.58333333333333333).epsilon(1e-15));
    CHECK(r.hits.at(1) == doctest::Approx(1.0 / 3));
    CHECK(r.hits.at(3) == doctest::Approx(2.0 / 3));
    CHECK(r.hits.at(10) == 1.0);
    CHECK(r.query_count == 3);
    const auto perfect = RankingReport::from_ranks({1, 1, 1, 1});
    CHECK(perfect.mrr == 1.0);
    CHECK(perfect.hits.at(1) == 1.0);
    // order of the ranks does not change the reduction
    CHECK(RankingReport::from_ranks({7, 1, 3, 2, 9}).mrr == RankingReport::from_ranks({9, 2, 3, 1, 7}).mrr);
}

TEST_CASE("completion report over a perfect scorer") {
    const auto kg = random_graph(15, 2, 40, 9);
    KnownTriples known;
    known.add(kg.triples());
    const std::vector<Triple> test(kg.triples().begin(), kg.triples().begin() + 10);
    const CandidateScorer oracle = [](const Query& q, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        out[q.answer()] = 1.0;
    };
    const auto r = completion_report(test, kg.entity_count(), oracle, known);
    CHECK(r.query_count == 20);
    CHECK(r.mrr == 1.0);
    CHECK(r.hits.at(1) == 1.0);
    CHECK(completion_queries(test).size() == 20);
}

TEST_CASE("alignment retrieval") {
    SUBCASE("identical embeddings for true pairs") {
        EmbeddingMatrix s{{0, 0}, {10, 0}, {0, 10}}, t{{0, 10}, {0, 0}, {10, 0}};
        const std::vector<EntityPair> pairs{{0, 1}, {1, 2}, {2, 0}};
        const auto r = alignment_report(pairs, s, t);
        CHECK(r.hits.at(1) == 1.0);
        CHECK(r.query_count == 6);
    }
    SUBCASE("five-entity toy against exhaustive sort") {
        EmbeddingMatrix s{{0.0}, {1.0}, {2.5}, {4.0}, {7.0}};
        EmbeddingMatrix t{{0.4}, {2.0}, {2.1}, {5.0}, {6.0}};
        const std::vector<EntityPair> pairs{{0, 0}, {1, 2}, {2, 1}, {3, 4}, {4, 3}};
        const auto [fwd, bwd] = alignment_ranks(pairs, s, t, TiePolicy::mean, 1);
        for (std::size_t p = 0; p < pairs.size(); ++p) {
            const auto [i, j] = pairs[p];
            std::size_t fc = 0, ft = 0, bc = 0, bt = 0;
            for (std::size_t k = 0; k < 5; ++k) {
                if (k != j) {
                    fc += dist(s[i], t[k]) < dist(s[i], t[j]);
                    ft += dist(s[i], t[k]) == dist(s[i], t[j]);
                }
                if (k != i) {
                    bc += dist(t[j], s[k]) < dist(t[j], s[i]);
                    bt += dist(t[j], s[k]) == dist(t[j], s[i]);
                }
            }
            CHECK(fwd[p] == 1 + fc + (ft + 1) / 2);
            CHECK(bwd[p] == 1 + bc + (bt + 1) / 2);
        }
        // swapping graph roles gives the same pooled metrics
        std::vector<EntityPair> swapped;
        for (const auto& [i, j] : pairs) swapped.push_back({j, i});
        const auto a = alignment_report(pairs, s, t);
        const auto c = alignment_report(swapped, t, s);
        CHECK(a.mrr == c.mrr);
        CHECK(a.hits == c.hits);
    }
}

TEST_CASE("Davies-Bouldin index") {
    for (const auto& c : rpe::test::oracle()["dbi"]) {
        std::vector<Cluster> clusters;
        for (const auto& cl : c["clusters"]) {
            Cluster pts;
            for (const auto& p : cl) pts.push_back(rpe::test::doubles(p));
            clusters.push_back(pts);
        }
        CHECK(std::abs(davies_bouldin(clusters) - c["dbi"].get<double>()) <= 1e-12);
    }
    const std::vector<Cluster> singletons{{{0.0, 1.0}}, {{3.0, -1.0}}};
    CHECK(davies_bouldin(singletons) == 0.0);

    const std::vector<Cluster> one{{{0.0}, {1.0}}};
    CHECK_THROWS_AS(davies_bouldin(one), Error);
    const std::vector<Cluster> empty{{{0.0}}, {}};
    CHECK_THROWS_AS(davies_bouldin(empty), Error);
    const std::vector<Cluster> same{{{-1.0}, {1.0}}, {{-2.0}, {2.0}}};
    const std::vector<std::string> names{"0h", "1h"};
    try {
        davies_bouldin(same, names);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("0h") != std::string::npos);
        CHECK(std::string(e.what()).find("1h") != std::string::npos);
    }
}

TEST_CASE("Davies-Bouldin index is invariant under similarity transforms") {
    Rng rng(3);
    std::vector<Cluster> clusters(4);
    for (std::size_t c = 0; c < 4; ++c) {
        for (int i = 0; i < 12; ++i) {
            clusters[c].push_back({3.0 * c + standard_normal(rng), -2.0 * c + standard_normal(rng)});
        }
    }
    const double base = davies_bouldin(clusters);
    const double th = 0.7, ct = std::cos(th), st = std::sin(th);
    auto transformed = clusters;
    for (auto& cl : transformed) {
        for (auto& p : cl) {
            const double x = p[0], y = p[1];
            p = {4.0 * (ct * x - st * y) + 11.0, 4.0 * (st * x + ct * y) - 5.0};
        }
    }
    CHECK(std::abs(davies_bouldin(transformed) - base) <= 1e-9);
}

TEST_CASE("categories") {
    KnowledgeGraphBuilder b("cat");
    b.reserve_numeric_entities(6);
    b.reserve_numeric_relations(2);
    b.add({0, 0, 1});
    b.add({2, 0, 1});
    b.add({3, 1, 4});
    b.add({0, 1, 4});
    b.add({5, 1, 5});
    const auto kg = std::move(b).build();
    const auto a = CategoryAssignment::from_graph(kg);
    for (Id e = 0; e < 6; ++e) {
        for (Id r = 0; r < 2; ++r) {
            bool is_head = false, is_tail = false;
            for (const auto& t : kg.triples()) {
                is_head |= t.head == e && t.relation == r;
                is_tail |= t.tail == e && t.relation == r;
            }
            const auto& cats = a.of(e);
            CHECK((std::find(cats.begin(), cats.end(), Category{r, Side::head}) != cats.end()) == is_head);
            CHECK((std::find(cats.begin(), cats.end(), Category{r, Side::tail}) != cats.end()) == is_tail);
        }
    }
    CategoryFilter f;
    f.min_members = 1;
    const auto v = a.view(f);
    // entity 0 heads both relations and is dropped
    REQUIRE(v.categories.size() == 2);
    CHECK(v.members[0] == std::vector<Id>{2});
    CHECK(v.members[1] == std::vector<Id>{3, 5});
    f.exclusive = false;
    CHECK(a.view(f).members[0] == std::vector<Id>{0, 2});
    f.min_members = 3;
    f.exclusive = true;
    CHECK(a.view(f).categories.empty());
    CHECK(Category{1, Side::tail}.label() == "1t");
}

TEST_CASE("long-tail buckets") {
    SUBCASE("threshold above every degree") {
        const std::vector<std::size_t> deg(6, 3), base{1, 2, 3, 4, 5, 6}, rpe{1, 1, 1, 2, 2, 2};
        const std::vector<std::size_t> th{5};
        const auto r = long_tail_report(deg, base, rpe, th);
        REQUIRE(r.buckets.size() == 2);
        CHECK(r.buckets[0].query_count == r.buckets[1].query_count);
        CHECK(r.buckets[0].mrr_rpe == r.buckets[1].mrr_rpe);
        CHECK_FALSE(r.buckets[1].max_links.has_value());
    }
    SUBCASE("brute force on a small graph") {
        const auto kg = random_graph(20, 3, 50, 21);
        const auto degrees = degree_index(kg);
        const std::vector<Triple> test(kg.triples().begin(), kg.triples().begin() + 15);
        const auto queries = completion_queries(test);
        const auto qdeg = answer_degrees(queries, degrees);
        KnownTriples known;
        known.add(kg.triples());
        std::set<Triple> known_set(kg.triples().begin(), kg.triples().end());
        Rng rng(5);
        std::vector<std::size_t> base, rpe;
        std::vector<std::vector<double>> tables;
        for (const auto& q : queries) {
            std::vector<double> s1(20), s2(20);
            for (auto& x : s1) x = uniform01(rng);
            for (auto& x : s2) x = uniform01(rng);
            base.push_back(filtered_rank(q, s1, known, TiePolicy::mean));
            rpe.push_back(brute_rank(q, s2, known_set));
            CHECK(base.back() == brute_rank(q, s1, known_set));
        }
        const auto r = long_tail_report(qdeg, base, rpe);
        REQUIRE(r.buckets.size() == 5);
        std::size_t last = 0;
        for (const auto& bucket : r.buckets) {
            double sb = 0.0, sr = 0.0;
            std::size_t n = 0;
            for (std::size_t q = 0; q < queries.size(); ++q) {
                CHECK(qdeg[q] == degrees[queries[q].answer()]);
                if (bucket.max_links && qdeg[q] > *bucket.max_links) continue;
                sb += 1.0 / static_cast<double>(base[q]);
                sr += 1.0 / static_cast<double>(rpe[q]);
                ++n;
            }
            CHECK(bucket.query_count == n);
            CHECK(bucket.query_count >= last);
            last = bucket.query_count;
            if (n == 0) {
                CHECK_FALSE(bucket.mrr_baseline.has_value());
            } else {
                CHECK(*bucket.mrr_baseline == doctest::Approx(sb / n).epsilon(1e-12));
                CHECK(*bucket.mrr_rpe == doctest::Approx(sr / n).epsilon(1e-12));
            }
        }
    }
    SUBCASE("empty bucket") {
        const std::vector<std::size_t> deg{30, 40}, ranks{1, 2}, th{5};
        const auto r = long_tail_report(deg, ranks, ranks, th);
        CHECK(r.buckets[0].query_count == 0);
        CHECK_FALSE(r.buckets[0].mrr_rpe.has_value());
        CHECK(r.to_json().find("null") != std::string::npos);
    }
}

TEST_CASE("embedding export") {
    rpe::test::ScratchDir dir("export");
    KnowledgeGraphBuilder b("ex");
    b.add("a", "r", "b");
    b.add("c", "r", "b");
    b.add("a", "s", "c");
    const auto kg = std::move(b).build();
    const auto assignment = CategoryAssignment::from_graph(kg);
    const CategoryEmbedding embed = [](Id e, const Category&) {
        return std::vector<double>{0.1 * e + 1.0 / 3.0, -std::sqrt(2.0) * e};
    };
    const auto path = dir.path() / "emb.csv";
    export_embeddings_with_categories(kg, assignment, nullptr, embed, path);
    const auto rows = read_exported_embeddings(path);
    REQUIRE(rows.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(rows[i].label == kg.entities().label(static_cast<Id>(i)));
        CHECK(rows[i].values == embed(static_cast<Id>(i), {}));
    }
    CHECK(rows[0].categories.size() == 2);

    CategoryFilter f;
    f.sides = SideFilter::both;
    f.min_members = 1;
    const auto view = assignment.view(f);
    export_embeddings_with_categories(kg, assignment, &view, embed, path);
    for (const auto& row : read_exported_embeddings(path)) CHECK(row.categories.size() == 1);
}

}  // TEST_SUITE
