#include "doctest.h"
#include "support.hpp"

#include "rpe/app/pipeline.hpp"
#include "rpe/geometry.hpp"
#include "rpe/synthetic.hpp"

#include <cmath>

using namespace rpe;

namespace {

std::vector<double> rotated(const std::vector<double>& p, const std::vector<double>& phase) {
    const std::size_t k = phase.size();
    std::vector<double> out(2 * k);
    for (std::size_t i = 0; i < k; ++i) {
        const double c = std::cos(phase[i]), s = std::sin(phase[i]);
        out[i] = p[i] * c - p[k + i] * s;
        out[k + i] = p[i] * s + p[k + i] * c;
    }
    return out;
}

std::vector<double> gaussian(std::size_t n, Rng& rng, double scale = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = scale * standard_normal(rng);
    return v;
}

// Relation 0 cycles through entities 0..4, relation 1 through 5..9, so each
// relation's head and tail areas coincide. Members sit on a ring of radius
// 1 around their prototype; relation 1 is centred at `separation`.
std::pair<KnowledgeGraph, RotateTables> two_relation_instance(double separation) {
    KnowledgeGraphBuilder b("rings");
    b.reserve_numeric_entities(10);
    b.reserve_numeric_relations(2);
    for (Id r = 0; r < 2; ++r) {
        for (Id i = 0; i < 5; ++i) b.add({5 * r + i, r, 5 * r + (i + 1) % 5});
    }
    auto kg = std::move(b).build();
    CompletionConfig cfg;
    cfg.dim = 1;
    auto t = init_rotate_tables(kg, cfg);
    t.relations.values().assign(2, 0.0);
    t.prototypes.values() = {0.0, 0.0, 0.0, 0.0, separation, 0.0, separation, 0.0};
    for (Id r = 0; r < 2; ++r) {
        for (Id i = 0; i < 5; ++i) {
            const double a = 2.0 * std::numbers::pi * i / 5.0;
            t.entities.row(5 * r + i)[0] = (r == 0 ? 0.0 : separation) + std::cos(a);
            t.entities.row(5 * r + i)[1] = std::sin(a);
        }
    }
    return {std::move(kg), std::move(t)};
}

}  // namespace

TEST_SUITE("prototype-geometry") {

TEST_CASE("area radii and shrinkage") {
    KnowledgeGraphBuilder b("areas");
    b.reserve_numeric_entities(4);
    b.reserve_numeric_relations(1);
    for (Id h = 0; h < 3; ++h) b.add({h, 0, 3});
    const auto kg = std::move(b).build();
    const EmbeddingMatrix ent{{1.0}, {-2.0}, {3.0}, {5.0}};
    const EmbeddingMatrix proto{{0.0}, {5.0}};
    const auto raw = build_areas(ent, proto, kg, 1.0);
    REQUIRE(raw.size() == 2);
    CHECK(raw[0].radius == 3.0);
    CHECK(raw[1].radius == 0.0);
    CHECK(raw[0].members == std::vector<Id>{0, 1, 2});
    const auto half = build_areas(ent, proto, kg, 0.5);
    CHECK(half[0].radius == 1.5);

    CHECK_THROWS_AS(make_area(0, Side::head, {0.0}, {}, {}), Error);

    KnowledgeGraphBuilder b2("gap");
    b2.reserve_numeric_entities(2);
    b2.reserve_numeric_relations(2);
    b2.add({0, 0, 1});
    const auto gap = std::move(b2).build();
    CHECK_THROWS_AS(build_areas(EmbeddingMatrix{{0.0}, {1.0}}, EmbeddingMatrix{{0.0}, {0.0}, {0.0}, {0.0}}, gap, 1.0),
                    Error);
}

TEST_CASE("aggregated radii are exactly lambda times the raw radii") {
    const auto kg = random_graph(80, 5, 400, 31);
    CompletionConfig cfg;
    cfg.dim = 6;
    const auto tables = init_rotate_tables(kg, cfg);
    const auto raw = build_areas(tables, kg, 1.0);
    for (const double lambda : {0.1, 0.37, 0.5, 0.9}) {
        const auto agg = build_areas(tables, kg, lambda);
        REQUIRE(agg.size() == raw.size());
        for (std::size_t i = 0; i < raw.size(); ++i) {
            CHECK(std::abs(agg[i].radius - lambda * raw[i].radius) <= 1e-12);
        }
    }
}

TEST_CASE("distance between areas") {
    const auto a = make_area(0, Side::head, {0.0, 0.0}, {0}, {{1.0, 0.0}});
    const auto b = make_area(1, Side::head, {10.0, 0.0}, {1}, {{10.0, 2.0}});
    CHECK(area_distance(a, b) == doctest::Approx(7.0).epsilon(1e-15));
    CHECK(area_distance(a, a) == 0.0);
    const auto c = make_area(2, Side::tail, {2.0, 0.0}, {2}, {{0.5, 0.0}});
    CHECK(area_distance(a, c) == 0.0);

    Rng rng(4);
    for (int i = 0; i < 500; ++i) {
        std::vector<PrototypeArea> balls;
        for (Id j = 0; j < 3; ++j) {
            const auto center = gaussian(3, rng, 5.0);
            auto point = center;
            point[0] += 2.0 * uniform01(rng);
            balls.push_back(make_area(j, Side::head, center, {j}, {point}));
        }
        CHECK(area_distance(balls[0], balls[1]) == area_distance(balls[1], balls[0]));
        // a point of C sits within d(B, C) + 2 R_C of B
        CHECK(area_distance(balls[0], balls[2]) >=
              area_distance(balls[0], balls[1]) - area_distance(balls[1], balls[2]) - 2.0 * balls[2].radius - 1e-12);
    }
}

TEST_CASE("prototype score bounds by hand") {
    const std::vector<double> one{1.0, 0.0}, phase{0.0};
    const std::vector<double> h{1.5, 0.0}, t{0.5, 0.0};
    const auto e = check_lemma1(h, t, phase, one, one);
    CHECK(e.premise);
    CHECK(e.passed());
    CHECK(std::abs(e.margin) <= 1e-12);
    const auto at = check_lemma1(one, one, phase, one, one);
    CHECK(at.passed());
    CHECK(at.margin == 0.0);
}

TEST_CASE("prototype score bounds on random instances") {
    Rng rng(2024);
    std::size_t violations = 0;
    for (int i = 0; i < 10000; ++i) {
        const std::size_t k = 1 + uniform_index(rng, 6);
        std::vector<double> phase(k);
        for (auto& x : phase) x = (2.0 * uniform01(rng) - 1.0) * std::numbers::pi;
        const auto ph = gaussian(2 * k, rng);
        const auto pt = rotated(ph, phase);
        const auto h = gaussian(2 * k, rng, 2.0), t = gaussian(2 * k, rng, 2.0);
        const auto e = check_lemma1(h, t, phase, ph, pt, 1e-9);
        CHECK(e.premise);
        violations += !e.passed();
    }
    CHECK(violations == 0);

    // negative control: break the assumption and the checker must not claim anything
    const std::vector<double> phase{0.3};
    const std::vector<double> ph{1.0, 0.0};
    auto pt = rotated(ph, phase);
    pt[0] += 1e-3;
    const auto e = check_lemma1(std::vector<double>{3.0, 0.0}, std::vector<double>{-2.0, 0.5}, phase, ph, pt, 1e-9);
    CHECK_FALSE(e.premise);
    CHECK_FALSE(e.conclusion.has_value());
    CHECK(e.assumption_residual > 1e-9);
}

TEST_CASE("constructed completion instance") {
    const auto inst = app::constructed_completion_instance();
    Rng rng(0);
    const auto& expected = rpe::test::oracle()["constructed"];
    for (const auto which : {CompletionTheorem::head_side, CompletionTheorem::tail_side}) {
        const auto e = check_theorem_completion(inst.areas, 0, inst.phases.row(0), 100, rng, which, {}, true);
        CHECK(e.premise);
        REQUIRE(e.conclusion.has_value());
        CHECK(*e.conclusion);
        CHECK(std::abs(e.margin - expected["grid_margin"].get<double>()) <= 1e-9);
    }
    CHECK(area_distance(inst.areas[0], inst.areas[2]) ==
          doctest::Approx(expected["premise_distance"].get<double>()).epsilon(1e-12));
    const auto all = check_completion_theorems(inst.areas, inst.phases, 100, rng, {}, true);
    CHECK(all.premise_count() == 4);
    CHECK(all.all_passed());
}

TEST_CASE("overlapping areas leave the conclusion untested") {
    auto inst = app::constructed_completion_instance();
    // drag relation 1's areas onto relation 0's
    for (std::size_t a = 2; a < 4; ++a) {
        const double shift = inst.areas[a].center[0] - 0.05;
        inst.areas[a].center[0] -= shift;
        for (auto& p : inst.areas[a].points) p[0] -= shift;
    }
    Rng rng(1);
    const auto e = check_theorem_completion(inst.areas, 0, inst.phases.row(0), 50, rng, CompletionTheorem::head_side);
    CHECK_FALSE(e.premise);
    CHECK_FALSE(e.conclusion.has_value());
    CHECK(e.passed());
}

TEST_CASE("lambda threshold grows as areas separate") {
    const auto grid = app::default_lambda_grid();
    std::optional<double> last;
    for (const double sep : {3.0, 4.5, 6.0, 8.0, 12.0}) {
        const auto [kg, tables] = two_relation_instance(sep);
        const auto th = premise_lambda_threshold(tables, kg, grid);
        // premises hold iff sep - 2 lambda > 2 lambda
        std::optional<double> expect;
        for (double l : grid) {
            if (sep - 4.0 * l > 1e-9) expect = l;
        }
        CHECK(th == expect);
        if (last && th) CHECK(*th >= *last);
        if (th) last = th;
    }
    const auto [kg, tables] = two_relation_instance(3.0);
    CHECK(completion_premises_hold(tables, kg, 0.5));
    CHECK_FALSE(completion_premises_hold(tables, kg, 0.9));
}

TEST_CASE("alignment areas") {
    auto ball = [](Id r, std::vector<double> c, double radius) {
        return make_area(r, Side::head, c, {0, 1}, {c, {c[0] + radius, c[1]}});
    };
    const std::vector<PrototypeArea> src{ball(0, {0.0, 0.0}, 0.5), ball(1, {10.0, 0.0}, 0.5)};
    const std::vector<std::pair<std::size_t, std::size_t>> corr{{0, 0}, {1, 1}};
    Rng rng(6);
    const auto ok = check_theorem_alignment(src, src, corr, 200, rng);
    CHECK(ok.premise_count() > 0);
    CHECK(ok.all_passed());

    const std::vector<PrototypeArea> close{ball(0, {0.0, 0.0}, 0.5), ball(1, {0.6, 0.0}, 0.5)};
    const auto bad = check_theorem_alignment(close, close, corr, 50, rng);
    CHECK(bad.premise_count() == 0);
    for (const auto& e : bad.entries) CHECK_FALSE(e.conclusion.has_value());
}

TEST_CASE("ball sampling stays inside the ball") {
    Rng rng(12);
    const std::vector<double> c{1.0, -2.0, 0.5};
    for (const auto& p : ball_samples(c, 0.7, 500, rng)) {
        double d = 0.0;
        for (std::size_t i = 0; i < 3; ++i) d += (p[i] - c[i]) * (p[i] - c[i]);
        CHECK(std::sqrt(d) <= 0.7 + 1e-12);
    }
    CHECK(ball_samples(std::vector<double>{0.0, 0.0}, 1.0, 100, rng, true).size() == 100);
}

TEST_CASE("prototype separation summary") {
    EmbeddingTable p(3, 1, TableKind::prototype, true);
    p.values() = {0.0, 0.0, 3.0, 4.0, 3.0, 4.5};
    CHECK(min_prototype_distance(p) == doctest::Approx(0.5));
}

}  // TEST_SUITE
