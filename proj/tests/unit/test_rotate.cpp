#include "doctest.h"
#include "support.hpp"

#include "rpe/app/pipeline.hpp"
#include "rpe/config.hpp"
#include "rpe/rotate.hpp"
#include "rpe/synthetic.hpp"

#include <cmath>
#include <numbers>

using namespace rpe;

namespace {

std::vector<double> vec(const nlohmann::json& j) { return rpe::test::doubles(j); }

double norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

CompletionConfig small_config() {
    CompletionConfig c;
    c.dim = 8;
    c.batch_size = 16;
    c.negative_sample_size = 8;
    c.margin = 6.0;
    c.adversarial_temperature = 1.0;
    c.learning_rate = 0.01;
    c.max_steps = 30;
    c.eval_every = 0;
    c.seed = 3;
    return c;
}

}  // namespace

TEST_SUITE("rotate-engine") {

TEST_CASE("rotation score by hand") {
    const std::vector<double> one{1.0, 0.0}, zero{0.0, 0.0};
    CHECK(rotate_score(one, std::vector<double>{0.0}, one) == 0.0);
    CHECK(rotate_score(one, std::vector<double>{std::numbers::pi / 2}, zero) == doctest::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("scores agree with the reference evaluation") {
    for (const auto& c : rpe::test::oracle()["rotate"]) {
        const auto h = vec(c["head"]), t = vec(c["tail"]), ph = vec(c["p_head"]), pt = vec(c["p_tail"]);
        const auto phase = vec(c["phase"]);
        const double lambda = c["lambda"].get<double>();
        CHECK(std::abs(rotate_score(h, phase, t) - c["rotate_score"].get<double>()) <= 1e-12);
        const auto hh = aggregate_with_prototype(h, ph, lambda);
        const auto tt = aggregate_with_prototype(t, pt, lambda);
        CHECK(std::abs(rotate_score(hh, phase, tt) - c["rpe_rotate_score"].get<double>()) <= 1e-12);
    }
}

TEST_CASE("aggregation") {
    const std::vector<double> e{2.0, 0.0}, p{0.0, 0.0};
    CHECK(aggregate_with_prototype(e, p, 0.5) == std::vector<double>{1.0, 0.0});
    const std::vector<double> q{5.0, -3.0};
    CHECK(aggregate_with_prototype(e, q, 1.0) == e);
    CHECK_THROWS_AS(aggregate_with_prototype(e, q, 0.0), Error);
    CHECK_THROWS_AS(aggregate_with_prototype(e, q, 1.5), Error);

    Rng rng(5);
    for (int i = 0; i < 100; ++i) {
        std::vector<double> a(6), b(6);
        for (auto& x : a) x = standard_normal(rng);
        for (auto& x : b) x = standard_normal(rng);
        const double lambda = 0.05 + 0.9 * uniform01(rng);
        const auto agg = aggregate_with_prototype(a, b, lambda);
        std::vector<double> d1(6), d2(6);
        for (int j = 0; j < 6; ++j) d1[j] = agg[j] - b[j], d2[j] = a[j] - b[j];
        CHECK(std::abs(norm(d1) - lambda * norm(d2)) <= 1e-12);
    }
}

TEST_CASE("prototype scoring: worked example, bound and lambda = 1 reduction") {
    KnowledgeGraphBuilder b("tiny");
    b.add("h", "r", "t");
    const auto kg = std::move(b).build();
    CompletionConfig cfg;
    cfg.dim = 1;
    auto tables = init_rotate_tables(kg, cfg);
    // h = 2, P_H = 0, t = 1, P_T = 1, phase 0 (real line)
    tables.entities.row(0)[0] = 2.0, tables.entities.row(0)[1] = 0.0;
    tables.entities.row(1)[0] = 1.0, tables.entities.row(1)[1] = 0.0;
    tables.relations.row(0)[0] = 0.0;
    tables.prototypes.row(0)[0] = 0.0, tables.prototypes.row(0)[1] = 0.0;
    tables.prototypes.row(1)[0] = 1.0, tables.prototypes.row(1)[1] = 0.0;
    CHECK(rpe_rotate_score({0, 0, 1}, tables, 0.5) == doctest::Approx(0.0));

    const auto g = random_graph(40, 5, 300, 8);
    CompletionConfig c2;
    c2.dim = 6;
    const auto t2 = init_rotate_tables(g, c2);
    for (const auto& t : g.triples()) {
        CHECK(rpe_rotate_score(t, t2, 1.0) == rotate_score(t2.entities.row(t.head), t2.relations.row(t.relation),
                                                           t2.entities.row(t.tail)));
        const double lambda = 0.3;
        const auto hh = aggregate_with_prototype(t2.entities.row(t.head), t2.prototypes.row(head_prototype_row(t.relation)), lambda);
        const auto tt = aggregate_with_prototype(t2.entities.row(t.tail), t2.prototypes.row(tail_prototype_row(t.relation)), lambda);
        const double s = rpe_rotate_score(t, t2, lambda);
        CHECK(s <= 0.0);
        CHECK(s >= -norm(hh) - norm(tt) - 1e-12);
        CHECK(triple_score(t, t2, CompletionModel::rotate, lambda) == rpe_rotate_score(t, t2, 1.0));
    }
}

TEST_CASE("self-adversarial loss values") {
    for (const auto& c : rpe::test::oracle()["loss"]) {
        const double v = self_adversarial_value(c["f_pos"].get<double>(), vec(c["f_neg"]), c["gamma"].get<double>(),
                                                c["alpha"].get<double>(),
                                                margin_convention_from_string(c["convention"].get<std::string>()));
        CHECK(std::abs(v - c["loss"].get<double>()) <= 1e-12);
    }
    // the worked example
    CHECK(self_adversarial_value(0.0, std::vector<double>{-2.0}, 1.0, 1.0, MarginConvention::score) ==
          doctest::Approx(3.361849).epsilon(1e-6));
}

TEST_CASE("adversarial weights: equal negatives split evenly, order does not matter") {
    const std::vector<double> one{-3.0}, two{-3.0, -3.0};
    for (const auto conv : {MarginConvention::distance, MarginConvention::score}) {
        CHECK(self_adversarial_value(-1.0, two, 4.0, 1e-9, conv) ==
              doctest::Approx(self_adversarial_value(-1.0, one, 4.0, 1e-9, conv)).epsilon(1e-12));
        const std::vector<double> a{-1.0, -4.0, -2.5}, b{-2.5, -1.0, -4.0};
        CHECK(self_adversarial_value(-2.0, a, 6.0, 0.5, conv) ==
              doctest::Approx(self_adversarial_value(-2.0, b, 6.0, 0.5, conv)).epsilon(1e-14));
    }
}

TEST_CASE("analytic gradients match finite differences") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        for (std::size_t dim : {8u, 16u}) {
            const auto report = app::completion_gradcheck(seed, dim);
            INFO("seed " << seed << " dim " << dim << " err " << report.max_rel_error << " at (" << report.worst_row
                         << ", " << report.worst_col << ") analytic " << report.analytic_at_worst << " numeric "
                         << report.numeric_at_worst);
            CHECK(report.passed());
            CHECK(report.coordinates_checked > 0);
        }
    }
}

TEST_CASE("negative sampling") {
    SUBCASE("forced head corruption") {
        KnowledgeGraphBuilder b("forced");
        b.reserve_numeric_entities(5);
        b.reserve_numeric_relations(1);
        for (Id e = 1; e < 5; ++e) b.add({e, 0, 0});
        const auto kg = std::make_shared<const KnowledgeGraph>(std::move(b).build());
        const NegativeSampler sampler(kg, 4);
        Rng rng(1);
        const auto negs = sampler.sample({1, 0, 0}, 16, CorruptionMode::head, rng);
        CHECK(negs.size() == 16);
        for (const auto& n : negs) {
            CHECK(n.triple == Triple{0, 0, 0});
            CHECK(n.corrupted == Side::head);
        }
    }
    SUBCASE("count, determinism and filtering") {
        const auto kg = std::make_shared<const KnowledgeGraph>(random_graph(30, 3, 120, 2));
        const NegativeSampler sampler(kg);
        Rng a(9), b(9);
        const Triple pos = kg->triples()[7];
        const auto na = sampler.sample(pos, 4, CorruptionMode::both, a);
        const auto nb = sampler.sample(pos, 4, CorruptionMode::both, b);
        CHECK(na.size() == 4);
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(na[i].triple == nb[i].triple);
            CHECK_FALSE(kg->contains(na[i].triple));
        }
    }
    SUBCASE("exhausted pool") {
        KnowledgeGraphBuilder b("full");
        b.reserve_numeric_entities(2);
        b.reserve_numeric_relations(1);
        for (Id h = 0; h < 2; ++h) {
            for (Id t = 0; t < 2; ++t) b.add({h, 0, t});
        }
        const auto kg = std::make_shared<const KnowledgeGraph>(std::move(b).build());
        const NegativeSampler sampler(kg, 2);
        Rng rng(1);
        CHECK_THROWS_AS(sampler.sample({0, 0, 1}, 2, CorruptionMode::both, rng), Error);
    }
}

TEST_CASE("lambda = 1 training reproduces the baseline loss curve") {
    const auto data = make_completion_fixture();
    auto cfg = small_config();
    cfg.lambda = 1.0;
    const auto base = train_completion(data, cfg, CompletionModel::rotate);
    const auto rpe = train_completion(data, cfg, CompletionModel::rpe_rotate);
    REQUIRE(base.curve.size() == rpe.curve.size());
    for (std::size_t i = 0; i < base.curve.size(); ++i) {
        CHECK(std::abs(base.curve[i].loss - rpe.curve[i].loss) <= 1e-9);
    }
    double drift = 0.0;
    for (std::size_t i = 0; i < base.tables.entities.values().size(); ++i) {
        drift = std::max(drift, std::abs(base.tables.entities.values()[i] - rpe.tables.entities.values()[i]));
    }
    INFO("entity drift " << drift);
    CHECK(drift <= 1e-9);
}

TEST_CASE("training is deterministic and keeps the best validation checkpoint") {
    auto data = make_completion_fixture();
    data.valid.assign(data.test.begin(), data.test.begin() + 10);
    auto cfg = small_config();
    cfg.eval_every = 10;
    const auto a = train_completion(data, cfg, CompletionModel::rpe_rotate);
    const auto b = train_completion(data, cfg, CompletionModel::rpe_rotate);
    CHECK(a.tables.entities == b.tables.entities);
    CHECK(a.best_valid_mrr.has_value());
    std::size_t evaluated = 0;
    for (const auto& p : a.curve) {
        if (p.valid_mrr) {
            ++evaluated;
            CHECK(*p.valid_mrr <= *a.best_valid_mrr + 1e-15);
        }
    }
    CHECK(evaluated == 3);
    CHECK(a.curve.size() == cfg.max_steps);
}

TEST_CASE("training loss falls on nearly every step at the default learning rate") {
    const auto data = make_completion_fixture();
    auto cfg = completion_config_from(load_config_file(*app::preset_config_path("fixture-completion")));
    cfg.learning_rate = CompletionConfig{}.learning_rate;
    const std::size_t steps_per_epoch = (data.train.size() + cfg.batch_size - 1) / cfg.batch_size;
    cfg.max_steps = 50 * steps_per_epoch;
    const auto res = train_completion(data, cfg, CompletionModel::rpe_rotate);
    REQUIRE(res.curve.size() == cfg.max_steps);
    std::size_t falls = 0;
    for (std::size_t i = 1; i < res.curve.size(); ++i) falls += res.curve[i].loss < res.curve[i - 1].loss;
    INFO("falling steps: " << falls << " of " << res.curve.size() - 1);
    CHECK(static_cast<double>(falls) >= 0.9 * static_cast<double>(res.curve.size() - 1));
}

TEST_CASE("divergence aborts with the offending triple") {
    const auto data = make_completion_fixture();
    auto cfg = small_config();
    auto tables = init_rotate_tables(*data.graph, cfg);
    tables.entities.row(data.train[0].head)[0] = std::numeric_limits<double>::infinity();
    TripleBatch batch;
    batch.positives.push_back(data.train[0]);
    batch.negatives.push_back({{{data.train[0].tail, data.train[0].relation, data.train[0].tail}, Side::head}});
    try {
        self_adversarial_loss(batch, tables, cfg, CompletionModel::rotate);
        FAIL("expected a numeric error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::numeric);
    }
}

TEST_CASE("config validation") {
    CompletionConfig c;
    c.validate();
    c.lambda = 0.0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.dim = 0;
    CHECK_THROWS_AS(c.validate(), Error);
}

}  // TEST_SUITE
