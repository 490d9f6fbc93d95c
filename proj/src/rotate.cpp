#include "rpe/rotate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <spdlog/spdlog.h>

namespace rpe {

std::string to_string(CompletionModel m) { return m == CompletionModel::rotate ? "rotate" : "rpe-rotate"; }

CompletionModel completion_model_from_string(const std::string& s) {
    if (s == "rotate") return CompletionModel::rotate;
    if (s == "rpe-rotate") return CompletionModel::rpe_rotate;
    throw Error(ErrorKind::usage, "unknown completion model '" + s + "' (expected rotate|rpe-rotate)");
}

std::string to_string(CorruptionMode m) {
    switch (m) {
        case CorruptionMode::head: return "head";
        case CorruptionMode::tail: return "tail";
        case CorruptionMode::both: return "both";
    }
    return "both";
}

CorruptionMode corruption_mode_from_string(const std::string& s) {
    if (s == "head") return CorruptionMode::head;
    if (s == "tail") return CorruptionMode::tail;
    if (s == "both") return CorruptionMode::both;
    throw Error(ErrorKind::usage, "unknown corruption mode '" + s + "'");
}

std::string to_string(MarginConvention m) { return m == MarginConvention::distance ? "distance" : "score"; }

MarginConvention margin_convention_from_string(const std::string& s) {
    if (s == "distance") return MarginConvention::distance;
    if (s == "score") return MarginConvention::score;
    throw Error(ErrorKind::usage, "unknown margin convention '" + s + "'");
}

std::string to_string(PrototypeInit m) { return m == PrototypeInit::random ? "random" : "entity-mean"; }

PrototypeInit prototype_init_from_string(const std::string& s) {
    if (s == "random") return PrototypeInit::random;
    if (s == "entity-mean") return PrototypeInit::entity_mean;
    throw Error(ErrorKind::usage, "unknown prototype init '" + s + "'");
}

void CompletionConfig::validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorKind::usage, "completion config: " + msg); };
    if (dim == 0) fail("dim must be >= 1");
    if (batch_size == 0) fail("batch_size must be >= 1");
    if (negative_sample_size == 0) fail("negative_sample_size must be >= 1");
    if (!(lambda > 0.0 && lambda <= 1.0)) fail("lambda must lie in (0, 1]");
    if (!(margin >= 0.0)) fail("margin must be >= 0");
    if (!(adversarial_temperature > 0.0)) fail("adversarial_temperature must be > 0");
    if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
    if (!(anchor_penalty >= 0.0)) fail("anchor_penalty must be >= 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
        fail("adam betas must lie in [0, 1)");
    }
}

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

namespace {

// Precomputed cos/sin of a relation's phases.
struct Rotation {
    std::vector<double> cos, sin;
    explicit Rotation(std::span<const double> phase) : cos(phase.size()), sin(phase.size()) {
        for (std::size_t i = 0; i < phase.size(); ++i) {
            cos[i] = std::cos(phase[i]);
            sin[i] = std::sin(phase[i]);
        }
    }
};

// ||a o r - b|| where a = mix(h, ph), b = mix(t, pt) and mix(x, p) = lambda x + (1 - lambda) p.
// Empty prototype spans mean "no mixing".
double rotated_distance(std::span<const double> h, std::span<const double> ph, std::span<const double> t,
                        std::span<const double> pt, const Rotation& rot, double lambda) {
    const std::size_t k = rot.cos.size();
    const double mu = 1.0 - lambda;
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        double a_re = h[i], a_im = h[k + i], b_re = t[i], b_im = t[k + i];
        if (!ph.empty()) {
            a_re = lambda * a_re + mu * ph[i];
            a_im = lambda * a_im + mu * ph[k + i];
        }
        if (!pt.empty()) {
            b_re = lambda * b_re + mu * pt[i];
            b_im = lambda * b_im + mu * pt[k + i];
        }
        const double re = a_re * rot.cos[i] - a_im * rot.sin[i] - b_re;
        const double im = a_re * rot.sin[i] + a_im * rot.cos[i] - b_im;
        sum += re * re + im * im;
    }
    return std::sqrt(sum);
}

void check_complex_shapes(std::span<const double> head, std::span<const double> phase,
                          std::span<const double> tail) {
    if (head.size() != 2 * phase.size() || tail.size() != 2 * phase.size()) {
        throw Error(ErrorKind::numeric, "rotate_score: shape mismatch");
    }
}

// Adds upstream * d(-||a o r - b||)/d{a, phase, b} into the gradient spans.
// Returns the score.
double rotate_backward(std::span<const double> a, std::span<const double> phase, std::span<const double> b,
                       double upstream, std::span<double> grad_a, std::span<double> grad_phase,
                       std::span<double> grad_b) {
    const std::size_t k = phase.size();
    std::vector<double> re(k), im(k), c(k), s(k);
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        c[i] = std::cos(phase[i]);
        s[i] = std::sin(phase[i]);
        re[i] = a[i] * c[i] - a[k + i] * s[i] - b[i];
        im[i] = a[i] * s[i] + a[k + i] * c[i] - b[k + i];
        sum += re[i] * re[i] + im[i] * im[i];
    }
    const double norm = std::sqrt(sum);
    if (norm == 0.0) return 0.0;  // subgradient 0 at the kink
    const double scale = -upstream / norm;
    for (std::size_t i = 0; i < k; ++i) {
        const double gx = scale * re[i];
        const double gy = scale * im[i];
        if (!grad_a.empty()) {
            grad_a[i] += gx * c[i] + gy * s[i];
            grad_a[k + i] += -gx * s[i] + gy * c[i];
        }
        if (!grad_phase.empty()) {
            grad_phase[i] += gx * (-a[i] * s[i] - a[k + i] * c[i]) + gy * (a[i] * c[i] - a[k + i] * s[i]);
        }
        if (!grad_b.empty()) {
            grad_b[i] -= gx;
            grad_b[k + i] -= gy;
        }
    }
    return -norm;
}

void require_lambda(double lambda) {
    if (!(lambda > 0.0 && lambda <= 1.0)) {
        throw Error(ErrorKind::usage, "lambda must lie in (0, 1], got " + std::to_string(lambda));
    }
}

}  // namespace

double rotate_score(std::span<const double> head, std::span<const double> phase, std::span<const double> tail) {
    check_complex_shapes(head, phase, tail);
    return -rotated_distance(head, {}, tail, {}, Rotation(phase), 1.0);
}

void aggregate_with_prototype(std::span<const double> e, std::span<const double> p, double lambda,
                              std::span<double> out) {
    require_lambda(lambda);
    if (e.size() != p.size() || out.size() != e.size()) {
        throw Error(ErrorKind::numeric, "aggregate_with_prototype: shape mismatch");
    }
    const double mu = 1.0 - lambda;
    for (std::size_t i = 0; i < e.size(); ++i) out[i] = lambda * e[i] + mu * p[i];
}

std::vector<double> aggregate_with_prototype(std::span<const double> e, std::span<const double> p, double lambda) {
    std::vector<double> out(e.size());
    aggregate_with_prototype(e, p, lambda, out);
    return out;
}

double rpe_rotate_score(const Triple& triple, const RotateTables& tables, double lambda) {
    require_lambda(lambda);
    if (tail_prototype_row(triple.relation) >= tables.prototypes.rows()) {
        throw Error(ErrorKind::data, "no prototype rows for relation " + std::to_string(triple.relation));
    }
    const auto phase = tables.relations.row(triple.relation);
    return -rotated_distance(tables.entities.row(triple.head), tables.prototypes.row(head_prototype_row(triple.relation)),
                             tables.entities.row(triple.tail), tables.prototypes.row(tail_prototype_row(triple.relation)),
                             Rotation(phase), lambda);
}

double triple_score(const Triple& triple, const RotateTables& tables, CompletionModel model, double lambda) {
    if (model == CompletionModel::rotate) {
        return rotate_score(tables.entities.row(triple.head), tables.relations.row(triple.relation),
                            tables.entities.row(triple.tail));
    }
    return rpe_rotate_score(triple, tables, lambda);
}

RotateTables init_rotate_tables(const KnowledgeGraph& kg, const CompletionConfig& config) {
    RotateTables t;
    t.entities = init_table(kg.entity_count(), config.dim, TableKind::entity, InitScheme::uniform,
                            derive_seed(config.seed, "init/entity"), config.init_scale, true);
    t.relations = init_table(kg.relation_count(), config.dim, TableKind::relation_phase, InitScheme::uniform,
                             derive_seed(config.seed, "init/relation"));
    t.prototypes = init_table(2 * kg.relation_count(), config.dim, TableKind::prototype, InitScheme::uniform,
                              derive_seed(config.seed, "init/prototype"), config.init_scale, true);
    if (config.prototype_init == PrototypeInit::entity_mean) {
        std::vector<std::size_t> counts(t.prototypes.rows(), 0);
        std::fill(t.prototypes.values().begin(), t.prototypes.values().end(), 0.0);
        std::set<std::pair<std::size_t, Id>> seen;
        auto accumulate = [&](std::size_t row, Id entity) {
            if (!seen.insert({row, entity}).second) return;
            auto dst = t.prototypes.row(row);
            auto src = t.entities.row(entity);
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
            ++counts[row];
        };
        for (const auto& tr : kg.triples()) {
            accumulate(head_prototype_row(tr.relation), tr.head);
            accumulate(tail_prototype_row(tr.relation), tr.tail);
        }
        for (std::size_t r = 0; r < counts.size(); ++r) {
            if (counts[r] == 0) continue;
            for (auto& x : t.prototypes.row(r)) x /= static_cast<double>(counts[r]);
        }
    }
    return t;
}

// ---------------------------------------------------------------------------
// Negative sampling
// ---------------------------------------------------------------------------

NegativeSampler::NegativeSampler(std::shared_ptr<const KnowledgeGraph> train, std::size_t retries)
    : train_(std::move(train)), retries_(retries) {
    if (!train_ || train_->entity_count() == 0) throw Error(ErrorKind::data, "negative sampler needs entities");
}

std::optional<NegativeTriple> NegativeSampler::draw(const Triple& positive, Side side, Rng& rng) const {
    const std::size_t n = train_->entity_count();
    auto corrupt = [&](Id e) {
        Triple t = positive;
        (side == Side::head ? t.head : t.tail) = e;
        return t;
    };
    for (std::size_t attempt = 0; attempt < retries_; ++attempt) {
        const Triple t = corrupt(static_cast<Id>(uniform_index(rng, n)));
        if (is_valid(t)) return NegativeTriple{t, side};
    }
    std::vector<Id> pool;
    for (Id e = 0; e < n; ++e) {
        if (is_valid(corrupt(e))) pool.push_back(e);
    }
    if (pool.empty()) return std::nullopt;
    return NegativeTriple{corrupt(pool[uniform_index(rng, pool.size())]), side};
}

std::vector<NegativeTriple> NegativeSampler::sample(const Triple& positive, std::size_t count,
                                                    CorruptionMode mode, Rng& rng) const {
    std::vector<NegativeTriple> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Side side = mode == CorruptionMode::head ? Side::head : Side::tail;
        if (mode == CorruptionMode::both) side = (rng() >> 63) ? Side::head : Side::tail;
        auto neg = draw(positive, side, rng);
        if (!neg && mode == CorruptionMode::both) {
            neg = draw(positive, side == Side::head ? Side::tail : Side::head, rng);
        }
        if (!neg) {
            throw Error(ErrorKind::data,
                        "no valid negative exists for triple (" + std::to_string(positive.head) + ", " +
                            std::to_string(positive.relation) + ", " + std::to_string(positive.tail) +
                            "); the graph is too small for filtered sampling, try a smaller negative_sample_size");
        }
        out.push_back(*neg);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

namespace {

std::vector<double> softmax(std::span<const double> scores, double temperature) {
    std::vector<double> p(scores.size());
    if (scores.empty()) return p;
    double top = -std::numeric_limits<double>::infinity();
    for (double s : scores) top = std::max(top, temperature * s);
    double z = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        p[i] = std::exp(temperature * scores[i] - top);
        z += p[i];
    }
    for (auto& x : p) x /= z;
    return p;
}

// +1 applies the margin to scores verbatim, -1 to distances (d = -f).
double convention_sign(MarginConvention c) { return c == MarginConvention::score ? 1.0 : -1.0; }

// Adds upstream * d score / d params for one triple; returns the score.
double accumulate_triple(const Triple& tr, const RotateTables& tables, CompletionModel model, double lambda,
                         double upstream, CompletionGradients& grads) {
    const auto phase = tables.relations.row(tr.relation);
    const auto h = tables.entities.row(tr.head);
    const auto t = tables.entities.row(tr.tail);
    const std::size_t w = h.size();
    if (model == CompletionModel::rotate) {
        if (upstream == 0.0) return -rotated_distance(h, {}, t, {}, Rotation(phase), 1.0);
        std::vector<double> gh(w, 0.0), gt(w, 0.0);
        const double score = rotate_backward(h, phase, t, upstream, gh, grads.relations.row(tr.relation), gt);
        auto dh = grads.entities.row(tr.head);
        for (std::size_t j = 0; j < w; ++j) dh[j] += gh[j];
        auto dt = grads.entities.row(tr.tail);
        for (std::size_t j = 0; j < w; ++j) dt[j] += gt[j];
        return score;
    }
    const std::size_t hp = head_prototype_row(tr.relation), tp = tail_prototype_row(tr.relation);
    const auto a = aggregate_with_prototype(h, tables.prototypes.row(hp), lambda);
    const auto b = aggregate_with_prototype(t, tables.prototypes.row(tp), lambda);
    if (upstream == 0.0) return -rotated_distance(a, {}, b, {}, Rotation(phase), 1.0);
    std::vector<double> ga(w, 0.0), gb(w, 0.0);
    const double score = rotate_backward(a, phase, b, upstream, ga, grads.relations.row(tr.relation), gb);
    const double mu = 1.0 - lambda;
    auto dh = grads.entities.row(tr.head);
    for (std::size_t j = 0; j < w; ++j) dh[j] += lambda * ga[j];
    auto dt = grads.entities.row(tr.tail);
    for (std::size_t j = 0; j < w; ++j) dt[j] += lambda * gb[j];
    auto dph = grads.prototypes.row(hp);
    for (std::size_t j = 0; j < w; ++j) dph[j] += mu * ga[j];
    auto dpt = grads.prototypes.row(tp);
    for (std::size_t j = 0; j < w; ++j) dpt[j] += mu * gb[j];
    return score;
}

std::string describe(const Triple& t) {
    return "(" + std::to_string(t.head) + ", " + std::to_string(t.relation) + ", " + std::to_string(t.tail) + ")";
}

}  // namespace

double self_adversarial_value(double positive_score, std::span<const double> negative_scores, double margin,
                              double temperature, MarginConvention convention) {
    const double c = convention_sign(convention);
    double loss = neg_log_sigmoid(margin - c * positive_score);
    const auto p = softmax(negative_scores, temperature);
    for (std::size_t i = 0; i < negative_scores.size(); ++i) {
        loss += p[i] * neg_log_sigmoid(c * negative_scores[i] - margin);
    }
    return loss;
}

LossResult self_adversarial_loss(const TripleBatch& batch, const RotateTables& tables,
                                 const CompletionConfig& config, CompletionModel model) {
    if (batch.negatives.size() != batch.positives.size()) {
        throw Error(ErrorKind::data, "batch needs one negative list per positive");
    }
    const double lambda = model == CompletionModel::rotate ? 1.0 : config.lambda;
    const double c = convention_sign(config.margin_convention);
    const double gamma = config.margin;
    const double inv_batch = batch.positives.empty() ? 0.0 : 1.0 / static_cast<double>(batch.positives.size());

    LossResult result{0.0,
                      {SparseGradient(tables.entities.width()), SparseGradient(tables.relations.width()),
                       SparseGradient(tables.prototypes.width())}};

    for (std::size_t b = 0; b < batch.positives.size(); ++b) {
        const Triple& pos = batch.positives[b];
        const auto& negs = batch.negatives[b];

        // Forward pass: scores only.
        const double f_pos = triple_score(pos, tables, model, lambda);
        std::vector<double> f_neg(negs.size());
        for (std::size_t i = 0; i < negs.size(); ++i) f_neg[i] = triple_score(negs[i].triple, tables, model, lambda);
        const auto p = softmax(f_neg, config.adversarial_temperature);

        const double x_pos = gamma - c * f_pos;
        double loss = neg_log_sigmoid(x_pos);
        std::vector<double> neg_terms(negs.size());
        double weighted = 0.0;
        for (std::size_t i = 0; i < negs.size(); ++i) {
            neg_terms[i] = neg_log_sigmoid(c * f_neg[i] - gamma);
            weighted += p[i] * neg_terms[i];
        }
        loss += weighted;
        if (!std::isfinite(loss)) {
            throw Error(ErrorKind::numeric, "non-finite loss for positive triple " + describe(pos) +
                                                " (score " + std::to_string(f_pos) + ")");
        }
        result.loss += loss * inv_batch;

        // Backward pass: dL/df per triple, then chain rule into the tables.
        const double d_pos = c * sigmoid(-x_pos) * inv_batch;
        accumulate_triple(pos, tables, model, lambda, d_pos, result.grads);
        for (std::size_t i = 0; i < negs.size(); ++i) {
            double d = -p[i] * c * sigmoid(-(c * f_neg[i] - gamma));
            if (!config.adversarial_detach) {
                d += config.adversarial_temperature * p[i] * (neg_terms[i] - weighted);
            }
            if (!std::isfinite(d)) {
                throw Error(ErrorKind::numeric, "non-finite gradient for negative triple " + describe(negs[i].triple));
            }
            accumulate_triple(negs[i].triple, tables, model, lambda, d * inv_batch, result.grads);
        }
    }

    if (model == CompletionModel::rpe_rotate && config.anchor_penalty > 0.0) {
        std::set<Id> relations;
        for (const auto& t : batch.positives) relations.insert(t.relation);
        for (Id r : relations) {
            const auto ph = tables.prototypes.row(head_prototype_row(r));
            const auto pt = tables.prototypes.row(tail_prototype_row(r));
            const auto phase = tables.relations.row(r);
            const double f = -rotated_distance(ph, {}, pt, {}, Rotation(phase), 1.0);
            result.loss += config.anchor_penalty * f * f;
            rotate_backward(ph, phase, pt, 2.0 * config.anchor_penalty * f,
                            result.grads.prototypes.row(head_prototype_row(r)), result.grads.relations.row(r),
                            result.grads.prototypes.row(tail_prototype_row(r)));
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Evaluation and training
// ---------------------------------------------------------------------------

CandidateScorer make_rotate_scorer(const RotateTables& tables, CompletionModel model, double lambda) {
    if (model == CompletionModel::rotate) lambda = 1.0;
    require_lambda(lambda);
    return [&tables, model, lambda](const Query& q, std::span<double> scores) {
        const Id r = q.triple.relation;
        const Rotation rot(tables.relations.row(r));
        std::span<const double> ph, pt;
        if (model == CompletionModel::rpe_rotate) {
            ph = tables.prototypes.row(head_prototype_row(r));
            pt = tables.prototypes.row(tail_prototype_row(r));
        }
        for (Id e = 0; e < scores.size(); ++e) {
            const Id h = q.side == Side::head ? e : q.triple.head;
            const Id t = q.side == Side::tail ? e : q.triple.tail;
            scores[e] = -rotated_distance(tables.entities.row(h), ph, tables.entities.row(t), pt, rot, lambda);
        }
    };
}

CategoryEmbedding completion_category_embedding(const RotateTables& tables, CompletionModel model, double lambda) {
    if (model == CompletionModel::rotate) lambda = 1.0;
    require_lambda(lambda);
    return [&tables, lambda](Id entity, const Category& c) {
        const auto e = tables.entities.row(entity);
        if (lambda == 1.0) return std::vector<double>(e.begin(), e.end());
        const std::size_t row = c.side == Side::head ? head_prototype_row(c.relation) : tail_prototype_row(c.relation);
        return aggregate_with_prototype(e, tables.prototypes.row(row), lambda);
    };
}

CompletionTrainResult train_completion(const CompletionDataset& data, const CompletionConfig& config,
                                       CompletionModel model) {
    config.validate();
    if (data.train.empty()) throw Error(ErrorKind::data, "completion dataset has no training triples");
    const KnowledgeGraph& kg = *data.graph;
    const double lambda = model == CompletionModel::rotate ? 1.0 : config.lambda;

    RotateTables tables = init_rotate_tables(kg, config);
    OptimizerSettings adam{OptimizerKind::adam, config.learning_rate, config.adam_beta1, config.adam_beta2,
                           config.adam_epsilon};
    auto entity_state = make_optimizer_state(tables.entities, adam);
    auto relation_state = make_optimizer_state(tables.relations, adam);
    auto prototype_state = make_optimizer_state(tables.prototypes, adam);

    NegativeSampler sampler(data.graph, config.negative_retries);
    Rng batch_rng = make_rng(config.seed, "train/batches");
    Rng negative_rng = make_rng(config.seed, "train/negatives");

    KnownTriples known;
    known.add(data.train);
    known.add(data.valid);
    known.add(data.test);

    std::vector<std::size_t> order(data.train.size());
    std::iota(order.begin(), order.end(), 0);
    auto reshuffle = [&] {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(batch_rng, i)]);
    };
    reshuffle();
    const std::size_t batch_size = std::min(config.batch_size, order.size());
    std::size_t cursor = 0;

    CompletionTrainResult result;
    result.steps_per_epoch = (order.size() + batch_size - 1) / batch_size;
    result.curve.reserve(config.max_steps);

    auto validate_now = [&](std::size_t step) {
        const auto report = completion_report(data.valid, kg.entity_count(),
                                              make_rotate_scorer(tables, model, lambda), known,
                                              config.tie_policy, config.threads);
        result.curve.back().valid_mrr = report.mrr;
        if (!result.best_valid_mrr || report.mrr > *result.best_valid_mrr) {
            result.best_valid_mrr = report.mrr;
            result.best_step = step;
            result.tables = tables;
        }
        spdlog::debug("step {}: valid MRR {:.4f}", step, report.mrr);
    };

    for (std::size_t step = 1; step <= config.max_steps; ++step) {
        TripleBatch batch;
        for (std::size_t i = 0; i < batch_size; ++i) {
            if (cursor == order.size()) {
                reshuffle();
                cursor = 0;
            }
            const Triple& pos = data.train[order[cursor++]];
            batch.positives.push_back(pos);
            batch.negatives.push_back(sampler.sample(pos, config.negative_sample_size, config.corruption, negative_rng));
        }

        LossResult step_loss = self_adversarial_loss(batch, tables, config, model);
        if (!std::isfinite(step_loss.loss)) {
            throw Error(ErrorKind::numeric, "training diverged at step " + std::to_string(step));
        }
        apply_gradients(tables.entities, step_loss.grads.entities, entity_state);
        apply_gradients(tables.relations, step_loss.grads.relations, relation_state);
        if (model == CompletionModel::rpe_rotate) {
            apply_gradients(tables.prototypes, step_loss.grads.prototypes, prototype_state);
        }
#ifndef NDEBUG
        tables.entities.check_finite("train_completion");
        tables.relations.check_finite("train_completion");
        tables.prototypes.check_finite("train_completion");
#endif
        result.curve.push_back({step, step_loss.loss, std::nullopt});
        if (!data.valid.empty() && config.eval_every > 0 && step % config.eval_every == 0) validate_now(step);
    }

    if (!data.valid.empty() && (result.curve.empty() || !result.curve.back().valid_mrr)) {
        if (result.curve.empty()) result.curve.push_back({0, 0.0, std::nullopt});
        validate_now(config.max_steps);
    }
    if (data.valid.empty()) {
        result.tables = std::move(tables);
        result.best_step = config.max_steps;
    }
    return result;
}

}  // namespace rpe
